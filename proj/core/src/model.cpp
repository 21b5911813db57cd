#include "mvp/model.hpp"

#include <cmath>
#include <utility>

#include "mvp/errors.hpp"
#include "mvp/ops.hpp"
#include "mvp/rng.hpp"
#include "mvp/sampling.hpp"

namespace mvp {

namespace {

int pos_channels_for(PosEncoding mode) {
    switch (mode) {
        case PosEncoding::rays: return 3;
        case PosEncoding::coords2d: return 2;
        case PosEncoding::none: return 0;
    }
    throw ConfigError("unknown positional encoding");
}

double xavier(int fan_in, int fan_out) { return std::sqrt(6.0 / (fan_in + fan_out)); }

Node* linear(Node* x, Node* w, Node* b) {
    Node* y = matmul(x, w);
    return b ? add(y, b) : y;
}

// Parameter nodes addressable by name; bind order equals store order.
struct Lookup {
    const ParamStore& store;
    const std::vector<Node*>& bound;
    Node* operator()(const std::string& name) const { return bound[store.index_of(name)]; }
};

Node* self_attention(Node* x, int heads, const Lookup& look, const std::string& p) {
    const int m = x->value.dim(0);
    const int c = x->value.dim(1);
    const int d = c / heads;
    Node* q = linear(x, look(p + "sa.wq"), look(p + "sa.bq"));
    Node* k = linear(x, look(p + "sa.wk"), look(p + "sa.bk"));
    Node* v = linear(x, look(p + "sa.wv"), look(p + "sa.bv"));
    q = permute(reshape(q, {m, heads, d}), {1, 0, 2});  // [h,M,d]
    k = permute(reshape(k, {m, heads, d}), {1, 0, 2});
    v = permute(reshape(v, {m, heads, d}), {1, 0, 2});
    Node* scores = scale(matmul(q, permute(k, {0, 2, 1})), 1.0 / std::sqrt(static_cast<double>(d)));
    Node* attn = softmax(scores, 2);                    // [h,M,M]
    Node* out = permute(matmul(attn, v), {1, 0, 2});    // [M,h,d]
    return linear(reshape(out, {m, c}), look(p + "sa.wo"), look(p + "sa.bo"));
}

std::vector<int> person_major_person_indices(int n, int j) {
    std::vector<int> idx(static_cast<std::size_t>(n) * static_cast<std::size_t>(j));
    for (int a = 0; a < n; ++a)
        for (int b = 0; b < j; ++b) idx[static_cast<std::size_t>(a * j + b)] = a;
    return idx;
}

std::vector<int> person_major_joint_indices(int n, int j) {
    std::vector<int> idx(static_cast<std::size_t>(n) * static_cast<std::size_t>(j));
    for (int a = 0; a < n; ++a)
        for (int b = 0; b < j; ++b) idx[static_cast<std::size_t>(a * j + b)] = b;
    return idx;
}

// Mean pooled feature of every view, concatenated: [1, V*C].
Node* pooled_scene_feature(const std::vector<Node*>& feats) {
    std::vector<Node*> pooled;
    pooled.reserve(feats.size());
    for (Node* z : feats) {
        const int c = z->value.dim(0);
        const int hw = z->value.dim(1) * z->value.dim(2);
        pooled.push_back(reduce_mean(reshape(z, {c, hw}), 1));  // [C]
    }
    return reshape(concat(pooled, 0), {1, static_cast<int>(feats.size()) * feats[0]->value.dim(0)});
}

}  // namespace

void ModelConfig::validate() const {
    if (persons < 1 || joints < 1 || channels < 1 || views < 1 || layers < 1 || points < 1 || heads < 1 ||
        in_channels < 1)
        throw ConfigError("model config: all structural sizes must be positive");
    if (channels % heads != 0) throw ConfigError("model config: channels must divide evenly into heads");
    if (!(feature_stride > 0.0)) throw ConfigError("model config: feature_stride must be positive");
    if (dense_cap < 1) throw ConfigError("model config: dense_cap must be positive");
    workspace.validate();
}

std::size_t query_embedding_param_count(const ModelConfig& cfg) {
    const auto n = static_cast<std::size_t>(cfg.persons);
    const auto j = static_cast<std::size_t>(cfg.joints);
    const auto c = static_cast<std::size_t>(cfg.channels);
    return cfg.query_mode == QueryMode::per_joint ? n * j * c : (n + j) * c;
}

Array positional_channels(PosEncoding mode, const CameraParams& cam, int h, int w) {
    if (mode == PosEncoding::none) return Array();
    if (mode == PosEncoding::coords2d) {
        Array out(Shape{2, h, w}, 0.0);
        for (int y = 0; y < h; ++y)
            for (int x = 0; x < w; ++x) {
                out.at({0, y, x}) = (x + 0.5) / w;
                out.at({1, y, x}) = (y + 0.5) / h;
            }
        return out;
    }
    // Rays through feature-grid pixel centers: scale the intrinsics by the
    // ratio between the camera's image size and the feature grid.
    CameraParams scaled = cam;
    const double sx = static_cast<double>(cam.width) / w;
    const double sy = static_cast<double>(cam.height) / h;
    scaled.fx = cam.fx / sx;
    scaled.fy = cam.fy / sy;
    scaled.cx = cam.cx / sx;
    scaled.cy = cam.cy / sy;
    scaled.width = w;
    scaled.height = h;
    return ray_field(scaled);
}

Node* rayconv(Node* z, const Array& pos, Node* w, Node* b) {
    if (pos.empty()) return conv2d(z, w, b, 1, 0);
    Graph& g = graph_of({z, w});
    if (pos.rank() != 3 || pos.dim(1) != z->value.dim(1) || pos.dim(2) != z->value.dim(2))
        throw ShapeError("rayconv: positional channels must be [P,H,W] matching the feature grid");
    Node* pc = g.constant(pos);
    return conv2d(concat({z, pc}, 0), w, b, 1, 0);
}

Node* build_queries(QueryMode mode, Node* person_embed, Node* joint_embed, Node* full_embed,
                    Node* adapt_w, const std::vector<Node*>& feats) {
    if (mode == QueryMode::per_joint) {
        if (!full_embed) throw UsageError("build_queries: per_joint mode needs the full embedding");
        return full_embed;
    }
    if (!person_embed || !joint_embed)
        throw UsageError("build_queries: hierarchical modes need person and joint embeddings");
    const int n = person_embed->value.dim(0);
    const int j = joint_embed->value.dim(0);
    if (person_embed->value.dim(1) != joint_embed->value.dim(1))
        throw ShapeError("build_queries: person/joint embedding widths differ");
    Node* q = add(gather(person_embed, 0, person_major_person_indices(n, j)),
                  gather(joint_embed, 0, person_major_joint_indices(n, j)));
    if (mode == QueryMode::hierarchical_adaptive) {
        if (!adapt_w) throw UsageError("build_queries: adaptive mode needs the adaptation matrix");
        if (feats.empty()) throw UsageError("build_queries: adaptive mode needs feature maps");
        Node* g_row = matmul(pooled_scene_feature(feats), adapt_w);  // [1,C]
        q = add(q, g_row);
    }
    return q;
}

Node* projective_attention(Node* q, const std::vector<Node*>& feats,
                           const std::vector<Node*>& anchors,
                           const std::vector<std::vector<unsigned char>>& valid, int k_points,
                           const ProjAttnWeights& w, ProjAttnTrace* trace) {
    Graph& g = graph_of({q});
    const int m = q->value.dim(0);
    const int c = q->value.dim(1);
    const int v = static_cast<int>(feats.size());
    if (anchors.size() != feats.size() || valid.size() != feats.size())
        throw ShapeError("projective_attention: per-view inputs must align");
    if (trace) {
        trace->sample_points.clear();
        trace->valid = valid;
    }

    std::vector<int> tile(static_cast<std::size_t>(m) * static_cast<std::size_t>(k_points));
    for (int i = 0; i < m; ++i)
        for (int k = 0; k < k_points; ++k) tile[static_cast<std::size_t>(i * k_points + k)] = i;

    std::vector<Node*> per_view;
    per_view.reserve(static_cast<std::size_t>(v));
    for (int view = 0; view < v; ++view) {
        Node* anchor = anchors[static_cast<std::size_t>(view)];  // [M,2] feature px
        Node* u = add(q, grid_sample(feats[static_cast<std::size_t>(view)], anchor));  // [M,C]
        Node* offsets = reshape(matmul(u, w.wp), {m * k_points, 2});
        Node* pts = add(gather(anchor, 0, tile), offsets);  // [M*K,2]
        if (trace) trace->sample_points.push_back(pts);
        Node* sampled = reshape(grid_sample(feats[static_cast<std::size_t>(view)], pts), {m, k_points, c});
        Node* a = reshape(softmax(matmul(u, w.wa), 1), {m, k_points, 1});
        Node* fused = matmul(reduce_sum(mul(sampled, a), 1), w.wf);  // [M,C]

        Array mask(Shape{m, 1}, 0.0);
        for (int i = 0; i < m; ++i) mask[static_cast<std::size_t>(i)] = valid[static_cast<std::size_t>(view)][static_cast<std::size_t>(i)] ? 1.0 : 0.0;
        per_view.push_back(mul(fused, g.constant(std::move(mask))));
    }
    return linear(concat(per_view, 1), w.wP, w.bP);
}

Node* projective_attention(Node* q, const Array& y, const std::vector<Node*>& feats,
                           const std::vector<CameraParams>& cams, double feature_stride,
                           int k_points, const ProjAttnWeights& w, ProjAttnTrace* trace) {
    Graph& g = graph_of({q});
    if (y.rank() != 2 || y.dim(1) != 3) throw ShapeError("projective_attention: y must be [M,3]");
    if (cams.size() != feats.size()) throw ShapeError("projective_attention: camera/feature count mismatch");
    const int m = y.dim(0);
    std::vector<Node*> anchors;
    std::vector<std::vector<unsigned char>> valid;
    anchors.reserve(cams.size());
    valid.reserve(cams.size());
    for (const auto& cam : cams) {
        Array a(Shape{m, 2}, 0.0);
        std::vector<unsigned char> ok(static_cast<std::size_t>(m), 0);
        for (int i = 0; i < m; ++i) {
            const Eigen::Vector3d p(y.at({i, 0}), y.at({i, 1}), y.at({i, 2}));
            if (const auto uv = try_project(p, cam)) {
                a.at({i, 0}) = uv->x() / feature_stride;
                a.at({i, 1}) = uv->y() / feature_stride;
                ok[static_cast<std::size_t>(i)] = 1;
            }
        }
        anchors.push_back(g.constant(std::move(a)));
        valid.push_back(std::move(ok));
    }
    return projective_attention(q, feats, anchors, valid, k_points, w, trace);
}

Node* dense_attention(Node* q, const std::vector<Node*>& feats, const DenseAttnWeights& w, int cap) {
    if (feats.empty()) throw UsageError("dense_attention: no feature maps");
    const int c = feats[0]->value.dim(0);
    long total = 0;
    for (Node* z : feats) total += z->value.dim(1) * z->value.dim(2);
    if (total > cap)
        throw ConfigError("dense_attention: " + std::to_string(total) + " keys exceed the cap of " +
                          std::to_string(cap));
    std::vector<Node*> flat;
    flat.reserve(feats.size());
    for (Node* z : feats)
        flat.push_back(permute(reshape(z, {c, z->value.dim(1) * z->value.dim(2)}), {1, 0}));
    Node* keys_in = concat(flat, 0);  // [VHW, C]
    Node* qq = linear(q, w.wq, w.bq);
    Node* kk = linear(keys_in, w.wk, w.bk);
    Node* vv = linear(keys_in, w.wv, w.bv);
    Node* scores = scale(matmul(qq, permute(kk, {1, 0})), 1.0 / std::sqrt(static_cast<double>(c)));
    Node* attn = softmax(scores, 1);
    return linear(matmul(attn, vv), w.wo, w.bo);
}

void PoseTransformer::register_params(std::uint64_t seed) {
    const ModelConfig& c = cfg_;
    Rng rng(seed);
    const int P = pos_channels_for(c.pos_encoding);
    const int C = c.channels;

    auto uniform = [&](const std::string& name, Shape s, double bound) {
        params_.add_uniform(name, std::move(s), bound, rng);
    };
    auto zeros = [&](const std::string& name, Shape s) { params_.add(name, Array(std::move(s), 0.0)); };
    auto ones = [&](const std::string& name, Shape s) { params_.add(name, Array(std::move(s), 1.0)); };

    uniform("stem.w", {C, c.in_channels, 1, 1}, xavier(c.in_channels, C));
    zeros("stem.b", {C});
    uniform("rayconv.w", {C, C + P, 1, 1}, xavier(C + P, C));
    zeros("rayconv.b", {C});

    const double embed_bound = 1.0 / std::sqrt(static_cast<double>(C));
    if (c.query_mode == QueryMode::per_joint) {
        uniform("query.embed", {c.queries(), C}, embed_bound);
    } else {
        uniform("query.person", {c.persons, C}, embed_bound);
        uniform("query.joint", {c.joints, C}, embed_bound);
        if (c.query_mode == QueryMode::hierarchical_adaptive)
            uniform("query.adapt_w", {c.views * C, C}, xavier(c.views * C, C));
    }

    uniform("init.w", {C, 3}, xavier(C, 3));
    zeros("init.b", {3});

    for (int l = 0; l < c.layers; ++l) {
        const std::string p = "layer" + std::to_string(l) + ".";
        for (const char* nm : {"sa.wq", "sa.wk", "sa.wv", "sa.wo"}) uniform(p + nm, {C, C}, xavier(C, C));
        for (const char* nm : {"sa.bq", "sa.bk", "sa.bv", "sa.bo"}) zeros(p + nm, {C});
        ones(p + "ln1.g", {C});
        zeros(p + "ln1.b", {C});
        if (c.attention == AttentionMode::projective) {
            uniform(p + "pa.wp", {C, 2 * c.points}, xavier(C, 2 * c.points));
            uniform(p + "pa.wa", {C, c.points}, xavier(C, c.points));
            uniform(p + "pa.wf", {C, C}, xavier(C, C));
            uniform(p + "pa.wP", {c.views * C, C}, xavier(c.views * C, C));
            zeros(p + "pa.bP", {C});
        } else {
            for (const char* nm : {"da.wq", "da.wk", "da.wv", "da.wo"}) uniform(p + nm, {C, C}, xavier(C, C));
            for (const char* nm : {"da.bq", "da.bk", "da.bv", "da.bo"}) zeros(p + nm, {C});
        }
        ones(p + "ln2.g", {C});
        zeros(p + "ln2.b", {C});
        uniform(p + "ffn.w1", {C, c.ffn()}, xavier(C, c.ffn()));
        zeros(p + "ffn.b1", {c.ffn()});
        uniform(p + "ffn.w2", {c.ffn(), C}, xavier(c.ffn(), C));
        zeros(p + "ffn.b2", {C});
        ones(p + "ln3.g", {C});
        zeros(p + "ln3.b", {C});
        uniform(p + "reg.w1", {C, C}, xavier(C, C));
        zeros(p + "reg.b1", {C});
        // Zero final regression layer: every layer starts as the identity
        // position update.
        zeros(p + "reg.w2", {C, 3});
        zeros(p + "reg.b2", {3});
        uniform(p + "conf.w", {C, 1}, xavier(C, 1));
        zeros(p + "conf.b", {1});
    }
}

PoseTransformer::PoseTransformer(const ModelConfig& cfg, std::uint64_t seed) : cfg_(cfg) {
    cfg_.validate();
    register_params(seed);
}

PoseTransformer::PoseTransformer(const ModelConfig& cfg, ParamStore params) : cfg_(cfg) {
    cfg_.validate();
    register_params(0);
    if (params.size() != params_.size())
        throw ConfigError("checkpoint parameters do not match the model config (count " +
                          std::to_string(params.size()) + " vs " + std::to_string(params_.size()) + ")");
    for (std::size_t i = 0; i < params_.size(); ++i) {
        const auto& expect = params_.entry(i);
        const auto& got = params.entry(i);
        if (expect.name != got.name || !(expect.value.shape() == got.value.shape()))
            throw ConfigError("checkpoint parameter mismatch at '" + got.name + "'");
    }
    params_ = std::move(params);
}

Array PoseTransformer::to_meters(const Array& norm) const {
    if (norm.rank() < 1 || norm.dim(norm.rank() - 1) != 3)
        throw ShapeError("to_meters: last axis must be 3");
    const Eigen::Vector3d lo = cfg_.workspace.lo;
    const Eigen::Vector3d ext = cfg_.workspace.extents();
    Array out = norm;
    double* p = out.data();
    for (std::size_t i = 0; i < out.size(); ++i) p[i] = lo[static_cast<int>(i % 3)] + p[i] * ext[static_cast<int>(i % 3)];
    return out;
}

PoseTransformer::ForwardResult PoseTransformer::forward(Graph& g, const std::vector<Array>& features,
                                                        const std::vector<CameraParams>& cams) const {
    if (static_cast<int>(features.size()) != cfg_.views)
        throw ShapeError("forward: expected " + std::to_string(cfg_.views) + " views, got " +
                         std::to_string(features.size()));
    if (cams.size() != features.size()) throw ShapeError("forward: camera/feature count mismatch");
    for (const auto& f : features) {
        if (f.rank() != 3 || f.dim(0) != cfg_.in_channels)
            throw ShapeError("forward: features must be [" + std::to_string(cfg_.in_channels) +
                             ",H,W], got " + shape_str(f.shape()));
        if (!(f.shape() == features[0].shape())) throw ShapeError("forward: per-view feature shapes differ");
    }
    const int h = features[0].dim(1);
    const int w = features[0].dim(2);
    const int m = cfg_.queries();

    ForwardResult res;
    res.bound = params_.bind(g);
    Lookup look{params_, res.bound};

    std::vector<Node*> zhat;
    zhat.reserve(features.size());
    for (std::size_t v = 0; v < features.size(); ++v) {
        Node* z = g.constant(features[v]);
        Node* stem = conv2d(z, look("stem.w"), look("stem.b"), 1, 0);
        zhat.push_back(rayconv(stem, positional_channels(cfg_.pos_encoding, cams[v], h, w),
                               look("rayconv.w"), look("rayconv.b")));
    }

    Node* q = nullptr;
    switch (cfg_.query_mode) {
        case QueryMode::per_joint:
            q = build_queries(cfg_.query_mode, nullptr, nullptr, look("query.embed"), nullptr, zhat);
            break;
        case QueryMode::hierarchical:
            q = build_queries(cfg_.query_mode, look("query.person"), look("query.joint"), nullptr, nullptr, zhat);
            break;
        case QueryMode::hierarchical_adaptive:
            q = build_queries(cfg_.query_mode, look("query.person"), look("query.joint"), nullptr,
                              look("query.adapt_w"), zhat);
            break;
    }

    Node* y = sigmoid(linear(q, look("init.w"), look("init.b")));  // [M,3] normalized
    res.initial_norm = y->value;

    const Eigen::Vector3d lo = cfg_.workspace.lo;
    const Eigen::Vector3d ext = cfg_.workspace.extents();
    Node* ext_row = g.constant(Array(Shape{3}, {ext.x(), ext.y(), ext.z()}));
    Node* lo_row = g.constant(Array(Shape{3}, {lo.x(), lo.y(), lo.z()}));

    Node* x = q;
    res.layers.reserve(static_cast<std::size_t>(cfg_.layers));
    for (int l = 0; l < cfg_.layers; ++l) {
        const std::string p = "layer" + std::to_string(l) + ".";
        x = layernorm(add(x, self_attention(x, cfg_.heads, look, p)), look(p + "ln1.g"), look(p + "ln1.b"));

        Node* att = nullptr;
        if (cfg_.attention == AttentionMode::projective) {
            ProjAttnWeights wts{look(p + "pa.wp"), look(p + "pa.wa"), look(p + "pa.wf"),
                                look(p + "pa.wP"), look(p + "pa.bP")};
            if (cfg_.differentiable_anchors) {
                Node* meters = add(mul(y, ext_row), lo_row);  // [M,3]
                std::vector<Node*> anchors;
                std::vector<std::vector<unsigned char>> valid(features.size());
                anchors.reserve(features.size());
                for (std::size_t v = 0; v < cams.size(); ++v)
                    anchors.push_back(scale(project_points(meters, cams[v], &valid[v]), 1.0 / cfg_.feature_stride));
                att = projective_attention(x, zhat, anchors, valid, cfg_.points, wts);
            } else {
                att = projective_attention(x, to_meters(y->value), zhat, cams, cfg_.feature_stride,
                                           cfg_.points, wts);
            }
        } else {
            DenseAttnWeights wts{look(p + "da.wq"), look(p + "da.bq"), look(p + "da.wk"), look(p + "da.bk"),
                                 look(p + "da.wv"), look(p + "da.bv"), look(p + "da.wo"), look(p + "da.bo")};
            att = dense_attention(x, zhat, wts, cfg_.dense_cap);
        }
        x = layernorm(add(x, att), look(p + "ln2.g"), look(p + "ln2.b"));
        Node* f = linear(relu(linear(x, look(p + "ffn.w1"), look(p + "ffn.b1"))), look(p + "ffn.w2"),
                         look(p + "ffn.b2"));
        x = layernorm(add(x, f), look(p + "ln3.g"), look(p + "ln3.b"));

        Node* delta = linear(relu(linear(x, look(p + "reg.w1"), look(p + "reg.b1"))), look(p + "reg.w2"),
                             look(p + "reg.b2"));  // [M,3] normalized units
        Node* y_next = clamp(add(y, delta), 0.0, 1.0);
        Node* logits = linear(x, look(p + "conf.w"), look(p + "conf.b"));  // [M,1]
        Node* person_conf = reduce_mean(reshape(sigmoid(logits), {cfg_.persons, cfg_.joints}), 1);

        Array offset_m(Shape{m, 3}, 0.0);
        for (int i = 0; i < m; ++i)
            for (int a = 0; a < 3; ++a) offset_m.at({i, a}) = delta->value.at({i, a}) * ext[a];

        res.layers.push_back({y_next, person_conf, logits, std::move(offset_m)});
        y = y_next;
    }
    return res;
}

PoseSet PoseTransformer::infer(const Scene& scene) const {
    Graph g(cfg_.precision);
    const ForwardResult r = forward(g, scene.features, scene.cameras);
    const LayerOut& last = r.layers.back();
    PoseSet out;
    out.poses = to_meters(last.positions->value);
    out.poses = Array(Shape{cfg_.persons, cfg_.joints, 3},
                      std::vector<double>(out.poses.data(), out.poses.data() + out.poses.size()));
    out.confidences = last.person_conf->value;
    out.validate();
    return out;
}

std::vector<PoseSet> PoseTransformer::infer_all_layers(const Scene& scene) const {
    Graph g(cfg_.precision);
    const ForwardResult r = forward(g, scene.features, scene.cameras);
    std::vector<PoseSet> out;
    out.reserve(r.layers.size());
    for (const auto& layer : r.layers) {
        PoseSet ps;
        const Array meters = to_meters(layer.positions->value);
        ps.poses = Array(Shape{cfg_.persons, cfg_.joints, 3},
                         std::vector<double>(meters.data(), meters.data() + meters.size()));
        ps.confidences = layer.person_conf->value;
        ps.validate();
        out.push_back(std::move(ps));
    }
    return out;
}

}  // namespace mvp
