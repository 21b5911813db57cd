#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numbers>

#include "mvp/errors.hpp"
#include "mvp/model.hpp"
#include "mvp/ops.hpp"
#include "mvp/rng.hpp"
#include "mvp/scene.hpp"

using namespace mvp;

namespace {

ModelConfig small_config() {
    ModelConfig cfg;
    cfg.persons = 2;
    cfg.joints = 4;
    cfg.channels = 8;
    cfg.views = 2;
    cfg.layers = 2;
    cfg.points = 2;
    cfg.heads = 2;
    cfg.in_channels = 3;
    return cfg;
}

Scene small_scene(std::uint64_t seed, int in_channels, int h, int w, int views) {
    // Synthetic scene shaped for the model, not via scenegen: random
    // features, a camera ring, GT inside the default workspace.
    Scene s;
    Rng rng(seed);
    s.workspace = Workspace{};
    for (int v = 0; v < views; ++v) {
        Array f(Shape{in_channels, h, w}, 0.0);
        for (std::size_t i = 0; i < f.size(); ++i) f[i] = rng.uniform(0.0, 1.0);
        s.features.push_back(std::move(f));
        const double ang = 2.0 * std::numbers::pi * v / views;
        s.cameras.push_back(look_at({5.0 * std::cos(ang), 5.0 * std::sin(ang), 1.5},
                                    {0.0, 0.0, 1.0}, {0.0, 0.0, 1.0}, 2.0, 2.0, w, h));
    }
    s.gt_poses = Array(Shape{1, 4, 3}, 0.0);
    for (int j = 0; j < 4; ++j) {
        s.gt_poses.at({0, j, 0}) = rng.uniform(-1.0, 1.0);
        s.gt_poses.at({0, j, 1}) = rng.uniform(-1.0, 1.0);
        s.gt_poses.at({0, j, 2}) = rng.uniform(0.2, 1.8);
    }
    return s;
}

}  // namespace

TEST_CASE("forward produces per-layer outputs with documented shapes") {
    const ModelConfig cfg = small_config();
    const PoseTransformer model(cfg, 1);
    const Scene s = small_scene(2, cfg.in_channels, 8, 8, cfg.views);
    Graph g;
    const auto fwd = model.forward(g, s.features, s.cameras);
    REQUIRE(static_cast<int>(fwd.layers.size()) == cfg.layers);
    for (const auto& layer : fwd.layers) {
        REQUIRE(layer.positions->shape() == Shape{cfg.queries(), 3});
        REQUIRE(layer.person_conf->shape() == Shape{cfg.persons});
        REQUIRE(layer.logits->shape() == Shape{cfg.queries(), 1});
        for (std::size_t i = 0; i < layer.positions->value.size(); ++i) {
            REQUIRE(layer.positions->value[i] >= 0.0);
            REQUIRE(layer.positions->value[i] <= 1.0);
        }
        for (int i = 0; i < cfg.persons; ++i) {
            REQUIRE(layer.person_conf->value[static_cast<std::size_t>(i)] > 0.0);
            REQUIRE(layer.person_conf->value[static_cast<std::size_t>(i)] < 1.0);
        }
    }
    REQUIRE(fwd.initial_norm.shape() == Shape{cfg.queries(), 3});
}

TEST_CASE("positions telescope: layer l = clamp(layer l-1 + delta)") {
    const ModelConfig cfg = small_config();
    const PoseTransformer model(cfg, 3);
    const Scene s = small_scene(4, cfg.in_channels, 8, 8, cfg.views);
    Graph g;
    const auto fwd = model.forward(g, s.features, s.cameras);
    const Eigen::Vector3d ext = cfg.workspace.extents();
    const Array* prev = &fwd.initial_norm;
    for (const auto& layer : fwd.layers) {
        for (int m = 0; m < cfg.queries(); ++m)
            for (int a = 0; a < 3; ++a) {
                const double delta_norm = layer.offset_m.at({m, a}) / ext[a];
                const double want = std::clamp(prev->at({m, a}) + delta_norm, 0.0, 1.0);
                REQUIRE(layer.positions->value.at({m, a}) == doctest::Approx(want).epsilon(1e-12));
            }
        prev = &layer.positions->value;
    }
}

TEST_CASE("person confidence is the mean of the per-joint sigmoids") {
    const ModelConfig cfg = small_config();
    const PoseTransformer model(cfg, 5);
    const Scene s = small_scene(6, cfg.in_channels, 8, 8, cfg.views);
    Graph g;
    const auto fwd = model.forward(g, s.features, s.cameras);
    const auto& layer = fwd.layers.back();
    for (int n = 0; n < cfg.persons; ++n) {
        double mean = 0.0;
        for (int j = 0; j < cfg.joints; ++j) {
            const double logit = layer.logits->value.at({n * cfg.joints + j, 0});
            mean += 1.0 / (1.0 + std::exp(-logit));
        }
        mean /= cfg.joints;
        CHECK(layer.person_conf->value[static_cast<std::size_t>(n)] ==
              doctest::Approx(mean).epsilon(1e-12));
    }
}

TEST_CASE("query embedding parameter accounting: (N+J)*C vs N*J*C") {
    for (auto [n, j, c] : {std::tuple{2, 4, 8}, std::tuple{4, 5, 64}, std::tuple{10, 15, 256}}) {
        ModelConfig cfg = small_config();
        cfg.persons = n;
        cfg.joints = j;
        cfg.channels = c;
        cfg.query_mode = QueryMode::hierarchical;
        CHECK(query_embedding_param_count(cfg) == static_cast<std::size_t>((n + j) * c));
        cfg.query_mode = QueryMode::hierarchical_adaptive;
        CHECK(query_embedding_param_count(cfg) == static_cast<std::size_t>((n + j) * c));
        cfg.query_mode = QueryMode::per_joint;
        CHECK(query_embedding_param_count(cfg) == static_cast<std::size_t>(n * j * c));

        // and the stores agree with the accounting
        for (QueryMode m : {QueryMode::hierarchical, QueryMode::per_joint}) {
            cfg.query_mode = m;
            const PoseTransformer model(cfg, 1);
            std::size_t embed = 0;
            const auto& params = model.params();
            for (std::size_t i = 0; i < params.size(); ++i)
                if (params.entry(i).name.rfind("query.", 0) == 0) embed += params.entry(i).value.size();
            CHECK(embed == query_embedding_param_count(cfg));
        }
    }
}

TEST_CASE("hierarchical queries share joint embeddings across person slots") {
    ModelConfig cfg = small_config();
    cfg.query_mode = QueryMode::hierarchical;
    PoseTransformer model(cfg, 7);
    Graph g;
    auto& params = model.params();
    Node* person = g.constant(params.find("query.person").value);
    Node* joint = g.constant(params.find("query.joint").value);
    Node* q = build_queries(QueryMode::hierarchical, person, joint, nullptr, nullptr, {});
    REQUIRE(q->shape() == Shape{cfg.queries(), cfg.channels});
    // q[n*J+j] = person[n] + joint[j], so differences across slots cancel
    for (int j = 0; j < cfg.joints; ++j)
        for (int c = 0; c < cfg.channels; ++c) {
            const double d0 = q->value.at({0 * cfg.joints + j, c}) - person->value.at({0, c});
            const double d1 = q->value.at({1 * cfg.joints + j, c}) - person->value.at({1, c});
            CHECK(d0 == doctest::Approx(d1).epsilon(1e-12));
            CHECK(d0 == doctest::Approx(joint->value.at({j, c})).epsilon(1e-12));
        }
}

TEST_CASE("projective attention only sees pixels inside its sample support") {
    // Locality contract: perturbing a feature pixel outside the bilinear
    // support of one joint's sample points leaves that joint's attention
    // output bit-identical.
    const ModelConfig cfg = small_config();
    Rng rng(11);
    const int h = 8, w = 8, c = cfg.channels;
    const int m = cfg.queries(), k = cfg.points;

    std::vector<Array> feats;
    std::vector<CameraParams> cams;
    const Scene shell = small_scene(12, cfg.in_channels, h, w, cfg.views);
    cams = shell.cameras;
    for (int v = 0; v < cfg.views; ++v) {
        Array f(Shape{c, h, w}, 0.0);
        for (std::size_t i = 0; i < f.size(); ++i) f[i] = rng.uniform(0.0, 1.0);
        feats.push_back(std::move(f));
    }
    Array q_val(Shape{m, c}, 0.0);
    for (std::size_t i = 0; i < q_val.size(); ++i) q_val[i] = rng.uniform(-1.0, 1.0);
    Array y(Shape{m, 3}, 0.0);
    for (int i = 0; i < m; ++i) {
        y.at({i, 0}) = rng.uniform(-1.0, 1.0);
        y.at({i, 1}) = rng.uniform(-1.0, 1.0);
        y.at({i, 2}) = rng.uniform(0.3, 1.7);
    }
    ProjAttnWeights weights;
    auto mk = [&](Graph& g, Shape s) {
        Array a(std::move(s), 0.0);
        Rng wr(13);
        for (std::size_t i = 0; i < a.size(); ++i) a[i] = wr.uniform(-0.5, 0.5);
        return g.constant(std::move(a));
    };

    // Trace nodes die with the graph inside the lambda, so sample point
    // coordinates are copied out while it is still alive.
    auto run = [&](const std::vector<Array>& f, std::vector<Array>* sample_pts) {
        Graph g;
        std::vector<Node*> fn;
        for (const auto& a : f) fn.push_back(g.constant(a));
        weights.wp = mk(g, {c, 2 * k});
        weights.wa = mk(g, {c, k});
        weights.wf = mk(g, {c, c});
        weights.wP = mk(g, {cfg.views * c, c});
        weights.bP = mk(g, {c});
        ProjAttnTrace trace;
        Node* out = projective_attention(g.constant(q_val), y, fn, cams, 1.0, k, weights,
                                         sample_pts ? &trace : nullptr);
        if (sample_pts)
            for (Node* n : trace.sample_points) sample_pts->push_back(n->value);
        return out->value;
    };

    std::vector<Array> sample_pts;
    const Array base = run(feats, &sample_pts);
    REQUIRE(base.shape() == Shape{m, c});
    REQUIRE(static_cast<int>(sample_pts.size()) == cfg.views);

    // For each of 20 random (joint, view, pixel) probes, flip a pixel far
    // from every sample of that joint in that view and require bit-equality.
    Rng probe_rng(15);
    int probes = 0;
    while (probes < 20) {
        const int joint = probe_rng.uniform_int(0, m - 1);
        const int view = probe_rng.uniform_int(0, cfg.views - 1);
        const int pu = probe_rng.uniform_int(0, w - 1);
        const int pv = probe_rng.uniform_int(0, h - 1);
        // Support of joint row i in this view: anchor sample + K deformed
        // samples; each bilinear support spans floor(p-0.5)..+1.
        const Array& sp = sample_pts[static_cast<std::size_t>(view)];
        bool outside = true;
        auto touches = [&](double su, double sv) {
            const int u0 = static_cast<int>(std::floor(su - 0.5));
            const int v0 = static_cast<int>(std::floor(sv - 0.5));
            return pu >= u0 && pu <= u0 + 1 && pv >= v0 && pv <= v0 + 1;
        };
        for (int kk = 0; kk < k; ++kk)
            if (touches(sp.at({joint * k + kk, 0}), sp.at({joint * k + kk, 1}))) outside = false;
        if (const auto uv = try_project(
                {y.at({joint, 0}), y.at({joint, 1}), y.at({joint, 2})}, cams[static_cast<std::size_t>(view)]))
            if (touches(uv->x(), uv->y())) outside = false;
        if (!outside) continue;
        ++probes;

        std::vector<Array> perturbed = feats;
        for (int ch = 0; ch < c; ++ch)
            perturbed[static_cast<std::size_t>(view)].at({ch, pv, pu}) += 10.0;
        const Array out = run(perturbed, nullptr);
        for (int ch = 0; ch < c; ++ch)
            REQUIRE(out.at({joint, ch}) == base.at({joint, ch}));
    }
}

TEST_CASE("behind-camera anchors contribute nothing") {
    const ModelConfig cfg = small_config();
    const int c = cfg.channels, m = cfg.queries(), k = cfg.points;
    Rng rng(21);
    // Single camera at the origin looking down +z in camera frame; points
    // with negative z are behind it.
    CameraParams cam;
    cam.fx = cam.fy = 4.0;
    cam.cx = cam.cy = 4.0;
    cam.width = cam.height = 8;

    Array q_val(Shape{m, c}, 0.0);
    for (std::size_t i = 0; i < q_val.size(); ++i) q_val[i] = rng.uniform(-1.0, 1.0);
    Array y(Shape{m, 3}, 0.0);
    for (int i = 0; i < m; ++i) {
        y.at({i, 0}) = rng.uniform(-0.5, 0.5);
        y.at({i, 1}) = rng.uniform(-0.5, 0.5);
        y.at({i, 2}) = -1.0;  // all behind
    }
    Graph g;
    Array f(Shape{c, 8, 8}, 0.0);
    for (std::size_t i = 0; i < f.size(); ++i) f[i] = rng.uniform(0.0, 1.0);
    Rng wr(23);
    auto mk = [&](Shape s) {
        Array a(std::move(s), 0.0);
        for (std::size_t i = 0; i < a.size(); ++i) a[i] = wr.uniform(-0.5, 0.5);
        return g.constant(std::move(a));
    };
    ProjAttnWeights weights{mk({c, 2 * k}), mk({c, k}), mk({c, c}), mk({c, c}), mk({c})};
    Node* out = projective_attention(g.constant(q_val), y, {g.constant(f)}, {cam}, 1.0, k, weights);
    // With the single view fully masked, only the output bias survives.
    for (int i = 0; i < m; ++i)
        for (int ch = 0; ch < c; ++ch)
            CHECK(out->value.at({i, ch}) == doctest::Approx(weights.bP->value[static_cast<std::size_t>(ch)]));
}

TEST_CASE("dense attention refuses key counts above the cap") {
    ModelConfig cfg = small_config();
    cfg.attention = AttentionMode::dense;
    cfg.dense_cap = 4;  // 2 views * 8 * 8 = 128 keys > 4
    const PoseTransformer model(cfg, 1);
    const Scene s = small_scene(2, cfg.in_channels, 8, 8, cfg.views);
    Graph g;
    CHECK_THROWS_AS(model.forward(g, s.features, s.cameras), ConfigError);
}

TEST_CASE("dense attention variant runs and keeps shapes") {
    ModelConfig cfg = small_config();
    cfg.attention = AttentionMode::dense;
    const PoseTransformer model(cfg, 1);
    const Scene s = small_scene(2, cfg.in_channels, 8, 8, cfg.views);
    Graph g;
    const auto fwd = model.forward(g, s.features, s.cameras);
    REQUIRE(fwd.layers.back().positions->shape() == Shape{cfg.queries(), 3});
}

TEST_CASE("positional channel variants and the first-layer contract") {
    const Scene s = small_scene(31, 3, 8, 8, 2);
    const Array rays = positional_channels(PosEncoding::rays, s.cameras[0], 8, 8);
    REQUIRE(rays.shape() == Shape{3, 8, 8});
    const Array coords = positional_channels(PosEncoding::coords2d, s.cameras[0], 8, 8);
    REQUIRE(coords.shape() == Shape{2, 8, 8});
    CHECK(coords.at({0, 0, 0}) == doctest::Approx(0.5 / 8.0));
    CHECK(coords.at({1, 7, 3}) == doctest::Approx(7.5 / 8.0));
    const Array none = positional_channels(PosEncoding::none, s.cameras[0], 8, 8);
    CHECK(none.empty());

    for (PosEncoding enc : {PosEncoding::rays, PosEncoding::coords2d, PosEncoding::none}) {
        ModelConfig cfg = small_config();
        cfg.pos_encoding = enc;
        const PoseTransformer model(cfg, 3);
        const PoseSet out = model.infer(s);
        REQUIRE(out.poses.shape() == Shape{cfg.persons, cfg.joints, 3});
    }
}

TEST_CASE("infer returns meters inside the workspace with valid confidences") {
    const ModelConfig cfg = small_config();
    const PoseTransformer model(cfg, 9);
    const Scene s = small_scene(10, cfg.in_channels, 8, 8, cfg.views);
    const PoseSet out = model.infer(s);
    out.validate();
    REQUIRE(out.poses.shape() == Shape{cfg.persons, cfg.joints, 3});
    for (int n = 0; n < cfg.persons; ++n)
        for (int j = 0; j < cfg.joints; ++j) {
            const Eigen::Vector3d p(out.poses.at({n, j, 0}), out.poses.at({n, j, 1}),
                                    out.poses.at({n, j, 2}));
            REQUIRE(cfg.workspace.contains(p));
        }
    const auto layers = model.infer_all_layers(s);
    REQUIRE(static_cast<int>(layers.size()) == cfg.layers);
    for (std::size_t i = 0; i < out.poses.size(); ++i)
        CHECK(layers.back().poses[i] == out.poses[i]);
}

TEST_CASE("forward validates scene shape against the config") {
    const ModelConfig cfg = small_config();
    const PoseTransformer model(cfg, 1);
    Scene s = small_scene(2, cfg.in_channels, 8, 8, cfg.views);
    Graph g;
    SUBCASE("wrong view count") {
        s.features.pop_back();
        s.cameras.pop_back();
        CHECK_THROWS_AS(model.forward(g, s.features, s.cameras), ShapeError);
    }
    SUBCASE("wrong channel count") {
        s.features[0] = Array(Shape{cfg.in_channels + 1, 8, 8}, 0.0);
        CHECK_THROWS_AS(model.forward(g, s.features, s.cameras), ShapeError);
    }
}

TEST_CASE("checkpoint-store constructor verifies names and shapes") {
    const ModelConfig cfg = small_config();
    const PoseTransformer model(cfg, 1);
    SUBCASE("matching store works and reproduces outputs bit-identically") {
        ParamStore copy;
        const auto& src = model.params();
        for (std::size_t i = 0; i < src.size(); ++i) copy.add(src.entry(i).name, src.entry(i).value);
        const PoseTransformer clone(cfg, std::move(copy));
        const Scene s = small_scene(2, cfg.in_channels, 8, 8, cfg.views);
        const PoseSet a = model.infer(s);
        const PoseSet b = clone.infer(s);
        for (std::size_t i = 0; i < a.poses.size(); ++i) REQUIRE(a.poses[i] == b.poses[i]);
        for (std::size_t i = 0; i < a.confidences.size(); ++i)
            REQUIRE(a.confidences[i] == b.confidences[i]);
    }
    SUBCASE("missing parameter throws") {
        ParamStore extra;
        CHECK_THROWS_AS(PoseTransformer(cfg, std::move(extra)), ConfigError);
    }
    SUBCASE("wrong shape throws") {
        ParamStore bad;
        const auto& src = model.params();
        for (std::size_t i = 0; i < src.size(); ++i) {
            if (src.entry(i).name == "stem.w")
                bad.add("stem.w", Array(Shape{1, 1, 1, 1}, 0.0));
            else
                bad.add(src.entry(i).name, src.entry(i).value);
        }
        CHECK_THROWS_AS(PoseTransformer(cfg, std::move(bad)), ConfigError);
    }
}

TEST_CASE("differentiable-anchor mode changes gradients, not contracts") {
    ModelConfig cfg = small_config();
    cfg.differentiable_anchors = true;
    const PoseTransformer model(cfg, 13);
    const Scene s = small_scene(14, cfg.in_channels, 8, 8, cfg.views);
    Graph g;
    const auto fwd = model.forward(g, s.features, s.cameras);
    REQUIRE(fwd.layers.back().positions->shape() == Shape{cfg.queries(), 3});
}
