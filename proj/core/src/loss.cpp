#include "mvp/loss.hpp"

#include <cmath>

#include "mvp/errors.hpp"
#include "mvp/ops.hpp"
#include "mvp/sampling.hpp"

namespace mvp {

namespace {

constexpr double kProbFloor = 1e-12;

// Rows of the [M,*] tensors belonging to person slot `slot`.
std::vector<int> person_rows(int slot, int joints) {
    std::vector<int> rows(static_cast<std::size_t>(joints));
    for (int j = 0; j < joints; ++j) rows[static_cast<std::size_t>(j)] = slot * joints + j;
    return rows;
}

Array normalized_gt(const Array& gt_poses, const Workspace& ws, int slot) {
    const int j = gt_poses.dim(1);
    const Eigen::Vector3d lo = ws.lo;
    const Eigen::Vector3d ext = ws.extents();
    Array out(Shape{j, 3}, 0.0);
    for (int a = 0; a < j; ++a)
        for (int b = 0; b < 3; ++b)
            out.at({a, b}) = (gt_poses.at({slot, a, b}) - lo[b]) / ext[b];
    return out;
}

}  // namespace

double focal_loss_value(double p, bool positive, double alpha, double gamma) {
    const double pc = std::min(std::max(p, kProbFloor), 1.0 - kProbFloor);
    const double pt = positive ? pc : 1.0 - pc;
    const double at = positive ? alpha : 1.0 - alpha;
    return -at * std::pow(1.0 - pt, gamma) * std::log(pt);
}

LayerLoss hungarian_loss(Node* positions_norm, Node* person_conf, const Array& gt_poses,
                         const std::vector<CameraParams>& cams, const Workspace& ws,
                         const LossOptions& opt, const Assignment* fixed) {
    Graph& g = graph_of({positions_norm, person_conf});
    if (positions_norm->value.rank() != 2 || positions_norm->value.dim(1) != 3)
        throw ShapeError("hungarian_loss: positions must be [M,3]");
    if (gt_poses.rank() != 3 || gt_poses.dim(2) != 3)
        throw ShapeError("hungarian_loss: GT poses must be [N_gt,J,3]");
    const int n = person_conf->value.dim(0);
    const int m = positions_norm->value.dim(0);
    if (m % n != 0) throw ShapeError("hungarian_loss: M must be N*J");
    const int joints = m / n;
    const int n_gt = gt_poses.dim(0);
    if (gt_poses.dim(1) != joints) throw ShapeError("hungarian_loss: GT joint count mismatch");
    if (n_gt > n)
        throw ConfigError("hungarian_loss: scene has " + std::to_string(n_gt) +
                          " persons but the model only has " + std::to_string(n) + " slots");
    if (opt.focal_gamma != 2.0) throw ConfigError("hungarian_loss: only gamma = 2 is implemented");

    // Assignment on the value level, constant for differentiation. Rows are
    // GT slots (real rows first, padding rows cost 0), columns predictions.
    Assignment assign;
    if (fixed) {
        assign = *fixed;
        if (static_cast<int>(assign.perm.size()) != n || !assign.is_permutation())
            throw UsageError("hungarian_loss: fixed assignment is not a permutation of the slots");
    } else {
        Array cost(Shape{n, n}, 0.0);
        const Eigen::Vector3d lo = ws.lo;
        const Eigen::Vector3d ext = ws.extents();
        for (int row = 0; row < n_gt; ++row) {
            Array gt_person(Shape{joints, 3}, 0.0);
            for (int a = 0; a < joints; ++a)
                for (int b = 0; b < 3; ++b) gt_person.at({a, b}) = gt_poses.at({row, a, b});
            for (int col = 0; col < n; ++col) {
                Array pred_person(Shape{joints, 3}, 0.0);
                for (int a = 0; a < joints; ++a)
                    for (int b = 0; b < 3; ++b)
                        pred_person.at({a, b}) =
                            lo[b] + positions_norm->value.at({col * joints + a, b}) * ext[b];
                cost.at({row, col}) = match_cost(gt_person, pred_person, person_conf->value[static_cast<std::size_t>(col)], ws);
            }
        }
        assign = hungarian(cost);
        assign.matched_count = n_gt;
    }

    // Focal confidence term over every slot.
    std::vector<char> is_positive(static_cast<std::size_t>(n), 0);
    for (int row = 0; row < assign.matched_count; ++row)
        is_positive[static_cast<std::size_t>(assign.perm[static_cast<std::size_t>(row)])] = 1;
    Array t(Shape{n}, 0.0), alpha_t(Shape{n}, 0.0);
    for (int i = 0; i < n; ++i) {
        t[static_cast<std::size_t>(i)] = is_positive[static_cast<std::size_t>(i)] ? 1.0 : 0.0;
        alpha_t[static_cast<std::size_t>(i)] = is_positive[static_cast<std::size_t>(i)] ? opt.focal_alpha : 1.0 - opt.focal_alpha;
    }
    Node* pc = clamp(person_conf, kProbFloor, 1.0 - kProbFloor);
    Node* tc = g.constant(std::move(t));
    Node* one_minus_pc = add_scalar(scale(pc, -1.0), 1.0);
    // p_t = t*p + (1-t)*(1-p)
    Node* pt = add(mul(pc, tc), mul(one_minus_pc, add_scalar(scale(tc, -1.0), 1.0)));
    Node* one_minus_pt = add_scalar(scale(pt, -1.0), 1.0);
    Node* focal_vec = mul(mul(g.constant(std::move(alpha_t)), mul(one_minus_pt, one_minus_pt)),
                          scale(log_op(pt), -1.0));
    Node* loss = sum_all(focal_vec);

    // Pose terms for matched slots.
    const Eigen::Vector3d ext = ws.extents();
    for (int row = 0; row < assign.matched_count; ++row) {
        const int col = assign.perm[static_cast<std::size_t>(row)];
        const auto rows = person_rows(col, joints);
        Node* pred_rows = gather(positions_norm, 0, rows);  // [J,3] normalized
        Node* l1_3d = mean_all(abs_op(sub(pred_rows, g.constant(normalized_gt(gt_poses, ws, row)))));
        Node* pose_term = l1_3d;

        if (opt.use_2d && !cams.empty()) {
            // Meters for projection.
            Node* pred_m = add(mul(pred_rows, g.constant(Array(Shape{3}, {ext.x(), ext.y(), ext.z()}))),
                               g.constant(Array(Shape{3}, {ws.lo.x(), ws.lo.y(), ws.lo.z()})));
            // First pass: which (view, joint) pairs count.
            struct ViewProj {
                Node* pred_px = nullptr;
                Array gt_px;
                std::vector<char> ok;
                int valid = 0;
            };
            std::vector<ViewProj> vps;
            vps.reserve(cams.size());
            for (const auto& cam : cams) {
                ViewProj vp;
                std::vector<unsigned char> pred_ok;
                vp.pred_px = project_points(pred_m, cam, &pred_ok);
                vp.gt_px = Array(Shape{joints, 2}, 0.0);
                vp.ok.assign(static_cast<std::size_t>(joints), 0);
                for (int j = 0; j < joints; ++j) {
                    const Eigen::Vector3d gt_j(gt_poses.at({row, j, 0}), gt_poses.at({row, j, 1}),
                                               gt_poses.at({row, j, 2}));
                    const auto uv = try_project(gt_j, cam);
                    if (uv && pred_ok[static_cast<std::size_t>(j)]) {
                        vp.gt_px.at({j, 0}) = uv->x();
                        vp.gt_px.at({j, 1}) = uv->y();
                        vp.ok[static_cast<std::size_t>(j)] = 1;
                        ++vp.valid;
                    }
                }
                vps.push_back(std::move(vp));
            }
            int valid_views = 0;
            for (const auto& vp : vps)
                if (vp.valid > 0) ++valid_views;
            if (valid_views > 0) {
                Node* l2d = nullptr;
                for (std::size_t v = 0; v < vps.size(); ++v) {
                    const auto& vp = vps[v];
                    if (vp.valid == 0) continue;
                    // Weights fold the per-view pixel normalization, the
                    // per-view mean over valid entries, and the mean over
                    // valid views into one mask.
                    Array wgt(Shape{joints, 2}, 0.0);
                    const double denom = static_cast<double>(valid_views) * vp.valid * 2.0;
                    for (int j = 0; j < joints; ++j) {
                        if (!vp.ok[static_cast<std::size_t>(j)]) continue;
                        wgt.at({j, 0}) = 1.0 / (denom * cams[v].width);
                        wgt.at({j, 1}) = 1.0 / (denom * cams[v].height);
                    }
                    Node* diff = abs_op(sub(vp.pred_px, g.constant(vp.gt_px)));
                    Node* term = sum_all(mul(diff, g.constant(std::move(wgt))));
                    l2d = l2d ? add(l2d, term) : term;
                }
                pose_term = add(pose_term, scale(l2d, opt.weight_2d));
            }
        }
        loss = add(loss, scale(pose_term, opt.lambda));
    }
    return {loss, std::move(assign)};
}

TotalLoss total_loss(const PoseTransformer::ForwardResult& fwd, const ModelConfig& cfg,
                     const Array& gt_poses, const std::vector<CameraParams>& cams,
                     const LossOptions& opt) {
    if (fwd.layers.empty()) throw UsageError("total_loss: no layers");
    TotalLoss out{nullptr, {}};
    for (const auto& layer : fwd.layers) {
        LayerLoss ll = hungarian_loss(layer.positions, layer.person_conf, gt_poses, cams,
                                      cfg.workspace, opt);
        out.loss = out.loss ? add(out.loss, ll.loss) : ll.loss;
        out.assignments.push_back(std::move(ll.assignment));
    }
    return out;
}

}  // namespace mvp
