#include <doctest.h>

#include <cmath>
#include <vector>

#include "fdcheck.hpp"
#include "mvp/errors.hpp"
#include "mvp/loss.hpp"
#include "mvp/ops.hpp"
#include "mvp/rng.hpp"

using namespace mvp;

namespace {

// Default workspace: lo (-2,-2,0), hi (2,2,2), extents (4,4,2).
Workspace ws_default() { return Workspace{}; }

// Identity camera at the origin: u = fx*x/z + cx.
CameraParams simple_cam() {
    CameraParams cam;
    cam.fx = cam.fy = 10.0;
    cam.cx = cam.cy = 16.0;
    cam.width = cam.height = 32;
    return cam;
}

Array gt_one_person() {
    // joints (0,0,1) and (0.4,0,1) meters; normalized (0.5,0.5,0.5) and
    // (0.6,0.5,0.5) in the default workspace.
    return Array(Shape{1, 2, 3}, {0.0, 0.0, 1.0, 0.4, 0.0, 1.0});
}

}  // namespace

TEST_CASE("focal loss reference values") {
    // -0.25 * (1-0.5)^2 * ln(0.5)
    CHECK(focal_loss_value(0.5, true, 0.25, 2.0) == doctest::Approx(0.043321698784996581).epsilon(1e-12));
    // negative slot at the same probability: alpha_t = 0.75, p_t = 0.5
    CHECK(focal_loss_value(0.5, false, 0.25, 2.0) == doctest::Approx(0.12996509635498974).epsilon(1e-12));
    // confident correct prediction costs almost nothing
    CHECK(focal_loss_value(0.999, true, 0.25, 2.0) < 1e-6);
    // probability clamp keeps the endpoints finite
    CHECK(std::isfinite(focal_loss_value(0.0, true, 0.25, 2.0)));
    CHECK(std::isfinite(focal_loss_value(1.0, false, 0.25, 2.0)));
    // FL(p, positive; alpha) == FL(1-p, negative; 1-alpha)
    for (double p : {0.1, 0.37, 0.5, 0.93})
        CHECK(focal_loss_value(p, true, 0.25, 2.0) ==
              doctest::Approx(focal_loss_value(1.0 - p, false, 0.75, 2.0)).epsilon(1e-12));
}

TEST_CASE("hungarian loss matches a hand computation without cameras") {
    const Workspace ws = ws_default();
    Graph g;
    // Slot 1 sits exactly on the GT person; slots 0 and 2 are far away.
    Array pos(Shape{6, 3}, {0.9, 0.9, 0.9, 0.9, 0.9, 0.9,    // slot 0
                            0.5, 0.5, 0.5, 0.6, 0.5, 0.5,    // slot 1 == GT
                            0.1, 0.1, 0.1, 0.1, 0.1, 0.1});  // slot 2
    Array conf(Shape{3}, {0.2, 0.7, 0.4});
    Node* pn = g.constant(pos);
    Node* cn = g.constant(conf);
    LossOptions opt;

    SUBCASE("exact prediction leaves only the focal term") {
        const LayerLoss ll = hungarian_loss(pn, cn, gt_one_person(), {}, ws, opt);
        CHECK(ll.assignment.perm == std::vector<int>{1, 0, 2});
        CHECK(ll.assignment.matched_count == 1);
        const double want = focal_loss_value(0.2, false, 0.25, 2.0) +
                            focal_loss_value(0.7, true, 0.25, 2.0) +
                            focal_loss_value(0.4, false, 0.25, 2.0);
        CHECK(ll.loss->value[0] == doctest::Approx(want).epsilon(1e-12));
    }
    SUBCASE("a 3D offset adds lambda times the normalized L1 mean") {
        Array moved = pos;
        moved.at({2, 0}) = 0.55;  // slot 1, joint 0: +0.05 normalized x
        Node* mn = g.constant(moved);
        const LayerLoss ll = hungarian_loss(mn, cn, gt_one_person(), {}, ws, opt);
        const double focal = focal_loss_value(0.2, false, 0.25, 2.0) +
                             focal_loss_value(0.7, true, 0.25, 2.0) +
                             focal_loss_value(0.4, false, 0.25, 2.0);
        CHECK(ll.loss->value[0] == doctest::Approx(focal + 2.5 * 0.05 / 6.0).epsilon(1e-12));
    }
}

TEST_CASE("2D reprojection term matches a hand computation") {
    const Workspace ws = ws_default();
    Graph g;
    // One slot, two joints. Predictions sit 0.2 m off the GT, one in x and
    // one in y, which the origin camera sees as 2 px each.
    Array pos(Shape{2, 3}, {0.55, 0.5, 0.5,    // meters (0.2, 0, 1)
                            0.6, 0.55, 0.5});  // meters (0.4, 0.2, 1)
    Array conf(Shape{1}, {0.7});
    Node* pn = g.constant(pos);
    Node* cn = g.constant(conf);
    LossOptions opt;
    const LayerLoss ll = hungarian_loss(pn, cn, gt_one_person(), {simple_cam()}, ws, opt);
    // l1_3d = (0.05 + 0.05) / 6; 2D = (2px + 2px) / (1 view * 2 joints * 2 * 32)
    const double want = focal_loss_value(0.7, true, 0.25, 2.0) + 2.5 * (0.1 / 6.0 + 4.0 / 128.0);
    CHECK(ll.loss->value[0] == doctest::Approx(want).epsilon(1e-12));
}

TEST_CASE("views and joints outside a frustum are excluded from the 2D term") {
    const Workspace ws = ws_default();
    LossOptions opt;
    Graph g;
    Array conf(Shape{1}, {0.7});
    Node* cn = g.constant(conf);

    SUBCASE("a camera that sees no joint changes nothing") {
        Array pos(Shape{2, 3}, {0.55, 0.5, 0.5, 0.6, 0.55, 0.5});
        Node* pn = g.constant(pos);
        CameraParams behind = simple_cam();
        behind.t = Eigen::Vector3d(0.0, 0.0, -10.0);  // everything at z_cam < 0
        const double with_blind =
            hungarian_loss(pn, cn, gt_one_person(), {simple_cam(), behind}, ws, opt).loss->value[0];
        const double without =
            hungarian_loss(pn, cn, gt_one_person(), {simple_cam()}, ws, opt).loss->value[0];
        CHECK(with_blind == without);
    }
    SUBCASE("a GT joint behind the camera drops only that joint") {
        // GT joint 1 at z = -1 is behind the origin camera; joint 0 remains.
        Array gt(Shape{1, 2, 3}, {0.0, 0.0, 1.0, 0.0, 0.0, -1.0});
        Array pos(Shape{2, 3}, {0.55, 0.5, 0.5,   // meters (0.2,0,1): du = 2 px
                                0.5, 0.5, 0.5});  // meters (0,0,1), GT counterpart hidden
        Node* pn = g.constant(pos);
        const LayerLoss ll = hungarian_loss(pn, cn, gt, {simple_cam()}, ws, opt);
        // l1_3d: joint0 dx 0.05; joint1 dz |0.5 - (-0.5)| = 1.0 -> mean 1.05/6
        // 2D: only joint 0 counts, denom = 1 view * 1 joint * 2 * 32
        const double want = focal_loss_value(0.7, true, 0.25, 2.0) +
                            2.5 * (1.05 / 6.0 + 2.0 / 64.0);
        CHECK(ll.loss->value[0] == doctest::Approx(want).epsilon(1e-12));
    }
    SUBCASE("a predicted joint behind the camera drops only that joint") {
        Array pos(Shape{2, 3}, {0.55, 0.5, 0.5,    // visible, du = 2 px
                                0.6, 0.5, -0.25});  // meters (0.4,0,-0.5): behind
        Node* pn = g.constant(pos);
        const LayerLoss ll = hungarian_loss(pn, cn, gt_one_person(), {simple_cam()}, ws, opt);
        // l1_3d: joint1 dz = |-0.25 - 0.5| = 0.75 -> (0.05 + 0.75)/6
        const double want = focal_loss_value(0.7, true, 0.25, 2.0) +
                            2.5 * (0.8 / 6.0 + 2.0 / 64.0);
        CHECK(ll.loss->value[0] == doctest::Approx(want).epsilon(1e-12));
    }
}

TEST_CASE("pose term scales linearly in lambda") {
    const Workspace ws = ws_default();
    Graph g;
    Array pos(Shape{2, 3}, {0.52, 0.47, 0.55, 0.63, 0.52, 0.44});
    Array conf(Shape{1}, {0.6});
    Node* pn = g.constant(pos);
    Node* cn = g.constant(conf);
    auto value_at = [&](double lambda) {
        LossOptions opt;
        opt.lambda = lambda;
        return hungarian_loss(pn, cn, gt_one_person(), {simple_cam()}, ws, opt).loss->value[0];
    };
    const double l0 = value_at(0.0);
    const double l1 = value_at(2.5);
    const double l2 = value_at(5.0);
    CHECK(l2 - l0 == doctest::Approx(2.0 * (l1 - l0)).epsilon(1e-12));
}

TEST_CASE("loss is invariant to permuting prediction slots") {
    const Workspace ws = ws_default();
    Array gt(Shape{2, 2, 3}, {0.0, 0.0, 1.0, 0.4, 0.0, 1.0, -1.0, 0.5, 0.8, -0.8, 0.6, 1.1});
    Array pos(Shape{6, 3}, {0.52, 0.48, 0.51, 0.61, 0.49, 0.52,
                            0.27, 0.61, 0.42, 0.31, 0.66, 0.53,
                            0.85, 0.15, 0.35, 0.80, 0.20, 0.40});
    Array conf(Shape{3}, {0.62, 0.55, 0.31});
    LossOptions opt;
    Graph g;
    const double base = hungarian_loss(g.constant(pos), g.constant(conf), gt,
                                       {simple_cam()}, ws, opt).loss->value[0];

    const std::vector<int> sigma{2, 0, 1};  // new slot i holds old slot sigma[i]
    Array pos_p(Shape{6, 3}, 0.0);
    Array conf_p(Shape{3}, 0.0);
    for (int i = 0; i < 3; ++i) {
        conf_p[static_cast<std::size_t>(i)] = conf[static_cast<std::size_t>(sigma[static_cast<std::size_t>(i)])];
        for (int j = 0; j < 2; ++j)
            for (int a = 0; a < 3; ++a)
                pos_p.at({i * 2 + j, a}) = pos.at({sigma[static_cast<std::size_t>(i)] * 2 + j, a});
    }
    const double permuted = hungarian_loss(g.constant(pos_p), g.constant(conf_p), gt,
                                           {simple_cam()}, ws, opt).loss->value[0];
    CHECK(permuted == doctest::Approx(base).epsilon(1e-12));
}

TEST_CASE("gradients through the loss match finite differences") {
    const Workspace ws = ws_default();
    const Array gt = gt_one_person();
    std::vector<CameraParams> cams{simple_cam()};
    {
        CameraParams side = look_at({4.0, 0.5, 1.0}, {0.0, 0.0, 1.0}, {0.0, 0.0, 1.0},
                                    20.0, 20.0, 32, 32);
        cams.push_back(side);
    }
    // Keep every |pred - gt| coordinate well away from zero so the central
    // difference never straddles an absolute-value kink.
    Array pos(Shape{4, 3}, {0.54, 0.46, 0.57, 0.64, 0.47, 0.55,
                            0.22, 0.71, 0.38, 0.27, 0.77, 0.31});
    Array conf(Shape{2}, {0.63, 0.34});
    LossOptions opt;

    Assignment fixed;
    {
        Graph g;
        fixed = hungarian_loss(g.constant(pos), g.constant(conf), gt, cams, ws, opt).assignment;
    }
    const double rel = testing::fd_max_rel(
        {pos, conf},
        [&](Graph&, const std::vector<Node*>& nodes) {
            return hungarian_loss(nodes[0], nodes[1], gt, cams, ws, opt, &fixed).loss;
        });
    CHECK(rel < 1e-6);
}

TEST_CASE("total loss sums independent per-layer losses") {
    ModelConfig cfg;
    cfg.persons = 2;
    cfg.joints = 4;
    cfg.channels = 8;
    cfg.views = 2;
    cfg.layers = 2;
    cfg.points = 2;
    cfg.heads = 2;
    cfg.in_channels = 3;
    const PoseTransformer model(cfg, 17);

    Rng rng(18);
    Scene s;
    s.workspace = cfg.workspace;
    for (int v = 0; v < cfg.views; ++v) {
        Array f(Shape{cfg.in_channels, 8, 8}, 0.0);
        for (std::size_t i = 0; i < f.size(); ++i) f[i] = rng.uniform(0.0, 1.0);
        s.features.push_back(std::move(f));
        s.cameras.push_back(look_at({5.0 * (v == 0 ? 1.0 : -1.0), 2.0, 1.5}, {0.0, 0.0, 1.0},
                                    {0.0, 0.0, 1.0}, 2.0, 2.0, 8, 8));
    }
    Array gt(Shape{1, 4, 3}, 0.0);
    for (int j = 0; j < 4; ++j) {
        gt.at({0, j, 0}) = rng.uniform(-1.0, 1.0);
        gt.at({0, j, 1}) = rng.uniform(-1.0, 1.0);
        gt.at({0, j, 2}) = rng.uniform(0.2, 1.8);
    }
    LossOptions opt;
    Graph g;
    const auto fwd = model.forward(g, s.features, s.cameras);
    const TotalLoss tl = total_loss(fwd, cfg, gt, s.cameras, opt);
    REQUIRE(tl.assignments.size() == 2);

    double sum = 0.0;
    for (const auto& layer : fwd.layers)
        sum += hungarian_loss(layer.positions, layer.person_conf, gt, s.cameras, cfg.workspace, opt)
                   .loss->value[0];
    CHECK(tl.loss->value[0] == doctest::Approx(sum).epsilon(1e-15));
}

TEST_CASE("loss input validation") {
    const Workspace ws = ws_default();
    Graph g;
    Node* pos = g.constant(Array(Shape{6, 3}, 0.5));
    Node* conf = g.constant(Array(Shape{3}, 0.5));
    LossOptions opt;

    SUBCASE("more GT persons than slots") {
        Array gt(Shape{4, 2, 3}, 0.5);
        CHECK_THROWS_AS(hungarian_loss(pos, conf, gt, {}, ws, opt), ConfigError);
    }
    SUBCASE("unsupported focal gamma") {
        LossOptions bad = opt;
        bad.focal_gamma = 1.5;
        CHECK_THROWS_AS(hungarian_loss(pos, conf, gt_one_person(), {}, ws, bad), ConfigError);
    }
    SUBCASE("fixed assignment must be a slot permutation") {
        Assignment fixed;
        fixed.perm = {0, 0, 1};
        fixed.matched_count = 1;
        CHECK_THROWS_AS(hungarian_loss(pos, conf, gt_one_person(), {}, ws, opt, &fixed), UsageError);
    }
    SUBCASE("shape mismatches") {
        Node* bad_pos = g.constant(Array(Shape{6, 2}, 0.5));
        CHECK_THROWS_AS(hungarian_loss(bad_pos, conf, gt_one_person(), {}, ws, opt), ShapeError);
        Node* ragged = g.constant(Array(Shape{7, 3}, 0.5));
        CHECK_THROWS_AS(hungarian_loss(ragged, conf, gt_one_person(), {}, ws, opt), ShapeError);
        Array gt_j3(Shape{1, 3, 3}, 0.5);
        CHECK_THROWS_AS(hungarian_loss(pos, conf, gt_j3, {}, ws, opt), ShapeError);
    }
}
