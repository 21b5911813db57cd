#include <doctest.h>

#include <cmath>

#include "mvp/camera.hpp"
#include "mvp/errors.hpp"
#include "mvp/ops.hpp"
#include "mvp/rng.hpp"
#include "mvp/sampling.hpp"

#include "support/fdcheck.hpp"

using namespace mvp;
using mvp::testing::fd_max_rel;

namespace {

Array random_map(int c, int h, int w, Rng& rng) {
    Array a(Shape{c, h, w}, 0.0);
    for (std::size_t i = 0; i < a.size(); ++i) a[i] = rng.uniform(0.0, 1.0);
    return a;
}

}  // namespace

TEST_CASE("bilinear sample at a pixel center returns that pixel") {
    Rng rng(3);
    Array z = random_map(2, 4, 5, rng);
    Graph g;
    // center of pixel (col 2, row 1) is (2.5, 1.5)
    Node* s = bilinear_sample(g.constant(z), g.constant(Array(Shape{2}, {2.5, 1.5})));
    CHECK(s->value[0] == doctest::Approx(z.at({0, 1, 2})).epsilon(1e-15));
    CHECK(s->value[1] == doctest::Approx(z.at({1, 1, 2})).epsilon(1e-15));
}

TEST_CASE("bilinear sample interpolates linearly between pixel centers") {
    Graph g;
    Array z(Shape{1, 2, 2}, {1.0, 2.0, 3.0, 4.0});
    // midpoint of the four pixel centers
    Node* mid = bilinear_sample(g.constant(z), g.constant(Array(Shape{2}, {1.0, 1.0})));
    CHECK(mid->value[0] == doctest::Approx(2.5).epsilon(1e-15));
    // quarter point along u between (0.5,0.5) and (1.5,0.5)
    Node* quarter = bilinear_sample(g.constant(z), g.constant(Array(Shape{2}, {0.75, 0.5})));
    CHECK(quarter->value[0] == doctest::Approx(1.25).epsilon(1e-15));
}

TEST_CASE("out-of-bounds support contributes zero") {
    Graph g;
    Array z(Shape{1, 2, 2}, {1.0, 1.0, 1.0, 1.0});
    // Entirely outside: zero.
    Node* far = bilinear_sample(g.constant(z), g.constant(Array(Shape{2}, {-5.0, 0.5})));
    CHECK(far->value[0] == 0.0);
    // Half outside: the off-map neighbors act as zeros.
    Node* edge = bilinear_sample(g.constant(z), g.constant(Array(Shape{2}, {0.0, 0.5})));
    CHECK(edge->value[0] == doctest::Approx(0.5).epsilon(1e-15));
}

TEST_CASE("grid_sample gradients match finite differences in map and points") {
    Rng rng(5);
    Array z = random_map(3, 6, 7, rng);
    Array pts(Shape{4, 2}, 0.0);
    for (int i = 0; i < 4; ++i) {
        // keep away from integer grid lines where bilinear kinks live
        pts.at({i, 0}) = rng.uniform_int(0, 5) + rng.uniform(0.2, 0.8);
        pts.at({i, 1}) = rng.uniform_int(0, 4) + rng.uniform(0.2, 0.8);
    }
    const double err = fd_max_rel({z, pts}, [](Graph&, const std::vector<Node*>& n) {
        return grid_sample(n[0], n[1]);
    });
    CHECK(err < 1e-6);
}

TEST_CASE("grid_sample shape checks") {
    Graph g;
    Node* z = g.constant(Array(Shape{1, 2, 2}, 0.0));
    CHECK_THROWS_AS(grid_sample(z, g.constant(Array(Shape{3}, 0.0))), ShapeError);
    CHECK_THROWS_AS(grid_sample(g.constant(Array(Shape{2, 2}, 0.0)),
                                g.constant(Array(Shape{1, 2}, 0.0))),
                    ShapeError);
}

TEST_CASE("project_points matches the scalar projection and flags depth") {
    const CameraParams cam = look_at({4.0, 0.5, 1.5}, {0.0, 0.0, 1.0}, {0.0, 0.0, 1.0},
                                     35.0, 28.0, 64, 48);
    Graph g;
    Array pts(Shape{3, 3},
              {0.3, -0.4, 1.2,   // in front
               0.0, 0.0, 1.0,    // the target
               8.0, 0.5, 1.5});  // behind the camera
    std::vector<unsigned char> valid;
    Node* px = project_points(g.constant(pts), cam, &valid);
    REQUIRE(px->shape() == Shape{3, 2});
    CHECK(valid[0] == 1);
    CHECK(valid[1] == 1);
    CHECK(valid[2] == 0);
    const Eigen::Vector2d uv0 = project({0.3, -0.4, 1.2}, cam);
    CHECK(px->value.at({0, 0}) == doctest::Approx(uv0.x()).epsilon(1e-14));
    CHECK(px->value.at({0, 1}) == doctest::Approx(uv0.y()).epsilon(1e-14));
}

TEST_CASE("project_points gradients match finite differences") {
    const CameraParams cam = look_at({4.0, 0.5, 1.5}, {0.0, 0.0, 1.0}, {0.0, 0.0, 1.0},
                                     35.0, 28.0, 64, 48);
    Rng rng(9);
    Array pts(Shape{5, 3}, 0.0);
    for (int i = 0; i < 5; ++i) {
        pts.at({i, 0}) = rng.uniform(-1.5, 1.5);
        pts.at({i, 1}) = rng.uniform(-1.5, 1.5);
        pts.at({i, 2}) = rng.uniform(0.2, 1.8);
    }
    const double err = fd_max_rel({pts}, [&](Graph&, const std::vector<Node*>& n) {
        return project_points(n[0], cam);
    });
    CHECK(err < 1e-6);
}

TEST_CASE("behind-camera depth clamp zeroes the depth partial") {
    CameraParams cam;
    cam.fx = cam.fy = 10.0;
    cam.cx = cam.cy = 4.0;
    cam.width = cam.height = 8;
    Graph g;
    Node* pts = g.param(Array(Shape{1, 3}, {0.1, 0.1, -2.0}));
    Node* px = project_points(pts, cam);
    g.backward(sum_all(px));
    // x and y partials survive (value is x_cam/clamped_depth), z partial is 0
    CHECK(pts->grad[2] == 0.0);
    CHECK(px->value.all_finite());
}

TEST_CASE("sampling chained through projection differentiates end to end") {
    const CameraParams cam = look_at({4.0, 0.0, 1.0}, {0.0, 0.0, 1.0}, {0.0, 0.0, 1.0},
                                     2.0, 2.0, 8, 8);
    Rng rng(11);
    Array z = random_map(2, 8, 8, rng);
    Array pts(Shape{2, 3}, {0.4, -0.3, 1.1, -0.2, 0.5, 0.9});
    const double err = fd_max_rel({z, pts}, [&](Graph&, const std::vector<Node*>& n) {
        return grid_sample(n[0], project_points(n[1], cam));
    });
    CHECK(err < 1e-6);
}
