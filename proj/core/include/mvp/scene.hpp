#pragma once

#include <Eigen/Core>

#include <cstdint>
#include <vector>

#include "mvp/array.hpp"
#include "mvp/camera.hpp"
#include "mvp/skeleton.hpp"

namespace mvp {

// Axis-aligned box in meters. Poses are clamped to it and loss coordinates
// are normalized by its extents.
struct Workspace {
    Eigen::Vector3d lo{-2.0, -2.0, 0.0};
    Eigen::Vector3d hi{2.0, 2.0, 2.0};

    Eigen::Vector3d center() const { return 0.5 * (lo + hi); }
    Eigen::Vector3d extents() const { return hi - lo; }
    bool contains(const Eigen::Vector3d& p) const {
        return (p.array() >= lo.array()).all() && (p.array() <= hi.array()).all();
    }
    void validate() const;  // throws ConfigError on empty extent
};

struct SceneConfig {
    int views = 5;
    int max_persons = 3;
    int joints = 5;
    Workspace workspace;
    int height = 64;
    int width = 64;
    double heatmap_sigma_px = 1.5;
    double noise_std = 0.0;
    double distractor_rate = 0.0;  // expected spurious blobs per view
};

struct Scene {
    Array gt_poses;                     // [N_gt, J, 3] meters
    std::vector<CameraParams> cameras;  // V entries
    std::vector<Array> features;        // V entries, each [C_in, H, W]
    Workspace workspace;

    int persons() const { return gt_poses.dim(0); }
    int joints() const { return gt_poses.dim(1); }
    int views() const { return static_cast<int>(cameras.size()); }
    Eigen::Vector3d joint(int person, int j) const;
};

// Deterministic synthetic scene: ring of cameras around the workspace (every
// camera sees the whole box), up to max_persons skeletons rejection-sampled
// to lie inside the box, be visible in at least two views, and keep every
// joint separable from other actors' same joint (>= 3 sigma apart, >= 1 px
// in frame) in at least two views so the heatmaps stay information-
// sufficient, and per-joint heatmap feature channels (peak 1, max-combined
// across persons) with optional additive noise and distractor blobs.
// Feature values are rounded to binary32 so dataset files round-trip
// bit-exactly. Throws GenerationError when a person cannot be placed within
// the rejection budget of 10 * max_persons attempts.
Scene generate_scene(std::uint64_t seed, const SceneConfig& cfg);

// Continuous-coordinate Gaussian blob rendered onto `chan` ([H,W]) by
// taking the maximum of the existing value and peak*exp(-d^2/(2*sigma^2))
// at each pixel center; shared by scene generation and tests.
void splat_max_gaussian(Array& chan, double u, double v, double sigma, double peak);

}  // namespace mvp
