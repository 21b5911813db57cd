#pragma once

#include <Eigen/Core>

#include <optional>
#include <utility>
#include <vector>

#include "mvp/array.hpp"

namespace mvp {

// Pinhole camera, world->camera convention x_cam = R * x_world + t.
// Pixel centers sit at half-integer coordinates: the pixel in column i,
// row j has its center at (u, v) = (i + 0.5, j + 0.5).
struct CameraParams {
    double fx = 1.0, fy = 1.0;
    double cx = 0.0, cy = 0.0;
    Eigen::Matrix3d R = Eigen::Matrix3d::Identity();
    Eigen::Vector3d t = Eigen::Vector3d::Zero();
    int width = 0, height = 0;

    // Throws GeometryError unless R is a proper rotation (orthonormal,
    // det +1, both within 1e-9) and fx, fy > 0.
    void validate() const;

    Eigen::Vector3d center() const { return -R.transpose() * t; }
};

inline constexpr double kMinCameraDepth = 1e-6;  // meters

// Perspective projection to pixel coordinates. Throws GeometryError when the
// point is at or behind the camera plane (depth <= kMinCameraDepth).
Eigen::Vector2d project(const Eigen::Vector3d& y, const CameraParams& cam);

// Projection that reports behind-camera as nullopt instead of throwing.
std::optional<Eigen::Vector2d> try_project(const Eigen::Vector3d& y, const CameraParams& cam);

// Unit world-frame ray direction through every pixel center, shape [3,H,W].
Array ray_field(const CameraParams& cam);

// Linear least-squares triangulation from pixel observations. Needs >= 2
// views; throws GeometryError when the system is rank deficient (for example
// two identical cameras).
Eigen::Vector3d triangulate_dlt(const std::vector<std::pair<Eigen::Vector2d, CameraParams>>& obs);

// Camera at `eye` whose optical axis points at `target`; `up` fixes the roll
// (image v axis points away from it). Throws GeometryError when the view
// direction is parallel to `up`.
CameraParams look_at(const Eigen::Vector3d& eye, const Eigen::Vector3d& target,
                     const Eigen::Vector3d& up, double fx, double fy, int width, int height);

}  // namespace mvp
