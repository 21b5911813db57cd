#pragma once

#include <vector>

#include "mvp/camera.hpp"
#include "mvp/graph.hpp"

namespace mvp {

// Bilinear interpolation of a [C,H,W] map at one continuous pixel
// coordinate p = [u, v]. Interpolates between the four surrounding pixel
// centers; out-of-bounds neighbors contribute zero, so a sample whose whole
// support is off the map is exactly zero. Differentiable in Z and in p.
// Returns shape [C].
Node* bilinear_sample(Node* Z, Node* p);

// Batched form: pts is [Q,2] rows of (u, v); returns [Q,C].
Node* grid_sample(Node* Z, Node* pts);

// Differentiable perspective projection of world points, pts [Q,3] ->
// pixels [Q,2]. Depth is clamped below at kMinCameraDepth so the forward
// value stays finite for behind-camera points; `valid`, when given, receives
// one flag per point (1 iff depth > kMinCameraDepth) and callers must mask
// invalid rows out of any loss.
Node* project_points(Node* pts, const CameraParams& cam, std::vector<unsigned char>* valid = nullptr);

}  // namespace mvp
