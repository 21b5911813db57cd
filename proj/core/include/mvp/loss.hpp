#pragma once

#include <vector>

#include "mvp/camera.hpp"
#include "mvp/graph.hpp"
#include "mvp/match.hpp"
#include "mvp/model.hpp"
#include "mvp/scene.hpp"

namespace mvp {

struct LossOptions {
    double lambda = 2.5;        // pose-term weight
    double focal_alpha = 0.25;
    double focal_gamma = 2.0;
    double weight_2d = 1.0;     // 2D reprojection term weight inside the pose term
    bool use_2d = true;
};

struct LayerLoss {
    Node* loss;  // scalar
    Assignment assignment;
};

// Set loss for one decoder layer. `positions_norm` is the layer's [M,3]
// node in normalized workspace coordinates, `person_conf` the [N] person
// confidence node. GT poses are meters, padded conceptually to N slots with
// empties. The assignment minimizes -confidence + normalized L1 (empty slots
// cost zero everywhere); the loss is a focal confidence term over all slots
// plus, for real slots, lambda * (normalized 3D L1 + per-view-normalized 2D
// reprojection L1, views without any joint in frustum excluded).
// The assignment is treated as a constant; pass `fixed` to reuse one.
LayerLoss hungarian_loss(Node* positions_norm, Node* person_conf, const Array& gt_poses,
                         const std::vector<CameraParams>& cams, const Workspace& ws,
                         const LossOptions& opt, const Assignment* fixed = nullptr);

struct TotalLoss {
    Node* loss;  // scalar sum over layers
    std::vector<Assignment> assignments;
};

// Per-layer Hungarian losses summed; matching recomputed independently per
// layer.
TotalLoss total_loss(const PoseTransformer::ForwardResult& fwd, const ModelConfig& cfg,
                     const Array& gt_poses, const std::vector<CameraParams>& cams,
                     const LossOptions& opt);

// Focal loss value for one probability (reference formula, shared with
// tests): -alpha_t * (1-p_t)^gamma * log(p_t).
double focal_loss_value(double p, bool positive, double alpha, double gamma);

}  // namespace mvp
