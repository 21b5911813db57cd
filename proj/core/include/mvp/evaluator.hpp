#pragma once

#include <string>
#include <vector>

#include "mvp/metrics.hpp"
#include "mvp/model.hpp"
#include "mvp/scene.hpp"

namespace mvp {

struct EvalOptions {
    double confidence_threshold = 0.1;
    std::vector<double> thresholds_mm = {25.0, 50.0, 100.0, 150.0, 250.0, 500.0};
    double mpjpe_match_threshold_mm = 500.0;  // matching radius for the MPJPE row
    int threads = 0;                          // 0: MVP_THREADS env, else hardware
};

struct EvalOutput {
    std::vector<SceneRecord> records;  // dataset order
    std::vector<MetricRow> rows;       // ap/recall per threshold, mpjpe, pcp
};

// Drops persons below the confidence threshold, keeping slot order.
PoseSet filter_by_confidence(const PoseSet& raw, double threshold);

// Final-layer inference over all scenes (parallel by scene, deterministic
// merge in dataset order), then the metric table. Throws ConfigError when
// scene shape and model config disagree.
EvalOutput evaluate_scenes(const PoseTransformer& model, const std::vector<Scene>& scenes,
                           const EvalOptions& opt);

// Metric table for precomputed records (shared with tests and the trainer's
// early-stop probes).
std::vector<MetricRow> metric_rows(const std::vector<SceneRecord>& records, int joints,
                                   const EvalOptions& opt);

// One JSON object per scene: predictions + GT, deterministic field order.
std::string predictions_jsonl(const std::vector<SceneRecord>& records);

// Effective worker count: `requested` if > 0, else MVP_THREADS if set to a
// positive integer, else the hardware concurrency (at least 1).
int resolve_threads(int requested);

}  // namespace mvp
