#pragma once

#include <optional>
#include <string>
#include <vector>

#include "mvp/array.hpp"
#include "mvp/pose.hpp"
#include "mvp/skeleton.hpp"

namespace mvp {

// One evaluated scene: predictions already filtered by the confidence
// threshold, ground truth as generated.
struct SceneRecord {
    PoseSet prediction;  // [N_pred, J, 3]; N_pred may be 0
    Array gt_poses;      // [N_gt, J, 3] meters
};

// Mean per-joint Euclidean error in millimeters; inputs are [J,3] meters.
double mpjpe_mm(const Array& pred, const Array& gt);

struct ApRecall {
    double ap = 0.0;
    double recall = 0.0;
    int true_positives = 0;
    int total_gt = 0;
    std::vector<double> match_errors_mm;  // per true positive, match order
};

// Dataset-wide detection protocol: predictions sorted by descending
// confidence (ties: scene index, then slot index), each greedily matched to
// the nearest unmatched same-scene GT; a match with MPJPE < threshold is a
// true positive, anything else a false positive. AP is the area under the
// precision-recall curve with all-point interpolation; Recall the matched
// GT fraction. Throws UsageError when there is no GT at all.
ApRecall ap_recall(const std::vector<SceneRecord>& records, double threshold_mm);

struct PcpResult {
    int correct = 0;
    int total = 0;

    double fraction() const { return total == 0 ? 0.0 : static_cast<double>(correct) / total; }
};

// Percentage of correct parts for one scene. GT actors are matched to
// predictions by closest root joint (greedy over ascending root distance,
// one-to-one). A limb counts correct when the mean of its two endpoint
// errors is <= 0.5 x the GT limb length (boundary inclusive). Limbs of
// unmatched GT actors count as incorrect; zero-length GT limbs are skipped
// with a warning on stderr.
PcpResult pcp(const PoseSet& pred, const Array& gt_poses, const SkeletonTemplate& tmpl);

// One row of the metrics table. `value` empty renders as "n/a".
struct MetricRow {
    std::string metric;
    double threshold = 0.0;  // mm
    std::optional<double> value;
};

// Fixed-format serialization (metric,threshold,value header; %.9g values) so
// identical inputs give byte-identical files.
std::string metrics_csv(const std::vector<MetricRow>& rows);

}  // namespace mvp
