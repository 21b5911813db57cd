#include "mvp/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <iostream>
#include <limits>

#include "mvp/errors.hpp"

namespace mvp {

namespace {

double joint_dist_mm(const Array& a, int ia, const Array& b, int ib, int j) {
    double s = 0.0;
    for (int k = 0; k < 3; ++k) {
        const double d = a.at({ia, j, k}) - b.at({ib, j, k});
        s += d * d;
    }
    return std::sqrt(s) * 1000.0;
}

}  // namespace

double mpjpe_mm(const Array& pred, const Array& gt) {
    if (pred.rank() != 2 || pred.dim(1) != 3 || !pred.same_shape(gt))
        throw ShapeError("mpjpe_mm: expected matching [J,3] arrays");
    const int j = pred.dim(0);
    double total = 0.0;
    for (int a = 0; a < j; ++a) {
        double s = 0.0;
        for (int k = 0; k < 3; ++k) {
            const double d = pred.at({a, k}) - gt.at({a, k});
            s += d * d;
        }
        total += std::sqrt(s);
    }
    return total / j * 1000.0;
}

ApRecall ap_recall(const std::vector<SceneRecord>& records, double threshold_mm) {
    int total_gt = 0;
    for (const auto& r : records) {
        if (!r.gt_poses.empty() && (r.gt_poses.rank() != 3 || r.gt_poses.dim(2) != 3))
            throw ShapeError("ap_recall: GT poses must be [N,J,3]");
        if (!r.gt_poses.empty()) total_gt += r.gt_poses.dim(0);
    }
    if (records.empty() || total_gt == 0)
        throw UsageError("ap_recall: no ground truth to evaluate against");

    struct Det {
        double conf;
        int scene;
        int slot;
    };
    std::vector<Det> dets;
    for (std::size_t s = 0; s < records.size(); ++s) {
        const auto& p = records[s].prediction;
        if (p.poses.empty()) continue;
        for (int i = 0; i < p.persons(); ++i)
            dets.push_back({p.confidences[static_cast<std::size_t>(i)], static_cast<int>(s), i});
    }
    std::sort(dets.begin(), dets.end(), [](const Det& a, const Det& b) {
        if (a.conf != b.conf) return a.conf > b.conf;
        if (a.scene != b.scene) return a.scene < b.scene;
        return a.slot < b.slot;
    });

    std::vector<std::vector<char>> gt_used(records.size());
    for (std::size_t s = 0; s < records.size(); ++s)
        gt_used[s].assign(records[s].gt_poses.empty() ? 0u : static_cast<std::size_t>(records[s].gt_poses.dim(0)), 0);

    ApRecall out;
    out.total_gt = total_gt;
    std::vector<double> precision, recall;
    int tp = 0, fp = 0;
    for (const auto& d : dets) {
        const auto& rec = records[static_cast<std::size_t>(d.scene)];
        const int joints = rec.prediction.joints();
        Array pred_pose(Shape{joints, 3}, 0.0);
        for (int j = 0; j < joints; ++j)
            for (int k = 0; k < 3; ++k)
                pred_pose.at({j, k}) = rec.prediction.poses.at({d.slot, j, k});

        int best_gt = -1;
        double best_err = std::numeric_limits<double>::infinity();
        const int n_gt = rec.gt_poses.empty() ? 0 : rec.gt_poses.dim(0);
        for (int g = 0; g < n_gt; ++g) {
            if (gt_used[static_cast<std::size_t>(d.scene)][static_cast<std::size_t>(g)]) continue;
            Array gt_pose(Shape{joints, 3}, 0.0);
            for (int j = 0; j < joints; ++j)
                for (int k = 0; k < 3; ++k) gt_pose.at({j, k}) = rec.gt_poses.at({g, j, k});
            const double err = mpjpe_mm(pred_pose, gt_pose);
            if (err < best_err) {
                best_err = err;
                best_gt = g;
            }
        }
        if (best_gt >= 0 && best_err < threshold_mm) {
            gt_used[static_cast<std::size_t>(d.scene)][static_cast<std::size_t>(best_gt)] = 1;
            ++tp;
            out.match_errors_mm.push_back(best_err);
        } else {
            ++fp;
        }
        precision.push_back(static_cast<double>(tp) / (tp + fp));
        recall.push_back(static_cast<double>(tp) / total_gt);
    }

    out.true_positives = tp;
    out.recall = static_cast<double>(tp) / total_gt;
    // All-point interpolation: integrate recall increments against the
    // running max of precision taken from the right.
    double ap = 0.0, max_prec = 0.0;
    for (std::size_t i = precision.size(); i-- > 0;) {
        max_prec = std::max(max_prec, precision[i]);
        const double r_prev = i == 0 ? 0.0 : recall[i - 1];
        ap += (recall[i] - r_prev) * max_prec;
    }
    out.ap = ap;
    return out;
}

PcpResult pcp(const PoseSet& pred, const Array& gt_poses, const SkeletonTemplate& tmpl) {
    if (!gt_poses.empty() && (gt_poses.rank() != 3 || gt_poses.dim(2) != 3))
        throw ShapeError("pcp: GT poses must be [N,J,3]");
    const int n_gt = gt_poses.empty() ? 0 : gt_poses.dim(0);
    const int joints = tmpl.joints();
    if (n_gt > 0 && gt_poses.dim(1) != joints) throw ShapeError("pcp: GT joint count mismatch");
    const int n_pred = pred.poses.empty() ? 0 : pred.persons();
    if (n_pred > 0 && pred.joints() != joints) throw ShapeError("pcp: prediction joint count mismatch");
    const auto limbs = tmpl.limbs();

    // Greedy one-to-one matching over ascending root distance.
    std::vector<int> gt_match(static_cast<std::size_t>(n_gt), -1);
    {
        struct Pair {
            double dist;
            int gt, pr;
        };
        std::vector<Pair> pairs;
        for (int g = 0; g < n_gt; ++g)
            for (int p = 0; p < n_pred; ++p)
                pairs.push_back({joint_dist_mm(gt_poses, g, pred.poses, p, 0), g, p});
        std::sort(pairs.begin(), pairs.end(), [](const Pair& a, const Pair& b) {
            if (a.dist != b.dist) return a.dist < b.dist;
            if (a.gt != b.gt) return a.gt < b.gt;
            return a.pr < b.pr;
        });
        std::vector<char> pr_used(static_cast<std::size_t>(n_pred), 0);
        for (const auto& pa : pairs) {
            if (gt_match[static_cast<std::size_t>(pa.gt)] >= 0 || pr_used[static_cast<std::size_t>(pa.pr)]) continue;
            gt_match[static_cast<std::size_t>(pa.gt)] = pa.pr;
            pr_used[static_cast<std::size_t>(pa.pr)] = 1;
        }
    }

    PcpResult out;
    for (int g = 0; g < n_gt; ++g) {
        const int p = gt_match[static_cast<std::size_t>(g)];
        for (const auto& limb : limbs) {
            const int a = limb.first, b = limb.second;
            double len = 0.0;
            for (int k = 0; k < 3; ++k) {
                const double d = gt_poses.at({g, a, k}) - gt_poses.at({g, b, k});
                len += d * d;
            }
            len = std::sqrt(len);
            if (len == 0.0) {
                std::cerr << "pcp: skipping zero-length GT limb (" << a << "," << b << ")\n";
                continue;
            }
            ++out.total;
            if (p < 0) continue;
            const double err_a = joint_dist_mm(pred.poses, p, gt_poses, g, a) / 1000.0;
            const double err_b = joint_dist_mm(pred.poses, p, gt_poses, g, b) / 1000.0;
            if (0.5 * (err_a + err_b) <= 0.5 * len) ++out.correct;
        }
    }
    return out;
}

std::string metrics_csv(const std::vector<MetricRow>& rows) {
    std::string out = "metric,threshold,value\n";
    char buf[64];
    for (const auto& r : rows) {
        out += r.metric;
        out += ',';
        std::snprintf(buf, sizeof buf, "%.9g", r.threshold);
        out += buf;
        out += ',';
        if (r.value) {
            std::snprintf(buf, sizeof buf, "%.9g", *r.value);
            out += buf;
        } else {
            out += "n/a";
        }
        out += '\n';
    }
    return out;
}

}  // namespace mvp
