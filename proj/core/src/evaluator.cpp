#include "mvp/evaluator.hpp"

#include <atomic>
#include <cstdlib>
#include <exception>
#include <mutex>
#include <thread>

#include <json.hpp>

#include "mvp/errors.hpp"
#include "mvp/skeleton.hpp"

namespace mvp {

PoseSet filter_by_confidence(const PoseSet& raw, double threshold) {
    raw.validate();
    const int n = raw.persons();
    const int j = raw.joints();
    std::vector<int> keep;
    for (int i = 0; i < n; ++i)
        if (raw.confidences[static_cast<std::size_t>(i)] >= threshold) keep.push_back(i);
    PoseSet out;
    if (keep.empty()) {
        out.poses = Array();
        out.confidences = Array();
        return out;
    }
    out.poses = Array(Shape{static_cast<int>(keep.size()), j, 3}, 0.0);
    out.confidences = Array(Shape{static_cast<int>(keep.size())}, 0.0);
    for (std::size_t k = 0; k < keep.size(); ++k) {
        out.confidences[k] = raw.confidences[static_cast<std::size_t>(keep[k])];
        for (int a = 0; a < j; ++a)
            for (int b = 0; b < 3; ++b)
                out.poses.at({static_cast<int>(k), a, b}) = raw.poses.at({keep[k], a, b});
    }
    return out;
}

int resolve_threads(int requested) {
    if (requested > 0) return requested;
    if (const char* env = std::getenv("MVP_THREADS")) {
        char* end = nullptr;
        const long v = std::strtol(env, &end, 10);
        if (end != env && *end == '\0' && v > 0) return static_cast<int>(v);
    }
    const unsigned hw = std::thread::hardware_concurrency();
    return hw == 0 ? 1 : static_cast<int>(hw);
}

std::vector<MetricRow> metric_rows(const std::vector<SceneRecord>& records, int joints,
                                   const EvalOptions& opt) {
    std::vector<MetricRow> rows;
    for (double t : opt.thresholds_mm) {
        const ApRecall ar = ap_recall(records, t);
        rows.push_back({"ap", t, ar.ap});
        rows.push_back({"recall", t, ar.recall});
    }
    const ApRecall matched = ap_recall(records, opt.mpjpe_match_threshold_mm);
    MetricRow mpjpe_row{"mpjpe_mm", opt.mpjpe_match_threshold_mm, std::nullopt};
    if (!matched.match_errors_mm.empty()) {
        double sum = 0.0;
        for (double e : matched.match_errors_mm) sum += e;
        mpjpe_row.value = sum / matched.match_errors_mm.size();
    }
    rows.push_back(mpjpe_row);

    const SkeletonTemplate tmpl = template_for_joints(joints);
    PcpResult agg;
    for (const auto& r : records) {
        const PcpResult p = pcp(r.prediction, r.gt_poses, tmpl);
        agg.correct += p.correct;
        agg.total += p.total;
    }
    rows.push_back({"pcp", 0.0, agg.total == 0 ? std::optional<double>() : agg.fraction()});
    return rows;
}

EvalOutput evaluate_scenes(const PoseTransformer& model, const std::vector<Scene>& scenes,
                           const EvalOptions& opt) {
    const ModelConfig& cfg = model.config();
    for (std::size_t i = 0; i < scenes.size(); ++i) {
        const Scene& s = scenes[i];
        if (s.views() != cfg.views || static_cast<int>(s.features.size()) != cfg.views)
            throw ConfigError("scene " + std::to_string(i) + " has " + std::to_string(s.views()) +
                              " views but the model expects " + std::to_string(cfg.views));
        for (const Array& f : s.features)
            if (f.rank() != 3 || f.dim(0) != cfg.in_channels)
                throw ConfigError("scene " + std::to_string(i) + " feature channels do not match the model's " +
                                  std::to_string(cfg.in_channels));
    }
    EvalOutput out;
    out.records.resize(scenes.size());
    const int workers = std::min<int>(resolve_threads(opt.threads),
                                      std::max<int>(1, static_cast<int>(scenes.size())));
    std::atomic<std::size_t> next{0};
    std::exception_ptr first_error;
    std::mutex error_mu;
    auto work = [&] {
        for (;;) {
            const std::size_t i = next.fetch_add(1);
            if (i >= scenes.size()) return;
            try {
                const PoseSet raw = model.infer(scenes[i]);
                out.records[i].prediction = filter_by_confidence(raw, opt.confidence_threshold);
                out.records[i].gt_poses = scenes[i].gt_poses;
            } catch (...) {
                std::lock_guard<std::mutex> g(error_mu);
                if (!first_error) first_error = std::current_exception();
                return;
            }
        }
    };
    if (workers <= 1) {
        work();
    } else {
        std::vector<std::thread> pool;
        pool.reserve(static_cast<std::size_t>(workers));
        for (int t = 0; t < workers; ++t) pool.emplace_back(work);
        for (auto& th : pool) th.join();
    }
    if (first_error) std::rethrow_exception(first_error);

    out.rows = metric_rows(out.records, model.config().joints, opt);
    return out;
}

std::string predictions_jsonl(const std::vector<SceneRecord>& records) {
    std::string out;
    for (std::size_t s = 0; s < records.size(); ++s) {
        const auto& r = records[s];
        nlohmann::json line;
        line["scene"] = s;
        auto persons = nlohmann::json::array();
        const int n = r.prediction.poses.empty() ? 0 : r.prediction.persons();
        for (int i = 0; i < n; ++i) {
            nlohmann::json p;
            p["confidence"] = r.prediction.confidences[static_cast<std::size_t>(i)];
            auto joints = nlohmann::json::array();
            for (int a = 0; a < r.prediction.joints(); ++a)
                joints.push_back({r.prediction.poses.at({i, a, 0}), r.prediction.poses.at({i, a, 1}),
                                  r.prediction.poses.at({i, a, 2})});
            p["joints"] = std::move(joints);
            persons.push_back(std::move(p));
        }
        line["persons"] = std::move(persons);
        auto gt = nlohmann::json::array();
        const int n_gt = r.gt_poses.empty() ? 0 : r.gt_poses.dim(0);
        for (int g = 0; g < n_gt; ++g) {
            auto joints = nlohmann::json::array();
            for (int a = 0; a < r.gt_poses.dim(1); ++a)
                joints.push_back({r.gt_poses.at({g, a, 0}), r.gt_poses.at({g, a, 1}), r.gt_poses.at({g, a, 2})});
            gt.push_back(std::move(joints));
        }
        line["gt"] = std::move(gt);
        out += line.dump();
        out += '\n';
    }
    return out;
}

}  // namespace mvp
