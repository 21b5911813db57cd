#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "mvp/adam.hpp"
#include "mvp/checkpoint.hpp"
#include "mvp/config.hpp"
#include "mvp/model.hpp"
#include "mvp/scene.hpp"

namespace mvp {

// Serial training loop: one scene per forward, optimizer step every
// `grad_accum` scenes (gradients averaged), per-epoch shuffle drawn from a
// stateless split of the run seed so a resumed run walks the same order.
// Checkpoints land at optimizer-step boundaries, which keeps resumption
// bit-identical to an uninterrupted run.
class Trainer {
public:
    // Fresh run. `scenes` is the training set; out_dir (when non-empty) gets
    // config.json, train_log.csv, periodic ckpt_step*.mvpc, last.mvpc.
    Trainer(RunConfig cfg, std::vector<Scene> scenes);
    // Resume from a checkpoint holding optimizer state. The checkpoint's
    // model config must match `cfg.model`.
    Trainer(RunConfig cfg, std::vector<Scene> scenes, const std::string& resume_path);

    struct StepInfo {
        std::int64_t step = 0;  // optimizer steps completed
        int epoch = 0;
        double loss = 0.0;      // mean loss of the scenes in this step
        double lr = 0.0;
    };
    // Called after every optimizer step; return true to stop early.
    using StopFn = std::function<bool(const StepInfo&, const PoseTransformer&)>;

    struct Result {
        std::int64_t steps = 0;
        double final_loss = 0.0;
        bool stopped_early = false;
        std::string checkpoint_path;  // empty when out_dir is empty
    };

    // Runs to the epoch/max_steps budget (or until `stop` fires). A
    // non-finite value anywhere in the step raises NumericError after
    // writing the offending scene and step context to out_dir.
    Result run(const StopFn& stop = nullptr);

    const PoseTransformer& model() const { return model_; }
    PoseTransformer& model() { return model_; }
    std::int64_t step() const { return state_.global_step; }

private:
    void log_row(const StepInfo& info, double wall_ms);
    void save(const std::string& name);
    double lr_for_epoch(int epoch) const;

    RunConfig cfg_;
    std::vector<Scene> scenes_;
    PoseTransformer model_;
    Adam adam_;
    TrainState state_;
    bool log_header_written_ = false;
};

}  // namespace mvp
