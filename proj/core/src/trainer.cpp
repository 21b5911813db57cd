#include "mvp/trainer.hpp"

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>

#include "mvp/dataset_io.hpp"
#include "mvp/errors.hpp"
#include "mvp/loss.hpp"
#include "mvp/rng.hpp"

namespace mvp {

namespace {

PoseTransformer make_model(const RunConfig& cfg) { return PoseTransformer(cfg.model, cfg.seed); }

PoseTransformer resume_model(const RunConfig& cfg, const Checkpoint& ckpt) {
    if (model_config_to_json(ckpt.model) != model_config_to_json(cfg.model))
        throw ConfigError("resume checkpoint's model config does not match the run config");
    return PoseTransformer(cfg.model, ckpt.params);
}

}  // namespace

Trainer::Trainer(RunConfig cfg, std::vector<Scene> scenes)
    : cfg_(std::move(cfg)), scenes_(std::move(scenes)), model_(make_model(cfg_)),
      adam_({cfg_.lr, cfg_.beta1, cfg_.beta2, cfg_.adam_eps}) {
    cfg_.validate();
    if (scenes_.empty()) throw UsageError("trainer: empty training set");
    state_.lr = cfg_.lr;
    if (!cfg_.out_dir.empty()) {
        std::filesystem::create_directories(cfg_.out_dir);
        std::ofstream f(cfg_.out_dir + "/config.json");
        f << run_config_to_json(cfg_) << '\n';
    }
}

Trainer::Trainer(RunConfig cfg, std::vector<Scene> scenes, const std::string& resume_path)
    : cfg_(std::move(cfg)), scenes_(std::move(scenes)),
      model_([&] {
          const Checkpoint ckpt = load_checkpoint(resume_path);
          if (!ckpt.train_state)
              throw ConfigError("checkpoint has no optimizer state, cannot resume: " + resume_path);
          return resume_model(cfg_, ckpt);
      }()),
      adam_({cfg_.lr, cfg_.beta1, cfg_.beta2, cfg_.adam_eps}) {
    cfg_.validate();
    if (scenes_.empty()) throw UsageError("trainer: empty training set");
    // Load again for the state + moments; the first load fed the model ctor.
    Checkpoint ckpt = load_checkpoint(resume_path);
    state_ = *ckpt.train_state;
    auto& params = model_.params();
    for (std::size_t i = 0; i < params.size(); ++i) {
        params.entry(i).m = std::move(ckpt.params.entry(i).m);
        params.entry(i).v = std::move(ckpt.params.entry(i).v);
    }
    adam_.set_steps_taken(state_.adam_steps);
    log_header_written_ = true;  // appending to the original run's log
}

double Trainer::lr_for_epoch(int epoch) const {
    return epoch >= cfg_.decay_epoch ? cfg_.lr * cfg_.decay_factor : cfg_.lr;
}

void Trainer::log_row(const StepInfo& info, double wall_ms) {
    if (cfg_.out_dir.empty()) return;
    if (info.step % cfg_.log_every != 0) return;
    std::ofstream f(cfg_.out_dir + "/train_log.csv", std::ios::app);
    if (!log_header_written_) {
        f << "step,epoch,loss,lr,wall_ms\n";
        log_header_written_ = true;
    }
    char buf[160];
    std::snprintf(buf, sizeof buf, "%lld,%d,%.17g,%.17g,%.3f\n",
                  static_cast<long long>(info.step), info.epoch, info.loss, info.lr, wall_ms);
    f << buf;
}

void Trainer::save(const std::string& name) {
    if (cfg_.out_dir.empty()) return;
    save_checkpoint(cfg_.out_dir + "/" + name, cfg_.model, model_.params(), &state_);
}

Trainer::Result Trainer::run(const StopFn& stop) {
    const int n = static_cast<int>(scenes_.size());
    LossOptions lopt;
    lopt.lambda = cfg_.lambda;
    lopt.weight_2d = cfg_.loss_2d_weight;
    lopt.use_2d = cfg_.use_2d_loss;

    Result result;
    result.steps = state_.global_step;
    double accum_loss = 0.0;
    int accum_count = 0;

    for (int epoch = state_.epoch; epoch < cfg_.epochs; ++epoch) {
        state_.epoch = epoch;
        state_.lr = lr_for_epoch(epoch);
        adam_.set_lr(state_.lr);
        Rng shuffle_rng(split_seed(cfg_.seed, static_cast<std::uint64_t>(epoch)));
        const std::vector<int> order = shuffle_rng.permutation(n);

        for (int cursor = state_.scene_cursor; cursor < n; ++cursor) {
            const Scene& scene = scenes_[static_cast<std::size_t>(order[static_cast<std::size_t>(cursor)])];
            const auto t0 = std::chrono::steady_clock::now();
            try {
                Graph g(cfg_.model.precision);
                const auto fwd = model_.forward(g, scene.features, scene.cameras);
                const TotalLoss tl = total_loss(fwd, cfg_.model, scene.gt_poses, scene.cameras, lopt);
                g.backward(tl.loss);
                model_.params().collect_grads(fwd.bound);
                accum_loss += tl.loss->value[0];
            } catch (const NumericError& e) {
                if (!cfg_.out_dir.empty()) {
                    write_dataset({scene}, cfg_.out_dir + "/diagnostic_scene.mvpd");
                    std::ofstream f(cfg_.out_dir + "/diagnostic.txt");
                    f << "step " << state_.global_step << " epoch " << epoch << " cursor " << cursor
                      << " lr " << state_.lr << "\n" << e.what() << '\n';
                }
                throw NumericError(std::string("training aborted: ") + e.what());
            }
            ++accum_count;

            const bool flush = accum_count == cfg_.grad_accum || cursor == n - 1;
            if (!flush) continue;

            if (accum_count > 1) {
                auto& params = model_.params();
                const double inv = 1.0 / accum_count;
                for (std::size_t i = 0; i < params.size(); ++i) {
                    auto& gr = params.entry(i).grad;
                    for (std::size_t k = 0; k < gr.size(); ++k) gr[k] *= inv;
                }
            }
            adam_.step(model_.params());
            model_.params().zero_grads();
            ++state_.global_step;
            state_.adam_steps = adam_.steps_taken();
            state_.scene_cursor = cursor + 1;

            StepInfo info;
            info.step = state_.global_step;
            info.epoch = epoch;
            info.loss = accum_loss / accum_count;
            info.lr = state_.lr;
            accum_loss = 0.0;
            accum_count = 0;

            const auto t1 = std::chrono::steady_clock::now();
            log_row(info, std::chrono::duration<double, std::milli>(t1 - t0).count());
            if (cfg_.checkpoint_every > 0 && state_.global_step % cfg_.checkpoint_every == 0)
                save("ckpt_step" + std::to_string(state_.global_step) + ".mvpc");

            result.steps = state_.global_step;
            result.final_loss = info.loss;
            if (stop && stop(info, model_)) {
                result.stopped_early = true;
                save("last.mvpc");
                if (!cfg_.out_dir.empty()) result.checkpoint_path = cfg_.out_dir + "/last.mvpc";
                return result;
            }
            if (cfg_.max_steps > 0 && state_.global_step >= cfg_.max_steps) {
                save("last.mvpc");
                if (!cfg_.out_dir.empty()) result.checkpoint_path = cfg_.out_dir + "/last.mvpc";
                return result;
            }
        }
        state_.scene_cursor = 0;
    }
    state_.epoch = cfg_.epochs;
    save("last.mvpc");
    if (!cfg_.out_dir.empty()) result.checkpoint_path = cfg_.out_dir + "/last.mvpc";
    return result;
}

}  // namespace mvp
