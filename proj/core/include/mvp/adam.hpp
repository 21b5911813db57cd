#pragma once

#include <cstdint>

#include "mvp/params.hpp"

namespace mvp {

struct AdamConfig {
    double lr = 1e-4;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
};

// Adam with bias correction. Step count is part of optimizer state and is
// serialized with checkpoints so resumed runs continue the same schedule.
class Adam {
public:
    explicit Adam(AdamConfig cfg) : cfg_(cfg) {}

    // Applies one update from the accumulated grads, then advances the step
    // counter. Does not zero the grads; callers own that.
    void step(ParamStore& params);

    std::uint64_t steps_taken() const { return t_; }
    void set_steps_taken(std::uint64_t t) { t_ = t; }
    const AdamConfig& config() const { return cfg_; }
    void set_lr(double lr) { cfg_.lr = lr; }

private:
    AdamConfig cfg_;
    std::uint64_t t_ = 0;
};

}  // namespace mvp
