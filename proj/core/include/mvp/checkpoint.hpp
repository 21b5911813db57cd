#pragma once

#include <cstdint>
#include <optional>
#include <string>

#include "mvp/model.hpp"
#include "mvp/params.hpp"

namespace mvp {

// Optimizer/loop position carried by training checkpoints so a resumed run
// continues bit-identically.
struct TrainState {
    std::uint64_t adam_steps = 0;
    std::int64_t global_step = 0;
    int epoch = 0;        // epoch the next step belongs to
    int scene_cursor = 0; // index into the epoch's shuffled order
    double lr = 0.0;      // lr in effect (post-decay)
};

struct Checkpoint {
    ModelConfig model;
    ParamStore params;
    std::optional<TrainState> train_state;  // present iff Adam moments stored
};

// Binary checkpoint file: magic "MVPC", format version, model config JSON,
// named f64 tensors in store order, optional optimizer state (Adam moments
// per tensor + loop position), CRC32 trailer over everything before it.
void save_checkpoint(const std::string& path, const ModelConfig& cfg, const ParamStore& params,
                     const TrainState* state = nullptr);

// Throws IoError on structural damage or CRC mismatch, ConfigError when the
// embedded config is invalid.
Checkpoint load_checkpoint(const std::string& path);

}  // namespace mvp
