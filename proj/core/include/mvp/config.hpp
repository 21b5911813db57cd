#pragma once

#include <cstdint>
#include <string>

#include "mvp/model.hpp"

namespace mvp {

// Full training/evaluation run description. JSON round trips are lossless;
// unknown keys are rejected so typos cannot silently fall back to defaults.
struct RunConfig {
    ModelConfig model;

    double lr = 1e-4;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double adam_eps = 1e-8;
    int decay_epoch = 20;       // epochs >= this run at lr * decay_factor
    double decay_factor = 0.1;
    int epochs = 1;
    int grad_accum = 1;         // scenes per optimizer step
    std::uint64_t seed = 1;

    std::string data;     // dataset path
    std::string out_dir;  // checkpoints + logs

    double confidence_threshold = 0.1;
    double lambda = 2.5;
    double loss_2d_weight = 1.0;
    bool use_2d_loss = true;

    int checkpoint_every = 1000;  // steps; 0 disables periodic checkpoints
    int log_every = 50;           // steps
    std::int64_t max_steps = 0;   // 0 = run all epochs

    void validate() const;
};

// Strict parsers: malformed JSON, wrong types, or unknown keys throw
// ConfigError.
ModelConfig model_config_from_json(const std::string& text);
RunConfig run_config_from_json(const std::string& text);

std::string model_config_to_json(const ModelConfig& cfg);
std::string run_config_to_json(const RunConfig& cfg);

// Enum <-> name mappings shared by config files and CLI flags.
const char* to_name(AttentionMode m);
const char* to_name(PosEncoding m);
const char* to_name(QueryMode m);
const char* to_name(Precision p);
AttentionMode attention_from_name(const std::string& s);
PosEncoding pos_encoding_from_name(const std::string& s);
QueryMode query_mode_from_name(const std::string& s);
Precision precision_from_name(const std::string& s);

}  // namespace mvp
