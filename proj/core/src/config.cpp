#include "mvp/config.hpp"

#include <json.hpp>

#include "mvp/errors.hpp"

namespace mvp {

using nlohmann::json;

namespace {

// Pulls a field of type T, leaving `out` untouched when absent.
template <typename T>
void read_field(const json& j, const char* key, T& out) {
    if (!j.contains(key)) return;
    try {
        out = j.at(key).get<T>();
    } catch (const json::exception& e) {
        throw ConfigError(std::string("config field '") + key + "': " + e.what());
    }
}

void reject_unknown(const json& j, std::initializer_list<const char*> known, const char* where) {
    for (auto it = j.begin(); it != j.end(); ++it) {
        bool ok = false;
        for (const char* k : known)
            if (it.key() == k) {
                ok = true;
                break;
            }
        if (!ok) throw ConfigError(std::string("unknown config key '") + it.key() + "' in " + where);
    }
}

Eigen::Vector3d vec3_from(const json& j, const char* key) {
    const auto& a = j.at(key);
    if (!a.is_array() || a.size() != 3) throw ConfigError(std::string("'") + key + "' must be a 3-element array");
    return {a[0].get<double>(), a[1].get<double>(), a[2].get<double>()};
}

ModelConfig model_from(const json& j) {
    if (!j.is_object()) throw ConfigError("model config must be a JSON object");
    reject_unknown(j,
                   {"persons", "joints", "channels", "views", "layers", "points", "heads",
                    "ffn_width", "in_channels", "attention", "pos_encoding", "query_mode",
                    "workspace", "feature_stride", "differentiable_anchors", "dense_cap",
                    "precision"},
                   "model");
    ModelConfig cfg;
    read_field(j, "persons", cfg.persons);
    read_field(j, "joints", cfg.joints);
    read_field(j, "channels", cfg.channels);
    read_field(j, "views", cfg.views);
    read_field(j, "layers", cfg.layers);
    read_field(j, "points", cfg.points);
    read_field(j, "heads", cfg.heads);
    read_field(j, "ffn_width", cfg.ffn_width);
    read_field(j, "in_channels", cfg.in_channels);
    if (j.contains("attention")) cfg.attention = attention_from_name(j.at("attention").get<std::string>());
    if (j.contains("pos_encoding")) cfg.pos_encoding = pos_encoding_from_name(j.at("pos_encoding").get<std::string>());
    if (j.contains("query_mode")) cfg.query_mode = query_mode_from_name(j.at("query_mode").get<std::string>());
    if (j.contains("workspace")) {
        const auto& w = j.at("workspace");
        if (!w.is_object()) throw ConfigError("'workspace' must be an object");
        reject_unknown(w, {"lo", "hi"}, "workspace");
        cfg.workspace.lo = vec3_from(w, "lo");
        cfg.workspace.hi = vec3_from(w, "hi");
    }
    read_field(j, "feature_stride", cfg.feature_stride);
    read_field(j, "differentiable_anchors", cfg.differentiable_anchors);
    read_field(j, "dense_cap", cfg.dense_cap);
    if (j.contains("precision")) cfg.precision = precision_from_name(j.at("precision").get<std::string>());
    cfg.validate();
    return cfg;
}

json model_to(const ModelConfig& cfg) {
    json j;
    j["persons"] = cfg.persons;
    j["joints"] = cfg.joints;
    j["channels"] = cfg.channels;
    j["views"] = cfg.views;
    j["layers"] = cfg.layers;
    j["points"] = cfg.points;
    j["heads"] = cfg.heads;
    j["ffn_width"] = cfg.ffn_width;
    j["in_channels"] = cfg.in_channels;
    j["attention"] = to_name(cfg.attention);
    j["pos_encoding"] = to_name(cfg.pos_encoding);
    j["query_mode"] = to_name(cfg.query_mode);
    j["workspace"] = {{"lo", {cfg.workspace.lo.x(), cfg.workspace.lo.y(), cfg.workspace.lo.z()}},
                      {"hi", {cfg.workspace.hi.x(), cfg.workspace.hi.y(), cfg.workspace.hi.z()}}};
    j["feature_stride"] = cfg.feature_stride;
    j["differentiable_anchors"] = cfg.differentiable_anchors;
    j["dense_cap"] = cfg.dense_cap;
    j["precision"] = to_name(cfg.precision);
    return j;
}

json parse(const std::string& text) {
    try {
        return json::parse(text);
    } catch (const json::exception& e) {
        throw ConfigError(std::string("invalid JSON: ") + e.what());
    }
}

}  // namespace

void RunConfig::validate() const {
    model.validate();
    if (lr <= 0 || beta1 < 0 || beta1 >= 1 || beta2 < 0 || beta2 >= 1 || adam_eps <= 0)
        throw ConfigError("invalid optimizer settings");
    if (decay_epoch < 0 || decay_factor <= 0) throw ConfigError("invalid lr decay settings");
    if (epochs < 1) throw ConfigError("epochs must be >= 1");
    if (grad_accum < 1) throw ConfigError("grad_accum must be >= 1");
    if (confidence_threshold < 0 || confidence_threshold > 1)
        throw ConfigError("confidence_threshold must be in [0,1]");
    if (lambda < 0 || loss_2d_weight < 0) throw ConfigError("loss weights must be >= 0");
    if (checkpoint_every < 0 || log_every < 1) throw ConfigError("invalid logging cadence");
    if (max_steps < 0) throw ConfigError("max_steps must be >= 0");
}

ModelConfig model_config_from_json(const std::string& text) { return model_from(parse(text)); }

RunConfig run_config_from_json(const std::string& text) {
    const json j = parse(text);
    if (!j.is_object()) throw ConfigError("run config must be a JSON object");
    reject_unknown(j,
                   {"model", "lr", "beta1", "beta2", "adam_eps", "decay_epoch", "decay_factor",
                    "epochs", "grad_accum", "seed", "data", "out_dir", "confidence_threshold",
                    "lambda", "loss_2d_weight", "use_2d_loss", "checkpoint_every", "log_every",
                    "max_steps"},
                   "run config");
    RunConfig cfg;
    if (j.contains("model")) cfg.model = model_from(j.at("model"));
    read_field(j, "lr", cfg.lr);
    read_field(j, "beta1", cfg.beta1);
    read_field(j, "beta2", cfg.beta2);
    read_field(j, "adam_eps", cfg.adam_eps);
    read_field(j, "decay_epoch", cfg.decay_epoch);
    read_field(j, "decay_factor", cfg.decay_factor);
    read_field(j, "epochs", cfg.epochs);
    read_field(j, "grad_accum", cfg.grad_accum);
    read_field(j, "seed", cfg.seed);
    read_field(j, "data", cfg.data);
    read_field(j, "out_dir", cfg.out_dir);
    read_field(j, "confidence_threshold", cfg.confidence_threshold);
    read_field(j, "lambda", cfg.lambda);
    read_field(j, "loss_2d_weight", cfg.loss_2d_weight);
    read_field(j, "use_2d_loss", cfg.use_2d_loss);
    read_field(j, "checkpoint_every", cfg.checkpoint_every);
    read_field(j, "log_every", cfg.log_every);
    read_field(j, "max_steps", cfg.max_steps);
    cfg.validate();
    return cfg;
}

std::string model_config_to_json(const ModelConfig& cfg) { return model_to(cfg).dump(2); }

std::string run_config_to_json(const RunConfig& cfg) {
    json j;
    j["model"] = model_to(cfg.model);
    j["lr"] = cfg.lr;
    j["beta1"] = cfg.beta1;
    j["beta2"] = cfg.beta2;
    j["adam_eps"] = cfg.adam_eps;
    j["decay_epoch"] = cfg.decay_epoch;
    j["decay_factor"] = cfg.decay_factor;
    j["epochs"] = cfg.epochs;
    j["grad_accum"] = cfg.grad_accum;
    j["seed"] = cfg.seed;
    j["data"] = cfg.data;
    j["out_dir"] = cfg.out_dir;
    j["confidence_threshold"] = cfg.confidence_threshold;
    j["lambda"] = cfg.lambda;
    j["loss_2d_weight"] = cfg.loss_2d_weight;
    j["use_2d_loss"] = cfg.use_2d_loss;
    j["checkpoint_every"] = cfg.checkpoint_every;
    j["log_every"] = cfg.log_every;
    j["max_steps"] = cfg.max_steps;
    return j.dump(2);
}

const char* to_name(AttentionMode m) {
    return m == AttentionMode::projective ? "projective" : "dense";
}
const char* to_name(PosEncoding m) {
    switch (m) {
        case PosEncoding::rays: return "rays";
        case PosEncoding::coords2d: return "coords2d";
        default: return "none";
    }
}
const char* to_name(QueryMode m) {
    switch (m) {
        case QueryMode::per_joint: return "per_joint";
        case QueryMode::hierarchical: return "hierarchical";
        default: return "hierarchical_adaptive";
    }
}
const char* to_name(Precision p) { return p == Precision::f32 ? "f32" : "f64"; }

AttentionMode attention_from_name(const std::string& s) {
    if (s == "projective") return AttentionMode::projective;
    if (s == "dense") return AttentionMode::dense;
    throw ConfigError("unknown attention mode '" + s + "'");
}
PosEncoding pos_encoding_from_name(const std::string& s) {
    if (s == "rays") return PosEncoding::rays;
    if (s == "coords2d") return PosEncoding::coords2d;
    if (s == "none") return PosEncoding::none;
    throw ConfigError("unknown positional encoding '" + s + "'");
}
QueryMode query_mode_from_name(const std::string& s) {
    if (s == "per_joint") return QueryMode::per_joint;
    if (s == "hierarchical") return QueryMode::hierarchical;
    if (s == "hierarchical_adaptive") return QueryMode::hierarchical_adaptive;
    throw ConfigError("unknown query mode '" + s + "'");
}
Precision precision_from_name(const std::string& s) {
    if (s == "f64") return Precision::f64;
    if (s == "f32") return Precision::f32;
    throw ConfigError("unknown precision '" + s + "'");
}

}  // namespace mvp
