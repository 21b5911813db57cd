#include <doctest.h>

#include <string>

#include "mvp/config.hpp"
#include "mvp/errors.hpp"

using namespace mvp;

namespace {

RunConfig nondefault_run() {
    RunConfig cfg;
    cfg.model.persons = 3;
    cfg.model.joints = 15;
    cfg.model.channels = 32;
    cfg.model.views = 4;
    cfg.model.layers = 3;
    cfg.model.points = 6;
    cfg.model.heads = 8;
    cfg.model.ffn_width = 48;
    cfg.model.in_channels = 15;
    cfg.model.attention = AttentionMode::dense;
    cfg.model.pos_encoding = PosEncoding::coords2d;
    cfg.model.query_mode = QueryMode::per_joint;
    cfg.model.workspace.lo = {-1.5, -1.25, 0.25};
    cfg.model.workspace.hi = {1.5, 1.75, 2.25};
    cfg.model.feature_stride = 2.0;
    cfg.model.differentiable_anchors = true;
    cfg.model.dense_cap = 1 << 20;
    cfg.model.precision = Precision::f32;
    cfg.lr = 3e-4;
    cfg.beta1 = 0.85;
    cfg.beta2 = 0.995;
    cfg.adam_eps = 1e-9;
    cfg.decay_epoch = 7;
    cfg.decay_factor = 0.25;
    cfg.epochs = 11;
    cfg.grad_accum = 4;
    cfg.seed = 42;
    cfg.data = "/tmp/some.mvpd";
    cfg.out_dir = "/tmp/run";
    cfg.confidence_threshold = 0.35;
    cfg.lambda = 1.75;
    cfg.loss_2d_weight = 0.5;
    cfg.use_2d_loss = false;
    cfg.checkpoint_every = 250;
    cfg.log_every = 10;
    cfg.max_steps = 12345678901LL;
    return cfg;
}

void check_equal(const ModelConfig& a, const ModelConfig& b) {
    CHECK(a.persons == b.persons);
    CHECK(a.joints == b.joints);
    CHECK(a.channels == b.channels);
    CHECK(a.views == b.views);
    CHECK(a.layers == b.layers);
    CHECK(a.points == b.points);
    CHECK(a.heads == b.heads);
    CHECK(a.ffn_width == b.ffn_width);
    CHECK(a.in_channels == b.in_channels);
    CHECK(a.attention == b.attention);
    CHECK(a.pos_encoding == b.pos_encoding);
    CHECK(a.query_mode == b.query_mode);
    CHECK((a.workspace.lo.array() == b.workspace.lo.array()).all());
    CHECK((a.workspace.hi.array() == b.workspace.hi.array()).all());
    CHECK(a.feature_stride == b.feature_stride);
    CHECK(a.differentiable_anchors == b.differentiable_anchors);
    CHECK(a.dense_cap == b.dense_cap);
    CHECK(a.precision == b.precision);
}

}  // namespace

TEST_CASE("model config json round trip is lossless") {
    const ModelConfig cfg = nondefault_run().model;
    const ModelConfig back = model_config_from_json(model_config_to_json(cfg));
    check_equal(back, cfg);
}

TEST_CASE("run config json round trip is lossless") {
    const RunConfig cfg = nondefault_run();
    const RunConfig back = run_config_from_json(run_config_to_json(cfg));
    check_equal(back.model, cfg.model);
    CHECK(back.lr == cfg.lr);
    CHECK(back.beta1 == cfg.beta1);
    CHECK(back.beta2 == cfg.beta2);
    CHECK(back.adam_eps == cfg.adam_eps);
    CHECK(back.decay_epoch == cfg.decay_epoch);
    CHECK(back.decay_factor == cfg.decay_factor);
    CHECK(back.epochs == cfg.epochs);
    CHECK(back.grad_accum == cfg.grad_accum);
    CHECK(back.seed == cfg.seed);
    CHECK(back.data == cfg.data);
    CHECK(back.out_dir == cfg.out_dir);
    CHECK(back.confidence_threshold == cfg.confidence_threshold);
    CHECK(back.lambda == cfg.lambda);
    CHECK(back.loss_2d_weight == cfg.loss_2d_weight);
    CHECK(back.use_2d_loss == cfg.use_2d_loss);
    CHECK(back.checkpoint_every == cfg.checkpoint_every);
    CHECK(back.log_every == cfg.log_every);
    CHECK(back.max_steps == cfg.max_steps);
}

TEST_CASE("unknown keys are rejected at every level") {
    const std::string model_json = model_config_to_json(ModelConfig{});
    const std::string run_json = run_config_to_json(RunConfig{});

    // valid as-is
    CHECK_NOTHROW(model_config_from_json(model_json));
    CHECK_NOTHROW(run_config_from_json(run_json));

    auto inject = [](const std::string& json, const std::string& key) {
        // insert after the opening brace
        const auto brace = json.find('{');
        return json.substr(0, brace + 1) + "\"" + key + "\": 1," + json.substr(brace + 1);
    };
    CHECK_THROWS_AS(model_config_from_json(inject(model_json, "persns")), ConfigError);
    CHECK_THROWS_AS(run_config_from_json(inject(run_json, "lerning_rate")), ConfigError);

    // nested: unknown key inside model / workspace blocks
    std::string nested = run_json;
    const auto model_pos = nested.find("\"model\"");
    REQUIRE(model_pos != std::string::npos);
    const auto inner_brace = nested.find('{', model_pos);
    nested.insert(inner_brace + 1, "\"stray\": 2,");
    CHECK_THROWS_AS(run_config_from_json(nested), ConfigError);
}

TEST_CASE("malformed documents and wrong types throw") {
    CHECK_THROWS_AS(model_config_from_json("not json"), ConfigError);
    CHECK_THROWS_AS(model_config_from_json("[1,2,3]"), ConfigError);
    CHECK_THROWS_AS(model_config_from_json(R"({"persons": "four"})"), ConfigError);
    CHECK_THROWS_AS(run_config_from_json(R"({"lr": []})"), ConfigError);
}

TEST_CASE("missing keys keep defaults") {
    const ModelConfig cfg = model_config_from_json(R"({"persons": 7})");
    CHECK(cfg.persons == 7);
    CHECK(cfg.joints == ModelConfig{}.joints);
    CHECK(cfg.channels == ModelConfig{}.channels);

    const RunConfig run = run_config_from_json(R"({"lr": 0.5})");
    CHECK(run.lr == 0.5);
    CHECK(run.epochs == RunConfig{}.epochs);
}

TEST_CASE("enum names round trip and reject junk") {
    CHECK(attention_from_name(to_name(AttentionMode::projective)) == AttentionMode::projective);
    CHECK(attention_from_name(to_name(AttentionMode::dense)) == AttentionMode::dense);
    for (PosEncoding e : {PosEncoding::rays, PosEncoding::coords2d, PosEncoding::none})
        CHECK(pos_encoding_from_name(to_name(e)) == e);
    for (QueryMode m : {QueryMode::per_joint, QueryMode::hierarchical, QueryMode::hierarchical_adaptive})
        CHECK(query_mode_from_name(to_name(m)) == m);
    for (Precision p : {Precision::f64, Precision::f32})
        CHECK(precision_from_name(to_name(p)) == p);

    CHECK_THROWS_AS(attention_from_name("sparse"), ConfigError);
    CHECK_THROWS_AS(pos_encoding_from_name(""), ConfigError);
    CHECK_THROWS_AS(query_mode_from_name("per-joint"), ConfigError);
    CHECK_THROWS_AS(precision_from_name("f16"), ConfigError);
}

TEST_CASE("config validation catches bad values") {
    SUBCASE("model") {
        ModelConfig cfg;
        cfg.channels = 6;
        cfg.heads = 4;  // 6 % 4 != 0
        CHECK_THROWS_AS(cfg.validate(), ConfigError);
        cfg = ModelConfig{};
        cfg.persons = 0;
        CHECK_THROWS_AS(cfg.validate(), ConfigError);
        cfg = ModelConfig{};
        cfg.feature_stride = 0.0;
        CHECK_THROWS_AS(cfg.validate(), ConfigError);
        cfg = ModelConfig{};
        cfg.workspace.hi = cfg.workspace.lo;
        CHECK_THROWS_AS(cfg.validate(), ConfigError);
    }
    SUBCASE("run") {
        RunConfig cfg;
        CHECK_NOTHROW(cfg.validate());
        cfg.lr = 0.0;
        CHECK_THROWS_AS(cfg.validate(), ConfigError);
        cfg = RunConfig{};
        cfg.beta1 = 1.0;
        CHECK_THROWS_AS(cfg.validate(), ConfigError);
        cfg = RunConfig{};
        cfg.epochs = 0;
        CHECK_THROWS_AS(cfg.validate(), ConfigError);
        cfg = RunConfig{};
        cfg.grad_accum = 0;
        CHECK_THROWS_AS(cfg.validate(), ConfigError);
        cfg = RunConfig{};
        cfg.max_steps = -1;
        CHECK_THROWS_AS(cfg.validate(), ConfigError);
    }
}
