// Command-line front end: dataset generation, training, evaluation,
// inference, gradient checking, ablation grids, and a quick benchmark.
// Exit codes: 0 ok, 1 failed check or runtime error, 2 usage.

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "mvp/checkpoint.hpp"
#include "mvp/config.hpp"
#include "mvp/dataset_io.hpp"
#include "mvp/errors.hpp"
#include "mvp/evaluator.hpp"
#include "mvp/loss.hpp"
#include "mvp/model.hpp"
#include "mvp/ops.hpp"
#include "mvp/rng.hpp"
#include "mvp/scene.hpp"
#include "mvp/trainer.hpp"

namespace {

using namespace mvp;

std::vector<double> parse_double_list(const std::string& s) {
    std::vector<double> out;
    std::stringstream ss(s);
    std::string item;
    while (std::getline(ss, item, ',')) {
        if (item.empty()) continue;
        out.push_back(std::stod(item));
    }
    if (out.empty()) throw UsageError("empty list: '" + s + "'");
    return out;
}

std::vector<std::string> parse_string_list(const std::string& s) {
    std::vector<std::string> out;
    std::stringstream ss(s);
    std::string item;
    while (std::getline(ss, item, ',')) {
        if (!item.empty()) out.push_back(item);
    }
    if (out.empty()) throw UsageError("empty list: '" + s + "'");
    return out;
}

void write_text(const std::string& path, const std::string& text) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw IoError("cannot open for writing: " + path);
    f << text;
}

std::string read_text(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw IoError("cannot open: " + path);
    std::stringstream ss;
    ss << f.rdbuf();
    return ss.str();
}

// ---------------------------------------------------------------- gen-data

struct GenArgs {
    std::string out;
    int scenes = 16;
    int views = 5;
    int max_persons = 3;
    int joints = 5;
    std::uint64_t seed = 1;
    double noise = 0.0;
    double distractors = 0.0;
    int height = 64;
    int width = 64;
    double sigma = 1.5;
    std::vector<double> workspace;  // x0,y0,z0,x1,y1,z1
};

int run_gen_data(const GenArgs& a) {
    SceneConfig cfg;
    cfg.views = a.views;
    cfg.max_persons = a.max_persons;
    cfg.joints = a.joints;
    cfg.noise_std = a.noise;
    cfg.distractor_rate = a.distractors;
    cfg.height = a.height;
    cfg.width = a.width;
    cfg.heatmap_sigma_px = a.sigma;
    if (!a.workspace.empty()) {
        if (a.workspace.size() != 6) throw UsageError("--workspace needs 6 comma-separated numbers");
        cfg.workspace.lo = {a.workspace[0], a.workspace[1], a.workspace[2]};
        cfg.workspace.hi = {a.workspace[3], a.workspace[4], a.workspace[5]};
    }
    std::vector<Scene> scenes;
    scenes.reserve(static_cast<std::size_t>(a.scenes));
    for (int i = 0; i < a.scenes; ++i)
        scenes.push_back(generate_scene(split_seed(a.seed, static_cast<std::uint64_t>(i)), cfg));
    write_dataset(scenes, a.out);
    std::cout << "wrote " << scenes.size() << " scenes to " << a.out << "\n";
    return 0;
}

// ------------------------------------------------------------------- train

struct TrainArgs {
    std::string config;
    std::string data;
    std::string out_dir;
    std::string resume;
    std::int64_t max_steps = -1;
    int epochs = -1;
    double lr = -1.0;
    std::int64_t seed = -1;
    int grad_accum = -1;
    int checkpoint_every = -1;
    int log_every = -1;
};

RunConfig load_run_config(const TrainArgs& a) {
    RunConfig cfg;
    if (!a.config.empty()) cfg = run_config_from_json(read_text(a.config));
    if (!a.data.empty()) cfg.data = a.data;
    if (!a.out_dir.empty()) cfg.out_dir = a.out_dir;
    if (a.max_steps >= 0) cfg.max_steps = a.max_steps;
    if (a.epochs >= 0) cfg.epochs = a.epochs;
    if (a.lr >= 0) cfg.lr = a.lr;
    if (a.seed >= 0) cfg.seed = static_cast<std::uint64_t>(a.seed);
    if (a.grad_accum >= 0) cfg.grad_accum = a.grad_accum;
    if (a.checkpoint_every >= 0) cfg.checkpoint_every = a.checkpoint_every;
    if (a.log_every >= 0) cfg.log_every = a.log_every;
    cfg.validate();
    return cfg;
}

int run_train(const TrainArgs& a) {
    RunConfig cfg = load_run_config(a);
    if (cfg.data.empty()) throw UsageError("train: no dataset (set --data or config 'data')");
    std::vector<Scene> scenes = read_dataset(cfg.data);
    auto trainer = a.resume.empty() ? Trainer(cfg, std::move(scenes))
                                    : Trainer(cfg, std::move(scenes), a.resume);
    const Trainer::Result res = trainer.run();
    std::cout << "trained " << res.steps << " steps, final loss " << res.final_loss << "\n";
    if (!res.checkpoint_path.empty()) std::cout << "checkpoint: " << res.checkpoint_path << "\n";
    return 0;
}

// -------------------------------------------------------------------- eval

struct EvalArgs {
    std::string checkpoint;
    std::string data;
    std::string thresholds = "25,50,100,150,250,500";
    double confidence = 0.1;
    std::string out_csv;
    std::string out_jsonl;
    int threads = 0;
};

int run_eval(const EvalArgs& a) {
    const Checkpoint ckpt = load_checkpoint(a.checkpoint);
    const PoseTransformer model(ckpt.model, ckpt.params);
    const std::vector<Scene> scenes = read_dataset(a.data);
    EvalOptions opt;
    opt.confidence_threshold = a.confidence;
    opt.thresholds_mm = parse_double_list(a.thresholds);
    opt.threads = a.threads;
    const EvalOutput out = evaluate_scenes(model, scenes, opt);
    const std::string csv = metrics_csv(out.rows);
    std::cout << csv;
    if (!a.out_csv.empty()) write_text(a.out_csv, csv);
    if (!a.out_jsonl.empty()) write_text(a.out_jsonl, predictions_jsonl(out.records));
    return 0;
}

// ------------------------------------------------------------------- infer

struct InferArgs {
    std::string checkpoint;
    std::string data;
    int scene = 0;
    double confidence = 0.1;
};

int run_infer(const InferArgs& a) {
    const Checkpoint ckpt = load_checkpoint(a.checkpoint);
    const PoseTransformer model(ckpt.model, ckpt.params);
    const std::vector<Scene> scenes = read_dataset(a.data);
    if (a.scene < 0 || a.scene >= static_cast<int>(scenes.size()))
        throw UsageError("scene index out of range");
    const PoseSet filtered =
        filter_by_confidence(model.infer(scenes[static_cast<std::size_t>(a.scene)]), a.confidence);
    SceneRecord rec;
    rec.prediction = filtered;
    rec.gt_poses = scenes[static_cast<std::size_t>(a.scene)].gt_poses;
    std::cout << predictions_jsonl({rec});
    return 0;
}

// -------------------------------------------------------------- grad-check

struct GradCheckArgs {
    std::uint64_t seed = 1;
    double tolerance = 1e-4;
    double step = 1e-5;
    std::string corrupt;  // test fixture: perturb this block's analytic grad
};

struct GradCheckInput {
    ModelConfig cfg;
    std::vector<Array> features;
    std::vector<CameraParams> cams;
    Array gt;
};

GradCheckInput tiny_reference_input(std::uint64_t seed) {
    GradCheckInput in;
    in.cfg.persons = 2;
    in.cfg.joints = 4;
    in.cfg.channels = 8;
    in.cfg.views = 2;
    in.cfg.layers = 2;
    in.cfg.points = 2;
    in.cfg.heads = 2;
    in.cfg.in_channels = 5;
    in.cfg.differentiable_anchors = true;  // full graph, projection included
    in.cfg.workspace.lo = {-2.0, -2.0, 0.0};
    in.cfg.workspace.hi = {2.0, 2.0, 2.0};
    in.cfg.validate();

    Rng rng(split_seed(seed, 0xfeed));
    const int h = 8, w = 8;
    for (int v = 0; v < in.cfg.views; ++v) {
        Array f(Shape{in.cfg.in_channels, h, w}, 0.0);
        for (std::size_t i = 0; i < f.size(); ++i) f[i] = rng.uniform(0.0, 1.0);
        in.features.push_back(std::move(f));
    }
    const Eigen::Vector3d center = in.cfg.workspace.center();
    in.cams.push_back(look_at({6.0, 0.0, 1.5}, center, {0.0, 0.0, 1.0}, 2.0, 2.0, w, h));
    in.cams.push_back(look_at({0.0, 6.0, 1.2}, center, {0.0, 0.0, 1.0}, 2.0, 2.0, w, h));

    in.gt = Array(Shape{2, in.cfg.joints, 3}, 0.0);
    for (int n = 0; n < 2; ++n)
        for (int j = 0; j < in.cfg.joints; ++j) {
            in.gt.at({n, j, 0}) = rng.uniform(-1.5, 1.5);
            in.gt.at({n, j, 1}) = rng.uniform(-1.5, 1.5);
            in.gt.at({n, j, 2}) = rng.uniform(0.2, 1.8);
        }
    return in;
}

int run_grad_check(const GradCheckArgs& a) {
    const auto t0 = std::chrono::steady_clock::now();
    const GradCheckInput in = tiny_reference_input(a.seed);
    PoseTransformer model(in.cfg, a.seed);
    LossOptions lopt;

    // The refinement head is zero-initialized, which would leave its input
    // weights with exactly zero gradient; jitter every block so all paths
    // carry signal.
    {
        Rng jitter(split_seed(a.seed, 0x71));
        auto& params = model.params();
        for (std::size_t bi = 0; bi < params.size(); ++bi) {
            auto& v = params.entry(bi).value;
            for (std::size_t i = 0; i < v.size(); ++i) v[i] += 0.02 * jitter.normal();
        }
    }

    // Base run fixes the assignments so finite differences never cross a
    // matching discontinuity.
    std::vector<Assignment> fixed;
    {
        Graph g(in.cfg.precision);
        const auto fwd = model.forward(g, in.features, in.cams);
        const TotalLoss tl = total_loss(fwd, in.cfg, in.gt, in.cams, lopt);
        fixed = tl.assignments;
    }
    auto loss_value = [&]() {
        Graph g(in.cfg.precision);
        const auto fwd = model.forward(g, in.features, in.cams);
        Node* loss = nullptr;
        for (std::size_t l = 0; l < fwd.layers.size(); ++l) {
            const LayerLoss ll = hungarian_loss(fwd.layers[l].positions, fwd.layers[l].person_conf,
                                                in.gt, in.cams, in.cfg.workspace, lopt, &fixed[l]);
            loss = loss ? add(loss, ll.loss) : ll.loss;
        }
        return loss->value[0];
    };
    auto analytic = [&]() {
        Graph g(in.cfg.precision);
        const auto fwd = model.forward(g, in.features, in.cams);
        Node* loss = nullptr;
        for (std::size_t l = 0; l < fwd.layers.size(); ++l) {
            const LayerLoss ll = hungarian_loss(fwd.layers[l].positions, fwd.layers[l].person_conf,
                                                in.gt, in.cams, in.cfg.workspace, lopt, &fixed[l]);
            loss = loss ? add(loss, ll.loss) : ll.loss;
        }
        g.backward(loss);
        model.params().zero_grads();
        model.params().collect_grads(fwd.bound);
    };
    analytic();

    auto& params = model.params();
    if (!a.corrupt.empty()) {
        auto& grad = params.find(a.corrupt).grad;
        for (std::size_t i = 0; i < grad.size(); ++i) grad[i] = grad[i] * 1.01 + 0.01;
    }

    bool all_ok = true;
    std::vector<std::string> offenders;
    for (std::size_t bi = 0; bi < params.size(); ++bi) {
        auto& e = params.entry(bi);
        double block_max = 0.0;
        for (std::size_t i = 0; i < e.value.size(); ++i) {
            const double saved = e.value[i];
            const double anal = e.grad[i];
            double err = 0.0;
            // Central differences are only valid where the loss is smooth
            // across [theta-h, theta+h]; relu/clamp/bilinear-cell kinks make
            // it piecewise smooth. A straddled kink disappears as h shrinks,
            // a wrong backward rule does not, so retry failures with
            // smaller steps before believing them.
            for (const double scale : {1.0, 1.0 / 8.0, 1.0 / 64.0}) {
                const double h = a.step * scale * std::max(1.0, std::abs(saved));
                e.value[i] = saved + h;
                const double fp = loss_value();
                e.value[i] = saved - h;
                const double fm = loss_value();
                e.value[i] = saved;
                const double numeric = (fp - fm) / (2.0 * h);
                const double denom = std::max({std::abs(anal), std::abs(numeric), 1e-4});
                err = std::abs(anal - numeric) / denom;
                if (err < a.tolerance) break;
            }
            block_max = std::max(block_max, err);
        }
        const bool ok = block_max < a.tolerance;
        if (!ok) {
            all_ok = false;
            offenders.push_back(e.name);
        }
        std::printf("%-20s max_rel %.3e %s\n", e.name.c_str(), block_max, ok ? "ok" : "FAIL");
    }
    const auto t1 = std::chrono::steady_clock::now();
    const double secs = std::chrono::duration<double>(t1 - t0).count();
    if (all_ok) {
        std::printf("grad-check passed: %zu blocks, %zu scalars, %.1f s\n", params.size(),
                    params.total_scalars(), secs);
        return 0;
    }
    std::printf("grad-check FAILED in:");
    for (const auto& n : offenders) std::printf(" %s", n.c_str());
    std::printf("\n");
    return 1;
}

// ------------------------------------------------------------------ ablate

struct AblateArgs {
    std::string data;
    std::string out_dir;
    std::string pos_encodings = "rays,none";
    std::string query_modes = "hierarchical_adaptive,per_joint";
    std::string points = "4";
    std::string layers = "6";
    int steps = 1500;
    int budget = 8;
    std::uint64_t seed = 1;
    double lr = 1e-4;
    int channels = 64;
};

int run_ablate(const AblateArgs& a) {
    const auto encs = parse_string_list(a.pos_encodings);
    const auto modes = parse_string_list(a.query_modes);
    const auto points = parse_double_list(a.points);
    const auto layers = parse_double_list(a.layers);
    const std::size_t cells = encs.size() * modes.size() * points.size() * layers.size();
    if (cells > static_cast<std::size_t>(a.budget))
        throw ConfigError("ablation grid has " + std::to_string(cells) + " cells, budget is " +
                          std::to_string(a.budget));

    const std::vector<Scene> scenes = read_dataset(a.data);
    if (scenes.empty()) throw UsageError("ablate: empty dataset");
    const Scene& probe = scenes[0];

    std::string csv = "pos_encoding,query_mode,points,layers,steps,final_loss,ap250,recall250,mpjpe_mm\n";
    for (const auto& enc : encs)
        for (const auto& mode : modes)
            for (double k : points)
                for (double l : layers) {
                    RunConfig cfg;
                    cfg.model.views = static_cast<int>(probe.cameras.size());
                    cfg.model.in_channels = probe.features[0].dim(0);
                    cfg.model.joints = probe.gt_poses.dim(1);
                    cfg.model.persons = 4;
                    cfg.model.channels = a.channels;
                    cfg.model.points = static_cast<int>(k);
                    cfg.model.layers = static_cast<int>(l);
                    cfg.model.pos_encoding = pos_encoding_from_name(enc);
                    cfg.model.query_mode = query_mode_from_name(mode);
                    cfg.model.workspace = probe.workspace;
                    cfg.model.feature_stride =
                        static_cast<double>(probe.cameras[0].width) / probe.features[0].dim(2);
                    cfg.lr = a.lr;
                    cfg.seed = a.seed;
                    cfg.epochs = 1 << 20;  // bounded by max_steps
                    cfg.max_steps = a.steps;
                    cfg.checkpoint_every = 0;
                    cfg.validate();

                    Trainer trainer(cfg, scenes);
                    const Trainer::Result res = trainer.run();
                    EvalOptions eopt;
                    eopt.thresholds_mm = {250.0};
                    const EvalOutput ev = evaluate_scenes(trainer.model(), scenes, eopt);
                    double ap250 = 0.0, rec250 = 0.0;
                    std::string mpjpe = "n/a";
                    char buf[64];
                    for (const auto& row : ev.rows) {
                        if (row.metric == "ap" && row.threshold == 250.0 && row.value) ap250 = *row.value;
                        if (row.metric == "recall" && row.threshold == 250.0 && row.value) rec250 = *row.value;
                        if (row.metric == "mpjpe_mm" && row.value) {
                            std::snprintf(buf, sizeof buf, "%.9g", *row.value);
                            mpjpe = buf;
                        }
                    }
                    char line[256];
                    std::snprintf(line, sizeof line, "%s,%s,%d,%d,%lld,%.9g,%.9g,%.9g,%s\n",
                                  enc.c_str(), mode.c_str(), static_cast<int>(k), static_cast<int>(l),
                                  static_cast<long long>(res.steps), res.final_loss, ap250, rec250,
                                  mpjpe.c_str());
                    csv += line;
                    std::cout << line << std::flush;
                }
    if (!a.out_dir.empty()) {
        std::filesystem::create_directories(a.out_dir);
        write_text(a.out_dir + "/comparison.csv", csv);
        std::cout << "wrote " << a.out_dir << "/comparison.csv\n";
    }
    return 0;
}

// ------------------------------------------------------------------- bench

struct BenchArgs {
    int reps = 10;
    std::uint64_t seed = 1;
    int channels = 64;
    int layers = 6;
    int points = 4;
};

Scene scene_with_person_count(const SceneConfig& cfg, std::uint64_t seed, int want) {
    for (std::uint64_t i = 0; i < 512; ++i) {
        Scene s = generate_scene(split_seed(seed, i), cfg);
        if (s.gt_poses.dim(0) == want) return s;
    }
    throw GenerationError("could not sample a scene with the requested person count");
}

int run_bench(const BenchArgs& a) {
    SceneConfig scfg;
    scfg.max_persons = 3;
    ModelConfig mcfg;
    mcfg.views = scfg.views;
    mcfg.in_channels = scfg.joints;
    mcfg.joints = scfg.joints;
    mcfg.persons = 4;
    mcfg.channels = a.channels;
    mcfg.layers = a.layers;
    mcfg.points = a.points;
    mcfg.workspace = scfg.workspace;
    mcfg.validate();
    const PoseTransformer model(mcfg, a.seed);

    SceneConfig one = scfg;
    one.max_persons = 1;
    const Scene s1 = scene_with_person_count(one, a.seed, 1);
    const Scene s3 = scene_with_person_count(scfg, a.seed, scfg.max_persons);

    auto time_forward = [&](const Scene& s) {
        model.infer(s);  // warm up
        const auto t0 = std::chrono::steady_clock::now();
        for (int i = 0; i < a.reps; ++i) model.infer(s);
        const auto t1 = std::chrono::steady_clock::now();
        return std::chrono::duration<double, std::milli>(t1 - t0).count() / a.reps;
    };
    const double ms1 = time_forward(s1);
    const double ms3 = time_forward(s3);
    std::printf("params: %zu\n", model.params().total_scalars());
    std::printf("forward 1 person:  %.2f ms\n", ms1);
    std::printf("forward %d persons: %.2f ms\n", scfg.max_persons, ms3);
    std::printf("ratio: %.3f\n", ms3 / ms1);
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"multi-view multi-person 3D pose regression toolkit"};
    app.require_subcommand(1);

    GenArgs gen;
    auto* cg = app.add_subcommand("gen-data", "generate a synthetic multi-view dataset");
    cg->add_option("--out", gen.out, "output dataset path")->required();
    cg->add_option("--scenes", gen.scenes)->check(CLI::PositiveNumber);
    cg->add_option("--views", gen.views)->check(CLI::Range(2, 64));
    cg->add_option("--max-persons", gen.max_persons)->check(CLI::PositiveNumber);
    cg->add_option("--joints", gen.joints)->check(CLI::PositiveNumber);
    cg->add_option("--seed", gen.seed);
    cg->add_option("--noise", gen.noise, "feature noise stddev")->check(CLI::NonNegativeNumber);
    cg->add_option("--distractors", gen.distractors, "mean spurious blobs per view")
        ->check(CLI::NonNegativeNumber);
    cg->add_option("--height", gen.height)->check(CLI::PositiveNumber);
    cg->add_option("--width", gen.width)->check(CLI::PositiveNumber);
    cg->add_option("--sigma", gen.sigma, "heatmap stddev, px")->check(CLI::PositiveNumber);
    cg->add_option("--workspace", gen.workspace, "x0,y0,z0,x1,y1,z1")->delimiter(',');

    TrainArgs tr;
    auto* ct = app.add_subcommand("train", "train a model");
    ct->add_option("--config", tr.config, "run config JSON");
    ct->add_option("--data", tr.data, "dataset path (overrides config)");
    ct->add_option("--out-dir", tr.out_dir, "output directory (overrides config)");
    ct->add_option("--resume", tr.resume, "checkpoint to resume from");
    ct->add_option("--max-steps", tr.max_steps);
    ct->add_option("--epochs", tr.epochs);
    ct->add_option("--lr", tr.lr);
    ct->add_option("--seed", tr.seed);
    ct->add_option("--grad-accum", tr.grad_accum);
    ct->add_option("--checkpoint-every", tr.checkpoint_every);
    ct->add_option("--log-every", tr.log_every);

    EvalArgs ev;
    auto* ce = app.add_subcommand("eval", "evaluate a checkpoint on a dataset");
    ce->add_option("--checkpoint", ev.checkpoint)->required();
    ce->add_option("--data", ev.data)->required();
    ce->add_option("--thresholds", ev.thresholds, "MPJPE thresholds, mm");
    ce->add_option("--confidence", ev.confidence)->check(CLI::Range(0.0, 1.0));
    ce->add_option("--out-csv", ev.out_csv);
    ce->add_option("--out-jsonl", ev.out_jsonl);
    ce->add_option("--threads", ev.threads)->check(CLI::NonNegativeNumber);

    InferArgs in;
    auto* ci = app.add_subcommand("infer", "run inference on one scene");
    ci->add_option("--checkpoint", in.checkpoint)->required();
    ci->add_option("--data", in.data)->required();
    ci->add_option("--scene", in.scene)->check(CLI::NonNegativeNumber);
    ci->add_option("--confidence", in.confidence)->check(CLI::Range(0.0, 1.0));

    GradCheckArgs gc;
    auto* cgc = app.add_subcommand("grad-check", "finite-difference check of the tiny reference model");
    cgc->add_option("--seed", gc.seed);
    cgc->add_option("--tolerance", gc.tolerance)->check(CLI::PositiveNumber);
    cgc->add_option("--step", gc.step)->check(CLI::PositiveNumber);
    cgc->add_option("--corrupt", gc.corrupt, "testing aid: corrupt this block's analytic gradient");

    AblateArgs ab;
    auto* ca = app.add_subcommand("ablate", "train and compare a small config grid");
    ca->add_option("--data", ab.data)->required();
    ca->add_option("--out-dir", ab.out_dir);
    ca->add_option("--pos-encodings", ab.pos_encodings, "comma list: rays,coords2d,none");
    ca->add_option("--query-modes", ab.query_modes,
                   "comma list: per_joint,hierarchical,hierarchical_adaptive");
    ca->add_option("--points", ab.points, "comma list of K values");
    ca->add_option("--layers", ab.layers, "comma list of L values");
    ca->add_option("--steps", ab.steps)->check(CLI::PositiveNumber);
    ca->add_option("--budget", ab.budget, "max grid cells")->check(CLI::PositiveNumber);
    ca->add_option("--seed", ab.seed);
    ca->add_option("--lr", ab.lr)->check(CLI::PositiveNumber);
    ca->add_option("--channels", ab.channels)->check(CLI::PositiveNumber);

    BenchArgs be;
    auto* cb = app.add_subcommand("bench", "time forward passes at 1 vs max persons");
    cb->add_option("--reps", be.reps)->check(CLI::PositiveNumber);
    cb->add_option("--seed", be.seed);
    cb->add_option("--channels", be.channels)->check(CLI::PositiveNumber);
    cb->add_option("--layers", be.layers)->check(CLI::PositiveNumber);
    cb->add_option("--points", be.points)->check(CLI::PositiveNumber);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }

    try {
        if (cg->parsed()) return run_gen_data(gen);
        if (ct->parsed()) return run_train(tr);
        if (ce->parsed()) return run_eval(ev);
        if (ci->parsed()) return run_infer(in);
        if (cgc->parsed()) return run_grad_check(gc);
        if (ca->parsed()) return run_ablate(ab);
        if (cb->parsed()) return run_bench(be);
    } catch (const UsageError& e) {
        std::cerr << "usage error: " << e.what() << "\n";
        return 2;
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
