#include <benchmark/benchmark.h>

#include "mvp/loss.hpp"
#include "mvp/match.hpp"
#include "mvp/model.hpp"
#include "mvp/ops.hpp"
#include "mvp/rng.hpp"
#include "mvp/sampling.hpp"
#include "mvp/scene.hpp"

namespace {

using namespace mvp;

SceneConfig desk_scene_config() {
    SceneConfig cfg;
    cfg.views = 5;
    cfg.max_persons = 3;
    cfg.joints = 5;
    return cfg;
}

ModelConfig desk_model_config() {
    ModelConfig cfg;
    cfg.views = 5;
    cfg.in_channels = 5;
    cfg.joints = 5;
    cfg.persons = 4;
    cfg.channels = 64;
    cfg.layers = 6;
    cfg.points = 4;
    return cfg;
}

void BM_forward_desk(benchmark::State& state) {
    const Scene scene = generate_scene(7, desk_scene_config());
    const PoseTransformer model(desk_model_config(), 1);
    for (auto _ : state) benchmark::DoNotOptimize(model.infer(scene));
}
BENCHMARK(BM_forward_desk)->Unit(benchmark::kMillisecond);

void BM_train_step_desk(benchmark::State& state) {
    const Scene scene = generate_scene(7, desk_scene_config());
    const ModelConfig mcfg = desk_model_config();
    PoseTransformer model(mcfg, 1);
    const LossOptions lopt;
    for (auto _ : state) {
        Graph g;
        const auto fwd = model.forward(g, scene.features, scene.cameras);
        const TotalLoss tl = total_loss(fwd, mcfg, scene.gt_poses, scene.cameras, lopt);
        g.backward(tl.loss);
        model.params().collect_grads(fwd.bound);
        model.params().zero_grads();
    }
}
BENCHMARK(BM_train_step_desk)->Unit(benchmark::kMillisecond);

void BM_grid_sample(benchmark::State& state) {
    const int c = 64, h = 64, w = 64, q = 240;
    Rng rng(3);
    Array feat(Shape{c, h, w}, 0.0);
    for (std::size_t i = 0; i < feat.size(); ++i) feat[i] = rng.uniform();
    Array pts(Shape{q, 2}, 0.0);
    for (int i = 0; i < q; ++i) {
        pts.at({i, 0}) = rng.uniform(0.0, w);
        pts.at({i, 1}) = rng.uniform(0.0, h);
    }
    for (auto _ : state) {
        Graph g;
        benchmark::DoNotOptimize(grid_sample(g.constant(feat), g.constant(pts)));
    }
}
BENCHMARK(BM_grid_sample);

void BM_pointwise_conv(benchmark::State& state) {
    const int cin = 8, cout = 64, h = 64, w = 64;
    Rng rng(5);
    Array x(Shape{cin, h, w}, 0.0), k(Shape{cout, cin, 1, 1}, 0.0), b(Shape{cout}, 0.0);
    for (std::size_t i = 0; i < x.size(); ++i) x[i] = rng.uniform();
    for (std::size_t i = 0; i < k.size(); ++i) k[i] = rng.normal();
    for (auto _ : state) {
        Graph g;
        benchmark::DoNotOptimize(conv2d(g.constant(x), g.constant(k), g.constant(b), 1, 0));
    }
}
BENCHMARK(BM_pointwise_conv)->Unit(benchmark::kMillisecond);

void BM_hungarian(benchmark::State& state) {
    const int n = static_cast<int>(state.range(0));
    Rng rng(11);
    Array cost(Shape{n, n}, 0.0);
    for (std::size_t i = 0; i < cost.size(); ++i) cost[i] = rng.uniform(-1.0, 1.0);
    for (auto _ : state) benchmark::DoNotOptimize(hungarian(cost));
}
BENCHMARK(BM_hungarian)->Arg(4)->Arg(6)->Arg(12);

void BM_scene_generation(benchmark::State& state) {
    const SceneConfig cfg = desk_scene_config();
    std::uint64_t seed = 0;
    for (auto _ : state) benchmark::DoNotOptimize(generate_scene(seed++, cfg));
}
BENCHMARK(BM_scene_generation)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
