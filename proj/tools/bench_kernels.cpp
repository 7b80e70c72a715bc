// Serial reference vs OpenMP path for the data-parallel kernels.

#include <benchmark/benchmark.h>

#include "isaclab/isacnn.hpp"
#include "isaclab/solvers.hpp"

using namespace isaclab;

namespace {

Exec exec_of(const benchmark::State& st)
{
    return st.range(0) ? Exec::parallel : Exec::serial;
}

SystemConfig bench_config()
{
    SystemConfig cfg;  // full-scale: 16 x 16 antennas, 5 users, L = 20
    cfg.seed = 3;
    return cfg;
}

struct Fixture {
    Dataset data;
    std::vector<const Scene*> scenes;
    nn::NetworkParams params;

    Fixture()
    {
        const SystemConfig cfg = bench_config();
        data = generate_dataset(cfg, 256, Stream::test, Exec::serial);
        for (const auto& s : data.samples) {
            scenes.push_back(&s);
        }
        params = nn::init_params(make_architecture(nn::ArchKind::isacnn, cfg.feature_len(), cfg.n_tx), 1);
    }
};

const Fixture& fixture()
{
    static const Fixture f;
    return f;
}

void BM_GenerateDataset(benchmark::State& st)
{
    const SystemConfig cfg = bench_config();
    for (auto _ : st) {
        benchmark::DoNotOptimize(generate_dataset(cfg, 128, Stream::test, exec_of(st)));
    }
}

void BM_Forward(benchmark::State& st)
{
    const Fixture& f = fixture();
    for (auto _ : st) {
        benchmark::DoNotOptimize(forward(f.params, f.scenes, nn::Mode::infer, nullptr, exec_of(st)));
    }
}

void BM_ForwardBackward(benchmark::State& st)
{
    const Fixture& f = fixture();
    for (auto _ : st) {
        nn::ForwardCache cache;
        const auto out = forward(f.params, f.scenes, nn::Mode::train, &cache, exec_of(st));
        std::vector<RVec> g;
        g.reserve(out.size());
        for (std::size_t i = 0; i < out.size(); ++i) {
            g.push_back(loss_grad_sigma(out[i].sigma_pred.values, *f.scenes[i], 0.5));
        }
        benchmark::DoNotOptimize(backward(f.params, cache, out, g, exec_of(st)));
    }
}

void BM_GridOracle(benchmark::State& st)
{
    SystemConfig cfg = bench_config();
    cfg.n_tx = 3;
    const Scene sc = generate_scene(cfg, Stream::test, 0);
    for (auto _ : st) {
        benchmark::DoNotOptimize(grid_oracle(sc, 0.5, sc.sense_power / 100, exec_of(st)));
    }
}

} // namespace

BENCHMARK(BM_GenerateDataset)->Arg(0)->Arg(1)->ArgName("parallel")->Unit(benchmark::kMillisecond);
BENCHMARK(BM_Forward)->Arg(0)->Arg(1)->ArgName("parallel")->Unit(benchmark::kMillisecond);
BENCHMARK(BM_ForwardBackward)->Arg(0)->Arg(1)->ArgName("parallel")->Unit(benchmark::kMillisecond);
BENCHMARK(BM_GridOracle)->Arg(0)->Arg(1)->ArgName("parallel")->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();
