#include "fp3d/approximator.hpp"
#include "fp3d/environment.hpp"
#include "fp3d/pipeline.hpp"
#include "fp3d/sldas.hpp"

#include <benchmark/benchmark.h>

#include <random>

using namespace fp3d;

namespace {

const CanvasConfig kCanvas{48, 48, 3};

// Half of a 30-module random netlist already placed.
struct MidEpisode
{
    Environment env{random_netlist(30, 8, 3, 17), kCanvas};
    CanvasState state = env.reset();

    MidEpisode()
    {
        std::mt19937_64 rng(3);
        for (int i = 0; i < 15; ++i) {
            auto legal = env.legal_actions(state);
            state = env.step(state, legal[rng() % legal.size()]).state;
        }
    }
};

const MidEpisode &mid()
{
    static const MidEpisode m;
    return m;
}

void BM_LegalActions(benchmark::State &st)
{
    const auto &m = mid();
    for (auto _ : st)
        benchmark::DoNotOptimize(m.env.legal_actions(m.state));
}
BENCHMARK(BM_LegalActions);

void BM_WlIncreaseMap(benchmark::State &st)
{
    const auto &m = mid();
    for (auto _ : st)
        benchmark::DoNotOptimize(m.env.wl_increase_map(m.state));
}
BENCHMARK(BM_WlIncreaseMap);

void BM_FeatureMaps(benchmark::State &st)
{
    const auto &m = mid();
    for (auto _ : st)
        benchmark::DoNotOptimize(m.env.feature_maps(m.state, nullptr));
}
BENCHMARK(BM_FeatureMaps);

void BM_Knn(benchmark::State &st)
{
    const auto &m = mid();
    const auto legal = m.env.legal_actions(m.state);
    std::mt19937_64 rng(5);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    const int k = int(st.range(0));
    for (auto _ : st) {
        ContinuousAction a{{u(rng), u(rng), u(rng)}};
        benchmark::DoNotOptimize(knn(a, legal, k, kCanvas));
    }
    st.counters["legal"] = double(legal.size());
}
BENCHMARK(BM_Knn)->Arg(1)->Arg(5)->Arg(50);

void BM_Forward(benchmark::State &st)
{
    const int in = feature_length(kCanvas);
    auto p = NetParams::initialized(Role::actor, in, 1);
    Eigen::MatrixXd x = Eigen::MatrixXd::Random(in, st.range(0));
    for (auto _ : st)
        benchmark::DoNotOptimize(forward(p, x));
    st.SetItemsProcessed(st.iterations() * st.range(0));
}
BENCHMARK(BM_Forward)->Arg(1)->Arg(64);

void BM_Backward(benchmark::State &st)
{
    const int in = feature_length(kCanvas);
    auto p = NetParams::initialized(Role::critic, in + 3, 1);
    Batch b{Eigen::MatrixXd::Random(in + 3, st.range(0)), Eigen::MatrixXd::Random(3, st.range(0)).cwiseAbs()};
    for (auto _ : st)
        benchmark::DoNotOptimize(backward(p, b));
    st.SetItemsProcessed(st.iterations() * st.range(0));
}
BENCHMARK(BM_Backward)->Arg(64);

void BM_RandomEpisode(benchmark::State &st)
{
    Environment env(random_netlist(10, 16, 4, 2024), CanvasConfig{16, 16, 2});
    std::uint64_t seed = 0;
    for (auto _ : st)
        benchmark::DoNotOptimize(random_episode(env, seed++));
}
BENCHMARK(BM_RandomEpisode);

} // namespace
BENCHMARK_MAIN();
