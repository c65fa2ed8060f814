// Serial reference vs OpenMP path for the two embarrassingly parallel kernels.

#include "apelab/agents.hpp"
#include "apelab/catalog.hpp"
#include "apelab/dp.hpp"

#include <benchmark/benchmark.h>

namespace {

using namespace apelab;

Execution mode(const benchmark::State& state) {
  return state.range(0) == 0 ? Execution::Serial : Execution::Parallel;
}

void BM_EnumerateFixedPoints(benchmark::State& state) {
  Rng rng(11);
  const Mdp mdp = make_random_episodic_mdp(12, 2, rng);
  const std::vector<int> groups = {0, 1, 2, 3, 0, 1, 2, 3, 0, 1, 2, 3};
  const FeatureMap fm = FeatureMap::aggregation(groups);
  for (auto _ : state) {
    benchmark::DoNotOptimize(enumerate_fixed_points(mdp, fm, mode(state)));
  }
  state.SetLabel(state.range(0) == 0 ? "serial" : "parallel");
}
BENCHMARK(BM_EnumerateFixedPoints)->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond)->UseRealTime();

void BM_MultiSeedQLearning(benchmark::State& state) {
  const Counterexample ce = make_counterexample(CounterexampleKind::Oscillating);
  for (auto _ : state) {
    auto runs = parallel_map(
        30,
        [&](std::size_t seed) {
          AgentConfig cfg;
          cfg.n_episodes = 5000;
          cfg.seed = seed;
          return q_learning_run(ce.mdp, ce.features, cfg).records.size();
        },
        mode(state));
    benchmark::DoNotOptimize(runs);
  }
  state.SetLabel(state.range(0) == 0 ? "serial" : "parallel");
}
BENCHMARK(BM_MultiSeedQLearning)->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond)->UseRealTime();

void BM_ApiRhoGrid(benchmark::State& state) {
  const Counterexample ce = make_counterexample(CounterexampleKind::MultipleFixedPoint);
  for (auto _ : state) {
    auto traces = parallel_map(
        1001,
        [&](std::size_t k) {
          return run_api(ce.mdp, ce.features, policy_with_rho(static_cast<double>(k) / 1000.0), 100)
              .iterations.size();
        },
        mode(state));
    benchmark::DoNotOptimize(traces);
  }
  state.SetLabel(state.range(0) == 0 ? "serial" : "parallel");
}
BENCHMARK(BM_ApiRhoGrid)->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond)->UseRealTime();

}  // namespace

BENCHMARK_MAIN();
