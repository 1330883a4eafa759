#include <benchmark/benchmark.h>

#include "recall/simulation.hpp"
#include "recall/stratification.hpp"

namespace {

using namespace recall;

void BM_BuildBlocks(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  const auto sim = generate_dataset(Scenario::mis_mis, n,
                                    RecallBiasSpec::constant(0.1, 0.2), 4);
  const RankMahalanobis geometry(sim.data.covariates());
  int rounds = 0;
  for (auto _ : state) {
    const auto res = build_blocks(geometry, static_cast<std::size_t>(state.range(1)), 7);
    rounds = res.rounds;
    benchmark::DoNotOptimize(res.objective_trace.back());
  }
  state.counters["rounds"] = rounds;
}
BENCHMARK(BM_BuildBlocks)
    ->Args({500, 50})
    ->Args({2000, 50})
    ->Args({2000, 20})
    ->Unit(benchmark::kMillisecond);

void BM_RankMahalanobis(benchmark::State& state) {
  const auto sim = generate_dataset(Scenario::cor_cor,
                                    static_cast<std::size_t>(state.range(0)),
                                    RecallBiasSpec::constant(0.1, 0.2), 5);
  for (auto _ : state) {
    const RankMahalanobis geometry(sim.data.covariates());
    benchmark::DoNotOptimize(geometry.distance(0, 1));
  }
}
BENCHMARK(BM_RankMahalanobis)->Arg(2000)->Arg(20000)->Unit(benchmark::kMillisecond);

}  // namespace
