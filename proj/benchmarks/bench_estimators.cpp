#include <benchmark/benchmark.h>

#include <map>

#include "recall/estimators.hpp"
#include "recall/inference.hpp"
#include "recall/simulation.hpp"

namespace {

using namespace recall;

const SimulatedData& dataset(std::size_t n) {
  static std::map<std::size_t, SimulatedData> cache;
  auto it = cache.find(n);
  if (it == cache.end()) {
    it = cache.emplace(n, generate_dataset(Scenario::cor_cor, n,
                                           RecallBiasSpec::constant(0.1, 0.2), 3))
             .first;
  }
  return it->second;
}

void BM_FitMle(benchmark::State& state) {
  const auto& sim = dataset(static_cast<std::size_t>(state.range(0)));
  const auto models = ModelSpec::all_covariates(sim.data.dim());
  const auto spec = RecallBiasSpec::constant(0.1, 0.2);
  for (auto _ : state) {
    benchmark::DoNotOptimize(fit_mle(sim.data, spec, models).loglik);
  }
}
BENCHMARK(BM_FitMle)->Arg(1000)->Arg(5000)->Arg(20000)->Unit(benchmark::kMillisecond);

void BM_Estimator(benchmark::State& state) {
  const auto& sim = dataset(2000);
  EstimatorConfig cfg;
  cfg.method = static_cast<Method>(state.range(0));
  cfg.block_size = 50;
  state.SetLabel(std::string(to_string(cfg.method)));
  const auto spec = RecallBiasSpec::constant(0.1, 0.2);
  for (auto _ : state) {
    benchmark::DoNotOptimize(run_estimator(sim.data, spec, cfg).result.tau_hat);
  }
}
BENCHMARK(BM_Estimator)
    ->DenseRange(0, 5)
    ->Unit(benchmark::kMillisecond);

}  // namespace
