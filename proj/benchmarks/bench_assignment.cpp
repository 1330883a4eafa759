#include <benchmark/benchmark.h>

#include <random>

#include "recall/assignment.hpp"

namespace {

recall::CostMatrix random_costs(std::size_t rows, std::size_t cols, unsigned seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::vector<double> values(rows * cols);
  for (auto& v : values) v = u(rng);
  return recall::CostMatrix(rows, cols, values);
}

void BM_Hungarian(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  const auto cost = random_costs(n, n, 1);
  for (auto _ : state) {
    benchmark::DoNotOptimize(recall::optimal_assignment(cost).cost);
  }
  state.SetComplexityN(state.range(0));
}
BENCHMARK(BM_Hungarian)->RangeMultiplier(2)->Range(16, 512)->Complexity();

// Rows matched to few columns with equal capacities, as in block filling.
void BM_Capacitated(benchmark::State& state) {
  const auto blocks = static_cast<std::size_t>(state.range(0));
  const std::size_t size = 20;
  const auto cost = random_costs(blocks * (size - 1), blocks, 2);
  const std::vector<std::size_t> caps(blocks, size - 1);
  for (auto _ : state) {
    benchmark::DoNotOptimize(recall::optimal_capacitated_assignment(cost, caps).cost);
  }
}
BENCHMARK(BM_Capacitated)->Arg(10)->Arg(50)->Arg(100);

}  // namespace
