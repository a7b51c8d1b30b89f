#include <benchmark/benchmark.h>

#include "fedseg/fedavg.hpp"
#include "fedseg/simulate.hpp"

using namespace fedseg;

namespace {

// Aggregating k copies of a depth-3 base-16 U-Net parameter set.
void BM_FedAvg(benchmark::State& state) {
  const auto k = static_cast<std::size_t>(state.range(0));
  std::vector<ParameterSet<float>> sets;
  for (std::size_t i = 0; i < k; ++i) sets.push_back(initial_global_model(UNetConfig{1, 3, 16}, i));
  std::vector<WeightedUpdate<float>> updates;
  for (std::size_t i = 0; i < k; ++i) updates.push_back({&sets[i], 35});
  for (auto _ : state) benchmark::DoNotOptimize(fedavg<float>(updates, Weighting::SampleCount));
  state.SetBytesProcessed(static_cast<std::int64_t>(state.iterations() * k * sets[0].element_count() * sizeof(float)));
}
BENCHMARK(BM_FedAvg)->Arg(2)->Arg(8)->Unit(benchmark::kMicrosecond);

void BM_DiffNorm(benchmark::State& state) {
  const auto a = initial_global_model(UNetConfig{1, 3, 16}, 1);
  const auto b = initial_global_model(UNetConfig{1, 3, 16}, 2);
  for (auto _ : state) benchmark::DoNotOptimize(diff_norm(a, b));
}
BENCHMARK(BM_DiffNorm)->Unit(benchmark::kMicrosecond);

}  // namespace

BENCHMARK_MAIN();
