#include <benchmark/benchmark.h>

#include "fedseg/nn.hpp"
#include "fedseg/rng.hpp"

using namespace fedseg;

namespace {

// args: channels in/out, spatial size, batch 4, 3x3 kernel
void BM_ConvForward(benchmark::State& state) {
  const auto c = static_cast<std::size_t>(state.range(0));
  const auto s = static_cast<std::size_t>(state.range(1));
  Rng rng(1);
  const auto x = rng_normal<float>(rng, {4, c, s, s}, 0.0, 1.0);
  const auto w = rng_normal<float>(rng, {c, c, 3, 3}, 0.0, 0.1);
  const auto b = Tensor<float>::zeros({c});
  for (auto _ : state) benchmark::DoNotOptimize(nn::conv2d_forward(x, w, b));
  state.SetItemsProcessed(static_cast<std::int64_t>(state.iterations() * 4 * c * c * 9 * s * s));
}
BENCHMARK(BM_ConvForward)->Args({16, 64})->Args({32, 32})->Args({64, 16})->Unit(benchmark::kMicrosecond);

void BM_ConvBackward(benchmark::State& state) {
  const auto c = static_cast<std::size_t>(state.range(0));
  const auto s = static_cast<std::size_t>(state.range(1));
  Rng rng(2);
  const auto x = rng_normal<float>(rng, {4, c, s, s}, 0.0, 1.0);
  const auto w = rng_normal<float>(rng, {c, c, 3, 3}, 0.0, 0.1);
  const auto up = rng_normal<float>(rng, {4, c, s, s}, 0.0, 1.0);
  for (auto _ : state) benchmark::DoNotOptimize(nn::conv2d_backward(x, w, up));
}
BENCHMARK(BM_ConvBackward)->Args({16, 64})->Args({32, 32})->Args({64, 16})->Unit(benchmark::kMicrosecond);

}  // namespace

BENCHMARK_MAIN();
