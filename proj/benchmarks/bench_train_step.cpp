#include <benchmark/benchmark.h>

#include "fedseg/data.hpp"
#include "fedseg/trainer.hpp"

using namespace fedseg;

namespace {

// One Adam step of the default-size model on a batch of four 64x64 CT-like images.
void BM_TrainStep(benchmark::State& state) {
  UNetConfig cfg;
  cfg.depth = static_cast<std::size_t>(state.range(0));
  cfg.base_channels = static_cast<std::size_t>(state.range(1));
  Rng rng(3);
  Trainer<float> trainer(UNet<float>::build(cfg, rng), nn::AdamHyper{});
  const auto d = data::generate(data::DomainSpec::ct_like(64), 4, 4);
  Tensor<float> images({4, 1, 64, 64}), masks({4, 1, 64, 64});
  for (std::size_t i = 0; i < 4; ++i) {
    std::copy(d.samples[i].image.data().begin(), d.samples[i].image.data().end(), images.data().begin() + i * 4096);
    std::copy(d.samples[i].mask.data().begin(), d.samples[i].mask.data().end(), masks.data().begin() + i * 4096);
  }
  for (auto _ : state) benchmark::DoNotOptimize(trainer.train_step(images, masks));
}
BENCHMARK(BM_TrainStep)->Args({2, 16})->Args({3, 16})->Unit(benchmark::kMillisecond);

void BM_Predict(benchmark::State& state) {
  UNetConfig cfg;
  cfg.depth = 3;
  Rng rng(5);
  const auto model = UNet<float>::build(cfg, rng);
  const auto x = rng_normal<float>(rng, {8, 1, 64, 64}, 0.0, 1.0);
  for (auto _ : state) benchmark::DoNotOptimize(model.predict(x));
}
BENCHMARK(BM_Predict)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
