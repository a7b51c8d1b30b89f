#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <utility>
#include <vector>

#include "fedseg/adam.hpp"
#include "fedseg/data.hpp"
#include "fedseg/unet.hpp"

namespace fedseg {

// Model plus its optimizer state. One train_step = forward (train mode),
// mean BCE, full backward, one Adam update.
template <typename T>
class Trainer {
 public:
  Trainer(UNet<T> model, nn::AdamHyper hyper) : model_(std::move(model)) { adam_.hyper = hyper; }

  // Returns the loss measured before the update.
  double train_step(const Tensor<T>& images, const Tensor<T>& masks);

  UNet<T>& model() noexcept { return model_; }
  const UNet<T>& model() const noexcept { return model_; }
  const nn::AdamState<T>& optimizer() const noexcept { return adam_; }

 private:
  UNet<T> model_;
  nn::AdamState<T> adam_;
};

struct EpochStats {
  std::size_t steps = 0;
  std::size_t samples_used = 0;
  std::size_t samples_dropped = 0;
  double mean_loss = 0.0;
};

// Shuffles 0..n-1 and cuts it into batches of batch_size. A trailing batch
// of exactly one sample is dropped (batch norm needs two); a trailing batch
// of two or more is kept.
std::vector<std::vector<std::size_t>> plan_batches(std::size_t n, std::size_t batch_size, Rng& rng);

// Stacks the selected samples into NCHW images and N x 1 x H x W masks.
std::pair<Tensor<float>, Tensor<float>> make_batch(const data::Dataset& dataset,
                                                   std::span<const std::size_t> indices);

EpochStats train_epoch(Trainer<float>& trainer, const data::Dataset& dataset, std::size_t batch_size, Rng& rng);

struct LocalTrainingOptions {
  std::size_t batch_size = 4;
  std::size_t epochs_per_call = 1;
  nn::AdamHyper adam;
};

// Node-side training loop shared by federated clients and the centralized
// baseline. The shuffle stream and Adam state persist across calls; model
// parameters can be replaced between calls.
class LocalTrainer {
 public:
  LocalTrainer(const UNetConfig& config, ParameterSet<float> initial, data::Dataset dataset,
               LocalTrainingOptions options, std::uint64_t seed);

  void load(const ParameterSet<float>& params) { trainer_.model().load_parameters(params); }

  // Runs options.epochs_per_call epochs; returns stats of the last call
  // with mean_loss averaged over every step taken.
  EpochStats run();

  const ParameterSet<float>& parameters() const noexcept { return trainer_.model().parameters(); }
  const UNet<float>& model() const noexcept { return trainer_.model(); }
  const data::Dataset& dataset() const noexcept { return dataset_; }
  const nn::AdamState<float>& optimizer() const noexcept { return trainer_.optimizer(); }

 private:
  Trainer<float> trainer_;
  data::Dataset dataset_;
  LocalTrainingOptions options_;
  Rng rng_;
};

}  // namespace fedseg
