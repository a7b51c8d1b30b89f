#include "fedseg/trainer.hpp"

#include <algorithm>

#include "fedseg/log.hpp"

namespace fedseg {

template <typename T>
double Trainer<T>::train_step(const Tensor<T>& images, const Tensor<T>& masks) {
  UNetTape<T> tape;
  const Tensor<T> pred = model_.forward(images, nn::Mode::Train, &tape);
  const double loss = nn::bce_loss(pred, masks);
  const ParameterSet<T> grads = model_.backward(tape, nn::bce_backward(pred, masks));
  nn::adam_step(model_.parameters(), grads, adam_);
  return loss;
}

template class Trainer<float>;
template class Trainer<double>;

std::vector<std::vector<std::size_t>> plan_batches(std::size_t n, std::size_t batch_size, Rng& rng) {
  if (batch_size < 1) throw ConfigError("batch_size must be >= 1");
  std::vector<std::size_t> order(n);
  for (std::size_t i = 0; i < n; ++i) order[i] = i;
  rng.shuffle(order.begin(), order.end());
  std::vector<std::vector<std::size_t>> batches;
  for (std::size_t start = 0; start < n; start += batch_size) {
    const std::size_t end = std::min(n, start + batch_size);
    if (end - start == 1) break;
    batches.emplace_back(order.begin() + static_cast<long>(start), order.begin() + static_cast<long>(end));
  }
  return batches;
}

std::pair<Tensor<float>, Tensor<float>> make_batch(const data::Dataset& dataset, std::span<const std::size_t> indices) {
  if (indices.empty()) throw UsageError("make_batch: no samples selected");
  const Shape img = dataset.image_shape();
  const std::size_t n = indices.size(), c = img[0], h = img[1], w = img[2];
  Tensor<float> images({n, c, h, w});
  Tensor<float> masks({n, 1, h, w});
  for (std::size_t i = 0; i < n; ++i) {
    const auto& s = dataset.samples.at(indices[i]);
    if (s.image.shape() != img || s.mask.shape() != Shape{1, h, w}) {
      throw ShapeError("make_batch: sample " + std::to_string(indices[i]) + " has inconsistent shape");
    }
    std::copy_n(s.image.raw(), c * h * w, images.raw() + i * c * h * w);
    std::copy_n(s.mask.raw(), h * w, masks.raw() + i * h * w);
  }
  return {std::move(images), std::move(masks)};
}

EpochStats train_epoch(Trainer<float>& trainer, const data::Dataset& dataset, std::size_t batch_size, Rng& rng) {
  EpochStats stats;
  const auto batches = plan_batches(dataset.size(), batch_size, rng);
  double total = 0.0;
  for (const auto& b : batches) {
    auto [images, masks] = make_batch(dataset, b);
    total += trainer.train_step(images, masks);
    stats.steps += 1;
    stats.samples_used += b.size();
  }
  stats.samples_dropped = dataset.size() - stats.samples_used;
  if (stats.samples_dropped > 0) {
    logger().warn("dataset '{}': dropped {} sample(s) in a batch of one", dataset.domain, stats.samples_dropped);
  }
  stats.mean_loss = stats.steps ? total / static_cast<double>(stats.steps) : 0.0;
  return stats;
}

LocalTrainer::LocalTrainer(const UNetConfig& config, ParameterSet<float> initial, data::Dataset dataset,
                           LocalTrainingOptions options, std::uint64_t seed)
    : trainer_(UNet<float>::from_parameters(config, std::move(initial)), options.adam),
      dataset_(std::move(dataset)),
      options_(options),
      rng_(seed) {
  if (dataset_.empty()) throw UsageError("local training needs a non-empty dataset");
  if (options_.batch_size < 2) throw ConfigError("batch_size must be >= 2 (batch norm)");
  if (options_.epochs_per_call < 1) throw ConfigError("local_epochs must be >= 1");
  const Shape shape = dataset_.image_shape();
  if (shape[0] != config.in_channels) {
    throw ConfigError("dataset '" + dataset_.domain + "' has " + std::to_string(shape[0]) +
                      " channels, model expects " + std::to_string(config.in_channels));
  }
  config.require_input(shape[1], shape[2]);
}

EpochStats LocalTrainer::run() {
  EpochStats total;
  double loss_sum = 0.0;
  for (std::size_t e = 0; e < options_.epochs_per_call; ++e) {
    const EpochStats s = train_epoch(trainer_, dataset_, options_.batch_size, rng_);
    total.steps += s.steps;
    total.samples_used += s.samples_used;
    total.samples_dropped += s.samples_dropped;
    loss_sum += s.mean_loss * static_cast<double>(s.steps);
  }
  total.mean_loss = total.steps ? loss_sum / static_cast<double>(total.steps) : 0.0;
  return total;
}

}  // namespace fedseg
