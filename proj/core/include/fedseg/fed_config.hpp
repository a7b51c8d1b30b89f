#pragma once

#include <chrono>
#include <cstddef>
#include <cstdint>

#include "fedseg/adam.hpp"
#include "fedseg/fedavg.hpp"
#include "fedseg/protocol.hpp"
#include "fedseg/rng.hpp"

namespace fedseg {

struct FedConfig {
  std::uint32_t rounds = 1;           // communication iterations
  std::uint32_t node_count = 1;
  std::size_t local_epochs = 1;
  std::size_t batch_size = 4;
  double lr = 0.0002;
  std::uint64_t seed = 0;
  Weighting weighting = Weighting::SampleCount;
  std::chrono::milliseconds round_timeout{120'000};
  int connect_attempts = 3;
  std::chrono::milliseconds connect_backoff{250};
  std::size_t frame_cap = kDefaultFrameCap;

  void validate() const;  // ConfigError

  nn::AdamHyper adam() const {
    nn::AdamHyper h;
    h.lr = lr;
    return h;
  }
};

// Seed of node `node_id`'s shuffle stream when the node has no explicit seed.
constexpr std::uint64_t node_seed(std::uint64_t seed, std::uint32_t node_id) noexcept {
  return derive_seed(seed, node_id);
}

}  // namespace fedseg
