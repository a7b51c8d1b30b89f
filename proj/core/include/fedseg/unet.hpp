#pragma once

#include <cstddef>
#include <string>
#include <utility>
#include <vector>

#include "fedseg/nn.hpp"
#include "fedseg/parameter_set.hpp"
#include "fedseg/rng.hpp"

namespace fedseg {

// Topology knobs. Pooling precedes every encoder block, so the first
// convolution runs at half resolution and inputs must be divisible by
// 2^depth. Widths double per encoder level starting at base_channels; the
// bridge is 2^depth * base; decoder stage j has width 2^(depth-1-j) * base.
struct UNetConfig {
  std::size_t in_channels = 1;
  std::size_t depth = 2;
  std::size_t base_channels = 16;
  static constexpr std::size_t out_channels = 1;

  void validate() const;  // ConfigError
  bool supports_input(std::size_t height, std::size_t width) const;
  // ConfigError when the image size cannot pass through the encoder.
  void require_input(std::size_t height, std::size_t width) const;

  std::size_t encoder_width(std::size_t level) const { return base_channels << level; }
  std::size_t bridge_width() const { return base_channels << depth; }
  std::size_t decoder_width(std::size_t stage) const { return base_channels << (depth - 1 - stage); }
  // Channels of the encoder output concatenated into decoder stage j, or 0.
  std::size_t skip_width(std::size_t stage) const {
    return stage + 2 <= depth ? encoder_width(depth - 2 - stage) : 0;
  }

  bool operator==(const UNetConfig&) const = default;
};

struct ParameterSpec {
  std::string name;
  Shape shape;
  bool trainable;
};

// Canonical parameter order: enc0..enc{d-1}, bridge, dec0..dec{d-1}, head.
// Within a block: conv1.{weight,bias}, bn1.{gamma,beta,running_mean,
// running_var}, then the same for conv2/bn2.
std::vector<ParameterSpec> unet_layout(const UNetConfig& config);

// Recovers the topology from a parameter set (e.g. a loaded checkpoint).
// ConfigError when the set does not match any U-Net layout exactly.
template <typename T>
UNetConfig infer_unet_config(const ParameterSet<T>& params);

template <typename T>
struct UNetTape;

template <typename T>
class UNet {
 public:
  // He-normal conv weights (std = sqrt(2 / fan_in)), zero biases, gamma 1,
  // beta 0, running mean 0, running variance 1. Draws weights in canonical
  // order from `rng`.
  static UNet build(const UNetConfig& config, Rng& rng);

  // Adopts an existing parameter set; AlignmentError unless it matches the
  // layout for `config` exactly.
  static UNet from_parameters(const UNetConfig& config, ParameterSet<T> params);

  const UNetConfig& config() const noexcept { return config_; }
  const ParameterSet<T>& parameters() const noexcept { return params_; }
  ParameterSet<T>& parameters() noexcept { return params_; }
  void load_parameters(const ParameterSet<T>& params);

  std::vector<std::string> trainable_names() const;

  // Train mode uses batch statistics and EMA-updates the running statistics
  // stored in the parameter set. Pass a tape to enable backward.
  Tensor<T> forward(const Tensor<T>& batch, nn::Mode mode, UNetTape<T>* tape = nullptr);

  // Eval-mode forward on an unchanged model.
  Tensor<T> predict(const Tensor<T>& batch) const;

  // Gradients of the loss w.r.t. every trainable parameter, given the
  // gradient w.r.t. the sigmoid output. Consumes the tape.
  ParameterSet<T> backward(UNetTape<T>& tape, const Tensor<T>& grad_output) const;

 private:
  struct Unit {
    std::size_t weight, bias, gamma, beta, mean, var;
  };
  struct Block {
    Unit units[2];
  };

  UNet(UNetConfig config, ParameterSet<T> params);

  Tensor<T> run(const Tensor<T>& batch, nn::Mode mode, UNetTape<T>& tape, ParameterSet<T>* stats) const;
  Block block_indices(const std::string& prefix) const;

  UNetConfig config_;
  ParameterSet<T> params_;
  std::vector<Block> encoder_;
  Block bridge_{};
  std::vector<Block> decoder_;
  std::size_t head_weight_ = 0;
  std::size_t head_bias_ = 0;
  std::vector<std::size_t> grad_slot_;  // param index -> gradient index, or npos
};

template <typename T>
struct UNetTape {
  struct Unit {
    nn::Conv2d<T> conv;
    nn::ReLU<T> relu;
    nn::BatchNorm2d<T> bn;
  };
  struct Block {
    Unit units[2];
  };

  std::vector<nn::MaxPool2<T>> pools;
  std::vector<Block> encoder;
  Block bridge;
  std::vector<nn::Upsample2<T>> upsamples;
  std::vector<Block> decoder;
  nn::Conv2d<T> head;
  nn::Sigmoid<T> sigmoid;
  bool recorded = false;
};

}  // namespace fedseg
