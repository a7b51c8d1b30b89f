#pragma once

#include <cstdint>
#include <optional>
#include <utility>
#include <vector>

#include "fedseg/tensor.hpp"

// Layer primitives for the segmentation network. All image tensors are NCHW.
// Each primitive exists as a pure forward/backward function pair and as a
// small layer object that keeps the forward cache and hands it to exactly one
// backward call.
namespace fedseg::nn {

enum class Mode { Train, Eval };

inline constexpr double kBatchNormEps = 1e-5;
inline constexpr double kBatchNormMomentum = 0.1;
inline constexpr double kBceClamp = 1e-7;

// ---- convolution: k x k, stride 1, zero "same" padding (k odd) ----

template <typename T>
struct Conv2dGrads {
  Tensor<T> input;
  Tensor<T> weight;
  Tensor<T> bias;
};

template <typename T>
Tensor<T> conv2d_forward(const Tensor<T>& input, const Tensor<T>& weight, const Tensor<T>& bias);

template <typename T>
Conv2dGrads<T> conv2d_backward(const Tensor<T>& input, const Tensor<T>& weight,
                               const Tensor<T>& upstream);

// ---- activations ----

template <typename T>
Tensor<T> relu_forward(const Tensor<T>& x);

// `output` is the forward result; gradient passes where output > 0.
template <typename T>
Tensor<T> relu_backward(const Tensor<T>& output, const Tensor<T>& upstream);

template <typename T>
Tensor<T> sigmoid_forward(const Tensor<T>& x);

template <typename T>
Tensor<T> sigmoid_backward(const Tensor<T>& output, const Tensor<T>& upstream);

// ---- 2x2 max pooling, stride 2 ----

template <typename T>
struct MaxPoolResult {
  Tensor<T> output;
  // Flat input index of the winning element for every output element. Ties
  // go to the first element in row-major window order.
  std::vector<std::uint32_t> argmax;
};

template <typename T>
MaxPoolResult<T> maxpool2_forward(const Tensor<T>& x);

template <typename T>
Tensor<T> maxpool2_backward(const Shape& input_shape, const std::vector<std::uint32_t>& argmax,
                            const Tensor<T>& upstream);

// ---- x2 nearest-neighbour upsampling ----

template <typename T>
Tensor<T> upsample2_forward(const Tensor<T>& x);

template <typename T>
Tensor<T> upsample2_backward(const Tensor<T>& upstream);

// ---- channel concatenation ----

template <typename T>
Tensor<T> concat_channels(const Tensor<T>& a, const Tensor<T>& b);

// Inverse of concat_channels: first `channels` channels, then the rest.
template <typename T>
std::pair<Tensor<T>, Tensor<T>> split_channels(const Tensor<T>& x, std::size_t channels);

// ---- batch normalization over N, H, W per channel ----

template <typename T>
struct BatchNormCache {
  Mode mode = Mode::Eval;
  Tensor<T> normalized;          // x_hat
  std::vector<double> inv_std;   // per channel
};

template <typename T>
struct BatchNormResult {
  Tensor<T> output;
  BatchNormCache<T> cache;
  // Running statistics after this call: EMA-updated in train mode (unbiased
  // batch variance), unchanged in eval mode.
  Tensor<T> running_mean;
  Tensor<T> running_var;
};

template <typename T>
struct BatchNormGrads {
  Tensor<T> input;
  Tensor<T> gamma;
  Tensor<T> beta;
};

// Train mode needs at least two values per channel (N*H*W >= 2) and a batch
// of at least two samples; otherwise DegenerateBatchError.
template <typename T>
BatchNormResult<T> batchnorm_forward(const Tensor<T>& x, const Tensor<T>& gamma, const Tensor<T>& beta,
                                     const Tensor<T>& running_mean, const Tensor<T>& running_var,
                                     Mode mode);

template <typename T>
BatchNormGrads<T> batchnorm_backward(const BatchNormCache<T>& cache, const Tensor<T>& gamma,
                                     const Tensor<T>& upstream);

// ---- loss ----

// Mean binary cross-entropy; predictions clamped to [kBceClamp, 1 - kBceClamp].
template <typename T>
double bce_loss(const Tensor<T>& pred, const Tensor<T>& target);

// d(bce_loss)/d(pred). Zero where the clamp is active.
template <typename T>
Tensor<T> bce_backward(const Tensor<T>& pred, const Tensor<T>& target);

// ---- layer objects with single-use caches ----

template <typename T>
class Conv2d {
 public:
  Tensor<T> forward(const Tensor<T>& x, const Tensor<T>& weight, const Tensor<T>& bias);
  Conv2dGrads<T> backward(const Tensor<T>& weight, const Tensor<T>& upstream);
  bool has_cache() const noexcept { return input_.has_value(); }

 private:
  std::optional<Tensor<T>> input_;
};

template <typename T>
class ReLU {
 public:
  Tensor<T> forward(const Tensor<T>& x);
  Tensor<T> backward(const Tensor<T>& upstream);
  bool has_cache() const noexcept { return output_.has_value(); }
  const Tensor<T>* cached_output() const noexcept { return output_ ? &*output_ : nullptr; }

 private:
  std::optional<Tensor<T>> output_;
};

template <typename T>
class Sigmoid {
 public:
  Tensor<T> forward(const Tensor<T>& x);
  Tensor<T> backward(const Tensor<T>& upstream);
  bool has_cache() const noexcept { return output_.has_value(); }

 private:
  std::optional<Tensor<T>> output_;
};

template <typename T>
class MaxPool2 {
 public:
  Tensor<T> forward(const Tensor<T>& x);
  Tensor<T> backward(const Tensor<T>& upstream);
  bool has_cache() const noexcept { return cache_.has_value(); }
  const std::vector<std::uint32_t>* cached_argmax() const noexcept { return cache_ ? &cache_->second : nullptr; }

 private:
  std::optional<std::pair<Shape, std::vector<std::uint32_t>>> cache_;
};

template <typename T>
class Upsample2 {
 public:
  Tensor<T> forward(const Tensor<T>& x);
  Tensor<T> backward(const Tensor<T>& upstream);
  bool has_cache() const noexcept { return input_shape_.has_value(); }

 private:
  std::optional<Shape> input_shape_;
};

// Running statistics are passed by reference and updated in train mode.
template <typename T>
class BatchNorm2d {
 public:
  Tensor<T> forward(const Tensor<T>& x, const Tensor<T>& gamma, const Tensor<T>& beta,
                    Tensor<T>& running_mean, Tensor<T>& running_var, Mode mode);
  BatchNormGrads<T> backward(const Tensor<T>& gamma, const Tensor<T>& upstream);
  bool has_cache() const noexcept { return cache_.has_value(); }

 private:
  std::optional<BatchNormCache<T>> cache_;
};

}  // namespace fedseg::nn
