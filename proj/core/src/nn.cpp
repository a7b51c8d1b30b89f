#include "fedseg/nn.hpp"

#include <Eigen/Core>
#include <algorithm>
#include <cmath>
#include <string>

namespace fedseg::nn {
namespace {

template <typename T>
using RowMat = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <typename T>
using ConstMap = Eigen::Map<const RowMat<T>>;
template <typename T>
using MutMap = Eigen::Map<RowMat<T>>;

void require_rank4(const Shape& s, const char* op) {
  if (s.size() != 4) throw ShapeError(std::string(op) + ": expected NCHW tensor, got " + shape_to_string(s));
}

// cols[(c*k + ky)*k + kx][y*W + x] = in[c][y + ky - p][x + kx - p], zero outside.
template <typename T>
void im2col(const T* in, std::size_t channels, std::size_t h, std::size_t w, std::size_t k, T* cols) {
  const auto pad = static_cast<long>(k / 2);
  const auto H = static_cast<long>(h);
  const auto W = static_cast<long>(w);
  for (std::size_t c = 0; c < channels; ++c) {
    const T* plane = in + c * h * w;
    for (std::size_t ky = 0; ky < k; ++ky) {
      for (std::size_t kx = 0; kx < k; ++kx) {
        T* dst = cols + ((c * k + ky) * k + kx) * h * w;
        const long oy = static_cast<long>(ky) - pad;
        const long ox = static_cast<long>(kx) - pad;
        const long x_lo = std::max(0L, -ox);
        const long x_hi = std::min(W, W - ox);
        for (long y = 0; y < H; ++y) {
          T* row = dst + y * W;
          const long iy = y + oy;
          if (iy < 0 || iy >= H) {
            std::fill(row, row + W, T{0});
            continue;
          }
          std::fill(row, row + x_lo, T{0});
          std::copy(plane + iy * W + x_lo + ox, plane + iy * W + x_hi + ox, row + x_lo);
          std::fill(row + x_hi, row + W, T{0});
        }
      }
    }
  }
}

template <typename T>
void col2im(const T* cols, std::size_t channels, std::size_t h, std::size_t w, std::size_t k, T* out) {
  const auto pad = static_cast<long>(k / 2);
  const auto H = static_cast<long>(h);
  const auto W = static_cast<long>(w);
  for (std::size_t c = 0; c < channels; ++c) {
    T* plane = out + c * h * w;
    for (std::size_t ky = 0; ky < k; ++ky) {
      for (std::size_t kx = 0; kx < k; ++kx) {
        const T* src = cols + ((c * k + ky) * k + kx) * h * w;
        const long oy = static_cast<long>(ky) - pad;
        const long ox = static_cast<long>(kx) - pad;
        const long x_lo = std::max(0L, -ox);
        const long x_hi = std::min(W, W - ox);
        for (long y = 0; y < H; ++y) {
          const long iy = y + oy;
          if (iy < 0 || iy >= H) continue;
          const T* row = src + y * W;
          T* dst = plane + iy * W + ox;
          for (long x = x_lo; x < x_hi; ++x) dst[x] += row[x];
        }
      }
    }
  }
}

template <typename T>
void check_conv_shapes(const Tensor<T>& input, const Tensor<T>& weight, const Tensor<T>& bias) {
  require_rank4(input.shape(), "conv2d input");
  if (weight.rank() != 4) throw ShapeError("conv2d: weight must be [out_c, in_c, k, k]");
  const std::size_t k = weight.dim(2);
  if (weight.dim(3) != k) throw ShapeError("conv2d: kernel must be square");
  if (k % 2 == 0) throw ShapeError("conv2d: kernel size must be odd, got " + std::to_string(k));
  if (weight.dim(1) != input.dim(1)) {
    throw ShapeError("conv2d: input has " + std::to_string(input.dim(1)) + " channels, weight expects " +
                     std::to_string(weight.dim(1)));
  }
  if (bias.rank() != 1 || bias.dim(0) != weight.dim(0)) {
    throw ShapeError("conv2d: bias must be [out_c]");
  }
}

template <typename T>
std::optional<T> take(std::optional<T>& slot, const char* layer) {
  if (!slot) throw UsageError(std::string(layer) + ": backward called without a matching forward");
  std::optional<T> out = std::move(slot);
  slot.reset();
  return out;
}

}  // namespace

template <typename T>
Tensor<T> conv2d_forward(const Tensor<T>& input, const Tensor<T>& weight, const Tensor<T>& bias) {
  check_conv_shapes(input, weight, bias);
  const std::size_t n = input.dim(0), cin = input.dim(1), h = input.dim(2), w = input.dim(3);
  const std::size_t cout = weight.dim(0), k = weight.dim(2);
  const std::size_t hw = h * w, patch = cin * k * k;

  Tensor<T> out({n, cout, h, w});
  AlignedVector<T> cols(k == 1 ? 0 : patch * hw);
  ConstMap<T> wm(weight.raw(), static_cast<long>(cout), static_cast<long>(patch));
  for (std::size_t i = 0; i < n; ++i) {
    const T* x = input.raw() + i * cin * hw;
    const T* colp = x;
    if (k != 1) {
      im2col(x, cin, h, w, k, cols.data());
      colp = cols.data();
    }
    ConstMap<T> cm(colp, static_cast<long>(patch), static_cast<long>(hw));
    MutMap<T> om(out.raw() + i * cout * hw, static_cast<long>(cout), static_cast<long>(hw));
    om.noalias() = wm * cm;
    for (std::size_t o = 0; o < cout; ++o) om.row(static_cast<long>(o)).array() += bias[o];
  }
  return out;
}

template <typename T>
Conv2dGrads<T> conv2d_backward(const Tensor<T>& input, const Tensor<T>& weight, const Tensor<T>& upstream) {
  check_conv_shapes(input, weight, Tensor<T>({weight.dim(0)}));
  const std::size_t n = input.dim(0), cin = input.dim(1), h = input.dim(2), w = input.dim(3);
  const std::size_t cout = weight.dim(0), k = weight.dim(2);
  if (upstream.shape() != Shape{n, cout, h, w}) {
    throw ShapeError("conv2d backward: upstream gradient has shape " + shape_to_string(upstream.shape()));
  }
  const std::size_t hw = h * w, patch = cin * k * k;

  Conv2dGrads<T> g{Tensor<T>(input.shape()), Tensor<T>(weight.shape()), Tensor<T>({cout})};
  AlignedVector<T> cols(k == 1 ? 0 : patch * hw);
  AlignedVector<T> dcols(k == 1 ? 0 : patch * hw);
  ConstMap<T> wm(weight.raw(), static_cast<long>(cout), static_cast<long>(patch));
  MutMap<T> dwm(g.weight.raw(), static_cast<long>(cout), static_cast<long>(patch));
  for (std::size_t i = 0; i < n; ++i) {
    const T* x = input.raw() + i * cin * hw;
    const T* colp = x;
    if (k != 1) {
      im2col(x, cin, h, w, k, cols.data());
      colp = cols.data();
    }
    ConstMap<T> cm(colp, static_cast<long>(patch), static_cast<long>(hw));
    ConstMap<T> dym(upstream.raw() + i * cout * hw, static_cast<long>(cout), static_cast<long>(hw));
    dwm.noalias() += dym * cm.transpose();
    const T* dy = upstream.raw() + i * cout * hw;
    for (std::size_t o = 0; o < cout; ++o) {
      T acc{0};
      for (std::size_t p = 0; p < hw; ++p) acc += dy[o * hw + p];
      g.bias[o] += acc;
    }

    T* dx = g.input.raw() + i * cin * hw;
    if (k == 1) {
      MutMap<T> dxm(dx, static_cast<long>(cin), static_cast<long>(hw));
      dxm.noalias() = wm.transpose() * dym;
    } else {
      MutMap<T> dcm(dcols.data(), static_cast<long>(patch), static_cast<long>(hw));
      dcm.noalias() = wm.transpose() * dym;
      col2im(dcols.data(), cin, h, w, k, dx);
    }
  }
  return g;
}

template <typename T>
Tensor<T> relu_forward(const Tensor<T>& x) {
  Tensor<T> y(x.shape());
  for (std::size_t i = 0; i < x.size(); ++i) y[i] = x[i] > T{0} ? x[i] : T{0};
  return y;
}

template <typename T>
Tensor<T> relu_backward(const Tensor<T>& output, const Tensor<T>& upstream) {
  detail::require_same_shape(output, upstream, "relu backward");
  Tensor<T> dx(output.shape());
  for (std::size_t i = 0; i < output.size(); ++i) dx[i] = output[i] > T{0} ? upstream[i] : T{0};
  return dx;
}

template <typename T>
Tensor<T> sigmoid_forward(const Tensor<T>& x) {
  Tensor<T> y(x.shape());
  for (std::size_t i = 0; i < x.size(); ++i) {
    const T v = x[i];
    if (v >= T{0}) {
      y[i] = T{1} / (T{1} + std::exp(-v));
    } else {
      const T e = std::exp(v);
      y[i] = e / (T{1} + e);
    }
  }
  return y;
}

template <typename T>
Tensor<T> sigmoid_backward(const Tensor<T>& output, const Tensor<T>& upstream) {
  detail::require_same_shape(output, upstream, "sigmoid backward");
  Tensor<T> dx(output.shape());
  for (std::size_t i = 0; i < output.size(); ++i) dx[i] = upstream[i] * output[i] * (T{1} - output[i]);
  return dx;
}

template <typename T>
MaxPoolResult<T> maxpool2_forward(const Tensor<T>& x) {
  require_rank4(x.shape(), "maxpool2");
  const std::size_t n = x.dim(0), c = x.dim(1), h = x.dim(2), w = x.dim(3);
  if (h % 2 != 0 || w % 2 != 0) {
    throw ShapeError("maxpool2: spatial dims must be even, got " + shape_to_string(x.shape()));
  }
  if (x.size() > UINT32_MAX) throw ShapeError("maxpool2: tensor too large for index type");
  const std::size_t oh = h / 2, ow = w / 2;
  MaxPoolResult<T> r{Tensor<T>({n, c, oh, ow}), std::vector<std::uint32_t>(n * c * oh * ow)};
  std::size_t o = 0;
  for (std::size_t plane = 0; plane < n * c; ++plane) {
    const std::size_t base = plane * h * w;
    for (std::size_t y = 0; y < oh; ++y) {
      for (std::size_t xx = 0; xx < ow; ++xx, ++o) {
        const std::size_t first = base + (2 * y) * w + 2 * xx;
        const std::size_t candidates[4] = {first, first + 1, first + w, first + w + 1};
        std::size_t best = candidates[0];
        for (int j = 1; j < 4; ++j) {
          if (x[candidates[j]] > x[best]) best = candidates[j];
        }
        r.output[o] = x[best];
        r.argmax[o] = static_cast<std::uint32_t>(best);
      }
    }
  }
  return r;
}

template <typename T>
Tensor<T> maxpool2_backward(const Shape& input_shape, const std::vector<std::uint32_t>& argmax,
                            const Tensor<T>& upstream) {
  if (argmax.size() != upstream.size()) throw ShapeError("maxpool2 backward: index/gradient size mismatch");
  Tensor<T> dx(input_shape);
  for (std::size_t i = 0; i < argmax.size(); ++i) {
    if (argmax[i] >= dx.size()) throw ShapeError("maxpool2 backward: index out of range");
    dx[argmax[i]] += upstream[i];
  }
  return dx;
}

template <typename T>
Tensor<T> upsample2_forward(const Tensor<T>& x) {
  require_rank4(x.shape(), "upsample2");
  const std::size_t n = x.dim(0), c = x.dim(1), h = x.dim(2), w = x.dim(3);
  Tensor<T> y({n, c, 2 * h, 2 * w});
  for (std::size_t plane = 0; plane < n * c; ++plane) {
    const T* src = x.raw() + plane * h * w;
    T* dst = y.raw() + plane * 4 * h * w;
    for (std::size_t yy = 0; yy < h; ++yy) {
      T* row0 = dst + (2 * yy) * 2 * w;
      for (std::size_t xx = 0; xx < w; ++xx) {
        row0[2 * xx] = row0[2 * xx + 1] = src[yy * w + xx];
      }
      std::copy(row0, row0 + 2 * w, row0 + 2 * w);
    }
  }
  return y;
}

template <typename T>
Tensor<T> upsample2_backward(const Tensor<T>& upstream) {
  require_rank4(upstream.shape(), "upsample2 backward");
  const std::size_t n = upstream.dim(0), c = upstream.dim(1), h2 = upstream.dim(2), w2 = upstream.dim(3);
  if (h2 % 2 != 0 || w2 % 2 != 0) throw ShapeError("upsample2 backward: odd gradient dims");
  const std::size_t h = h2 / 2, w = w2 / 2;
  Tensor<T> dx({n, c, h, w});
  for (std::size_t plane = 0; plane < n * c; ++plane) {
    const T* src = upstream.raw() + plane * h2 * w2;
    T* dst = dx.raw() + plane * h * w;
    for (std::size_t y = 0; y < h; ++y) {
      for (std::size_t x = 0; x < w; ++x) {
        const T* p = src + (2 * y) * w2 + 2 * x;
        dst[y * w + x] = (p[0] + p[1]) + (p[w2] + p[w2 + 1]);
      }
    }
  }
  return dx;
}

template <typename T>
Tensor<T> concat_channels(const Tensor<T>& a, const Tensor<T>& b) {
  require_rank4(a.shape(), "concat_channels");
  require_rank4(b.shape(), "concat_channels");
  if (a.dim(0) != b.dim(0) || a.dim(2) != b.dim(2) || a.dim(3) != b.dim(3)) {
    throw ShapeError("concat_channels: N/H/W mismatch " + shape_to_string(a.shape()) + " vs " +
                     shape_to_string(b.shape()));
  }
  const std::size_t n = a.dim(0), ca = a.dim(1), cb = b.dim(1), hw = a.dim(2) * a.dim(3);
  Tensor<T> out({n, ca + cb, a.dim(2), a.dim(3)});
  for (std::size_t i = 0; i < n; ++i) {
    T* dst = out.raw() + i * (ca + cb) * hw;
    std::copy_n(a.raw() + i * ca * hw, ca * hw, dst);
    std::copy_n(b.raw() + i * cb * hw, cb * hw, dst + ca * hw);
  }
  return out;
}

template <typename T>
std::pair<Tensor<T>, Tensor<T>> split_channels(const Tensor<T>& x, std::size_t channels) {
  require_rank4(x.shape(), "split_channels");
  const std::size_t n = x.dim(0), c = x.dim(1), h = x.dim(2), w = x.dim(3), hw = h * w;
  if (channels == 0 || channels >= c) throw ShapeError("split_channels: split point out of range");
  Tensor<T> a({n, channels, h, w});
  Tensor<T> b({n, c - channels, h, w});
  for (std::size_t i = 0; i < n; ++i) {
    const T* src = x.raw() + i * c * hw;
    std::copy_n(src, channels * hw, a.raw() + i * channels * hw);
    std::copy_n(src + channels * hw, (c - channels) * hw, b.raw() + i * (c - channels) * hw);
  }
  return {std::move(a), std::move(b)};
}

template <typename T>
BatchNormResult<T> batchnorm_forward(const Tensor<T>& x, const Tensor<T>& gamma, const Tensor<T>& beta,
                                     const Tensor<T>& running_mean, const Tensor<T>& running_var,
                                     Mode mode) {
  require_rank4(x.shape(), "batchnorm");
  const std::size_t n = x.dim(0), c = x.dim(1), hw = x.dim(2) * x.dim(3);
  for (const Tensor<T>* p : {&gamma, &beta, &running_mean, &running_var}) {
    if (p->shape() != Shape{c}) throw ShapeError("batchnorm: per-channel tensors must be [" + std::to_string(c) + "]");
  }
  const std::size_t m = n * hw;
  if (mode == Mode::Train && n < 2) {
    throw DegenerateBatchError("batchnorm: train mode needs a batch of at least 2 samples, got " +
                               std::to_string(n));
  }

  BatchNormResult<T> r{Tensor<T>(x.shape()), {mode, Tensor<T>(x.shape()), std::vector<double>(c)},
                       running_mean, running_var};
  for (std::size_t ch = 0; ch < c; ++ch) {
    double mean = 0.0, var = 0.0;
    if (mode == Mode::Train) {
      for (std::size_t i = 0; i < n; ++i) {
        const T* p = x.raw() + (i * c + ch) * hw;
        for (std::size_t j = 0; j < hw; ++j) mean += static_cast<double>(p[j]);
      }
      mean /= static_cast<double>(m);
      for (std::size_t i = 0; i < n; ++i) {
        const T* p = x.raw() + (i * c + ch) * hw;
        for (std::size_t j = 0; j < hw; ++j) {
          const double d = static_cast<double>(p[j]) - mean;
          var += d * d;
        }
      }
      const double unbiased = var / static_cast<double>(m - 1);
      var /= static_cast<double>(m);
      r.running_mean[ch] = static_cast<T>((1.0 - kBatchNormMomentum) * static_cast<double>(running_mean[ch]) +
                                          kBatchNormMomentum * mean);
      r.running_var[ch] = static_cast<T>((1.0 - kBatchNormMomentum) * static_cast<double>(running_var[ch]) +
                                         kBatchNormMomentum * unbiased);
    } else {
      mean = static_cast<double>(running_mean[ch]);
      var = static_cast<double>(running_var[ch]);
    }
    const double inv_std = 1.0 / std::sqrt(var + kBatchNormEps);
    r.cache.inv_std[ch] = inv_std;
    const double g = static_cast<double>(gamma[ch]);
    const double b = static_cast<double>(beta[ch]);
    for (std::size_t i = 0; i < n; ++i) {
      const std::size_t off = (i * c + ch) * hw;
      for (std::size_t j = 0; j < hw; ++j) {
        const double xhat = (static_cast<double>(x[off + j]) - mean) * inv_std;
        r.cache.normalized[off + j] = static_cast<T>(xhat);
        r.output[off + j] = static_cast<T>(g * xhat + b);
      }
    }
  }
  return r;
}

template <typename T>
BatchNormGrads<T> batchnorm_backward(const BatchNormCache<T>& cache, const Tensor<T>& gamma,
                                     const Tensor<T>& upstream) {
  const Tensor<T>& xhat = cache.normalized;
  detail::require_same_shape(xhat, upstream, "batchnorm backward");
  const std::size_t n = xhat.dim(0), c = xhat.dim(1), hw = xhat.dim(2) * xhat.dim(3);
  if (gamma.shape() != Shape{c}) throw ShapeError("batchnorm backward: gamma must be [c]");
  const double m = static_cast<double>(n * hw);

  BatchNormGrads<T> g{Tensor<T>(xhat.shape()), Tensor<T>({c}), Tensor<T>({c})};
  for (std::size_t ch = 0; ch < c; ++ch) {
    double sum_dy = 0.0, sum_dy_xhat = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const std::size_t off = (i * c + ch) * hw;
      for (std::size_t j = 0; j < hw; ++j) {
        const double dy = static_cast<double>(upstream[off + j]);
        sum_dy += dy;
        sum_dy_xhat += dy * static_cast<double>(xhat[off + j]);
      }
    }
    g.gamma[ch] = static_cast<T>(sum_dy_xhat);
    g.beta[ch] = static_cast<T>(sum_dy);
    const double gm = static_cast<double>(gamma[ch]);
    const double inv_std = cache.inv_std[ch];
    for (std::size_t i = 0; i < n; ++i) {
      const std::size_t off = (i * c + ch) * hw;
      for (std::size_t j = 0; j < hw; ++j) {
        const double dy = static_cast<double>(upstream[off + j]);
        double dx;
        if (cache.mode == Mode::Train) {
          const double xh = static_cast<double>(xhat[off + j]);
          dx = gm * inv_std * (dy - sum_dy / m - xh * sum_dy_xhat / m);
        } else {
          dx = gm * inv_std * dy;
        }
        g.input[off + j] = static_cast<T>(dx);
      }
    }
  }
  return g;
}

template <typename T>
double bce_loss(const Tensor<T>& pred, const Tensor<T>& target) {
  detail::require_same_shape(pred, target, "bce_loss");
  double total = 0.0;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    const double p = std::clamp(static_cast<double>(pred[i]), kBceClamp, 1.0 - kBceClamp);
    const double t = static_cast<double>(target[i]);
    total -= t * std::log(p) + (1.0 - t) * std::log(1.0 - p);
  }
  return total / static_cast<double>(pred.size());
}

template <typename T>
Tensor<T> bce_backward(const Tensor<T>& pred, const Tensor<T>& target) {
  detail::require_same_shape(pred, target, "bce_backward");
  const double inv_count = 1.0 / static_cast<double>(pred.size());
  Tensor<T> grad(pred.shape());
  for (std::size_t i = 0; i < pred.size(); ++i) {
    const double p = static_cast<double>(pred[i]);
    if (p < kBceClamp || p > 1.0 - kBceClamp) continue;
    const double t = static_cast<double>(target[i]);
    grad[i] = static_cast<T>((p - t) / (p * (1.0 - p)) * inv_count);
  }
  return grad;
}

// ---- layer objects ----

template <typename T>
Tensor<T> Conv2d<T>::forward(const Tensor<T>& x, const Tensor<T>& weight, const Tensor<T>& bias) {
  Tensor<T> y = conv2d_forward(x, weight, bias);
  input_ = x;
  return y;
}

template <typename T>
Conv2dGrads<T> Conv2d<T>::backward(const Tensor<T>& weight, const Tensor<T>& upstream) {
  auto x = take(input_, "conv2d");
  return conv2d_backward(*x, weight, upstream);
}

template <typename T>
Tensor<T> ReLU<T>::forward(const Tensor<T>& x) {
  output_ = relu_forward(x);
  return *output_;
}

template <typename T>
Tensor<T> ReLU<T>::backward(const Tensor<T>& upstream) {
  auto y = take(output_, "relu");
  return relu_backward(*y, upstream);
}

template <typename T>
Tensor<T> Sigmoid<T>::forward(const Tensor<T>& x) {
  output_ = sigmoid_forward(x);
  return *output_;
}

template <typename T>
Tensor<T> Sigmoid<T>::backward(const Tensor<T>& upstream) {
  auto y = take(output_, "sigmoid");
  return sigmoid_backward(*y, upstream);
}

template <typename T>
Tensor<T> MaxPool2<T>::forward(const Tensor<T>& x) {
  auto r = maxpool2_forward(x);
  cache_.emplace(x.shape(), std::move(r.argmax));
  return std::move(r.output);
}

template <typename T>
Tensor<T> MaxPool2<T>::backward(const Tensor<T>& upstream) {
  auto c = take(cache_, "maxpool2");
  return maxpool2_backward(c->first, c->second, upstream);
}

template <typename T>
Tensor<T> Upsample2<T>::forward(const Tensor<T>& x) {
  Tensor<T> y = upsample2_forward(x);
  input_shape_ = x.shape();
  return y;
}

template <typename T>
Tensor<T> Upsample2<T>::backward(const Tensor<T>& upstream) {
  auto s = take(input_shape_, "upsample2");
  if (upstream.rank() != 4 || upstream.dim(2) != 2 * (*s)[2] || upstream.dim(3) != 2 * (*s)[3]) {
    throw ShapeError("upsample2 backward: gradient does not match cached input shape");
  }
  return upsample2_backward(upstream);
}

template <typename T>
Tensor<T> BatchNorm2d<T>::forward(const Tensor<T>& x, const Tensor<T>& gamma, const Tensor<T>& beta,
                                  Tensor<T>& running_mean, Tensor<T>& running_var, Mode mode) {
  auto r = batchnorm_forward(x, gamma, beta, running_mean, running_var, mode);
  running_mean = std::move(r.running_mean);
  running_var = std::move(r.running_var);
  cache_ = std::move(r.cache);
  return std::move(r.output);
}

template <typename T>
BatchNormGrads<T> BatchNorm2d<T>::backward(const Tensor<T>& gamma, const Tensor<T>& upstream) {
  auto c = take(cache_, "batchnorm");
  return batchnorm_backward(*c, gamma, upstream);
}

#define FEDSEG_NN_INSTANTIATE(T)                                                                    \
  template Tensor<T> conv2d_forward(const Tensor<T>&, const Tensor<T>&, const Tensor<T>&);          \
  template Conv2dGrads<T> conv2d_backward(const Tensor<T>&, const Tensor<T>&, const Tensor<T>&);    \
  template Tensor<T> relu_forward(const Tensor<T>&);                                                \
  template Tensor<T> relu_backward(const Tensor<T>&, const Tensor<T>&);                             \
  template Tensor<T> sigmoid_forward(const Tensor<T>&);                                             \
  template Tensor<T> sigmoid_backward(const Tensor<T>&, const Tensor<T>&);                          \
  template MaxPoolResult<T> maxpool2_forward(const Tensor<T>&);                                     \
  template Tensor<T> maxpool2_backward(const Shape&, const std::vector<std::uint32_t>&,             \
                                       const Tensor<T>&);                                           \
  template Tensor<T> upsample2_forward(const Tensor<T>&);                                           \
  template Tensor<T> upsample2_backward(const Tensor<T>&);                                          \
  template Tensor<T> concat_channels(const Tensor<T>&, const Tensor<T>&);                           \
  template std::pair<Tensor<T>, Tensor<T>> split_channels(const Tensor<T>&, std::size_t);           \
  template BatchNormResult<T> batchnorm_forward(const Tensor<T>&, const Tensor<T>&,                 \
                                                const Tensor<T>&, const Tensor<T>&,                 \
                                                const Tensor<T>&, Mode);                            \
  template BatchNormGrads<T> batchnorm_backward(const BatchNormCache<T>&, const Tensor<T>&,         \
                                                const Tensor<T>&);                                  \
  template double bce_loss(const Tensor<T>&, const Tensor<T>&);                                     \
  template Tensor<T> bce_backward(const Tensor<T>&, const Tensor<T>&);                              \
  template class Conv2d<T>;                                                                         \
  template class ReLU<T>;                                                                           \
  template class Sigmoid<T>;                                                                        \
  template class MaxPool2<T>;                                                                       \
  template class Upsample2<T>;                                                                      \
  template class BatchNorm2d<T>;

FEDSEG_NN_INSTANTIATE(float)
FEDSEG_NN_INSTANTIATE(double)

#undef FEDSEG_NN_INSTANTIATE

}  // namespace fedseg::nn
