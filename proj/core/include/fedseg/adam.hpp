#pragma once

#include <cmath>
#include <cstdint>

#include "fedseg/parameter_set.hpp"

namespace fedseg::nn {

struct AdamHyper {
  double lr = 0.0002;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

// First/second moments are keyed by gradient name and created lazily on the
// first step, so one state can follow a model whose parameters get replaced
// each federated round.
template <typename T>
struct AdamState {
  AdamHyper hyper;
  std::uint64_t step = 0;
  ParameterSet<T> m;
  ParameterSet<T> v;
};

// One bias-corrected Adam update. `grads` holds the trainable subset of
// `params` (matched by name); entries of `params` without a gradient are left
// alone. Increments state.step by exactly one.
template <typename T>
void adam_step(ParameterSet<T>& params, const ParameterSet<T>& grads, AdamState<T>& state) {
  if (state.m.empty()) {
    for (const auto& [name, g] : grads) {
      state.m.add(name, Tensor<T>::zeros_like(g));
      state.v.add(name, Tensor<T>::zeros_like(g));
    }
  }
  state.m.require_aligned(grads);
  for (const auto& [name, g] : grads) {
    if (params.at(name).shape() != g.shape()) {
      throw ShapeError("adam_step: gradient '" + name + "' does not match parameter shape");
    }
  }

  state.step += 1;
  const auto& h = state.hyper;
  const double t = static_cast<double>(state.step);
  const double bc1 = 1.0 - std::pow(h.beta1, t);
  const double bc2 = 1.0 - std::pow(h.beta2, t);
  const T b1 = static_cast<T>(h.beta1), b2 = static_cast<T>(h.beta2);
  const T one_minus_b1 = static_cast<T>(1.0 - h.beta1), one_minus_b2 = static_cast<T>(1.0 - h.beta2);
  const T step_size = static_cast<T>(h.lr / bc1);
  const T inv_sqrt_bc2 = static_cast<T>(1.0 / std::sqrt(bc2));
  const T eps = static_cast<T>(h.epsilon);

  for (std::size_t i = 0; i < grads.size(); ++i) {
    const Tensor<T>& g = grads.tensor(i);
    Tensor<T>& m = state.m.tensor(i);
    Tensor<T>& v = state.v.tensor(i);
    Tensor<T>& p = params.at(grads.name(i));
    for (std::size_t j = 0; j < g.size(); ++j) {
      m[j] = b1 * m[j] + one_minus_b1 * g[j];
      v[j] = b2 * v[j] + one_minus_b2 * g[j] * g[j];
      // p -= lr * (m / bc1) / (sqrt(v / bc2) + eps)
      p[j] -= step_size * m[j] / (std::sqrt(v[j]) * inv_sqrt_bc2 + eps);
    }
  }
}

}  // namespace fedseg::nn
