#include "fedseg/fedavg.hpp"

#include <algorithm>

namespace fedseg {

std::string to_string(Weighting w) { return w == Weighting::SampleCount ? "sample_count" : "uniform"; }

Weighting parse_weighting(const std::string& s) {
  if (s == "sample_count") return Weighting::SampleCount;
  if (s == "uniform") return Weighting::Uniform;
  throw ConfigError("weighting must be 'sample_count' or 'uniform', got '" + s + "'");
}

std::vector<double> fedavg_weights(std::span<const std::uint64_t> sample_counts, Weighting weighting) {
  if (sample_counts.empty()) throw UsageError("fedavg: no updates to aggregate");
  const std::size_t k = sample_counts.size();
  std::vector<double> w(k);
  if (weighting == Weighting::Uniform) {
    std::fill(w.begin(), w.end(), 1.0 / static_cast<double>(k));
    return w;
  }
  double total = 0.0;
  for (auto c : sample_counts) total += static_cast<double>(c);
  if (total <= 0.0) throw UsageError("fedavg: total sample count is zero");
  for (std::size_t i = 0; i < k; ++i) w[i] = static_cast<double>(sample_counts[i]) / total;
  return w;
}

template <typename T>
ParameterSet<T> fedavg(std::span<const WeightedUpdate<T>> updates, Weighting weighting) {
  if (updates.empty()) throw UsageError("fedavg: no updates to aggregate");
  const ParameterSet<T>& first = *updates.front().params;
  for (const auto& u : updates.subspan(1)) first.require_aligned(*u.params);

  std::vector<std::uint64_t> counts;
  for (const auto& u : updates) counts.push_back(u.sample_count);
  const std::vector<double> w = fedavg_weights(counts, weighting);

  ParameterSet<T> out;
  for (std::size_t e = 0; e < first.size(); ++e) {
    Tensor<T> avg(first.tensor(e).shape());
    for (std::size_t j = 0; j < avg.size(); ++j) {
      double acc = 0.0;
      double lo = static_cast<double>(first.tensor(e)[j]);
      double hi = lo;
      for (std::size_t i = 0; i < updates.size(); ++i) {
        const double x = static_cast<double>(updates[i].params->tensor(e)[j]);
        acc += w[i] * x;
        lo = std::min(lo, x);
        hi = std::max(hi, x);
      }
      // Rounding may leave the convex hull by an ulp; the exact mean cannot.
      avg[j] = static_cast<T>(std::clamp(acc, lo, hi));
    }
    out.add(first.name(e), std::move(avg));
  }
  return out;
}

template ParameterSet<float> fedavg(std::span<const WeightedUpdate<float>>, Weighting);
template ParameterSet<double> fedavg(std::span<const WeightedUpdate<double>>, Weighting);

}  // namespace fedseg
