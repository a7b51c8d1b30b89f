#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "fedseg/parameter_set.hpp"

namespace fedseg {

enum class Weighting { SampleCount, Uniform };

std::string to_string(Weighting w);
Weighting parse_weighting(const std::string& s);  // ConfigError

template <typename T>
struct WeightedUpdate {
  const ParameterSet<T>* params;
  std::uint64_t sample_count;
};

// Normalized aggregation weights. UsageError for an empty list or when every
// count is zero under sample-count weighting.
std::vector<double> fedavg_weights(std::span<const std::uint64_t> sample_counts, Weighting weighting);

// Per-element weighted mean of aligned parameter sets, accumulated in double
// in list order (callers pass updates sorted by node id) and cast back to T.
// AlignmentError names the first mismatching entry.
template <typename T>
ParameterSet<T> fedavg(std::span<const WeightedUpdate<T>> updates, Weighting weighting);

}  // namespace fedseg
