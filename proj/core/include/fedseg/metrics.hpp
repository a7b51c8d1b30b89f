#pragma once

#include <cstddef>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "fedseg/data.hpp"
#include "fedseg/tensor.hpp"
#include "fedseg/unet.hpp"

namespace fedseg::metrics {

inline constexpr double kDefaultThreshold = 0.5;

// Masks are single images: [H, W] or any shape whose leading dims are all 1
// (e.g. [1, H, W]). Values must be exactly 0 or 1.

Tensor<float> binarize(const Tensor<float>& pred, double threshold = kDefaultThreshold);

// 2|a & b| / (|a| + |b|); 1 when both are empty.
double dice(const Tensor<float>& a, const Tensor<float>& b);

struct Box {
  std::size_t y0, x0, y1, x1;  // inclusive
  bool operator==(const Box&) const = default;
};

std::optional<Box> bbox(const Tensor<float>& mask);

// Fraction of organ pixels inside the box; 0 without a box.
double overlap_similarity(const Tensor<float>& organ, const std::optional<Box>& box);

enum class Task { Segmentation, Localization };

std::string to_string(Task task);
Task parse_task(const std::string& text);  // ConfigError

struct DomainReport {
  std::string name;
  std::vector<double> values;  // per sample, dataset order
  double mean = 0.0;
  double min = 0.0;
  double max = 0.0;
  std::size_t failures = 0;  // samples scoring exactly 0
};

struct EvalReport {
  Task task = Task::Segmentation;
  std::vector<DomainReport> domains;
  double pooled_mean = 0.0;  // over every sample of every domain
};

// Maps an [N, C, H, W] batch to [N, 1, H, W] probabilities.
using Predictor = std::function<Tensor<float>(const Tensor<float>&)>;

EvalReport evaluate(const Predictor& predict, const std::vector<data::Dataset>& test_sets, Task task,
                    double threshold = kDefaultThreshold);
EvalReport evaluate(const UNet<float>& model, const std::vector<data::Dataset>& test_sets, Task task,
                    double threshold = kDefaultThreshold);

std::string to_json(const EvalReport& report);
// domain,index,value rows with a header line.
std::string to_csv(const EvalReport& report);

}  // namespace fedseg::metrics
