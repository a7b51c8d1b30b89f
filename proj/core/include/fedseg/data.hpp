#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "fedseg/rng.hpp"
#include "fedseg/tensor.hpp"

namespace fedseg::data {

enum class Appearance { BrightFg, BlurredHotFg, Multichannel };
enum class ShapeFamily { EllipsePair, IrregularBlob };

std::string to_string(Appearance a);
std::string to_string(ShapeFamily s);
Appearance parse_appearance(const std::string& s);   // ConfigError on unknown
ShapeFamily parse_shape_family(const std::string& s);

// Closed intensity interval; each sample draws its level uniformly from it.
struct Range {
  double lo = 0.0;
  double hi = 0.0;
  bool operator==(const Range&) const = default;
};

struct ChannelContrast {
  Range background;
  Range foreground;
  bool operator==(const ChannelContrast&) const = default;
};

// Describes one synthetic imaging domain. Geometry (masks) depends only on
// shape_family, image_size, foreground bounds and the seed; appearance maps
// that geometry to intensities.
struct DomainSpec {
  std::string name = "ct";
  Appearance appearance = Appearance::BrightFg;
  ShapeFamily shape_family = ShapeFamily::EllipsePair;
  double noise_std = 0.05;
  double blur_sigma = 0.0;  // Gaussian blur applied before noise; 0 disables
  std::vector<ChannelContrast> channels;
  std::size_t image_size = 64;
  double min_foreground = 0.01;
  double max_foreground = 0.35;
  std::size_t max_attempts = 200;

  void validate() const;  // ConfigError
  std::size_t channel_count() const { return channels.size(); }
  bool operator==(const DomainSpec&) const = default;

  // CT-like: bright organ on dark background, light noise.
  static DomainSpec ct_like(std::size_t image_size = 64);
  // PET-like: blurred hot uptake, heavier noise, variable intensities.
  static DomainSpec pet_like(std::size_t image_size = 64);
  // mpMRI-like lesion domains: three channels (T1 pre, T1 post, T2).
  static DomainSpec breast_mri_like(std::size_t image_size = 64);
  static DomainSpec brain_mri_like(std::size_t image_size = 64);
};

struct Sample {
  Tensor<float> image;  // [C, H, W]
  Tensor<float> mask;   // [1, H, W], values in {0, 1}
  bool operator==(const Sample&) const = default;
};

struct Dataset {
  std::string domain;
  std::string split = "train";
  std::optional<DomainSpec> spec;
  std::vector<Sample> samples;

  std::size_t size() const noexcept { return samples.size(); }
  bool empty() const noexcept { return samples.empty(); }
  // [C, H, W] of the first sample; UsageError when empty.
  Shape image_shape() const;
  bool operator==(const Dataset&) const = default;
};

// Geometry uses an Rng seeded with `seed`; appearance (intensity levels,
// noise) uses an independent stream derived from `seed`. Two specs that
// differ only in appearance therefore yield identical masks for the same
// seed. GenerationError when an object cannot be placed within bounds.
Dataset generate(const DomainSpec& spec, std::size_t n, std::uint64_t seed);

// Writes manifest.json plus img_<i>.fdt1 / msk_<i>.fdt1 into `dir`
// (created if missing). IoError on failure.
void save(const Dataset& dataset, const std::string& dir);

// IoError naming the offending file on missing or corrupt content.
// FormatError when the manifest disagrees with the directory (sample count,
// image shape) or a mask is not binary.
Dataset load(const std::string& dir);

// JSON text of a spec and its inverse. Parsing rejects unknown keys; keys
// other than name/appearance/shape_family default to the preset matching
// the appearance. ConfigError on any problem.
std::string spec_to_json(const DomainSpec& spec);
DomainSpec spec_from_json(const std::string& text);

// Disjoint random subsets of sizes train_n and test_n. UsageError when the
// dataset is too small.
std::pair<Dataset, Dataset> split(const Dataset& dataset, std::size_t train_n, std::size_t test_n, Rng& rng);

// Concatenates samples in argument order; domain tags joined with '+'.
Dataset pool(const std::vector<Dataset>& datasets);

// Foreground fraction of a binary mask.
double foreground_fraction(const Tensor<float>& mask);

}  // namespace fedseg::data
