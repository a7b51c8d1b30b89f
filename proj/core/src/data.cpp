#include "fedseg/data.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <numbers>
#include <set>

#include "fedseg/log.hpp"
#include "fedseg/tensor_io.hpp"
#include "json.hpp"

namespace fedseg::data {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr std::uint64_t kAppearanceStream = 0x41505045415231ULL;  // "APPEAR1"

// Boolean occupancy grid, row-major [size x size].
using Grid = std::vector<std::uint8_t>;

struct Ellipse {
  double cy, cx, a, b, angle;
};

struct Blob {
  double cy, cx, r0;
  double amp[3];
  double phase[3];
};

void paint_ellipse(Grid& g, std::size_t size, const Ellipse& e) {
  const double c = std::cos(e.angle), s = std::sin(e.angle);
  for (std::size_t y = 0; y < size; ++y) {
    for (std::size_t x = 0; x < size; ++x) {
      const double dy = static_cast<double>(y) + 0.5 - e.cy;
      const double dx = static_cast<double>(x) + 0.5 - e.cx;
      const double u = (dx * c + dy * s) / e.a;
      const double v = (-dx * s + dy * c) / e.b;
      if (u * u + v * v <= 1.0) g[y * size + x] = 1;
    }
  }
}

double blob_radius(const Blob& b, double theta) {
  double r = 1.0;
  for (int k = 0; k < 3; ++k) r += b.amp[k] * std::cos(static_cast<double>(k + 2) * theta + b.phase[k]);
  return b.r0 * r;
}

void paint_blob(Grid& g, std::size_t size, const Blob& b) {
  for (std::size_t y = 0; y < size; ++y) {
    for (std::size_t x = 0; x < size; ++x) {
      const double dy = static_cast<double>(y) + 0.5 - b.cy;
      const double dx = static_cast<double>(x) + 0.5 - b.cx;
      const double d = std::sqrt(dx * dx + dy * dy);
      if (d <= blob_radius(b, std::atan2(dy, dx))) g[y * size + x] = 1;
    }
  }
}

bool inside(double cy, double cx, double extent, double size) {
  return cy - extent >= 0.5 && cx - extent >= 0.5 && cy + extent <= size - 0.5 && cx + extent <= size - 0.5;
}

// One placement attempt. Returns false when an object leaves the frame.
bool try_geometry(const DomainSpec& spec, Rng& rng, Grid& grid) {
  const std::size_t n = spec.image_size;
  const double size = static_cast<double>(n);
  std::fill(grid.begin(), grid.end(), 0);
  if (spec.shape_family == ShapeFamily::EllipsePair) {
    for (int side = 0; side < 2; ++side) {
      Ellipse e{};
      e.a = rng.uniform(0.07, 0.13) * size;
      e.b = rng.uniform(0.045, 0.08) * size;
      e.angle = rng.uniform(-0.6, 0.6);
      e.cy = rng.uniform(0.3, 0.7) * size;
      e.cx = (side == 0 ? rng.uniform(0.2, 0.38) : rng.uniform(0.62, 0.8)) * size;
      if (!inside(e.cy, e.cx, e.a, size)) return false;
      paint_ellipse(grid, n, e);
    }
  } else {
    const std::uint64_t count = 1 + rng.below(2);
    for (std::uint64_t i = 0; i < count; ++i) {
      Blob b{};
      b.r0 = rng.uniform(0.08, 0.16) * size;
      for (int k = 0; k < 3; ++k) {
        b.amp[k] = rng.uniform(0.0, 0.3 / static_cast<double>(k + 2));
        b.phase[k] = rng.uniform(0.0, 2.0 * std::numbers::pi);
      }
      b.cy = rng.uniform(0.2, 0.8) * size;
      b.cx = rng.uniform(0.2, 0.8) * size;
      double max_r = 1.0;
      for (double a : b.amp) max_r += a;
      if (!inside(b.cy, b.cx, b.r0 * max_r, size)) return false;
      paint_blob(grid, n, b);
    }
  }
  return true;
}

std::vector<double> gaussian_kernel(double sigma) {
  const auto radius = static_cast<long>(std::ceil(3.0 * sigma));
  std::vector<double> k(static_cast<std::size_t>(2 * radius + 1));
  double total = 0.0;
  for (long i = -radius; i <= radius; ++i) {
    const double v = std::exp(-0.5 * static_cast<double>(i * i) / (sigma * sigma));
    k[static_cast<std::size_t>(i + radius)] = v;
    total += v;
  }
  for (auto& v : k) v /= total;
  return k;
}

// Separable blur with clamp-to-edge borders.
void blur_plane(std::vector<double>& plane, std::size_t n, double sigma) {
  const auto k = gaussian_kernel(sigma);
  const long radius = static_cast<long>(k.size() / 2);
  const long N = static_cast<long>(n);
  std::vector<double> tmp(plane.size());
  for (long y = 0; y < N; ++y) {
    for (long x = 0; x < N; ++x) {
      double acc = 0.0;
      for (long i = -radius; i <= radius; ++i) {
        const long xx = std::clamp(x + i, 0L, N - 1);
        acc += k[static_cast<std::size_t>(i + radius)] * plane[static_cast<std::size_t>(y * N + xx)];
      }
      tmp[static_cast<std::size_t>(y * N + x)] = acc;
    }
  }
  for (long y = 0; y < N; ++y) {
    for (long x = 0; x < N; ++x) {
      double acc = 0.0;
      for (long i = -radius; i <= radius; ++i) {
        const long yy = std::clamp(y + i, 0L, N - 1);
        acc += k[static_cast<std::size_t>(i + radius)] * tmp[static_cast<std::size_t>(yy * N + x)];
      }
      plane[static_cast<std::size_t>(y * N + x)] = acc;
    }
  }
}

json range_to_json(const Range& r) { return json::array({r.lo, r.hi}); }

Range range_from_json(const json& j, const std::string& where) {
  if (!j.is_array() || j.size() != 2 || !j[0].is_number() || !j[1].is_number()) {
    throw ConfigError(where + " must be a [lo, hi] number pair");
  }
  return Range{j[0].get<double>(), j[1].get<double>()};
}

std::string sample_file(const char* prefix, std::size_t i) {
  return std::string(prefix) + "_" + std::to_string(i) + ".fdt1";
}

}  // namespace

std::string to_string(Appearance a) {
  switch (a) {
    case Appearance::BrightFg: return "bright_fg";
    case Appearance::BlurredHotFg: return "blurred_hot_fg";
    case Appearance::Multichannel: return "multichannel";
  }
  return "?";
}

std::string to_string(ShapeFamily s) {
  return s == ShapeFamily::EllipsePair ? "ellipse_pair" : "irregular_blob";
}

Appearance parse_appearance(const std::string& s) {
  if (s == "bright_fg") return Appearance::BrightFg;
  if (s == "blurred_hot_fg") return Appearance::BlurredHotFg;
  if (s == "multichannel") return Appearance::Multichannel;
  throw ConfigError("unknown appearance '" + s + "'");
}

ShapeFamily parse_shape_family(const std::string& s) {
  if (s == "ellipse_pair") return ShapeFamily::EllipsePair;
  if (s == "irregular_blob") return ShapeFamily::IrregularBlob;
  throw ConfigError("unknown shape_family '" + s + "'");
}

void DomainSpec::validate() const {
  if (name.empty()) throw ConfigError("domain name must not be empty");
  if (!(noise_std >= 0.0) || !std::isfinite(noise_std)) throw ConfigError("noise_std must be >= 0");
  if (!(blur_sigma >= 0.0) || !std::isfinite(blur_sigma)) throw ConfigError("blur_sigma must be >= 0");
  if (image_size < 8 || image_size > 4096) throw ConfigError("image_size must be in [8, 4096]");
  const std::size_t expected = appearance == Appearance::Multichannel ? 3 : 1;
  if (channels.size() != expected) {
    throw ConfigError("appearance " + to_string(appearance) + " needs " + std::to_string(expected) + " channel(s)");
  }
  for (const auto& c : channels) {
    for (const Range* r : {&c.background, &c.foreground}) {
      if (!std::isfinite(r->lo) || !std::isfinite(r->hi) || r->lo > r->hi) {
        throw ConfigError("intensity range must satisfy lo <= hi");
      }
    }
  }
  if (!(min_foreground >= 0.0 && min_foreground < max_foreground && max_foreground <= 1.0)) {
    throw ConfigError("foreground bounds must satisfy 0 <= min < max <= 1");
  }
  if (max_attempts < 1) throw ConfigError("max_attempts must be >= 1");
}

DomainSpec DomainSpec::ct_like(std::size_t image_size) {
  DomainSpec s;
  s.name = "ct";
  s.appearance = Appearance::BrightFg;
  s.shape_family = ShapeFamily::EllipsePair;
  s.noise_std = 0.05;
  s.channels = {{{0.2, 0.2}, {0.8, 0.8}}};
  s.image_size = image_size;
  return s;
}

DomainSpec DomainSpec::pet_like(std::size_t image_size) {
  DomainSpec s;
  s.name = "pet";
  s.appearance = Appearance::BlurredHotFg;
  s.shape_family = ShapeFamily::EllipsePair;
  s.noise_std = 0.1;
  s.blur_sigma = 1.5;
  s.channels = {{{0.05, 0.15}, {0.6, 1.0}}};
  s.image_size = image_size;
  return s;
}

DomainSpec DomainSpec::breast_mri_like(std::size_t image_size) {
  DomainSpec s;
  s.name = "breast_mri";
  s.appearance = Appearance::Multichannel;
  s.shape_family = ShapeFamily::EllipsePair;
  s.noise_std = 0.05;
  s.channels = {{{0.35, 0.45}, {0.45, 0.55}},   // T1 pre-contrast
                {{0.30, 0.40}, {0.75, 0.95}},   // T1 post-contrast
                {{0.50, 0.60}, {0.20, 0.30}}};  // T2
  s.image_size = image_size;
  return s;
}

DomainSpec DomainSpec::brain_mri_like(std::size_t image_size) {
  DomainSpec s;
  s.name = "brain_mri";
  s.appearance = Appearance::Multichannel;
  s.shape_family = ShapeFamily::IrregularBlob;
  s.noise_std = 0.05;
  s.channels = {{{0.45, 0.55}, {0.30, 0.40}},   // T1 pre-contrast, hypointense
                {{0.40, 0.50}, {0.70, 0.90}},   // T1 post-contrast, enhancing
                {{0.30, 0.40}, {0.70, 0.85}}};  // T2, hyperintense
  s.image_size = image_size;
  return s;
}

Shape Dataset::image_shape() const {
  if (samples.empty()) throw UsageError("dataset '" + domain + "' is empty");
  return samples.front().image.shape();
}

double foreground_fraction(const Tensor<float>& mask) {
  return sum(mask) / static_cast<double>(mask.size());
}

Dataset generate(const DomainSpec& spec, std::size_t n, std::uint64_t seed) {
  spec.validate();
  if (n < 1) throw UsageError("generate: n must be >= 1");
  Rng geometry(seed);
  Rng appearance(derive_seed(seed, kAppearanceStream));
  const std::size_t size = spec.image_size;
  const std::size_t pixels = size * size;
  const std::size_t channels = spec.channel_count();

  Dataset out;
  out.domain = spec.name;
  out.spec = spec;
  out.samples.reserve(n);
  Grid grid(pixels);
  for (std::size_t i = 0; i < n; ++i) {
    bool placed = false;
    for (std::size_t attempt = 0; attempt < spec.max_attempts && !placed; ++attempt) {
      if (!try_geometry(spec, geometry, grid)) continue;
      const double frac = static_cast<double>(std::count(grid.begin(), grid.end(), 1)) / static_cast<double>(pixels);
      placed = frac >= spec.min_foreground && frac <= spec.max_foreground;
    }
    if (!placed) {
      throw GenerationError("could not place objects for sample " + std::to_string(i) + " of domain '" + spec.name +
                            "' within foreground bounds after " + std::to_string(spec.max_attempts) + " attempts");
    }

    Sample sample{Tensor<float>({channels, size, size}), Tensor<float>({1, size, size})};
    for (std::size_t p = 0; p < pixels; ++p) sample.mask[p] = grid[p] ? 1.0f : 0.0f;

    std::vector<double> plane(pixels);
    for (std::size_t c = 0; c < channels; ++c) {
      const auto& contrast = spec.channels[c];
      const double bg = appearance.uniform(contrast.background.lo, contrast.background.hi);
      const double fg = appearance.uniform(contrast.foreground.lo, contrast.foreground.hi);
      for (std::size_t p = 0; p < pixels; ++p) plane[p] = grid[p] ? fg : bg;
      if (spec.blur_sigma > 0.0) blur_plane(plane, size, spec.blur_sigma);
      if (spec.noise_std > 0.0) {
        for (auto& v : plane) v += spec.noise_std * appearance.normal();
      }
      float* dst = sample.image.raw() + c * pixels;
      for (std::size_t p = 0; p < pixels; ++p) dst[p] = static_cast<float>(plane[p]);
    }
    out.samples.push_back(std::move(sample));
  }
  return out;
}

std::string spec_to_json(const DomainSpec& spec) {
  json channels = json::array();
  for (const auto& c : spec.channels) {
    channels.push_back({{"background", range_to_json(c.background)}, {"foreground", range_to_json(c.foreground)}});
  }
  json j = {{"name", spec.name},
            {"appearance", to_string(spec.appearance)},
            {"shape_family", to_string(spec.shape_family)},
            {"noise_std", spec.noise_std},
            {"blur_sigma", spec.blur_sigma},
            {"channels", channels},
            {"image_size", spec.image_size},
            {"min_foreground", spec.min_foreground},
            {"max_foreground", spec.max_foreground},
            {"max_attempts", spec.max_attempts}};
  return j.dump(2);
}

namespace {

DomainSpec spec_from_json_value(const json& j) {
  if (!j.is_object()) throw ConfigError("domain spec must be a JSON object");
  static const std::set<std::string> known = {"name",         "appearance",     "shape_family",   "noise_std",
                                              "blur_sigma",   "channels",       "image_size",     "min_foreground",
                                              "max_foreground", "max_attempts"};
  for (const auto& [key, _] : j.items()) {
    if (!known.contains(key)) throw ConfigError("unknown key '" + key + "' in domain spec");
  }
  for (const char* required : {"name", "appearance"}) {
    if (!j.contains(required) || !j[required].is_string()) {
      throw ConfigError(std::string("domain spec needs string field '") + required + "'");
    }
  }
  const Appearance appearance = parse_appearance(j["appearance"].get<std::string>());
  DomainSpec s = appearance == Appearance::BrightFg       ? DomainSpec::ct_like()
                 : appearance == Appearance::BlurredHotFg ? DomainSpec::pet_like()
                                                          : DomainSpec::breast_mri_like();
  s.name = j["name"].get<std::string>();
  auto number = [&](const char* key, double& out) {
    if (!j.contains(key)) return;
    if (!j[key].is_number()) throw ConfigError(std::string(key) + " must be a number");
    out = j[key].get<double>();
  };
  auto count = [&](const char* key, std::size_t& out) {
    if (!j.contains(key)) return;
    if (!j[key].is_number_unsigned()) throw ConfigError(std::string(key) + " must be a non-negative integer");
    out = j[key].get<std::size_t>();
  };
  if (j.contains("shape_family")) {
    if (!j["shape_family"].is_string()) throw ConfigError("shape_family must be a string");
    s.shape_family = parse_shape_family(j["shape_family"].get<std::string>());
  }
  number("noise_std", s.noise_std);
  number("blur_sigma", s.blur_sigma);
  number("min_foreground", s.min_foreground);
  number("max_foreground", s.max_foreground);
  count("image_size", s.image_size);
  count("max_attempts", s.max_attempts);
  if (j.contains("channels")) {
    const json& cs = j["channels"];
    if (!cs.is_array()) throw ConfigError("channels must be an array");
    s.channels.clear();
    for (const auto& c : cs) {
      if (!c.is_object() || c.size() != 2 || !c.contains("background") || !c.contains("foreground")) {
        throw ConfigError("each channel needs exactly 'background' and 'foreground'");
      }
      s.channels.push_back({range_from_json(c["background"], "background"),
                            range_from_json(c["foreground"], "foreground")});
    }
  }
  s.validate();
  return s;
}

}  // namespace

DomainSpec spec_from_json(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("invalid domain spec JSON: ") + e.what());
  }
  return spec_from_json_value(j);
}

void save(const Dataset& dataset, const std::string& dir) {
  if (dataset.empty()) throw UsageError("save: dataset is empty");
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw IoError("cannot create directory '" + dir + "': " + ec.message());
  const Shape shape = dataset.image_shape();
  json manifest = {{"domain", dataset.domain},
                   {"split", dataset.split},
                   {"n", dataset.size()},
                   {"image_shape", shape},
                   {"spec", dataset.spec ? json::parse(spec_to_json(*dataset.spec)) : json(nullptr)}};
  const std::string text = manifest.dump(2) + "\n";
  write_file((fs::path(dir) / "manifest.json").string(),
             std::span(reinterpret_cast<const std::uint8_t*>(text.data()), text.size()));
  for (std::size_t i = 0; i < dataset.size(); ++i) {
    const auto& s = dataset.samples[i];
    if (s.image.shape() != shape) throw ShapeError("save: sample " + std::to_string(i) + " image shape differs");
    save_tensor((fs::path(dir) / sample_file("img", i)).string(), s.image);
    save_tensor((fs::path(dir) / sample_file("msk", i)).string(), s.mask);
  }
}

Dataset load(const std::string& dir) {
  const fs::path root(dir);
  const std::string manifest_path = (root / "manifest.json").string();
  const Bytes raw = read_file(manifest_path);
  json m;
  try {
    m = json::parse(raw.begin(), raw.end());
  } catch (const json::exception& e) {
    throw IoError("corrupt manifest '" + manifest_path + "': " + e.what());
  }
  if (!m.is_object() || !m.contains("domain") || !m["domain"].is_string() || !m.contains("split") ||
      !m["split"].is_string() || !m.contains("n") || !m["n"].is_number_unsigned() || !m.contains("image_shape") ||
      !m["image_shape"].is_array() || m["image_shape"].size() != 3) {
    throw FormatError(0, "manifest '" + manifest_path + "' lacks domain/split/n/image_shape");
  }
  Dataset d;
  d.domain = m["domain"].get<std::string>();
  d.split = m["split"].get<std::string>();
  if (m.contains("spec") && !m["spec"].is_null()) d.spec = spec_from_json_value(m["spec"]);
  const auto n = m["n"].get<std::size_t>();
  const Shape shape = m["image_shape"].get<Shape>();

  // Sample files present on disk, to tell a manifest/count mismatch apart
  // from a single missing file.
  std::set<std::string> present;
  std::error_code ec;
  for (const auto& entry : fs::directory_iterator(root, ec)) present.insert(entry.path().filename().string());
  if (ec) throw IoError("cannot list '" + dir + "': " + ec.message());
  std::size_t on_disk = 0;
  while (present.contains(sample_file("img", on_disk)) && present.contains(sample_file("msk", on_disk))) ++on_disk;
  const bool has_stragglers = present.contains(sample_file("img", on_disk)) || present.contains(sample_file("msk", on_disk));
  std::size_t highest = 0;
  for (const auto& name : present) {
    for (const char* prefix : {"img_", "msk_"}) {
      if (name.rfind(prefix, 0) == 0 && name.size() > 9 && name.ends_with(".fdt1")) {
        try {
          highest = std::max(highest, std::stoul(name.substr(4, name.size() - 9)) + 1);
        } catch (const std::exception&) {
        }
      }
    }
  }
  if (!has_stragglers && highest == on_disk && on_disk != n) {
    throw FormatError(0, "manifest '" + manifest_path + "' declares n=" + std::to_string(n) + " but directory holds " +
                             std::to_string(on_disk) + " samples");
  }
  if (highest > n) {
    throw FormatError(0, "directory '" + dir + "' holds sample files beyond manifest n=" + std::to_string(n));
  }

  d.samples.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    Sample s;
    for (auto [prefix, slot] : {std::pair{"img", &s.image}, std::pair{"msk", &s.mask}}) {
      const std::string path = (root / sample_file(prefix, i)).string();
      if (!present.contains(sample_file(prefix, i))) throw IoError("missing sample file '" + path + "'");
      *slot = load_tensor<float>(path);
    }
    if (s.image.shape() != shape) {
      throw FormatError(0, "sample " + std::to_string(i) + " image shape " + shape_to_string(s.image.shape()) +
                               " differs from manifest " + shape_to_string(shape));
    }
    if (s.mask.shape() != Shape{1, shape[1], shape[2]}) {
      throw FormatError(0, "sample " + std::to_string(i) + " mask shape " + shape_to_string(s.mask.shape()));
    }
    for (float v : s.mask.data()) {
      if (v != 0.0f && v != 1.0f) throw FormatError(0, "sample " + std::to_string(i) + " mask is not binary");
    }
    d.samples.push_back(std::move(s));
  }
  return d;
}

std::pair<Dataset, Dataset> split(const Dataset& dataset, std::size_t train_n, std::size_t test_n, Rng& rng) {
  if (train_n + test_n > dataset.size()) {
    throw UsageError("split: need " + std::to_string(train_n + test_n) + " samples, dataset has " +
                     std::to_string(dataset.size()));
  }
  std::vector<std::size_t> order(dataset.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  rng.shuffle(order.begin(), order.end());
  std::vector<std::size_t> train_idx(order.begin(), order.begin() + static_cast<long>(train_n));
  std::vector<std::size_t> test_idx(order.begin() + static_cast<long>(train_n),
                                    order.begin() + static_cast<long>(train_n + test_n));
  std::sort(train_idx.begin(), train_idx.end());
  std::sort(test_idx.begin(), test_idx.end());

  auto subset = [&](const std::vector<std::size_t>& idx, const char* name) {
    Dataset d;
    d.domain = dataset.domain;
    d.split = name;
    d.spec = dataset.spec;
    for (std::size_t i : idx) d.samples.push_back(dataset.samples[i]);
    return d;
  };
  return {subset(train_idx, "train"), subset(test_idx, "test")};
}

Dataset pool(const std::vector<Dataset>& datasets) {
  Dataset out;
  for (const auto& d : datasets) {
    out.domain += (out.domain.empty() ? "" : "+") + d.domain;
    out.samples.insert(out.samples.end(), d.samples.begin(), d.samples.end());
  }
  if (!datasets.empty()) out.split = datasets.front().split;
  return out;
}

}  // namespace fedseg::data
