#include "fedseg/metrics.hpp"

#include <algorithm>
#include <numeric>
#include <sstream>

#include "fedseg/errors.hpp"
#include "fedseg/trainer.hpp"
#include "json.hpp"

namespace fedseg::metrics {

namespace {

struct Plane {
  std::size_t h, w;
};

Plane plane_of(const Tensor<float>& m, const char* what) {
  const Shape& s = m.shape();
  if (s.size() < 2) throw UsageError(std::string(what) + ": mask needs at least 2 dims, got " + shape_to_string(s));
  for (std::size_t i = 0; i + 2 < s.size(); ++i)
    if (s[i] != 1) throw UsageError(std::string(what) + ": expected a single mask, got " + shape_to_string(s));
  return {s[s.size() - 2], s[s.size() - 1]};
}

void require_binary(const Tensor<float>& m, const char* what) {
  for (float v : m.data())
    if (v != 0.0f && v != 1.0f) throw UsageError(std::string(what) + ": mask is not binary");
}

std::size_t count(const Tensor<float>& m) {
  std::size_t n = 0;
  for (float v : m.data()) n += v != 0.0f;
  return n;
}

}  // namespace

Tensor<float> binarize(const Tensor<float>& pred, double threshold) {
  if (!(threshold > 0.0 && threshold < 1.0)) throw UsageError("threshold must lie in (0, 1)");
  Tensor<float> out(pred.shape());
  auto src = pred.data();
  auto dst = out.data();
  for (std::size_t i = 0; i < src.size(); ++i) dst[i] = static_cast<double>(src[i]) >= threshold ? 1.0f : 0.0f;
  return out;
}

double dice(const Tensor<float>& a, const Tensor<float>& b) {
  if (a.shape() != b.shape())
    throw ShapeError("dice: shape mismatch " + shape_to_string(a.shape()) + " vs " + shape_to_string(b.shape()));
  require_binary(a, "dice");
  require_binary(b, "dice");
  std::size_t na = 0, nb = 0, both = 0;
  auto da = a.data();
  auto db = b.data();
  for (std::size_t i = 0; i < da.size(); ++i) {
    const bool x = da[i] != 0.0f, y = db[i] != 0.0f;
    na += x;
    nb += y;
    both += x && y;
  }
  if (na + nb == 0) return 1.0;
  return 2.0 * static_cast<double>(both) / static_cast<double>(na + nb);
}

std::optional<Box> bbox(const Tensor<float>& mask) {
  const Plane p = plane_of(mask, "bbox");
  require_binary(mask, "bbox");
  std::optional<Box> box;
  const float* m = mask.raw();
  for (std::size_t y = 0; y < p.h; ++y) {
    for (std::size_t x = 0; x < p.w; ++x) {
      if (m[y * p.w + x] == 0.0f) continue;
      if (!box) {
        box = Box{y, x, y, x};
      } else {
        box->y0 = std::min(box->y0, y);
        box->x0 = std::min(box->x0, x);
        box->y1 = std::max(box->y1, y);
        box->x1 = std::max(box->x1, x);
      }
    }
  }
  return box;
}

double overlap_similarity(const Tensor<float>& organ, const std::optional<Box>& box) {
  const Plane p = plane_of(organ, "overlap_similarity");
  require_binary(organ, "overlap_similarity");
  const std::size_t total = count(organ);
  if (total == 0) throw UsageError("overlap_similarity: organ mask is empty");
  if (!box) return 0.0;
  if (box->y0 > box->y1 || box->x0 > box->x1) throw UsageError("overlap_similarity: malformed box");
  const float* m = organ.raw();
  std::size_t inside = 0;
  const std::size_t y1 = std::min(box->y1, p.h - 1), x1 = std::min(box->x1, p.w - 1);
  for (std::size_t y = box->y0; y <= y1 && y < p.h; ++y)
    for (std::size_t x = box->x0; x <= x1 && x < p.w; ++x) inside += m[y * p.w + x] != 0.0f;
  return static_cast<double>(inside) / static_cast<double>(total);
}

std::string to_string(Task task) { return task == Task::Segmentation ? "segmentation" : "localization"; }

Task parse_task(const std::string& text) {
  if (text == "segmentation") return Task::Segmentation;
  if (text == "localization") return Task::Localization;
  throw ConfigError("unknown task '" + text + "' (expected segmentation or localization)");
}

EvalReport evaluate(const Predictor& predict, const std::vector<data::Dataset>& test_sets, Task task,
                    double threshold) {
  if (test_sets.empty()) throw UsageError("evaluate: no test sets");
  constexpr std::size_t kChunk = 8;
  EvalReport report;
  report.task = task;
  double pooled_sum = 0.0;
  std::size_t pooled_n = 0;
  for (const auto& ds : test_sets) {
    if (ds.empty()) throw UsageError("evaluate: test set '" + ds.domain + "' is empty");
    DomainReport dom;
    dom.name = ds.domain;
    std::vector<std::size_t> idx(ds.size());
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    for (std::size_t start = 0; start < idx.size(); start += kChunk) {
      const std::size_t n = std::min(kChunk, idx.size() - start);
      auto [images, masks] = make_batch(ds, std::span<const std::size_t>(idx.data() + start, n));
      const Tensor<float> pred = predict(images);
      if (pred.rank() != 4 || pred.dim(0) != n || pred.dim(1) != 1 || pred.dim(2) != masks.dim(2) ||
          pred.dim(3) != masks.dim(3))
        throw ShapeError("evaluate: predictor returned " + shape_to_string(pred.shape()) + " for " +
                         shape_to_string(images.shape()));
      const std::size_t plane = masks.dim(2) * masks.dim(3);
      const Shape one{1, masks.dim(2), masks.dim(3)};
      for (std::size_t k = 0; k < n; ++k) {
        Tensor<float> p(one), truth(one);
        std::copy_n(pred.raw() + k * plane, plane, p.raw());
        std::copy_n(masks.raw() + k * plane, plane, truth.raw());
        const Tensor<float> bin = binarize(p, threshold);
        const double v = task == Task::Segmentation ? dice(bin, truth) : overlap_similarity(truth, bbox(bin));
        dom.values.push_back(v);
      }
    }
    const double sum = std::accumulate(dom.values.begin(), dom.values.end(), 0.0);
    dom.mean = sum / static_cast<double>(dom.values.size());
    dom.min = *std::min_element(dom.values.begin(), dom.values.end());
    dom.max = *std::max_element(dom.values.begin(), dom.values.end());
    dom.failures = static_cast<std::size_t>(std::count(dom.values.begin(), dom.values.end(), 0.0));
    pooled_sum += sum;
    pooled_n += dom.values.size();
    report.domains.push_back(std::move(dom));
  }
  report.pooled_mean = pooled_sum / static_cast<double>(pooled_n);
  return report;
}

EvalReport evaluate(const UNet<float>& model, const std::vector<data::Dataset>& test_sets, Task task,
                    double threshold) {
  return evaluate([&model](const Tensor<float>& batch) { return model.predict(batch); }, test_sets, task,
                  threshold);
}

std::string to_json(const EvalReport& report) {
  nlohmann::json j;
  j["task"] = to_string(report.task);
  j["domains"] = nlohmann::json::array();
  for (const auto& d : report.domains) {
    j["domains"].push_back(
        {{"name", d.name}, {"n", d.values.size()}, {"mean", d.mean}, {"min", d.min}, {"max", d.max}, {"failures", d.failures}});
  }
  j["pooled_mean"] = report.pooled_mean;
  return j.dump(2);
}

std::string to_csv(const EvalReport& report) {
  std::ostringstream out;
  out.precision(17);
  out << "domain,index,value\n";
  for (const auto& d : report.domains)
    for (std::size_t i = 0; i < d.values.size(); ++i) out << d.name << ',' << i << ',' << d.values[i] << '\n';
  return out.str();
}

}  // namespace fedseg::metrics
