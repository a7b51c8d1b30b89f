#pragma once

#include <cmath>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "fedseg/tensor.hpp"

namespace fedseg {

// Ordered, uniquely named collection of tensors. Order is whatever the owner
// (the model) defines and is preserved through serialization and averaging.
template <typename T>
class ParameterSet {
 public:
  using Entry = std::pair<std::string, Tensor<T>>;

  void add(std::string name, Tensor<T> tensor) {
    if (tensor.empty()) throw ShapeError("parameter '" + name + "' has no shape");
    if (index_.contains(name)) throw UsageError("duplicate parameter name '" + name + "'");
    index_.emplace(name, entries_.size());
    entries_.emplace_back(std::move(name), std::move(tensor));
  }

  std::size_t size() const noexcept { return entries_.size(); }
  bool empty() const noexcept { return entries_.empty(); }

  const Entry& operator[](std::size_t i) const { return entries_[i]; }
  Tensor<T>& tensor(std::size_t i) { return entries_[i].second; }
  const Tensor<T>& tensor(std::size_t i) const { return entries_[i].second; }
  const std::string& name(std::size_t i) const { return entries_[i].first; }

  auto begin() const noexcept { return entries_.begin(); }
  auto end() const noexcept { return entries_.end(); }

  bool contains(const std::string& name) const { return index_.contains(name); }

  std::size_t index_of(const std::string& name) const {
    auto it = index_.find(name);
    if (it == index_.end()) throw UsageError("no parameter named '" + name + "'");
    return it->second;
  }

  const Tensor<T>& at(const std::string& name) const { return entries_[index_of(name)].second; }
  Tensor<T>& at(const std::string& name) { return entries_[index_of(name)].second; }

  std::vector<std::string> names() const {
    std::vector<std::string> out;
    out.reserve(entries_.size());
    for (const auto& e : entries_) out.push_back(e.first);
    return out;
  }

  std::size_t element_count() const {
    std::size_t n = 0;
    for (const auto& e : entries_) n += e.second.size();
    return n;
  }

  // Throws AlignmentError naming the first entry whose name or shape differs.
  void require_aligned(const ParameterSet& other) const {
    const std::size_t n = std::min(size(), other.size());
    for (std::size_t i = 0; i < n; ++i) {
      if (entries_[i].first != other.entries_[i].first) {
        throw AlignmentError(entries_[i].first, "name differs ('" + other.entries_[i].first + "')");
      }
      if (entries_[i].second.shape() != other.entries_[i].second.shape()) {
        throw AlignmentError(entries_[i].first, "shape " + shape_to_string(entries_[i].second.shape()) +
                                                    " vs " + shape_to_string(other.entries_[i].second.shape()));
      }
    }
    if (size() != other.size()) {
      const auto& extra = size() > n ? entries_[n].first : other.entries_[n].first;
      throw AlignmentError(extra, "entry counts differ (" + std::to_string(size()) + " vs " +
                                      std::to_string(other.size()) + ")");
    }
  }

  bool aligned_with(const ParameterSet& other) const {
    try {
      require_aligned(other);
      return true;
    } catch (const AlignmentError&) {
      return false;
    }
  }

  // Bitwise equality of names, order, shapes and element bytes.
  friend bool operator==(const ParameterSet& a, const ParameterSet& b) { return a.entries_ == b.entries_; }

 private:
  std::vector<Entry> entries_;
  std::unordered_map<std::string, std::size_t> index_;
};

template <typename To, typename From>
ParameterSet<To> parameter_cast(const ParameterSet<From>& in) {
  ParameterSet<To> out;
  for (const auto& [name, t] : in) out.add(name, tensor_cast<To>(t));
  return out;
}

// L2 norm of (a - b) over every element, accumulated in double.
template <typename T>
double diff_norm(const ParameterSet<T>& a, const ParameterSet<T>& b) {
  a.require_aligned(b);
  double acc = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const auto& x = a.tensor(i);
    const auto& y = b.tensor(i);
    for (std::size_t j = 0; j < x.size(); ++j) {
      const double d = static_cast<double>(x[j]) - static_cast<double>(y[j]);
      acc += d * d;
    }
  }
  return std::sqrt(acc);
}

}  // namespace fedseg
