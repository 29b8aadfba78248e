#pragma once

#include <span>
#include <string>
#include <utility>
#include <vector>

#include "uforge/tensor.hpp"

namespace uforge {

/// Named, ordered collection of parameter tensors. Order is part of the
/// identity: save/load and all elementwise ops preserve it.
class ParamSet {
 public:
  struct Entry {
    std::string name;
    Tensor2D tensor;
    bool operator==(const Entry&) const = default;
  };

  ParamSet() = default;

  void add(std::string name, Tensor2D tensor);

  std::size_t entry_count() const { return entries_.size(); }
  const Entry& entry(std::size_t i) const { return entries_[i]; }
  Entry& entry(std::size_t i) { return entries_[i]; }
  const std::vector<Entry>& entries() const { return entries_; }

  const Tensor2D& tensor(std::string_view name) const;
  Tensor2D& tensor(std::string_view name);

  /// Total scalar count across entries.
  std::size_t scalar_count() const;

  /// True iff both sets have the same names, order, and shapes.
  bool same_layout(const ParamSet& other) const;

  bool operator==(const ParamSet&) const = default;

 private:
  std::vector<Entry> entries_;
};

/// Per-entry normalized change against a reference layout plus its maximum:
/// delta_i = ||theta_i - ref_i||_2 / numel(theta_i).
struct ParamDelta {
  std::vector<std::pair<std::string, double>> per_entry;
  double max = 0.0;
};

ParamDelta param_delta(const ParamSet& params, const ParamSet& reference);

/// Sum of absolute values over every parameter scalar.
double l1_norm(const ParamSet& params);

/// (a.b)^2 / (|a|^2 |b|^2). Exactly one zero vector yields 0; both zero is
/// an undefined-similarity error.
double squared_cosine(std::span<const double> a, std::span<const double> b);

}  // namespace uforge
