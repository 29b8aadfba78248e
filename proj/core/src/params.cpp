#include "uforge/params.hpp"

#include <cmath>

#include "uforge/errors.hpp"

namespace uforge {

void ParamSet::add(std::string name, Tensor2D tensor) {
  for (const Entry& e : entries_) {
    if (e.name == name) {
      throw InvalidInputError("ParamSet: duplicate entry name '" + name + "'");
    }
  }
  entries_.push_back(Entry{std::move(name), std::move(tensor)});
}

const Tensor2D& ParamSet::tensor(std::string_view name) const {
  for (const Entry& e : entries_) {
    if (e.name == name) return e.tensor;
  }
  throw InvalidInputError("ParamSet: no entry named '" + std::string(name) + "'");
}

Tensor2D& ParamSet::tensor(std::string_view name) {
  for (Entry& e : entries_) {
    if (e.name == name) return e.tensor;
  }
  throw InvalidInputError("ParamSet: no entry named '" + std::string(name) + "'");
}

std::size_t ParamSet::scalar_count() const {
  std::size_t n = 0;
  for (const Entry& e : entries_) n += e.tensor.size();
  return n;
}

bool ParamSet::same_layout(const ParamSet& other) const {
  if (entries_.size() != other.entries_.size()) return false;
  for (std::size_t i = 0; i < entries_.size(); ++i) {
    if (entries_[i].name != other.entries_[i].name) return false;
    if (!entries_[i].tensor.same_shape(other.entries_[i].tensor)) return false;
  }
  return true;
}

ParamDelta param_delta(const ParamSet& params, const ParamSet& reference) {
  if (!params.same_layout(reference)) {
    throw InvalidInputError("param_delta: parameter layouts differ");
  }
  ParamDelta out;
  for (std::size_t i = 0; i < params.entry_count(); ++i) {
    const auto& cur = params.entry(i).tensor.values();
    const auto& ref = reference.entry(i).tensor.values();
    double sq = 0.0;
    for (std::size_t j = 0; j < cur.size(); ++j) {
      const double d = cur[j] - ref[j];
      sq += d * d;
    }
    const double delta = std::sqrt(sq) / static_cast<double>(cur.size());
    out.per_entry.emplace_back(params.entry(i).name, delta);
    if (delta > out.max) out.max = delta;
  }
  return out;
}

double l1_norm(const ParamSet& params) {
  double sum = 0.0;
  for (const auto& e : params.entries()) {
    for (double v : e.tensor.values()) sum += std::fabs(v);
  }
  return sum;
}

double squared_cosine(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) {
    throw InvalidInputError("squared_cosine: vector lengths differ");
  }
  double dot = 0.0, na = 0.0, nb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    dot += a[i] * b[i];
    na += a[i] * a[i];
    nb += b[i] * b[i];
  }
  if (na == 0.0 && nb == 0.0) {
    throw InvalidInputError("squared_cosine: similarity undefined for two zero vectors");
  }
  if (na == 0.0 || nb == 0.0) return 0.0;
  return (dot * dot) / (na * nb);
}

}  // namespace uforge
