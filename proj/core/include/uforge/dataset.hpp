#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "uforge/tensor.hpp"

namespace uforge::data {

struct LabeledDataset {
  Tensor2D features;           // one example per row
  std::vector<int> labels;
  std::size_t class_count = 0; // size of the label space, not of the model head
  std::string name;

  std::size_t size() const { return labels.size(); }
  std::size_t dim() const { return features.cols(); }

  void validate() const;

  /// New dataset holding the given rows, in order. Indices must be in range.
  LabeledDataset select(const std::vector<std::size_t>& indices,
                        std::string new_name) const;
};

/// Isotropic Gaussian blobs: class c is drawn around a seed-determined mean
/// in [-1,1]^dim with standard deviation `spread`. Rows are grouped by class
/// (class c occupies rows [c*per_class, (c+1)*per_class)).
LabeledDataset make_synthetic_gaussian(std::size_t class_count, std::size_t dim,
                                       std::size_t per_class, double spread,
                                       std::uint64_t seed,
                                       std::string name = "synthetic");

/// Fresh draws around the same class means (the test-set companion of
/// make_synthetic_gaussian). Different noise stream, identical means.
LabeledDataset make_synthetic_gaussian_like(std::size_t class_count, std::size_t dim,
                                            std::size_t per_class, double spread,
                                            std::uint64_t seed, std::string name);

/// Rows of "label,f1,...,fd" with a constant feature count. Empty file gives
/// an empty dataset. Ragged rows, non-numeric fields, and out-of-range labels
/// raise ParseError with the 1-based row number.
LabeledDataset load_csv_dataset(const std::filesystem::path& path,
                                std::size_t class_count);

/// Inverse of load_csv_dataset; used for fixtures and artifact export.
void save_csv_dataset(const std::filesystem::path& path, const LabeledDataset& data);

}  // namespace uforge::data
