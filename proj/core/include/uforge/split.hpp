#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include "uforge/dataset.hpp"

namespace uforge::data {

enum class SplitMode { kSampleWise, kClassWise };

struct SplitSpec {
  SplitMode mode = SplitMode::kSampleWise;
  double unlearn_fraction = 0.1;       // sample_wise
  std::vector<int> unlearn_classes;    // class_wise
  std::vector<int> ood_classes;        // class_wise; held out of training entirely
  std::uint64_t seed = 0;

  void validate() const;
};

/// The unlearning partition. Example identity is the row index into the
/// source dataset; the index lists give exact provenance.
struct UnlearnSplit {
  LabeledDataset train_full;  // D: everything the original model trains on
  LabeledDataset retained;    // D_r
  LabeledDataset unlearned;   // D_u
  LabeledDataset test;        // D_t
  LabeledDataset ood_pool;    // never trained

  std::vector<std::size_t> train_indices;     // into the source dataset
  std::vector<std::size_t> retained_indices;  // into the source dataset
  std::vector<std::size_t> unlearned_indices; // into the source dataset
  std::vector<std::size_t> ood_indices;       // into the source dataset

  SplitSpec spec;
};

/// Partition `source` for unlearning. Sample-wise draws a seed-deterministic
/// uniform subset of ceil(fraction*|D|) rows as D_u. Class-wise sends every
/// row of each unlearn class to D_u and removes ood-class rows from training
/// entirely. `test` passes through as D_t.
UnlearnSplit split_for_unlearning(const LabeledDataset& source,
                                  const LabeledDataset& test,
                                  const SplitSpec& spec);

/// Split provenance as JSON: spec echo, seed, and the index lists.
void save_split_manifest(const std::filesystem::path& path, const UnlearnSplit& split);

}  // namespace uforge::data
