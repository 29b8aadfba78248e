#include "uforge/split.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>

#include <nlohmann/json.hpp>

#include "uforge/errors.hpp"
#include "uforge/rng.hpp"

namespace uforge::data {

void SplitSpec::validate() const {
  if (mode == SplitMode::kSampleWise) {
    if (unlearn_fraction <= 0.0 || unlearn_fraction >= 1.0) {
      throw InvalidInputError("SplitSpec: unlearn_fraction must lie in (0,1)");
    }
  } else {
    if (unlearn_classes.empty()) {
      throw InvalidInputError("SplitSpec: class_wise mode needs unlearn_classes");
    }
    for (int u : unlearn_classes) {
      for (int o : ood_classes) {
        if (u == o) {
          throw InvalidInputError("SplitSpec: class " + std::to_string(u) +
                                  " is both unlearned and OOD");
        }
      }
    }
  }
}

UnlearnSplit split_for_unlearning(const LabeledDataset& source,
                                  const LabeledDataset& test,
                                  const SplitSpec& spec) {
  spec.validate();
  source.validate();

  UnlearnSplit split;
  split.spec = spec;

  if (spec.mode == SplitMode::kSampleWise) {
    split.train_indices.resize(source.size());
    for (std::size_t i = 0; i < source.size(); ++i) split.train_indices[i] = i;

    const auto unlearn_count = static_cast<std::size_t>(
        std::ceil(spec.unlearn_fraction * static_cast<double>(source.size())));

    // Seed-deterministic Fisher-Yates; the first unlearn_count slots are D_u.
    std::vector<std::size_t> shuffled = split.train_indices;
    CounterRng rng(spec.seed, "split/sample_wise");
    for (std::size_t i = shuffled.size(); i > 1; --i) {
      const std::size_t j = rng.next_below(i);
      std::swap(shuffled[i - 1], shuffled[j]);
    }
    split.unlearned_indices.assign(shuffled.begin(),
                                   shuffled.begin() + static_cast<std::ptrdiff_t>(unlearn_count));
    split.retained_indices.assign(shuffled.begin() + static_cast<std::ptrdiff_t>(unlearn_count),
                                  shuffled.end());
    std::sort(split.unlearned_indices.begin(), split.unlearned_indices.end());
    std::sort(split.retained_indices.begin(), split.retained_indices.end());
  } else {
    const std::set<int> unlearn_set(spec.unlearn_classes.begin(), spec.unlearn_classes.end());
    const std::set<int> ood_set(spec.ood_classes.begin(), spec.ood_classes.end());

    std::set<int> seen;
    for (std::size_t i = 0; i < source.size(); ++i) {
      const int y = source.labels[i];
      seen.insert(y);
      if (ood_set.count(y)) {
        split.ood_indices.push_back(i);
      } else if (unlearn_set.count(y)) {
        split.train_indices.push_back(i);
        split.unlearned_indices.push_back(i);
      } else {
        split.train_indices.push_back(i);
        split.retained_indices.push_back(i);
      }
    }
    for (int u : spec.unlearn_classes) {
      if (!seen.count(u)) {
        throw InvalidInputError("split_for_unlearning: unlearn class " +
                                std::to_string(u) + " absent from dataset");
      }
    }
  }

  split.train_full = source.select(split.train_indices, source.name + "/train");
  split.retained = source.select(split.retained_indices, source.name + "/retained");
  split.unlearned = source.select(split.unlearned_indices, source.name + "/unlearned");
  split.ood_pool = source.select(split.ood_indices, source.name + "/ood");
  split.test = test;
  return split;
}

void save_split_manifest(const std::filesystem::path& path, const UnlearnSplit& split) {
  nlohmann::json j;
  j["spec"]["mode"] =
      split.spec.mode == SplitMode::kSampleWise ? "sample_wise" : "class_wise";
  j["spec"]["unlearn_fraction"] = split.spec.unlearn_fraction;
  j["spec"]["unlearn_classes"] = split.spec.unlearn_classes;
  j["spec"]["ood_classes"] = split.spec.ood_classes;
  j["spec"]["seed"] = split.spec.seed;
  j["train_indices"] = split.train_indices;
  j["retained_indices"] = split.retained_indices;
  j["unlearned_indices"] = split.unlearned_indices;
  j["ood_indices"] = split.ood_indices;

  std::ofstream os(path, std::ios::trunc);
  if (!os) throw IoError("save_split_manifest: cannot open " + path.string());
  os << j.dump(2) << '\n';
}

}  // namespace uforge::data
