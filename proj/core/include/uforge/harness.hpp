#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "uforge/attacks.hpp"
#include "uforge/config.hpp"
#include "uforge/metrics.hpp"
#include "uforge/split.hpp"
#include "uforge/train.hpp"
#include "uforge/unlearn.hpp"

namespace uforge::harness {

inline constexpr const char* kToolVersion = "0.1.0";
inline constexpr const char* kThreadsEnvVar = "UNLEARN_FORGE_THREADS";

/// Everything a run needs, materialized from a KvConfig. Field paths in
/// validation errors match the config keys.
struct ExperimentConfig {
  // dataset
  std::string dataset_kind = "synthetic";  // synthetic | csv
  std::size_t classes = 8;
  std::size_t dim = 16;
  std::size_t per_class = 200;
  double spread = 0.5;
  std::size_t ood_count = 5;     // extra never-trained clusters (class-wise)
  double test_fraction = 0.25;
  std::string train_csv;
  std::string test_csv;

  // architecture
  std::vector<std::size_t> hidden = {32, 16};
  nn::Activation activation = nn::Activation::kRelu;

  // original training
  nn::TrainConfig train;

  // split
  data::SplitMode mode = data::SplitMode::kClassWise;
  double unlearn_fraction = 0.1;
  int fixed_unlearn_class = -1;  // -1 draws one class per trial

  // experiment
  std::size_t trials = 20;
  std::uint64_t master_seed = 42;

  // attacks
  std::size_t shadow_count = 16;
  attack::ReaClassConfig rea_class;
  std::size_t rea_access = 24;       // attacker samples per candidate class
  std::size_t rea_candidates = 5;    // OOD classes inferred per trial; the rest
                                     // of the OOD clusters form the reference pool
  attack::ReaSampleConfig rea_sample;
  double pseudo_retain_fraction = 1.0 / 3.0;

  // metric selections
  bool report_representation = true;
  metrics::ResidualMetric residual_metric = metrics::ResidualMetric::kMeanLoss;

  KvConfig raw;

  /// Per-method unlearning configuration: "unlearn.<key>" defaults overlaid
  /// by "unlearn.<method>.<key>".
  unlearn::UnlearnConfig unlearn_for(unlearn::Method method) const;

  nn::MlpArchitecture base_arch() const;
  void validate() const;
};

ExperimentConfig load_experiment_config(const std::filesystem::path& path);
ExperimentConfig experiment_config_from(const KvConfig& kv);

/// Stable per-trial seed derivation: hash_stream(master_seed, "trial/<i>").
std::uint64_t trial_seed(std::uint64_t master_seed, std::size_t trial);

/// Deterministic reconstruction of one trial's data and architecture; every
/// command rebuilds trials through this single path.
struct TrialContext {
  std::size_t index = 0;
  std::uint64_t seed = 0;
  nn::MlpArchitecture arch;
  data::UnlearnSplit split;
  int unlearned_class = -1;       // class-wise only
  std::vector<int> ood_classes;   // class-wise only
};

TrialContext build_trial(const ExperimentConfig& cfg, std::size_t trial);

/// First free versioned variant of `path` (name.ext, name.v2.ext, ...).
std::filesystem::path versioned_path(const std::filesystem::path& path);
/// Highest existing version of `path`, or `path` itself if none exists.
std::filesystem::path latest_path(const std::filesystem::path& path);

struct CommandResult {
  std::vector<std::filesystem::path> artifacts;
};

CommandResult cmd_train(const ExperimentConfig& cfg, const std::filesystem::path& out_dir);
CommandResult cmd_unlearn(const ExperimentConfig& cfg, const std::filesystem::path& out_dir,
                          unlearn::Method method);
CommandResult cmd_attack(const ExperimentConfig& cfg, const std::filesystem::path& out_dir,
                         const std::string& attack_name, const std::string& victim_tag);
CommandResult cmd_report(const std::filesystem::path& out_dir);
CommandResult cmd_landscape(const ExperimentConfig& cfg, const std::filesystem::path& out_dir,
                            const std::string& victim_tag, std::size_t trial,
                            double extent, std::size_t resolution);

/// Pooled (score, membership) rows for one attack/victim pair, read back
/// from the pooled CSV artifact.
std::vector<std::pair<double, bool>> load_pooled_scores(const std::filesystem::path& pooled_csv);

}  // namespace uforge::harness
