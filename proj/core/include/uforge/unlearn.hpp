#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "uforge/mlp.hpp"
#include "uforge/split.hpp"
#include "uforge/train.hpp"

namespace uforge::unlearn {

enum class Method { kRetrain, kFt, kGa, kRl, kL1Sparse, kOur };

std::string method_name(Method m);
Method method_from_name(const std::string& name);

/// How phase 1 measures the mismatch between current and snapshot features.
enum class OrthObjective {
  // (f . a_hat)^2 / |a|^2 against the unit-normalized snapshot feature a;
  // each term starts at 1 and descent removes the anchor-aligned component.
  kSquaredInnerProduct,
  kL2Distance,  // ablation variant: ||f - a||^2
};

struct UnlearnConfig {
  Method method = Method::kFt;
  std::size_t epochs_phase1 = 8;   // the epoch count for single-phase methods
  std::size_t epochs_phase2 = 8;   // OUR replay only
  nn::SgdConfig sgd_phase1;
  nn::SgdConfig sgd_phase2;
  std::size_t batch_size = 64;
  double delta_threshold = 5e-3;           // Delta_thr guard for OUR phase 1
  bool delta_check_per_batch = false;      // default: once per epoch
  std::vector<std::size_t> orth_layers;    // trace indices; empty = span-3 default
  OrthObjective orth_objective = OrthObjective::kSquaredInnerProduct;
  double l1_lambda = 1e-5;
  double ga_clip_norm = 10.0;
  std::uint64_t seed = 0;

  void validate(const nn::MlpArchitecture& arch) const;
};

struct UnlearnOutcome {
  ParamSet final_params;
  double rte_seconds = 0.0;
  nn::PhaseLog phase_log;
  std::string method_tag;
};

/// First, middle, and last hidden-layer trace indices for the architecture
/// (deduplicated; shallow nets may yield fewer than three).
std::vector<std::size_t> default_orth_layers(const nn::MlpArchitecture& arch);

/// Train from a fresh initialization on D_r only. The gold-standard
/// reference all approximate methods are scored against.
UnlearnOutcome retrain(const nn::MlpArchitecture& arch, const data::UnlearnSplit& split,
                       const UnlearnConfig& cfg);

/// Continue training on D_r; forgetting of D_u comes from catastrophic
/// forgetting alone.
UnlearnOutcome finetune_ft(const ParamSet& params, const nn::MlpArchitecture& arch,
                           const data::UnlearnSplit& split, const UnlearnConfig& cfg);

/// Ascend the cross-entropy on D_u (negated gradients, global norm clip).
UnlearnOutcome gradient_ascent_ga(const ParamSet& params, const nn::MlpArchitecture& arch,
                                  const data::UnlearnSplit& split, const UnlearnConfig& cfg);

/// Train D_u against labels resampled uniformly from the other classes,
/// interleaving one D_r batch per D_u batch.
UnlearnOutcome random_label_rl(const ParamSet& params, const nn::MlpArchitecture& arch,
                               const data::UnlearnSplit& split, const UnlearnConfig& cfg);

/// Fine-tune on D_r with an extra l1 subgradient.
UnlearnOutcome l1_sparse_ft(const ParamSet& params, const nn::MlpArchitecture& arch,
                            const data::UnlearnSplit& split, const UnlearnConfig& cfg);

/// Phase 1: drive the selected hidden features of D_u orthogonal to their
/// pre-unlearning snapshot, guarded by the max-parameter-change threshold.
/// Returns the last state whose epoch-boundary check passed.
std::pair<ParamSet, nn::PhaseLog> our_phase1_orthogonal(const ParamSet& params,
                                                        const nn::MlpArchitecture& arch,
                                                        const data::UnlearnSplit& split,
                                                        const UnlearnConfig& cfg);

/// Phase 2: replay on D_r with l1 regularization and the configured decay
/// schedule to restore convergence.
std::pair<ParamSet, nn::PhaseLog> our_phase2_replay(const ParamSet& params,
                                                    const nn::MlpArchitecture& arch,
                                                    const data::UnlearnSplit& split,
                                                    const UnlearnConfig& cfg);

/// Both phases back to back; logs concatenated, RTE covers both.
UnlearnOutcome our(const ParamSet& params, const nn::MlpArchitecture& arch,
                   const data::UnlearnSplit& split, const UnlearnConfig& cfg);

/// Dispatch by cfg.method. `params` is ignored for retrain.
UnlearnOutcome run_unlearn(const ParamSet& params, const nn::MlpArchitecture& arch,
                           const data::UnlearnSplit& split, const UnlearnConfig& cfg);

/// The RL relabeling: every label moves to a uniformly drawn different class
/// in [0, classes). Needs classes >= 2.
data::LabeledDataset resample_labels(const data::LabeledDataset& dataset,
                                     std::size_t classes, std::uint64_t seed);

/// Mean squared cosine between current and snapshot features of D_u over the
/// given trace layers. The phase-1 progress probe.
double mean_feature_sqcos(const ParamSet& current, const ParamSet& snapshot,
                          const nn::MlpArchitecture& arch,
                          const data::LabeledDataset& unlearned,
                          const std::vector<std::size_t>& layers);

/// Phase log as CSV: epoch,phase,loss,delta_max,lr,early_stop.
void save_phase_log(const std::filesystem::path& path, const nn::PhaseLog& log);

}  // namespace uforge::unlearn
