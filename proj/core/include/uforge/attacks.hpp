#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "uforge/dataset.hpp"
#include "uforge/mlp.hpp"
#include "uforge/train.hpp"

namespace uforge::attack {

/// Class-wise reminiscence attack parameters.
struct ReaClassConfig {
  std::vector<double> learning_rates = {0.001, 0.005, 0.007, 0.01};
  std::size_t idx_max = 75;
  double convergence_threshold = 0.75;
  double reference_ratio = 6.0;  // reference set size / inferred set size
  int unlearn_label = 0;         // y_u: the label slot fine-tuning drives toward
  nn::SgdConfig sgd;             // learning_rate is overridden per run
  std::uint64_t seed = 0;

  void validate() const;
};

/// Sample-wise reminiscence attack parameters.
struct ReaSampleConfig {
  std::size_t pseudo_retain_size = 0;  // N_r
  std::size_t epochs = 5;
  double learning_rate = 0.01;
  std::size_t batch_size = 64;
  std::uint64_t seed = 0;
};

/// Attacker-trained replicas over a fixed population. train_masks mark each
/// shadow's training rows; unlearn_masks (MIA-UP only) mark the rows the
/// shadow subsequently unlearned, a subset of its training rows.
struct ShadowEnsemble {
  std::size_t shadow_count = 0;
  std::vector<ParamSet> shadow_params;
  std::vector<std::vector<std::uint8_t>> train_masks;
  std::vector<std::vector<std::uint8_t>> unlearn_masks;
  std::uint64_t seed = 0;

  void validate(std::size_t population_size) const;
};

struct AttackReport {
  struct ResonanceCell {
    int target = 0;
    double lr = 0.0;
    std::size_t idx = 0;
    bool diverged = false;
  };

  std::vector<std::pair<int, double>> per_target_scores;  // (target id, score)
  std::optional<double> tau;
  std::vector<std::uint8_t> decisions;  // parallel to scores, present iff tau
  std::string attack_tag;
  std::vector<ResonanceCell> resonance_indices;
  std::vector<int> degenerate_targets;  // undefined scores (sigma_out = 0)
};

/// Iterations of guided fine-tuning until the victim copy predicts y_u on
/// the inferred set above the convergence threshold; idx_max if never. The
/// loss couples CE(inferred -> y_u) with CE of the reference set's softmax
/// against its frozen initial state, anchoring behavior away from the
/// inferred class.
std::size_t resonance_index(const ParamSet& victim, const nn::MlpArchitecture& arch,
                            const data::LabeledDataset& inferred_set,
                            const data::LabeledDataset& reference_set, double lr,
                            const ReaClassConfig& cfg);

struct ReaClassResult {
  double confidence = 0.0;  // 1 - sum_j Idx_r(lr_j) / (J * Idx_max)
  std::vector<AttackReport::ResonanceCell> runs;
};

/// The multi-lr aggregation arithmetic on its own: confidence from a table
/// of resonance indices.
double aggregate_confidence(const std::vector<std::size_t>& indices, std::size_t idx_max);

/// Multi-lr aggregation of resonance indices into one confidence in [0,1].
/// A diverging learning rate contributes Idx_max.
ReaClassResult rea_classwise(const ParamSet& victim, const nn::MlpArchitecture& arch,
                             const data::LabeledDataset& candidate,
                             const data::LabeledDataset& reference,
                             const ReaClassConfig& cfg);

/// Shadow models for the offline LiRA variant: each shadow trains on a
/// seed-deterministic coin-flip subset of the population.
ShadowEnsemble train_shadow_ensemble(const nn::MlpArchitecture& arch,
                                     const data::LabeledDataset& population,
                                     const nn::TrainConfig& train_cfg,
                                     std::size_t shadow_count, std::uint64_t seed);

struct LiraScore {
  int target = 0;
  double score = 0.0;
  bool degenerate = false;  // sigma_out was zero or too few out-shadows
};

/// Offline LiRA: standardized logit-confidence of the victim against a
/// Gaussian fit to each example's out-shadow confidences. Higher is more
/// member-like.
std::vector<LiraScore> mia_lira_scores(const ShadowEnsemble& ensemble,
                                       const nn::MlpArchitecture& arch,
                                       const ParamSet& victim,
                                       const data::LabeledDataset& population);

/// Sample-wise ReA: score with LiRA, fine-tune a victim copy on the top-N_r
/// pseudo retain set, then rescore everything on the updated copy. With zero
/// epochs this is exactly mia_lira_scores.
AttackReport rea_samplewise(const ParamSet& victim, const nn::MlpArchitecture& arch,
                            const data::LabeledDataset& inference_set,
                            const ReaSampleConfig& cfg, const ShadowEnsemble& ensemble);

/// MIA-UP: logistic scorer on sorted softmax vectors, shadow-unlearned
/// examples positive vs shadow-test negative, applied to the victim's
/// outputs over the population.
AttackReport mia_up(const ShadowEnsemble& shadow_unlearned,
                    const nn::MlpArchitecture& arch, const ParamSet& victim,
                    const data::LabeledDataset& population);

/// Threshold the report's scores at tau (strictly greater), recording both
/// tau and the decisions in the report.
std::vector<std::uint8_t> threshold_decisions(AttackReport& report, double tau);

void save_attack_report_json(const std::filesystem::path& path, const AttackReport& report);
void save_attack_report_csv(const std::filesystem::path& path, const AttackReport& report);

}  // namespace uforge::attack
