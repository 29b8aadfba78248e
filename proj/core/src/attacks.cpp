#include "uforge/attacks.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>

#include <nlohmann/json.hpp>

#include "uforge/errors.hpp"
#include "uforge/rng.hpp"

namespace uforge::attack {

void ReaClassConfig::validate() const {
  if (learning_rates.empty()) {
    throw InvalidInputError("ReaClassConfig: learning rate set must be non-empty");
  }
  for (double lr : learning_rates) {
    if (lr < 0.0) throw InvalidInputError("ReaClassConfig: negative learning rate");
  }
  if (convergence_threshold <= 0.0 || convergence_threshold >= 1.0) {
    throw InvalidInputError("ReaClassConfig: convergence threshold must lie in (0,1)");
  }
  if (idx_max == 0) throw InvalidInputError("ReaClassConfig: idx_max must be > 0");
  if (reference_ratio <= 0.0) {
    throw InvalidInputError("ReaClassConfig: reference_ratio must be > 0");
  }
}

void ShadowEnsemble::validate(std::size_t population_size) const {
  if (shadow_params.size() != shadow_count || train_masks.size() != shadow_count) {
    throw InvalidInputError("ShadowEnsemble: inconsistent shadow counts");
  }
  for (const auto& mask : train_masks) {
    if (mask.size() != population_size) {
      throw InvalidInputError("ShadowEnsemble: mask length does not match population");
    }
  }
  for (const auto& mask : unlearn_masks) {
    if (mask.size() != population_size) {
      throw InvalidInputError("ShadowEnsemble: unlearn mask length does not match population");
    }
  }
}

namespace {

// Fraction of rows the model maps to label y_u.
double label_accuracy(const ParamSet& params, const nn::MlpArchitecture& arch,
                      const Tensor2D& features, int y_u) {
  const nn::ForwardTrace trace = nn::forward(params, arch, features);
  const Tensor2D& logits = trace.logits();
  std::size_t hits = 0;
  for (std::size_t r = 0; r < logits.rows(); ++r) {
    const double* row = logits.row_ptr(r);
    std::size_t best = 0;
    for (std::size_t c = 1; c < logits.cols(); ++c) {
      if (row[c] > row[best]) best = c;
    }
    if (static_cast<int>(best) == y_u) ++hits;
  }
  return static_cast<double>(hits) / static_cast<double>(logits.rows());
}

}  // namespace

std::size_t resonance_index(const ParamSet& victim, const nn::MlpArchitecture& arch,
                            const data::LabeledDataset& inferred_set,
                            const data::LabeledDataset& reference_set, double lr,
                            const ReaClassConfig& cfg) {
  cfg.validate();
  if (inferred_set.size() == 0) {
    throw InvalidInputError("resonance_index: inferred set is empty");
  }
  const int y_u = cfg.unlearn_label;
  if (y_u < 0 || static_cast<std::size_t>(y_u) >= arch.output_width()) {
    throw InvalidInputError("resonance_index: unlearn label outside model head");
  }

  ParamSet theta = victim;  // the victim itself is never touched
  nn::SgdState state;
  nn::SgdConfig sgd = cfg.sgd;
  sgd.learning_rate = lr;
  sgd.decay_epochs.clear();

  const std::vector<int> target_labels(inferred_set.size(), y_u);

  // Frozen initial softmax of the reference set; the loss anchors reference
  // predictions to it so only the inferred class is pulled toward y_u.
  const bool with_reference = reference_set.size() > 0;
  Tensor2D ref_anchor;
  if (with_reference) {
    const nn::ForwardTrace t0 = nn::forward(victim, arch, reference_set.features);
    ref_anchor = nn::softmax(t0.logits());
  }

  for (std::size_t iter = 1; iter <= cfg.idx_max; ++iter) {
    const nn::ForwardTrace trace_inf = nn::forward(theta, arch, inferred_set.features);
    nn::CrossEntropyResult ce = nn::cross_entropy(trace_inf.logits(), target_labels);
    double loss = ce.loss;
    nn::GradSet grads = nn::backward(theta, arch, trace_inf, ce.grad_logits);

    if (with_reference) {
      const nn::ForwardTrace trace_ref = nn::forward(theta, arch, reference_set.features);
      const Tensor2D p = nn::softmax(trace_ref.logits());
      const double inv_n = 1.0 / static_cast<double>(reference_set.size());
      Tensor2D grad_logits(p.rows(), p.cols());
      for (std::size_t r = 0; r < p.rows(); ++r) {
        for (std::size_t c = 0; c < p.cols(); ++c) {
          const double q = std::max(p.at(r, c), 1e-300);
          loss -= ref_anchor.at(r, c) * std::log(q) * inv_n;
          grad_logits.at(r, c) = (p.at(r, c) - ref_anchor.at(r, c)) * inv_n;
        }
      }
      const nn::GradSet ref_grads = nn::backward(theta, arch, trace_ref, grad_logits);
      for (std::size_t i = 0; i < grads.entry_count(); ++i) {
        auto& g = grads.entry(i).tensor.values();
        const auto& g2 = ref_grads.entry(i).tensor.values();
        for (std::size_t j = 0; j < g.size(); ++j) g[j] += g2[j];
      }
    }

    if (!std::isfinite(loss)) {
      throw DivergenceError("resonance_index: non-finite reminiscence loss",
                            "lr " + std::to_string(lr));
    }
    nn::sgd_step(theta, grads, sgd, state);

    if (label_accuracy(theta, arch, inferred_set.features, y_u) > cfg.convergence_threshold) {
      return iter;
    }
  }
  return cfg.idx_max;
}

double aggregate_confidence(const std::vector<std::size_t>& indices, std::size_t idx_max) {
  if (indices.empty() || idx_max == 0) {
    throw InvalidInputError("aggregate_confidence: need indices and idx_max > 0");
  }
  double sum = 0.0;
  for (std::size_t idx : indices) sum += static_cast<double>(idx);
  return 1.0 - sum / (static_cast<double>(indices.size()) * static_cast<double>(idx_max));
}

ReaClassResult rea_classwise(const ParamSet& victim, const nn::MlpArchitecture& arch,
                             const data::LabeledDataset& candidate,
                             const data::LabeledDataset& reference,
                             const ReaClassConfig& cfg) {
  cfg.validate();
  ReaClassResult result;
  std::vector<std::size_t> indices;
  for (double lr : cfg.learning_rates) {
    AttackReport::ResonanceCell cell;
    cell.lr = lr;
    try {
      cell.idx = resonance_index(victim, arch, candidate, reference, lr, cfg);
    } catch (const DivergenceError&) {
      cell.idx = cfg.idx_max;  // a diverging lr counts as never converging
      cell.diverged = true;
    }
    indices.push_back(cell.idx);
    result.runs.push_back(cell);
  }
  result.confidence = aggregate_confidence(indices, cfg.idx_max);
  return result;
}

ShadowEnsemble train_shadow_ensemble(const nn::MlpArchitecture& arch,
                                     const data::LabeledDataset& population,
                                     const nn::TrainConfig& train_cfg,
                                     std::size_t shadow_count, std::uint64_t seed) {
  if (shadow_count < 2) {
    throw InvalidInputError("train_shadow_ensemble: need at least two shadows");
  }
  ShadowEnsemble ens;
  ens.shadow_count = shadow_count;
  ens.seed = seed;

  for (std::size_t s = 0; s < shadow_count; ++s) {
    const std::string tag = "shadow/" + std::to_string(s);
    CounterRng mask_rng(seed, tag + "/mask");
    std::vector<std::uint8_t> mask(population.size());
    std::vector<std::size_t> in_rows;
    for (std::size_t i = 0; i < population.size(); ++i) {
      mask[i] = mask_rng.next_unit() < 0.5 ? 1 : 0;
      if (mask[i]) in_rows.push_back(i);
    }
    if (in_rows.empty()) in_rows.push_back(0), mask[0] = 1;

    nn::MlpArchitecture shadow_arch = arch;
    shadow_arch.seed = hash_stream(seed, tag + "/init");
    ParamSet params = nn::init_params(shadow_arch);

    const data::LabeledDataset shadow_train =
        population.select(in_rows, population.name + "/" + tag);
    nn::TrainConfig cfg = train_cfg;
    cfg.seed = hash_stream(seed, tag + "/shuffle");
    nn::train_sgd(params, arch, shadow_train, cfg);

    ens.shadow_params.push_back(std::move(params));
    ens.train_masks.push_back(std::move(mask));
  }
  return ens;
}

namespace {

constexpr double kProbClamp = 1e-6;

double logit_confidence(double p) {
  const double q = std::clamp(p, kProbClamp, 1.0 - kProbClamp);
  return std::log(q / (1.0 - q));
}

// Softmax probability of each row's true label.
std::vector<double> true_label_probs(const ParamSet& params,
                                     const nn::MlpArchitecture& arch,
                                     const data::LabeledDataset& dataset) {
  const nn::ForwardTrace trace = nn::forward(params, arch, dataset.features);
  const Tensor2D p = nn::softmax(trace.logits());
  std::vector<double> out(dataset.size());
  for (std::size_t r = 0; r < dataset.size(); ++r) {
    out[r] = p.at(r, static_cast<std::size_t>(dataset.labels[r]));
  }
  return out;
}

std::vector<LiraScore> lira_scores_for(const ShadowEnsemble& ensemble,
                                       const nn::MlpArchitecture& arch,
                                       const ParamSet& victim,
                                       const data::LabeledDataset& population) {
  ensemble.validate(population.size());
  if (ensemble.shadow_count < 2) {
    throw InvalidInputError("mia_lira_scores: need at least two shadows");
  }

  const std::vector<double> victim_probs = true_label_probs(victim, arch, population);
  std::vector<std::vector<double>> shadow_conf(ensemble.shadow_count);
  for (std::size_t s = 0; s < ensemble.shadow_count; ++s) {
    shadow_conf[s] = true_label_probs(ensemble.shadow_params[s], arch, population);
  }

  std::vector<LiraScore> scores(population.size());
  for (std::size_t i = 0; i < population.size(); ++i) {
    LiraScore& sc = scores[i];
    sc.target = static_cast<int>(i);

    double sum = 0.0, sum_sq = 0.0;
    std::size_t n_out = 0;
    for (std::size_t s = 0; s < ensemble.shadow_count; ++s) {
      if (ensemble.train_masks[s][i]) continue;  // out-shadows only
      const double phi = logit_confidence(shadow_conf[s][i]);
      sum += phi;
      sum_sq += phi * phi;
      ++n_out;
    }
    if (n_out < 2) {
      sc.degenerate = true;
      continue;
    }
    const double mean = sum / static_cast<double>(n_out);
    const double var = (sum_sq - sum * mean) / static_cast<double>(n_out - 1);
    const double sd = var > 0.0 ? std::sqrt(var) : 0.0;
    if (sd == 0.0) {
      sc.degenerate = true;
      continue;
    }
    sc.score = (logit_confidence(victim_probs[i]) - mean) / sd;
  }
  return scores;
}

}  // namespace

std::vector<LiraScore> mia_lira_scores(const ShadowEnsemble& ensemble,
                                       const nn::MlpArchitecture& arch,
                                       const ParamSet& victim,
                                       const data::LabeledDataset& population) {
  return lira_scores_for(ensemble, arch, victim, population);
}

AttackReport rea_samplewise(const ParamSet& victim, const nn::MlpArchitecture& arch,
                            const data::LabeledDataset& inference_set,
                            const ReaSampleConfig& cfg, const ShadowEnsemble& ensemble) {
  if (cfg.pseudo_retain_size > inference_set.size()) {
    throw InvalidInputError("rea_samplewise: pseudo retain size exceeds inference set");
  }

  const std::vector<LiraScore> first_pass =
      lira_scores_for(ensemble, arch, victim, inference_set);

  const auto to_report = [&](const std::vector<LiraScore>& scores, std::string tag) {
    AttackReport report;
    report.attack_tag = std::move(tag);
    for (const LiraScore& s : scores) {
      if (s.degenerate) {
        report.degenerate_targets.push_back(s.target);
      } else {
        report.per_target_scores.emplace_back(s.target, s.score);
      }
    }
    return report;
  };

  if (cfg.epochs == 0) return to_report(first_pass, "rea_sample");

  // Top-N_r most member-like targets become the pseudo retain set.
  std::vector<const LiraScore*> ranked;
  for (const LiraScore& s : first_pass) {
    if (!s.degenerate) ranked.push_back(&s);
  }
  std::stable_sort(ranked.begin(), ranked.end(),
                   [](const LiraScore* a, const LiraScore* b) { return a->score > b->score; });
  const std::size_t take = std::min(cfg.pseudo_retain_size, ranked.size());
  std::vector<std::size_t> pseudo_rows(take);
  for (std::size_t i = 0; i < take; ++i) {
    pseudo_rows[i] = static_cast<std::size_t>(ranked[i]->target);
  }
  const data::LabeledDataset pseudo_retain =
      inference_set.select(pseudo_rows, inference_set.name + "/pseudo_retain");

  // Reminiscence: converge a copy of the victim on the pseudo retain set.
  ParamSet theta = victim;
  nn::TrainConfig tc;
  tc.sgd.learning_rate = cfg.learning_rate;
  tc.epochs = cfg.epochs;
  tc.batch_size = cfg.batch_size;
  tc.seed = hash_stream(cfg.seed, "rea_sample/shuffle");
  nn::train_sgd(theta, arch, pseudo_retain, tc);

  const std::vector<LiraScore> second_pass =
      lira_scores_for(ensemble, arch, theta, inference_set);
  return to_report(second_pass, "rea_sample");
}

AttackReport mia_up(const ShadowEnsemble& shadow_unlearned,
                    const nn::MlpArchitecture& arch, const ParamSet& victim,
                    const data::LabeledDataset& population) {
  shadow_unlearned.validate(population.size());
  if (shadow_unlearned.unlearn_masks.size() != shadow_unlearned.shadow_count) {
    throw InvalidInputError("mia_up: ensemble lacks unlearn masks");
  }

  const std::size_t classes = arch.output_width();
  const auto sorted_softmax = [&](const ParamSet& params) {
    const nn::ForwardTrace trace = nn::forward(params, arch, population.features);
    Tensor2D p = nn::softmax(trace.logits());
    for (std::size_t r = 0; r < p.rows(); ++r) {
      std::sort(p.row_ptr(r), p.row_ptr(r) + classes, std::greater<>());
    }
    return p;
  };

  std::vector<std::vector<double>> feats;
  std::vector<int> labels;  // 1 = shadow-unlearned, 0 = shadow-test
  for (std::size_t s = 0; s < shadow_unlearned.shadow_count; ++s) {
    const Tensor2D p = sorted_softmax(shadow_unlearned.shadow_params[s]);
    std::size_t positives_here = 0;
    for (std::size_t i = 0; i < population.size(); ++i) {
      if (shadow_unlearned.unlearn_masks[s][i]) ++positives_here;
    }
    // Every non-trained row plays the test role; cap them at 4x the
    // positives so the scorer trains on roughly balanced classes.
    std::size_t negatives_left = 4 * positives_here;
    for (std::size_t i = 0; i < population.size(); ++i) {
      const bool unlearned_row = shadow_unlearned.unlearn_masks[s][i] != 0;
      const bool trained_row = shadow_unlearned.train_masks[s][i] != 0;
      if (!unlearned_row && trained_row) continue;  // retained rows carry no label
      if (!unlearned_row) {
        if (negatives_left == 0) continue;
        --negatives_left;
      }
      feats.emplace_back(p.row_ptr(i), p.row_ptr(i) + classes);
      labels.push_back(unlearned_row ? 1 : 0);
    }
  }

  const std::size_t positives = std::count(labels.begin(), labels.end(), 1);
  const std::size_t negatives = labels.size() - positives;
  if (positives == 0 || negatives == 0 ||
      positives > 10 * negatives || negatives > 10 * positives) {
    throw InvalidInputError("mia_up: shadow training classes are unusable "
                            "(missing or imbalanced beyond 10:1)");
  }

  // Single-layer logistic scorer, full-batch gradient descent.
  std::vector<double> w(classes, 0.0);
  double b = 0.0;
  constexpr std::size_t kFitEpochs = 400;
  constexpr double kFitLr = 0.5;
  const double inv_n = 1.0 / static_cast<double>(feats.size());
  for (std::size_t epoch = 0; epoch < kFitEpochs; ++epoch) {
    std::vector<double> grad_w(classes, 0.0);
    double grad_b = 0.0;
    for (std::size_t i = 0; i < feats.size(); ++i) {
      double z = b;
      for (std::size_t c = 0; c < classes; ++c) z += w[c] * feats[i][c];
      const double pred = 1.0 / (1.0 + std::exp(-z));
      const double err = pred - static_cast<double>(labels[i]);
      for (std::size_t c = 0; c < classes; ++c) grad_w[c] += err * feats[i][c];
      grad_b += err;
    }
    for (std::size_t c = 0; c < classes; ++c) w[c] -= kFitLr * grad_w[c] * inv_n;
    b -= kFitLr * grad_b * inv_n;
  }

  AttackReport report;
  report.attack_tag = "mia_up";
  const Tensor2D victim_feats = sorted_softmax(victim);
  for (std::size_t i = 0; i < population.size(); ++i) {
    double z = b;
    for (std::size_t c = 0; c < classes; ++c) z += w[c] * victim_feats.at(i, c);
    report.per_target_scores.emplace_back(static_cast<int>(i),
                                          1.0 / (1.0 + std::exp(-z)));
  }
  return report;
}

std::vector<std::uint8_t> threshold_decisions(AttackReport& report, double tau) {
  report.tau = tau;
  report.decisions.clear();
  report.decisions.reserve(report.per_target_scores.size());
  for (const auto& [target, score] : report.per_target_scores) {
    (void)target;
    report.decisions.push_back(score > tau ? 1 : 0);
  }
  return report.decisions;
}

void save_attack_report_json(const std::filesystem::path& path, const AttackReport& report) {
  nlohmann::json j;
  j["attack_tag"] = report.attack_tag;
  nlohmann::json scores = nlohmann::json::array();
  for (const auto& [target, score] : report.per_target_scores) {
    scores.push_back({{"target", target}, {"score", score}});
  }
  j["scores"] = scores;
  if (report.tau) {
    j["tau"] = *report.tau;
    j["decisions"] = report.decisions;
  }
  if (!report.resonance_indices.empty()) {
    nlohmann::json cells = nlohmann::json::array();
    for (const auto& cell : report.resonance_indices) {
      cells.push_back({{"target", cell.target},
                       {"lr", cell.lr},
                       {"idx", cell.idx},
                       {"diverged", cell.diverged}});
    }
    j["resonance_indices"] = cells;
  }
  j["degenerate_targets"] = report.degenerate_targets;

  std::ofstream os(path, std::ios::trunc);
  if (!os) throw IoError("save_attack_report_json: cannot open " + path.string());
  os << j.dump(2) << '\n';
}

void save_attack_report_csv(const std::filesystem::path& path, const AttackReport& report) {
  std::ofstream os(path, std::ios::trunc);
  if (!os) throw IoError("save_attack_report_csv: cannot open " + path.string());
  os << "target_id,score,decision\n";
  std::ostringstream buf;
  buf.precision(17);
  for (std::size_t i = 0; i < report.per_target_scores.size(); ++i) {
    const auto& [target, score] = report.per_target_scores[i];
    buf << target << ',' << score << ',';
    if (report.tau) buf << static_cast<int>(report.decisions[i]);
    buf << '\n';
  }
  os << buf.str();
}

}  // namespace uforge::attack
