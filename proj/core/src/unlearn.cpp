#include "uforge/unlearn.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <sstream>

#include "uforge/errors.hpp"

namespace uforge::unlearn {

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

}  // namespace

std::string method_name(Method m) {
  switch (m) {
    case Method::kRetrain: return "retrain";
    case Method::kFt: return "ft";
    case Method::kGa: return "ga";
    case Method::kRl: return "rl";
    case Method::kL1Sparse: return "l1_sparse";
    case Method::kOur: return "our";
  }
  throw InternalConsistencyError("method_name: unknown method");
}

Method method_from_name(const std::string& name) {
  if (name == "retrain") return Method::kRetrain;
  if (name == "ft") return Method::kFt;
  if (name == "ga") return Method::kGa;
  if (name == "rl") return Method::kRl;
  if (name == "l1_sparse") return Method::kL1Sparse;
  if (name == "our") return Method::kOur;
  throw InvalidInputError("unknown unlearning method '" + name + "'");
}

void UnlearnConfig::validate(const nn::MlpArchitecture& arch) const {
  if (delta_threshold < 0.0) {
    throw InvalidInputError("UnlearnConfig: delta_threshold must be >= 0");
  }
  if (l1_lambda < 0.0) throw InvalidInputError("UnlearnConfig: l1_lambda must be >= 0");
  for (std::size_t l : orth_layers) {
    if (l >= arch.layer_count()) {
      throw InvalidInputError("UnlearnConfig: orth layer " + std::to_string(l) +
                              " out of range");
    }
  }
}

std::vector<std::size_t> default_orth_layers(const nn::MlpArchitecture& arch) {
  const std::size_t hidden = arch.layer_count() - 1;  // trace indices 0..hidden-1
  if (hidden == 0) return {};
  std::vector<std::size_t> layers{0, hidden / 2, hidden - 1};
  std::sort(layers.begin(), layers.end());
  layers.erase(std::unique(layers.begin(), layers.end()), layers.end());
  return layers;
}

UnlearnOutcome retrain(const nn::MlpArchitecture& arch, const data::UnlearnSplit& split,
                       const UnlearnConfig& cfg) {
  cfg.validate(arch);
  const auto start = Clock::now();

  nn::MlpArchitecture fresh = arch;
  fresh.seed = hash_stream(cfg.seed, "retrain/init");
  ParamSet params = nn::init_params(fresh);

  nn::TrainConfig tc{cfg.sgd_phase1, cfg.epochs_phase1, cfg.batch_size,
                     hash_stream(cfg.seed, "retrain/shuffle")};
  nn::PhaseLog log = nn::train_sgd(params, arch, split.retained, tc);

  return UnlearnOutcome{std::move(params), seconds_since(start), std::move(log),
                        method_name(Method::kRetrain)};
}

UnlearnOutcome finetune_ft(const ParamSet& params, const nn::MlpArchitecture& arch,
                           const data::UnlearnSplit& split, const UnlearnConfig& cfg) {
  cfg.validate(arch);
  const auto start = Clock::now();

  ParamSet theta = params;
  nn::TrainConfig tc{cfg.sgd_phase1, cfg.epochs_phase1, cfg.batch_size,
                     hash_stream(cfg.seed, "ft/shuffle")};
  nn::PhaseLog log = nn::train_sgd(theta, arch, split.retained, tc);

  return UnlearnOutcome{std::move(theta), seconds_since(start), std::move(log),
                        method_name(Method::kFt)};
}

UnlearnOutcome gradient_ascent_ga(const ParamSet& params, const nn::MlpArchitecture& arch,
                                  const data::UnlearnSplit& split, const UnlearnConfig& cfg) {
  cfg.validate(arch);
  const auto start = Clock::now();

  ParamSet theta = params;
  nn::TrainConfig tc{cfg.sgd_phase1, cfg.epochs_phase1, cfg.batch_size,
                     hash_stream(cfg.seed, "ga/shuffle")};
  nn::EpochOptions opts;
  opts.negate_gradient = true;
  opts.clip_norm = cfg.ga_clip_norm;
  nn::PhaseLog log = nn::train_sgd(theta, arch, split.unlearned, tc, opts);

  return UnlearnOutcome{std::move(theta), seconds_since(start), std::move(log),
                        method_name(Method::kGa)};
}

data::LabeledDataset resample_labels(const data::LabeledDataset& dataset,
                                     std::size_t classes, std::uint64_t seed) {
  if (classes < 2) {
    throw InvalidInputError("resample_labels: need at least two classes");
  }
  data::LabeledDataset relabeled = dataset;
  CounterRng label_rng(seed, "rl/labels");
  for (int& y : relabeled.labels) {
    const auto offset = 1 + label_rng.next_below(classes - 1);
    y = static_cast<int>((static_cast<std::size_t>(y) + offset) % classes);
  }
  return relabeled;
}

UnlearnOutcome random_label_rl(const ParamSet& params, const nn::MlpArchitecture& arch,
                               const data::UnlearnSplit& split, const UnlearnConfig& cfg) {
  cfg.validate(arch);
  const auto start = Clock::now();
  const data::LabeledDataset relabeled =
      resample_labels(split.unlearned, arch.output_width(), cfg.seed);

  ParamSet theta = params;
  nn::SgdState state;
  CounterRng shuffle_u(cfg.seed, "rl/shuffle/unlearned");
  CounterRng shuffle_r(cfg.seed, "rl/shuffle/retained");

  nn::PhaseLog log;
  log.push_back({0, 1, nn::dataset_loss(theta, arch, relabeled), 0.0,
                 cfg.sgd_phase1.learning_rate, false});

  for (std::size_t epoch = 1; epoch <= cfg.epochs_phase1; ++epoch) {
    nn::SgdConfig sgd = cfg.sgd_phase1;
    sgd.learning_rate = cfg.sgd_phase1.lr_at_epoch(epoch);

    const auto u_batches = nn::make_batches(relabeled.size(), cfg.batch_size, shuffle_u);
    const auto r_batches = nn::make_batches(split.retained.size(), cfg.batch_size, shuffle_r);

    double loss_sum = 0.0;
    std::size_t seen = 0;
    // One retained batch follows every relabeled batch so the model cannot
    // collapse onto the random labels.
    for (std::size_t i = 0; i < u_batches.size(); ++i) {
      for (const auto* batch : {&u_batches[i], &r_batches[i % r_batches.size()]}) {
        const auto& dataset = (batch == &u_batches[i]) ? relabeled : split.retained;
        auto [x, y] = nn::gather_batch(dataset, *batch);
        const nn::ForwardTrace trace = nn::forward(theta, arch, x);
        nn::CrossEntropyResult ce = nn::cross_entropy(trace.logits(), y);
        loss_sum += ce.loss * static_cast<double>(batch->size());
        seen += batch->size();
        nn::GradSet grads = nn::backward(theta, arch, trace, ce.grad_logits);
        nn::sgd_step(theta, grads, sgd, state);
      }
    }
    const double loss = seen ? loss_sum / static_cast<double>(seen) : 0.0;
    if (!std::isfinite(loss)) {
      throw DivergenceError("random_label_rl: non-finite loss", "epoch " + std::to_string(epoch));
    }
    log.push_back({epoch, 1, loss, 0.0, sgd.learning_rate, false});
  }

  return UnlearnOutcome{std::move(theta), seconds_since(start), std::move(log),
                        method_name(Method::kRl)};
}

UnlearnOutcome l1_sparse_ft(const ParamSet& params, const nn::MlpArchitecture& arch,
                            const data::UnlearnSplit& split, const UnlearnConfig& cfg) {
  cfg.validate(arch);
  const auto start = Clock::now();

  ParamSet theta = params;
  // Same shuffle stream as ft: with l1_lambda 0 the two methods agree
  // step for step, bitwise.
  nn::TrainConfig tc{cfg.sgd_phase1, cfg.epochs_phase1, cfg.batch_size,
                     hash_stream(cfg.seed, "ft/shuffle")};
  nn::EpochOptions opts;
  opts.l1_lambda = cfg.l1_lambda;
  nn::PhaseLog log = nn::train_sgd(theta, arch, split.retained, tc, opts);

  return UnlearnOutcome{std::move(theta), seconds_since(start), std::move(log),
                        method_name(Method::kL1Sparse)};
}

namespace {

struct OrthBatchResult {
  double loss = 0.0;
  std::size_t skipped = 0;
};

// Gradient of the orthogonality objective for one batch, injected at the
// selected trace layers. Snapshot features act as frozen anchors.
OrthBatchResult orth_batch_step(ParamSet& theta, const nn::MlpArchitecture& arch,
                                const ParamSet& snapshot, const Tensor2D& x,
                                const std::vector<std::size_t>& layers,
                                OrthObjective objective, const nn::SgdConfig& sgd,
                                nn::SgdState& state) {
  const nn::ForwardTrace trace = nn::forward(theta, arch, x);
  const nn::ForwardTrace trace0 = nn::forward(snapshot, arch, x);
  const double inv_rows = 1.0 / static_cast<double>(x.rows());

  OrthBatchResult result;
  std::vector<std::optional<Tensor2D>> grads(trace.per_layer_outputs.size());

  for (std::size_t l : layers) {
    const Tensor2D& f = trace.per_layer_outputs[l];
    const Tensor2D& f0 = trace0.per_layer_outputs[l];
    Tensor2D g(f.rows(), f.cols());

    for (std::size_t r = 0; r < f.rows(); ++r) {
      const double* fr = f.row_ptr(r);
      const double* ar = f0.row_ptr(r);
      double* gr = g.row_ptr(r);

      if (objective == OrthObjective::kL2Distance) {
        double term = 0.0;
        for (std::size_t c = 0; c < f.cols(); ++c) {
          const double diff = fr[c] - ar[c];
          term += diff * diff;
          gr[c] = 2.0 * diff * inv_rows;
        }
        result.loss += term * inv_rows;
        continue;
      }

      double na = 0.0, dot = 0.0;
      for (std::size_t c = 0; c < f.cols(); ++c) {
        na += ar[c] * ar[c];
        dot += fr[c] * ar[c];
      }
      if (na == 0.0) {
        ++result.skipped;  // degenerate anchor, nothing to orthogonalize against
        continue;
      }
      // Term (f . a_hat)^2 / |a|^2: value 1 at the snapshot, and its gradient
      // 2(f . a_hat) a_hat / |a| strips exactly the anchor-aligned component.
      // The fully normalized squared cosine is stationary at f = a (cosine is
      // maximal there), so it cannot serve as the descent objective.
      const double t = (dot * dot) / (na * na);
      result.loss += t * inv_rows;
      const double scale = 2.0 * dot / (na * na) * inv_rows;
      for (std::size_t c = 0; c < f.cols(); ++c) {
        gr[c] = scale * ar[c];
      }
    }
    grads[l] = std::move(g);
  }

  nn::GradSet grad_set = nn::backward_multi(theta, arch, trace, grads);
  nn::sgd_step(theta, grad_set, sgd, state);
  return result;
}

// Mean-over-examples, sum-over-layers orthogonality loss, no update.
double orth_dataset_loss(const ParamSet& theta, const nn::MlpArchitecture& arch,
                         const ParamSet& snapshot, const data::LabeledDataset& dataset,
                         const std::vector<std::size_t>& layers, OrthObjective objective) {
  const nn::ForwardTrace trace = nn::forward(theta, arch, dataset.features);
  const nn::ForwardTrace trace0 = nn::forward(snapshot, arch, dataset.features);
  const double inv_rows = 1.0 / static_cast<double>(dataset.size());

  double loss = 0.0;
  for (std::size_t l : layers) {
    const Tensor2D& f = trace.per_layer_outputs[l];
    const Tensor2D& f0 = trace0.per_layer_outputs[l];
    for (std::size_t r = 0; r < f.rows(); ++r) {
      const double* fr = f.row_ptr(r);
      const double* ar = f0.row_ptr(r);
      if (objective == OrthObjective::kL2Distance) {
        double term = 0.0;
        for (std::size_t c = 0; c < f.cols(); ++c) {
          const double diff = fr[c] - ar[c];
          term += diff * diff;
        }
        loss += term * inv_rows;
        continue;
      }
      double na = 0.0, dot = 0.0;
      for (std::size_t c = 0; c < f.cols(); ++c) {
        na += ar[c] * ar[c];
        dot += fr[c] * ar[c];
      }
      if (na == 0.0) continue;
      loss += (dot * dot) / (na * na) * inv_rows;
    }
  }
  return loss;
}

}  // namespace

std::pair<ParamSet, nn::PhaseLog> our_phase1_orthogonal(const ParamSet& params,
                                                        const nn::MlpArchitecture& arch,
                                                        const data::UnlearnSplit& split,
                                                        const UnlearnConfig& cfg) {
  cfg.validate(arch);
  const std::vector<std::size_t> layers =
      cfg.orth_layers.empty() ? default_orth_layers(arch) : cfg.orth_layers;
  if (layers.empty()) {
    throw InvalidInputError("our_phase1_orthogonal: no hidden layers to orthogonalize");
  }

  const ParamSet snapshot = params;  // theta^0: the pre-unlearning state
  ParamSet theta = params;
  nn::PhaseLog log;
  if (split.unlearned.size() == 0) {
    log.push_back({0, 1, 0.0, 0.0, cfg.sgd_phase1.learning_rate, false});
    return {std::move(theta), std::move(log)};
  }
  log.push_back({0, 1,
                 orth_dataset_loss(theta, arch, snapshot, split.unlearned, layers,
                                   cfg.orth_objective),
                 0.0, cfg.sgd_phase1.learning_rate, false});

  CounterRng shuffle(cfg.seed, "our/phase1/shuffle");
  nn::SgdState state;
  ParamSet last_good = theta;

  const auto delta_now = [&]() { return param_delta(theta, snapshot).max; };

  for (std::size_t epoch = 1; epoch <= cfg.epochs_phase1; ++epoch) {
    nn::SgdConfig sgd = cfg.sgd_phase1;
    sgd.learning_rate = cfg.sgd_phase1.lr_at_epoch(epoch);

    const auto batches = nn::make_batches(split.unlearned.size(), cfg.batch_size, shuffle);
    double loss_sum = 0.0;
    bool stopped = false;
    for (const auto& rows : batches) {
      auto [x, y] = nn::gather_batch(split.unlearned, rows);
      (void)y;  // the objective only touches features
      const OrthBatchResult res =
          orth_batch_step(theta, arch, snapshot, x, layers, cfg.orth_objective, sgd, state);
      if (!std::isfinite(res.loss)) {
        throw DivergenceError("our_phase1: non-finite orthogonality loss",
                              "epoch " + std::to_string(epoch));
      }
      loss_sum += res.loss * static_cast<double>(rows.size());
      if (cfg.delta_check_per_batch && delta_now() > cfg.delta_threshold) {
        stopped = true;
        break;
      }
    }

    const double delta = delta_now();
    const double loss = loss_sum / static_cast<double>(split.unlearned.size());
    if (stopped || delta > cfg.delta_threshold) {
      // Guard fired: hand back the last state that passed the check so the
      // returned parameters never violate the threshold.
      log.push_back({epoch, 1, loss, delta, sgd.learning_rate, true});
      return {std::move(last_good), std::move(log)};
    }
    last_good = theta;
    log.push_back({epoch, 1, loss, delta, sgd.learning_rate, false});
  }
  return {std::move(theta), std::move(log)};
}

std::pair<ParamSet, nn::PhaseLog> our_phase2_replay(const ParamSet& params,
                                                    const nn::MlpArchitecture& arch,
                                                    const data::UnlearnSplit& split,
                                                    const UnlearnConfig& cfg) {
  cfg.validate(arch);
  ParamSet theta = params;
  nn::TrainConfig tc{cfg.sgd_phase2, cfg.epochs_phase2, cfg.batch_size,
                     hash_stream(cfg.seed, "our/phase2/shuffle")};
  nn::EpochOptions opts;
  opts.l1_lambda = cfg.l1_lambda;
  nn::PhaseLog log = nn::train_sgd(theta, arch, split.retained, tc, opts);
  for (auto& rec : log) rec.phase = 2;
  return {std::move(theta), std::move(log)};
}

UnlearnOutcome our(const ParamSet& params, const nn::MlpArchitecture& arch,
                   const data::UnlearnSplit& split, const UnlearnConfig& cfg) {
  const auto start = Clock::now();
  auto [phase1_params, log] = our_phase1_orthogonal(params, arch, split, cfg);
  auto [final_params, log2] = our_phase2_replay(phase1_params, arch, split, cfg);
  log.insert(log.end(), log2.begin(), log2.end());
  return UnlearnOutcome{std::move(final_params), seconds_since(start), std::move(log),
                        method_name(Method::kOur)};
}

UnlearnOutcome run_unlearn(const ParamSet& params, const nn::MlpArchitecture& arch,
                           const data::UnlearnSplit& split, const UnlearnConfig& cfg) {
  switch (cfg.method) {
    case Method::kRetrain: return retrain(arch, split, cfg);
    case Method::kFt: return finetune_ft(params, arch, split, cfg);
    case Method::kGa: return gradient_ascent_ga(params, arch, split, cfg);
    case Method::kRl: return random_label_rl(params, arch, split, cfg);
    case Method::kL1Sparse: return l1_sparse_ft(params, arch, split, cfg);
    case Method::kOur: return our(params, arch, split, cfg);
  }
  throw InternalConsistencyError("run_unlearn: unknown method");
}

double mean_feature_sqcos(const ParamSet& current, const ParamSet& snapshot,
                          const nn::MlpArchitecture& arch,
                          const data::LabeledDataset& unlearned,
                          const std::vector<std::size_t>& layers) {
  if (unlearned.size() == 0) throw InvalidInputError("mean_feature_sqcos: empty dataset");
  const nn::ForwardTrace trace = nn::forward(current, arch, unlearned.features);
  const nn::ForwardTrace trace0 = nn::forward(snapshot, arch, unlearned.features);

  double sum = 0.0;
  std::size_t count = 0;
  for (std::size_t l : layers) {
    const Tensor2D& f = trace.per_layer_outputs[l];
    const Tensor2D& f0 = trace0.per_layer_outputs[l];
    for (std::size_t r = 0; r < f.rows(); ++r) {
      const std::span<const double> fr(f.row_ptr(r), f.cols());
      const std::span<const double> ar(f0.row_ptr(r), f0.cols());
      double nf = 0.0, na = 0.0;
      for (std::size_t c = 0; c < f.cols(); ++c) {
        nf += fr[c] * fr[c];
        na += ar[c] * ar[c];
      }
      if (nf == 0.0 && na == 0.0) continue;  // degenerate pair, skipped
      sum += squared_cosine(fr, ar);
      ++count;
    }
  }
  return count ? sum / static_cast<double>(count) : 0.0;
}

void save_phase_log(const std::filesystem::path& path, const nn::PhaseLog& log) {
  std::ofstream os(path, std::ios::trunc);
  if (!os) throw IoError("save_phase_log: cannot open " + path.string());
  os << "epoch,phase,loss,delta_max,lr,early_stop\n";
  std::ostringstream buf;
  buf.precision(17);
  for (const auto& rec : log) {
    buf << rec.epoch << ',' << rec.phase << ',' << rec.loss << ',' << rec.delta_max
        << ',' << rec.lr << ',' << (rec.early_stop ? 1 : 0) << '\n';
  }
  os << buf.str();
}

}  // namespace uforge::unlearn
