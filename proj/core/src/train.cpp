#include "uforge/train.hpp"

#include <cmath>

#include "uforge/errors.hpp"

namespace uforge::nn {

std::vector<std::vector<std::size_t>> make_batches(std::size_t n,
                                                   std::size_t batch_size,
                                                   CounterRng& rng) {
  if (batch_size == 0) throw InvalidInputError("make_batches: batch_size must be > 0");
  std::vector<std::size_t> order(n);
  for (std::size_t i = 0; i < n; ++i) order[i] = i;
  for (std::size_t i = n; i > 1; --i) {
    const std::size_t j = rng.next_below(i);
    std::swap(order[i - 1], order[j]);
  }
  std::vector<std::vector<std::size_t>> batches;
  for (std::size_t start = 0; start < n; start += batch_size) {
    const std::size_t end = std::min(n, start + batch_size);
    batches.emplace_back(order.begin() + static_cast<std::ptrdiff_t>(start),
                         order.begin() + static_cast<std::ptrdiff_t>(end));
  }
  return batches;
}

std::pair<Tensor2D, std::vector<int>> gather_batch(const data::LabeledDataset& data,
                                                   const std::vector<std::size_t>& rows) {
  Tensor2D x(rows.size(), data.dim());
  std::vector<int> y(rows.size());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    for (std::size_t c = 0; c < data.dim(); ++c) x.at(i, c) = data.features.at(rows[i], c);
    y[i] = data.labels[rows[i]];
  }
  return {std::move(x), std::move(y)};
}

double dataset_loss(const ParamSet& params, const MlpArchitecture& arch,
                    const data::LabeledDataset& data) {
  if (data.size() == 0) throw InvalidInputError("dataset_loss: empty dataset");
  const ForwardTrace trace = forward(params, arch, data.features);
  return cross_entropy(trace.logits(), data.labels).loss;
}

void clip_gradients(GradSet& grads, double clip_norm) {
  if (clip_norm <= 0.0) return;
  double sq = 0.0;
  for (const auto& e : grads.entries()) {
    for (double v : e.tensor.values()) sq += v * v;
  }
  const double norm = std::sqrt(sq);
  if (norm <= clip_norm || norm == 0.0) return;
  const double scale = clip_norm / norm;
  for (std::size_t i = 0; i < grads.entry_count(); ++i) {
    for (double& v : grads.entry(i).tensor.values()) v *= scale;
  }
}

void add_l1_subgradient(GradSet& grads, const ParamSet& params, double lambda) {
  if (lambda == 0.0) return;
  for (std::size_t i = 0; i < grads.entry_count(); ++i) {
    auto& g = grads.entry(i).tensor.values();
    const auto& theta = params.entry(i).tensor.values();
    for (std::size_t j = 0; j < g.size(); ++j) {
      if (theta[j] > 0.0) g[j] += lambda;
      else if (theta[j] < 0.0) g[j] -= lambda;
    }
  }
}

double sgd_epoch(ParamSet& params, const MlpArchitecture& arch,
                 const data::LabeledDataset& data, const SgdConfig& sgd,
                 std::size_t batch_size, CounterRng& shuffle_rng, SgdState& state,
                 const EpochOptions& opts) {
  const auto batches = make_batches(data.size(), batch_size, shuffle_rng);
  double loss_sum = 0.0;
  std::size_t example_count = 0;

  for (const auto& rows : batches) {
    auto [x, y] = gather_batch(data, rows);
    const ForwardTrace trace = forward(params, arch, x);
    CrossEntropyResult ce = cross_entropy(trace.logits(), y);
    loss_sum += ce.loss * static_cast<double>(rows.size());
    example_count += rows.size();

    GradSet grads = backward(params, arch, trace, ce.grad_logits);
    if (opts.negate_gradient) {
      for (std::size_t i = 0; i < grads.entry_count(); ++i) {
        for (double& v : grads.entry(i).tensor.values()) v = -v;
      }
    }
    clip_gradients(grads, opts.clip_norm);
    add_l1_subgradient(grads, params, opts.l1_lambda);
    sgd_step(params, grads, sgd, state);
  }
  return example_count > 0 ? loss_sum / static_cast<double>(example_count) : 0.0;
}

PhaseLog train_sgd(ParamSet& params, const MlpArchitecture& arch,
                   const data::LabeledDataset& data, const TrainConfig& cfg,
                   const EpochOptions& opts) {
  PhaseLog log;
  log.push_back(EpochRecord{0, 1, dataset_loss(params, arch, data), 0.0,
                            cfg.sgd.learning_rate, false});

  CounterRng shuffle(cfg.seed, "train/shuffle");
  SgdState state;
  for (std::size_t epoch = 1; epoch <= cfg.epochs; ++epoch) {
    SgdConfig sgd = cfg.sgd;
    sgd.learning_rate = cfg.sgd.lr_at_epoch(epoch);
    const double loss = sgd_epoch(params, arch, data, sgd, cfg.batch_size, shuffle,
                                  state, opts);
    if (!std::isfinite(loss)) {
      throw DivergenceError("train_sgd: non-finite epoch loss", "epoch " + std::to_string(epoch));
    }
    log.push_back(EpochRecord{epoch, 1, loss, 0.0, sgd.learning_rate, false});
  }
  return log;
}

}  // namespace uforge::nn
