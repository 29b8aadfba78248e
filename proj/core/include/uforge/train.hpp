#pragma once

#include <cstdint>
#include <vector>

#include "uforge/dataset.hpp"
#include "uforge/mlp.hpp"
#include "uforge/rng.hpp"

namespace uforge::nn {

struct TrainConfig {
  SgdConfig sgd;
  std::size_t epochs = 0;
  std::size_t batch_size = 64;
  std::uint64_t seed = 0;  // keys the batch-shuffle stream
};

/// One row per epoch of any optimization phase. Epoch 0 records the state
/// before the first step so logs are never empty.
struct EpochRecord {
  std::size_t epoch = 0;
  int phase = 1;
  double loss = 0.0;
  double delta_max = 0.0;
  double lr = 0.0;
  bool early_stop = false;
};

using PhaseLog = std::vector<EpochRecord>;

struct EpochOptions {
  bool negate_gradient = false;  // gradient ascent
  double clip_norm = 0.0;        // global L2 clip; 0 disables
  double l1_lambda = 0.0;        // subgradient of lambda*|theta|_1, sign(0) = 0
};

/// Row indices grouped into shuffled mini-batches (Fisher-Yates on the rng).
std::vector<std::vector<std::size_t>> make_batches(std::size_t n,
                                                   std::size_t batch_size,
                                                   CounterRng& rng);

/// Copy of the selected rows as a batch.
std::pair<Tensor2D, std::vector<int>> gather_batch(const data::LabeledDataset& data,
                                                   const std::vector<std::size_t>& rows);

/// Mean cross-entropy of params over a whole dataset.
double dataset_loss(const ParamSet& params, const MlpArchitecture& arch,
                    const data::LabeledDataset& data);

/// One shuffled pass of SGD over `data`. Returns the mean per-example loss
/// observed across the epoch's batches (before each step).
double sgd_epoch(ParamSet& params, const MlpArchitecture& arch,
                 const data::LabeledDataset& data, const SgdConfig& sgd,
                 std::size_t batch_size, CounterRng& shuffle_rng, SgdState& state,
                 const EpochOptions& opts = {});

/// Standard multi-epoch training with the lr schedule from cfg.sgd. The
/// returned log has epochs 0..cfg.epochs.
PhaseLog train_sgd(ParamSet& params, const MlpArchitecture& arch,
                   const data::LabeledDataset& data, const TrainConfig& cfg,
                   const EpochOptions& opts = {});

/// Scale grads so the global L2 norm is at most clip_norm.
void clip_gradients(GradSet& grads, double clip_norm);

/// Add lambda * sign(theta) to grads (sign(0) contributes nothing).
void add_l1_subgradient(GradSet& grads, const ParamSet& params, double lambda);

}  // namespace uforge::nn
