#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "uforge/params.hpp"
#include "uforge/tensor.hpp"

namespace uforge::nn {

enum class Activation : std::uint32_t { kRelu = 0, kTanh = 1 };

/// Fully-connected net: widths = (input, hidden..., output). Hidden layers
/// apply the activation; the final layer emits raw logits.
struct MlpArchitecture {
  std::vector<std::size_t> layer_widths;
  Activation activation = Activation::kRelu;
  std::uint64_t seed = 0;

  std::size_t layer_count() const { return layer_widths.size() - 1; }
  std::size_t input_width() const { return layer_widths.front(); }
  std::size_t output_width() const { return layer_widths.back(); }

  void validate() const;
};

/// Captured forward pass. per_layer_outputs[l] is the post-activation output
/// of layer l for hidden layers; the last entry is the raw logits.
struct ForwardTrace {
  Tensor2D input;
  std::vector<Tensor2D> per_layer_outputs;

  const Tensor2D& logits() const { return per_layer_outputs.back(); }
  std::size_t batch_rows() const { return input.rows(); }
};

struct SgdConfig {
  double learning_rate = 0.01;
  double momentum = 0.0;
  double weight_decay = 0.0;
  double decay_factor = 1.0;             // lr multiplier at each decay epoch
  std::vector<std::size_t> decay_epochs; // 1-based epoch indices

  /// Learning rate in effect for a given 1-based epoch under the schedule.
  double lr_at_epoch(std::size_t epoch) const;
};

/// Momentum buffers, one per parameter tensor. Zero-initialized on first use.
struct SgdState {
  ParamSet velocity;
};

using GradSet = ParamSet;

/// Glorot-uniform weights from the named counter RNG keyed by arch.seed;
/// biases start at zero. Entry names: "layer<i>/W", "layer<i>/b".
ParamSet init_params(const MlpArchitecture& arch);

ForwardTrace forward(const ParamSet& params, const MlpArchitecture& arch,
                     const Tensor2D& batch);

/// Mean cross-entropy over the batch plus d(loss)/d(logits).
struct CrossEntropyResult {
  double loss = 0.0;
  Tensor2D grad_logits;
};

CrossEntropyResult cross_entropy(const Tensor2D& logits,
                                 const std::vector<int>& labels);

/// Row-wise softmax with the usual max-shift for stability.
Tensor2D softmax(const Tensor2D& logits);

/// Per-example cross-entropy losses (no batch averaging).
std::vector<double> per_example_cross_entropy(const Tensor2D& logits,
                                              const std::vector<int>& labels);

GradSet backward(const ParamSet& params, const MlpArchitecture& arch,
                 const ForwardTrace& trace, const Tensor2D& grad_logits);

/// Backward with extra gradients injected at selected trace outputs
/// (index l targets per_layer_outputs[l]). Entries without a gradient are
/// nullopt. Used by losses defined on intermediate features.
GradSet backward_multi(const ParamSet& params, const MlpArchitecture& arch,
                       const ForwardTrace& trace,
                       const std::vector<std::optional<Tensor2D>>& output_grads);

/// One SGD-with-momentum step, in place:
///   v <- momentum*v + grad + weight_decay*theta;  theta <- theta - lr*v.
/// Throws DivergenceError naming the offending tensor on non-finite grads.
void sgd_step(ParamSet& params, const GradSet& grads, const SgdConfig& cfg,
              SgdState& state);

}  // namespace uforge::nn
