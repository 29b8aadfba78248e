#include "uforge/mlp.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "uforge/errors.hpp"
#include "uforge/rng.hpp"

namespace uforge::nn {

void MlpArchitecture::validate() const {
  if (layer_widths.size() < 2) {
    throw InvalidInputError("MlpArchitecture: need at least input and output widths");
  }
  for (std::size_t w : layer_widths) {
    if (w == 0) throw InvalidInputError("MlpArchitecture: zero layer width");
  }
}

double SgdConfig::lr_at_epoch(std::size_t epoch) const {
  double lr = learning_rate;
  for (std::size_t e : decay_epochs) {
    if (epoch >= e) lr *= decay_factor;
  }
  return lr;
}

ParamSet init_params(const MlpArchitecture& arch) {
  arch.validate();
  ParamSet params;
  for (std::size_t l = 0; l + 1 < arch.layer_widths.size(); ++l) {
    const std::size_t fan_in = arch.layer_widths[l];
    const std::size_t fan_out = arch.layer_widths[l + 1];
    const double bound = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
    const std::string tag = "layer" + std::to_string(l);

    CounterRng rng(arch.seed, "init/" + tag + "/W");
    Tensor2D w(fan_in, fan_out);
    for (double& v : w.values()) v = rng.next_uniform(-bound, bound);
    params.add(tag + "/W", std::move(w));
    params.add(tag + "/b", Tensor2D(1, fan_out));
  }
  return params;
}

namespace {

void apply_activation(Tensor2D& z, Activation act) {
  if (act == Activation::kRelu) {
    for (double& v : z.values()) v = v > 0.0 ? v : 0.0;
  } else {
    for (double& v : z.values()) v = std::tanh(v);
  }
}

// d(act)/dz expressed through the post-activation value h.
double activation_grad(double h, Activation act) {
  if (act == Activation::kRelu) return h > 0.0 ? 1.0 : 0.0;
  return 1.0 - h * h;
}

}  // namespace

ForwardTrace forward(const ParamSet& params, const MlpArchitecture& arch,
                     const Tensor2D& batch) {
  arch.validate();
  if (batch.cols() != arch.input_width()) {
    throw InvalidInputError("forward: batch width " + std::to_string(batch.cols()) +
                            " does not match input width " +
                            std::to_string(arch.input_width()));
  }
  if (params.entry_count() != 2 * arch.layer_count()) {
    throw InternalConsistencyError("forward: parameter layout does not match architecture");
  }

  ForwardTrace trace;
  trace.input = batch;
  trace.per_layer_outputs.reserve(arch.layer_count());

  const Tensor2D* h = &trace.input;
  for (std::size_t l = 0; l < arch.layer_count(); ++l) {
    const std::string tag = "layer" + std::to_string(l);
    const Tensor2D& w = params.tensor(tag + "/W");
    const Tensor2D& b = params.tensor(tag + "/b");
    Tensor2D z = matmul(*h, w);
    for (std::size_t r = 0; r < z.rows(); ++r) {
      double* zr = z.row_ptr(r);
      for (std::size_t c = 0; c < z.cols(); ++c) zr[c] += b.at(0, c);
    }
    if (l + 1 < arch.layer_count()) {
      apply_activation(z, arch.activation);
    }
    trace.per_layer_outputs.push_back(std::move(z));
    h = &trace.per_layer_outputs.back();
  }
  return trace;
}

Tensor2D softmax(const Tensor2D& logits) {
  Tensor2D p(logits.rows(), logits.cols());
  for (std::size_t r = 0; r < logits.rows(); ++r) {
    const double* in = logits.row_ptr(r);
    double* out = p.row_ptr(r);
    double mx = in[0];
    for (std::size_t c = 1; c < logits.cols(); ++c) mx = std::max(mx, in[c]);
    double sum = 0.0;
    for (std::size_t c = 0; c < logits.cols(); ++c) {
      out[c] = std::exp(in[c] - mx);
      sum += out[c];
    }
    for (std::size_t c = 0; c < logits.cols(); ++c) out[c] /= sum;
  }
  return p;
}

std::vector<double> per_example_cross_entropy(const Tensor2D& logits,
                                              const std::vector<int>& labels) {
  if (labels.size() != logits.rows()) {
    throw InvalidInputError("cross_entropy: label count does not match batch rows");
  }
  const Tensor2D p = softmax(logits);
  std::vector<double> losses(labels.size());
  for (std::size_t r = 0; r < labels.size(); ++r) {
    const int y = labels[r];
    if (y < 0 || static_cast<std::size_t>(y) >= logits.cols()) {
      throw InvalidInputError("cross_entropy: label " + std::to_string(y) +
                              " out of range at row " + std::to_string(r));
    }
    // exp(x - max) underflows to 0 only when the true-class logit is
    // ~745 nats below the max; clamp keeps the loss finite there.
    const double q = std::max(p.at(r, static_cast<std::size_t>(y)), 1e-300);
    losses[r] = -std::log(q);
  }
  return losses;
}

CrossEntropyResult cross_entropy(const Tensor2D& logits,
                                 const std::vector<int>& labels) {
  const std::vector<double> losses = per_example_cross_entropy(logits, labels);
  CrossEntropyResult res;
  for (double v : losses) res.loss += v;
  const double inv_n = 1.0 / static_cast<double>(logits.rows());
  res.loss *= inv_n;

  res.grad_logits = softmax(logits);
  for (std::size_t r = 0; r < logits.rows(); ++r) {
    double* g = res.grad_logits.row_ptr(r);
    g[static_cast<std::size_t>(labels[r])] -= 1.0;
    for (std::size_t c = 0; c < logits.cols(); ++c) g[c] *= inv_n;
  }
  return res;
}

GradSet backward(const ParamSet& params, const MlpArchitecture& arch,
                 const ForwardTrace& trace, const Tensor2D& grad_logits) {
  std::vector<std::optional<Tensor2D>> grads(trace.per_layer_outputs.size());
  grads.back() = grad_logits;
  return backward_multi(params, arch, trace, grads);
}

GradSet backward_multi(const ParamSet& params, const MlpArchitecture& arch,
                       const ForwardTrace& trace,
                       const std::vector<std::optional<Tensor2D>>& output_grads) {
  const std::size_t layers = arch.layer_count();
  if (trace.per_layer_outputs.size() != layers) {
    throw InternalConsistencyError("backward: trace does not match architecture");
  }
  if (output_grads.size() != layers) {
    throw InternalConsistencyError("backward: output gradient list length mismatch");
  }
  if (params.entry_count() != 2 * layers) {
    throw InternalConsistencyError("backward: parameter layout does not match architecture");
  }
  for (std::size_t l = 0; l < layers; ++l) {
    if (output_grads[l] && !output_grads[l]->same_shape(trace.per_layer_outputs[l])) {
      throw InternalConsistencyError("backward: injected gradient shape mismatch at layer " +
                                     std::to_string(l));
    }
  }

  GradSet grads;
  std::vector<Tensor2D> grad_w(layers), grad_b(layers);

  // delta holds d(loss)/d(output of current layer), moving top-down.
  Tensor2D delta;
  for (std::size_t l = layers; l-- > 0;) {
    const Tensor2D& out = trace.per_layer_outputs[l];
    const bool is_last = (l + 1 == layers);

    if (is_last) {
      delta = output_grads[l] ? *output_grads[l] : Tensor2D(out.rows(), out.cols());
    } else if (output_grads[l]) {
      for (std::size_t i = 0; i < delta.size(); ++i) {
        delta.values()[i] += output_grads[l]->values()[i];
      }
    }

    // Hidden outputs are post-activation; fold act' into delta before the
    // linear part. The last layer is linear, no activation.
    if (!is_last) {
      for (std::size_t i = 0; i < delta.size(); ++i) {
        delta.values()[i] *= activation_grad(out.values()[i], arch.activation);
      }
    }

    const Tensor2D& below = (l == 0) ? trace.input : trace.per_layer_outputs[l - 1];
    grad_w[l] = matmul_at(below, delta);
    Tensor2D gb(1, delta.cols());
    for (std::size_t r = 0; r < delta.rows(); ++r) {
      const double* dr = delta.row_ptr(r);
      for (std::size_t c = 0; c < delta.cols(); ++c) gb.at(0, c) += dr[c];
    }
    grad_b[l] = std::move(gb);

    if (l > 0) {
      const Tensor2D& w = params.tensor("layer" + std::to_string(l) + "/W");
      delta = matmul_bt(delta, w);
    }
  }

  for (std::size_t l = 0; l < layers; ++l) {
    const std::string tag = "layer" + std::to_string(l);
    grads.add(tag + "/W", std::move(grad_w[l]));
    grads.add(tag + "/b", std::move(grad_b[l]));
  }
  return grads;
}

void sgd_step(ParamSet& params, const GradSet& grads, const SgdConfig& cfg,
              SgdState& state) {
  if (!params.same_layout(grads)) {
    throw InternalConsistencyError("sgd_step: gradient layout does not match parameters");
  }
  if (state.velocity.entry_count() == 0) {
    for (const auto& e : params.entries()) {
      state.velocity.add(e.name, Tensor2D(e.tensor.rows(), e.tensor.cols()));
    }
  } else if (!state.velocity.same_layout(params)) {
    throw InternalConsistencyError("sgd_step: velocity layout does not match parameters");
  }

  for (std::size_t i = 0; i < params.entry_count(); ++i) {
    const auto& g = grads.entry(i).tensor.values();
    if (!grads.entry(i).tensor.all_finite()) {
      throw DivergenceError("sgd_step: non-finite gradient", grads.entry(i).name);
    }
    auto& theta = params.entry(i).tensor.values();
    auto& v = state.velocity.entry(i).tensor.values();
    for (std::size_t j = 0; j < theta.size(); ++j) {
      v[j] = cfg.momentum * v[j] + g[j] + cfg.weight_decay * theta[j];
      theta[j] -= cfg.learning_rate * v[j];
    }
  }
}

}  // namespace uforge::nn
