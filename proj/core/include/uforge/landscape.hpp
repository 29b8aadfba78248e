#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <vector>

#include "uforge/dataset.hpp"
#include "uforge/mlp.hpp"

namespace uforge::landscape {

/// A 2-D slice of parameter space around an origin model. Directions carry
/// the origin's per-layer norms (filter normalization) and are orthogonal
/// both per layer and flattened.
struct PlaneBasis {
  ParamSet origin;
  nn::GradSet dir_u;
  nn::GradSet dir_v;
  double extent = 1.0;
  std::size_t resolution = 21;  // odd, so the center cell exists
  std::uint64_t seed = 0;
};

/// Loss field over the plane. values[i*resolution + j] is the loss at
/// (alphas[i], betas[j]); the center cell is the loss at the origin itself.
/// Non-finite losses are stored as +infinity.
struct LossGrid {
  std::vector<double> values;
  std::vector<double> alphas;
  std::vector<double> betas;
  std::size_t resolution = 0;

  double at(std::size_t i, std::size_t j) const { return values[i * resolution + j]; }
};

/// Draw two random directions, filter-normalize each layer to the origin's
/// layer norm, and Gram-Schmidt them per layer. Retries a fresh stream on a
/// degenerate (zero-norm) direction, erroring after 8 attempts.
PlaneBasis make_plane(const ParamSet& origin, std::uint64_t seed, double extent,
                      std::size_t resolution);

/// Loss at every grid displacement using a caller-supplied evaluator.
LossGrid loss_grid(const PlaneBasis& basis,
                   const std::function<double(const ParamSet&)>& loss);

/// Mean cross-entropy field of an MLP over `dataset`.
LossGrid loss_grid(const PlaneBasis& basis, const nn::MlpArchitecture& arch,
                   const data::LabeledDataset& dataset);

/// Least-squares (alpha, beta) coordinates of each checkpoint relative to
/// the basis origin.
std::vector<std::pair<double, double>> project_trajectory(
    const std::vector<ParamSet>& checkpoints, const PlaneBasis& basis);

/// CSV rows "alpha,beta,loss" plus a JSON sidecar with basis metadata.
void save_loss_grid(const std::filesystem::path& csv_path,
                    const std::filesystem::path& json_path, const LossGrid& grid,
                    const PlaneBasis& basis, const std::string& dataset_name);

/// CSV rows "step,alpha,beta".
void save_trajectory(const std::filesystem::path& path,
                     const std::vector<std::pair<double, double>>& trajectory);

}  // namespace uforge::landscape
