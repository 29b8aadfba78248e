#include "uforge/landscape.hpp"

#include <cmath>
#include <fstream>
#include <sstream>

#include <nlohmann/json.hpp>

#include "uforge/errors.hpp"
#include "uforge/rng.hpp"
#include "uforge/train.hpp"

namespace uforge::landscape {

namespace {

double tensor_norm(const Tensor2D& t) {
  double sq = 0.0;
  for (double v : t.values()) sq += v * v;
  return std::sqrt(sq);
}

double flat_dot(const ParamSet& a, const ParamSet& b) {
  double dot = 0.0;
  for (std::size_t i = 0; i < a.entry_count(); ++i) {
    const auto& av = a.entry(i).tensor.values();
    const auto& bv = b.entry(i).tensor.values();
    for (std::size_t j = 0; j < av.size(); ++j) dot += av[j] * bv[j];
  }
  return dot;
}

nn::GradSet random_direction(const ParamSet& origin, std::uint64_t seed,
                             const std::string& stream) {
  nn::GradSet dir;
  CounterRng rng(seed, stream);
  for (const auto& e : origin.entries()) {
    Tensor2D t(e.tensor.rows(), e.tensor.cols());
    for (double& v : t.values()) v = rng.next_gaussian();
    dir.add(e.name, std::move(t));
  }
  return dir;
}

// Scale each layer of dir to the origin layer's norm. Zero-norm origin
// layers zero the direction there (nothing to explore along frozen layers).
void filter_normalize(nn::GradSet& dir, const ParamSet& origin) {
  for (std::size_t i = 0; i < dir.entry_count(); ++i) {
    auto& t = dir.entry(i).tensor;
    const double dn = tensor_norm(t);
    const double on = tensor_norm(origin.entry(i).tensor);
    const double scale = dn > 0.0 ? on / dn : 0.0;
    for (double& v : t.values()) v *= scale;
  }
}

ParamSet displace(const PlaneBasis& basis, double alpha, double beta) {
  ParamSet out = basis.origin;
  for (std::size_t i = 0; i < out.entry_count(); ++i) {
    auto& theta = out.entry(i).tensor.values();
    const auto& u = basis.dir_u.entry(i).tensor.values();
    const auto& v = basis.dir_v.entry(i).tensor.values();
    for (std::size_t j = 0; j < theta.size(); ++j) {
      theta[j] += alpha * u[j] + beta * v[j];
    }
  }
  return out;
}

}  // namespace

PlaneBasis make_plane(const ParamSet& origin, std::uint64_t seed, double extent,
                      std::size_t resolution) {
  if (resolution < 3 || resolution % 2 == 0) {
    throw InvalidInputError("make_plane: resolution must be odd and >= 3");
  }
  if (origin.entry_count() == 0) {
    throw InvalidInputError("make_plane: origin has no parameters");
  }

  for (int attempt = 0; attempt < 8; ++attempt) {
    const std::string suffix = "/" + std::to_string(attempt);
    nn::GradSet u = random_direction(origin, seed, "plane/u" + suffix);
    nn::GradSet v = random_direction(origin, seed, "plane/v" + suffix);
    filter_normalize(u, origin);
    filter_normalize(v, origin);

    // Per-layer Gram-Schmidt keeps the flattened product zero even after
    // per-layer rescaling.
    for (std::size_t i = 0; i < v.entry_count(); ++i) {
      auto& vt = v.entry(i).tensor.values();
      const auto& ut = u.entry(i).tensor.values();
      double uu = 0.0, uv = 0.0;
      for (std::size_t j = 0; j < vt.size(); ++j) {
        uu += ut[j] * ut[j];
        uv += ut[j] * vt[j];
      }
      if (uu == 0.0) continue;
      const double coeff = uv / uu;
      for (std::size_t j = 0; j < vt.size(); ++j) vt[j] -= coeff * ut[j];
    }
    filter_normalize(v, origin);

    const double un = std::sqrt(flat_dot(u, u));
    const double vn = std::sqrt(flat_dot(v, v));
    if (un == 0.0 || vn == 0.0) continue;  // degenerate draw, next stream

    PlaneBasis basis;
    basis.origin = origin;
    basis.dir_u = std::move(u);
    basis.dir_v = std::move(v);
    basis.extent = extent;
    basis.resolution = resolution;
    basis.seed = seed;
    return basis;
  }
  throw Error("make_plane: failed to draw a non-degenerate direction in 8 attempts");
}

LossGrid loss_grid(const PlaneBasis& basis,
                   const std::function<double(const ParamSet&)>& loss) {
  LossGrid grid;
  grid.resolution = basis.resolution;
  grid.values.resize(basis.resolution * basis.resolution);
  grid.alphas.resize(basis.resolution);
  grid.betas.resize(basis.resolution);

  const auto half = static_cast<double>(basis.resolution - 1) / 2.0;
  for (std::size_t i = 0; i < basis.resolution; ++i) {
    const double coord = (static_cast<double>(i) - half) / half * basis.extent;
    grid.alphas[i] = coord;
    grid.betas[i] = coord;
  }

  for (std::size_t i = 0; i < basis.resolution; ++i) {
    for (std::size_t j = 0; j < basis.resolution; ++j) {
      const ParamSet displaced = displace(basis, grid.alphas[i], grid.betas[j]);
      double value;
      try {
        value = loss(displaced);
      } catch (const Error&) {
        value = std::numeric_limits<double>::infinity();
      }
      if (!std::isfinite(value)) value = std::numeric_limits<double>::infinity();
      grid.values[i * basis.resolution + j] = value;
    }
  }
  return grid;
}

LossGrid loss_grid(const PlaneBasis& basis, const nn::MlpArchitecture& arch,
                   const data::LabeledDataset& dataset) {
  if (dataset.size() == 0) throw InvalidInputError("loss_grid: empty dataset");
  return loss_grid(basis, [&](const ParamSet& params) {
    return nn::dataset_loss(params, arch, dataset);
  });
}

std::vector<std::pair<double, double>> project_trajectory(
    const std::vector<ParamSet>& checkpoints, const PlaneBasis& basis) {
  // Normal equations of the 2-column least squares onto (dir_u, dir_v).
  const double uu = flat_dot(basis.dir_u, basis.dir_u);
  const double vv = flat_dot(basis.dir_v, basis.dir_v);
  const double uv = flat_dot(basis.dir_u, basis.dir_v);
  const double det = uu * vv - uv * uv;
  if (det == 0.0) throw InternalConsistencyError("project_trajectory: degenerate basis");

  std::vector<std::pair<double, double>> coords;
  coords.reserve(checkpoints.size());
  for (const ParamSet& theta : checkpoints) {
    if (!theta.same_layout(basis.origin)) {
      throw InvalidInputError("project_trajectory: checkpoint layout mismatch");
    }
    ParamSet diff = theta;
    for (std::size_t i = 0; i < diff.entry_count(); ++i) {
      auto& d = diff.entry(i).tensor.values();
      const auto& o = basis.origin.entry(i).tensor.values();
      for (std::size_t j = 0; j < d.size(); ++j) d[j] -= o[j];
    }
    const double du = flat_dot(diff, basis.dir_u);
    const double dv = flat_dot(diff, basis.dir_v);
    coords.emplace_back((vv * du - uv * dv) / det, (uu * dv - uv * du) / det);
  }
  return coords;
}

void save_loss_grid(const std::filesystem::path& csv_path,
                    const std::filesystem::path& json_path, const LossGrid& grid,
                    const PlaneBasis& basis, const std::string& dataset_name) {
  std::ofstream os(csv_path, std::ios::trunc);
  if (!os) throw IoError("save_loss_grid: cannot open " + csv_path.string());
  os << "alpha,beta,loss\n";
  std::ostringstream buf;
  buf.precision(17);
  for (std::size_t i = 0; i < grid.resolution; ++i) {
    for (std::size_t j = 0; j < grid.resolution; ++j) {
      buf << grid.alphas[i] << ',' << grid.betas[j] << ',' << grid.at(i, j) << '\n';
    }
  }
  os << buf.str();

  nlohmann::json j;
  j["dataset"] = dataset_name;
  j["extent"] = basis.extent;
  j["resolution"] = basis.resolution;
  j["seed"] = basis.seed;
  std::ofstream js(json_path, std::ios::trunc);
  if (!js) throw IoError("save_loss_grid: cannot open " + json_path.string());
  js << j.dump(2) << '\n';
}

void save_trajectory(const std::filesystem::path& path,
                     const std::vector<std::pair<double, double>>& trajectory) {
  std::ofstream os(path, std::ios::trunc);
  if (!os) throw IoError("save_trajectory: cannot open " + path.string());
  os << "step,alpha,beta\n";
  std::ostringstream buf;
  buf.precision(17);
  for (std::size_t i = 0; i < trajectory.size(); ++i) {
    buf << i << ',' << trajectory[i].first << ',' << trajectory[i].second << '\n';
  }
  os << buf.str();
}

}  // namespace uforge::landscape
