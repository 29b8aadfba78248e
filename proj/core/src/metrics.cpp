#include "uforge/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <map>

#include <nlohmann/json.hpp>

#include "uforge/errors.hpp"

namespace uforge::metrics {

namespace {

std::string fmt_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

}  // namespace

double accuracy_on(const ParamSet& params, const nn::MlpArchitecture& arch,
                   const data::LabeledDataset& dataset) {
  if (dataset.size() == 0) throw InvalidInputError("accuracy_on: empty dataset");
  const nn::ForwardTrace trace = nn::forward(params, arch, dataset.features);
  const Tensor2D& logits = trace.logits();

  std::size_t correct = 0;
  for (std::size_t r = 0; r < logits.rows(); ++r) {
    const double* row = logits.row_ptr(r);
    std::size_t best = 0;
    for (std::size_t c = 1; c < logits.cols(); ++c) {
      if (row[c] > row[best]) best = c;  // ties keep the lowest index
    }
    if (static_cast<int>(best) == dataset.labels[r]) ++correct;
  }
  return 100.0 * static_cast<double>(correct) / static_cast<double>(dataset.size());
}

double tow(const std::array<double, 3>& metrics_u,
           const std::array<double, 3>& metrics_0) {
  double product = 1.0;
  for (std::size_t i = 0; i < 3; ++i) {
    const double d = std::fabs(metrics_u[i] - metrics_0[i]);
    double factor;
    if (metrics_0[i] > 0.0) {
      factor = 1.0 - d / metrics_0[i];
    } else {
      factor = 1.0 - d;  // zero-denominator rule, metrics on the [0,1] scale
    }
    factor = std::clamp(factor, 0.0, 1.0);
    product *= factor;
  }
  return product;
}

double residual(const ParamSet& params, const nn::MlpArchitecture& arch,
                const data::LabeledDataset& unlearned,
                const data::LabeledDataset& non_training, ResidualMetric metric) {
  if (unlearned.size() == 0 || non_training.size() == 0) {
    throw InvalidInputError("residual: both datasets must be non-empty");
  }
  const auto mean_stat = [&](const data::LabeledDataset& d) {
    const nn::ForwardTrace trace = nn::forward(params, arch, d.features);
    double sum = 0.0;
    if (metric == ResidualMetric::kMeanLoss) {
      for (double v : nn::per_example_cross_entropy(trace.logits(), d.labels)) sum += v;
    } else {
      const Tensor2D p = nn::softmax(trace.logits());
      for (std::size_t r = 0; r < p.rows(); ++r) {
        const double* row = p.row_ptr(r);
        double mx = row[0];
        for (std::size_t c = 1; c < p.cols(); ++c) mx = std::max(mx, row[c]);
        sum += mx;
      }
    }
    return sum / static_cast<double>(d.size());
  };
  return std::fabs(mean_stat(unlearned) - mean_stat(non_training));
}

RocCurve roc_curve(const std::vector<std::pair<double, bool>>& scored) {
  std::size_t members = 0, non_members = 0;
  for (const auto& [score, is_member] : scored) {
    if (!std::isfinite(score)) throw InvalidInputError("roc_curve: non-finite score");
    (is_member ? members : non_members)++;
  }
  if (members == 0 || non_members == 0) {
    throw InvalidInputError("roc_curve: need at least one member and one non-member");
  }

  std::vector<std::pair<double, bool>> sorted = scored;
  std::stable_sort(sorted.begin(), sorted.end(),
                   [](const auto& a, const auto& b) { return a.first > b.first; });

  RocCurve curve;
  curve.points.push_back({0.0, 0.0, std::numeric_limits<double>::infinity()});

  // Walk score groups from high to low; each point admits the whole group
  // (decisions "score >= threshold" reproduce a point exactly).
  const double p = static_cast<double>(members);
  const double n = static_cast<double>(non_members);
  double tp = 0.0, fp = 0.0;
  double auc_num = 0.0;  // sum of fp_step * (tp_before + tp_after), halved later
  std::size_t i = 0;
  while (i < sorted.size()) {
    const double value = sorted[i].first;
    double tp_step = 0.0, fp_step = 0.0;
    while (i < sorted.size() && sorted[i].first == value) {
      (sorted[i].second ? tp_step : fp_step) += 1.0;
      ++i;
    }
    auc_num += fp_step * (2.0 * tp + tp_step);
    tp += tp_step;
    fp += fp_step;
    curve.points.push_back({fp / n, tp / p, value});
  }
  if (curve.points.back().fpr != 1.0 || curve.points.back().tpr != 1.0) {
    curve.points.push_back({1.0, 1.0, -std::numeric_limits<double>::infinity()});
  }
  curve.auc = auc_num / (2.0 * p * n);
  return curve;
}

double tpr_at_fpr(const RocCurve& curve, double fpr_target) {
  if (fpr_target <= 0.0 || fpr_target >= 1.0) {
    throw InvalidInputError("tpr_at_fpr: target must lie in (0,1)");
  }
  double best = 0.0;
  for (const auto& pt : curve.points) {
    if (pt.fpr <= fpr_target && pt.tpr > best) best = pt.tpr;
  }
  return 100.0 * best;
}

double balanced_accuracy(const std::vector<std::pair<double, bool>>& scored,
                         double tau) {
  double tp = 0.0, fn = 0.0, tn = 0.0, fp = 0.0;
  for (const auto& [score, is_member] : scored) {
    const bool predicted = score > tau;
    if (is_member) (predicted ? tp : fn) += 1.0;
    else (predicted ? fp : tn) += 1.0;
  }
  if (tp + fn == 0.0 || tn + fp == 0.0) {
    throw InvalidInputError("balanced_accuracy: need both classes present");
  }
  return 100.0 * 0.5 * (tp / (tp + fn) + tn / (tn + fp));
}

std::pair<double, double> best_balanced_accuracy(
    const std::vector<std::pair<double, bool>>& scored) {
  std::vector<double> taus;
  taus.reserve(scored.size() + 1);
  double max_score = -std::numeric_limits<double>::infinity();
  for (const auto& [score, is_member] : scored) {
    (void)is_member;
    taus.push_back(score);
    max_score = std::max(max_score, score);
  }
  std::sort(taus.begin(), taus.end(), std::greater<>());
  taus.erase(std::unique(taus.begin(), taus.end()), taus.end());
  taus.push_back(max_score - 1.0);  // everything predicted positive

  double best = 0.0, best_tau = max_score;
  for (double tau : taus) {
    const double acc = balanced_accuracy(scored, tau);
    if (acc > best) {
      best = acc;
      best_tau = tau;
    }
  }
  return {best, best_tau};
}

double ua_recovery(double before, double after) { return after - before; }

namespace {

double silverman_bandwidth(const std::vector<double>& xs) {
  const double n = static_cast<double>(xs.size());
  double mean = 0.0;
  for (double x : xs) mean += x;
  mean /= n;
  double var = 0.0;
  for (double x : xs) var += (x - mean) * (x - mean);
  var /= n;
  const double sd = std::sqrt(var);

  std::vector<double> sorted = xs;
  std::sort(sorted.begin(), sorted.end());
  const auto quantile = [&](double q) {
    const double pos = q * (n - 1.0);
    const std::size_t lo = static_cast<std::size_t>(pos);
    const std::size_t hi = std::min(lo + 1, sorted.size() - 1);
    const double frac = pos - static_cast<double>(lo);
    return sorted[lo] * (1.0 - frac) + sorted[hi] * frac;
  };
  const double iqr = quantile(0.75) - quantile(0.25);

  double spread = std::min(sd, iqr / 1.34);
  if (spread == 0.0) spread = std::max(sd, iqr / 1.34);
  return 0.9 * spread * std::pow(n, -0.2);
}

double kde_overlap_1d(const std::vector<double>& a, const std::vector<double>& b) {
  double lo = std::numeric_limits<double>::infinity();
  double hi = -lo;
  for (double x : a) { lo = std::min(lo, x); hi = std::max(hi, x); }
  for (double x : b) { lo = std::min(lo, x); hi = std::max(hi, x); }
  const double range = hi - lo;
  if (range == 0.0) return 1.0;  // both sets are the same point mass

  // Bandwidth floor keeps degenerate (constant) sets grid-resolvable as
  // sharp spikes rather than true Diracs.
  const double floor_h = range / 1000.0;
  const double ha = std::max(silverman_bandwidth(a), floor_h);
  const double hb = std::max(silverman_bandwidth(b), floor_h);
  const double pad = 3.0 * std::max(ha, hb);

  constexpr std::size_t kGrid = 4096;
  const double start = lo - pad;
  const double step = (range + 2.0 * pad) / static_cast<double>(kGrid - 1);

  const auto density = [&](const std::vector<double>& xs, double h, double t) {
    const double inv = 1.0 / (h * std::sqrt(2.0 * M_PI));
    double sum = 0.0;
    for (double x : xs) {
      const double z = (t - x) / h;
      sum += std::exp(-0.5 * z * z);
    }
    return sum * inv / static_cast<double>(xs.size());
  };

  double overlap = 0.0;
  for (std::size_t g = 0; g < kGrid; ++g) {
    const double t = start + step * static_cast<double>(g);
    overlap += std::min(density(a, ha, t), density(b, hb, t)) * step;
  }
  return std::min(overlap, 1.0);
}

}  // namespace

RepresentationMetrics representation_metrics(const ParamSet& params,
                                             const nn::MlpArchitecture& arch,
                                             const data::LabeledDataset& dataset,
                                             std::size_t probe_layer,
                                             int target_class) {
  if (probe_layer >= arch.layer_count()) {
    throw InvalidInputError("representation_metrics: probe layer out of range");
  }
  const nn::ForwardTrace trace = nn::forward(params, arch, dataset.features);
  const Tensor2D& feats = trace.per_layer_outputs[probe_layer];
  const std::size_t dim = feats.cols();

  std::map<int, std::vector<std::size_t>> by_class;
  for (std::size_t r = 0; r < dataset.size(); ++r) by_class[dataset.labels[r]].push_back(r);
  if (by_class.size() < 2) {
    throw InvalidInputError("representation_metrics: need at least two classes");
  }
  const auto target_it = by_class.find(target_class);
  if (target_it == by_class.end()) {
    throw InvalidInputError("representation_metrics: target class absent");
  }
  const auto& target_rows = target_it->second;
  if (target_rows.size() < 2) {
    throw InvalidInputError("representation_metrics: silhouette undefined for singleton class " +
                            std::to_string(target_class));
  }

  const auto centroid = [&](const std::vector<std::size_t>& rows) {
    std::vector<double> c(dim, 0.0);
    for (std::size_t r : rows) {
      for (std::size_t d = 0; d < dim; ++d) c[d] += feats.at(r, d);
    }
    for (double& v : c) v /= static_cast<double>(rows.size());
    return c;
  };
  const auto euclid = [&](std::size_t r1, std::size_t r2) {
    double sq = 0.0;
    for (std::size_t d = 0; d < dim; ++d) {
      const double diff = feats.at(r1, d) - feats.at(r2, d);
      sq += diff * diff;
    }
    return std::sqrt(sq);
  };

  RepresentationMetrics out;

  const std::vector<double> target_centroid = centroid(target_rows);
  double var = 0.0;
  for (std::size_t r : target_rows) {
    double sq = 0.0;
    for (std::size_t d = 0; d < dim; ++d) {
      const double diff = feats.at(r, d) - target_centroid[d];
      sq += diff * diff;
    }
    var += sq;
  }
  out.variance = var / static_cast<double>(target_rows.size());

  double sil_sum = 0.0;
  for (std::size_t r : target_rows) {
    double a = 0.0;
    for (std::size_t other : target_rows) {
      if (other != r) a += euclid(r, other);
    }
    a /= static_cast<double>(target_rows.size() - 1);

    double b = std::numeric_limits<double>::infinity();
    for (const auto& [cls, rows] : by_class) {
      if (cls == target_class) continue;
      double mean_dist = 0.0;
      for (std::size_t other : rows) mean_dist += euclid(r, other);
      mean_dist /= static_cast<double>(rows.size());
      b = std::min(b, mean_dist);
    }
    const double denom = std::max(a, b);
    sil_sum += denom > 0.0 ? (b - a) / denom : 0.0;
  }
  out.silhouette = sil_sum / static_cast<double>(target_rows.size());

  double overlap_sum = 0.0;
  std::size_t pair_count = 0;
  for (const auto& [cls, rows] : by_class) {
    if (cls == target_class) continue;
    const std::vector<double> other_centroid = centroid(rows);
    std::vector<double> axis(dim);
    double norm = 0.0;
    for (std::size_t d = 0; d < dim; ++d) {
      axis[d] = other_centroid[d] - target_centroid[d];
      norm += axis[d] * axis[d];
    }
    norm = std::sqrt(norm);
    if (norm == 0.0) {
      // Coincident centroids project everywhere the same; fall back to the
      // first feature axis so the densities are still comparable.
      std::fill(axis.begin(), axis.end(), 0.0);
      axis[0] = 1.0;
    } else {
      for (double& v : axis) v /= norm;
    }
    const auto project = [&](const std::vector<std::size_t>& rs) {
      std::vector<double> xs;
      xs.reserve(rs.size());
      for (std::size_t r : rs) {
        double dot = 0.0;
        for (std::size_t d = 0; d < dim; ++d) dot += feats.at(r, d) * axis[d];
        xs.push_back(dot);
      }
      return xs;
    };
    overlap_sum += kde_overlap_1d(project(target_rows), project(rows));
    ++pair_count;
  }
  out.overlap = overlap_sum / static_cast<double>(pair_count);

  return out;
}

void save_roc_json(const std::filesystem::path& path, const RocCurve& curve) {
  nlohmann::json points = nlohmann::json::array();
  for (const auto& pt : curve.points) {
    points.push_back({{"fpr", pt.fpr}, {"tpr", pt.tpr}, {"threshold", pt.threshold}});
  }
  nlohmann::json j;
  j["auc"] = curve.auc;
  j["points"] = points;
  std::ofstream os(path, std::ios::trunc);
  if (!os) throw IoError("save_roc_json: cannot open " + path.string());
  os << j.dump(2) << '\n';
}

std::string eval_report_csv_header() {
  return "method,trial,ta,ua,ra,mia_efficacy,tow,residual,"
         "rep_variance,rep_silhouette,rep_overlap";
}

std::string eval_report_csv_row(const std::string& method, std::size_t trial,
                                const EvalReport& report) {
  std::string row = method + "," + std::to_string(trial);
  for (double v : {report.ta, report.ua, report.ra, report.mia_efficacy, report.tow,
                   report.residual}) {
    row += "," + fmt_double(v);
  }
  if (report.representation) {
    row += "," + fmt_double(report.representation->variance);
    row += "," + fmt_double(report.representation->silhouette);
    row += "," + fmt_double(report.representation->overlap);
  } else {
    row += ",,,";
  }
  return row;
}

}  // namespace uforge::metrics
