#pragma once

#include <array>
#include <filesystem>
#include <optional>
#include <vector>

#include "uforge/dataset.hpp"
#include "uforge/mlp.hpp"

namespace uforge::metrics {

/// Threshold sweep over attack scores. Points run from (0,0) to (1,1) with
/// fpr non-decreasing; auc is the trapezoid area.
struct RocCurve {
  struct Point {
    double fpr = 0.0;
    double tpr = 0.0;
    double threshold = 0.0;
  };
  std::vector<Point> points;
  double auc = 0.0;
};

struct RepresentationMetrics {
  double variance = 0.0;    // mean squared distance to the class centroid
  double silhouette = 0.0;  // mean silhouette coefficient of the target class
  double overlap = 0.0;     // mean pairwise 1-D KDE overlap vs other classes
};

/// One evaluation row for a (method, trial) pair. Percentages in [0,100].
struct EvalReport {
  double ta = 0.0;
  double ua = 0.0;
  double ra = 0.0;
  double mia_efficacy = 0.0;  // TPR @ 0.1 FPR, percent
  double tow = 0.0;
  double residual = 0.0;
  double rte_seconds = 0.0;
  std::optional<RepresentationMetrics> representation;
};

/// Argmax accuracy in percent. Ties break to the lowest class index.
double accuracy_on(const ParamSet& params, const nn::MlpArchitecture& arch,
                   const data::LabeledDataset& dataset);

/// Tug-of-war alignment of (m1,m2,m3) against the reference model's values,
/// all given as fractions in [0,1]. Each factor is clamped to [0,1]; a zero
/// reference metric switches that factor to 1 - |m_u - m_0|.
double tow(const std::array<double, 3>& metrics_u,
           const std::array<double, 3>& metrics_0);

enum class ResidualMetric { kMeanLoss, kMeanMaxSoftmax };

/// Behavioral gap between unlearned and matched non-training data:
/// |E[d on D_u] - E[d on D_non-tr]| with d per `metric`.
double residual(const ParamSet& params, const nn::MlpArchitecture& arch,
                const data::LabeledDataset& unlearned,
                const data::LabeledDataset& non_training,
                ResidualMetric metric = ResidualMetric::kMeanLoss);

/// Full threshold sweep with ties grouped. Needs at least one member and one
/// non-member.
RocCurve roc_curve(const std::vector<std::pair<double, bool>>& scored);

/// TPR in percent at the largest achieved FPR <= fpr_target (step convention).
double tpr_at_fpr(const RocCurve& curve, double fpr_target);

/// (TPR + TNR)/2 in percent with decisions score > tau.
double balanced_accuracy(const std::vector<std::pair<double, bool>>& scored,
                         double tau);

/// Maximum balanced accuracy over all thresholds, and the tau achieving it.
std::pair<double, double> best_balanced_accuracy(
    const std::vector<std::pair<double, bool>>& scored);

/// Accuracy recovery: after - before (both percentages).
double ua_recovery(double before, double after);

/// Cluster diagnostics of `target_class` in the feature space of
/// `probe_layer` (a post-activation trace index).
RepresentationMetrics representation_metrics(const ParamSet& params,
                                             const nn::MlpArchitecture& arch,
                                             const data::LabeledDataset& dataset,
                                             std::size_t probe_layer,
                                             int target_class);

void save_roc_json(const std::filesystem::path& path, const RocCurve& curve);

/// Column order of the results CSV; the schema the harness writes.
std::string eval_report_csv_header();
std::string eval_report_csv_row(const std::string& method, std::size_t trial,
                                const EvalReport& report);

}  // namespace uforge::metrics
