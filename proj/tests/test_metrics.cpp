#include <doctest.h>

#include <cmath>
#include <vector>

#include "uforge/dataset.hpp"
#include "uforge/errors.hpp"
#include "uforge/metrics.hpp"
#include "uforge/rng.hpp"

using namespace uforge;
using namespace uforge::metrics;

namespace {

// Exhaustive pairwise-ranking probability: P(member > nonmember) + 0.5*P(tie).
double pairwise_auc(const std::vector<std::pair<double, bool>>& scored) {
  double wins = 0.0, pairs = 0.0;
  for (const auto& [ms, mm] : scored) {
    if (!mm) continue;
    for (const auto& [ns, nm] : scored) {
      if (nm) continue;
      pairs += 1.0;
      if (ms > ns) wins += 1.0;
      else if (ms == ns) wins += 0.5;
    }
  }
  return wins / pairs;
}

data::LabeledDataset dataset_from(const std::vector<std::vector<double>>& rows,
                                  const std::vector<int>& labels, std::size_t classes) {
  data::LabeledDataset d;
  d.features = Tensor2D(rows.size(), rows[0].size());
  for (std::size_t r = 0; r < rows.size(); ++r) {
    for (std::size_t c = 0; c < rows[0].size(); ++c) d.features.at(r, c) = rows[r][c];
  }
  d.labels = labels;
  d.class_count = classes;
  d.name = "fixture";
  return d;
}

// A single linear layer so logits are fully controlled by the weights.
nn::MlpArchitecture linear_arch(std::size_t in, std::size_t out) {
  nn::MlpArchitecture arch;
  arch.layer_widths = {in, out};
  arch.activation = nn::Activation::kRelu;
  return arch;
}

}  // namespace

TEST_CASE("accuracy_on: constant logits break ties toward class zero") {
  const auto arch = linear_arch(2, 3);
  ParamSet params;
  params.add("layer0/W", Tensor2D(2, 3));
  params.add("layer0/b", Tensor2D(1, 3));  // all logits identical

  const auto d = dataset_from({{1, 0}, {0, 1}, {2, 2}, {3, 1}}, {0, 1, 0, 2}, 3);
  // Tie-break picks class 0; two rows carry label 0.
  CHECK(accuracy_on(params, arch, d) == doctest::Approx(50.0));
}

TEST_CASE("accuracy_on: empty dataset is rejected") {
  const auto arch = linear_arch(2, 3);
  ParamSet params;
  params.add("layer0/W", Tensor2D(2, 3));
  params.add("layer0/b", Tensor2D(1, 3));
  data::LabeledDataset empty;
  empty.features = Tensor2D(0, 2);
  empty.class_count = 3;
  CHECK_THROWS_AS(accuracy_on(params, arch, empty), InvalidInputError);
}

TEST_CASE("accuracy_on: matches a brute-force per-example oracle on random models") {
  for (std::uint64_t seed : {11ull, 22ull, 33ull}) {
    nn::MlpArchitecture arch;
    arch.layer_widths = {4, 6, 3};
    arch.activation = nn::Activation::kTanh;
    arch.seed = seed;
    const ParamSet params = nn::init_params(arch);

    const auto d = data::make_synthetic_gaussian(3, 4, 20, 0.8, seed);
    const double got = accuracy_on(params, arch, d);

    const nn::ForwardTrace trace = nn::forward(params, arch, d.features);
    std::size_t correct = 0;
    for (std::size_t r = 0; r < d.size(); ++r) {
      int best = 0;
      for (int c = 1; c < 3; ++c) {
        if (trace.logits().at(r, static_cast<std::size_t>(c)) >
            trace.logits().at(r, static_cast<std::size_t>(best))) {
          best = c;
        }
      }
      if (best == d.labels[r]) ++correct;
    }
    CHECK(got == doctest::Approx(100.0 * static_cast<double>(correct) /
                                 static_cast<double>(d.size())));
  }
}

TEST_CASE("tow: identity, worked example, zero-denominator rule") {
  CHECK(tow({0.3, 0.4, 0.5}, {0.3, 0.4, 0.5}) == 1.0);
  CHECK(tow({0.5, 0.25, 1.0}, {0.5, 0.5, 1.0}) == doctest::Approx(0.5).epsilon(1e-15));
  // Reference metric 0: factor becomes 1 - |m_u - 0|.
  CHECK(tow({0.0, 0.0, 1.0}, {0.0, 0.0, 1.0}) == 1.0);
  CHECK(tow({0.2, 0.0, 1.0}, {0.0, 0.0, 1.0}) == doctest::Approx(0.8).epsilon(1e-15));
  // Overshoot clamps to zero instead of going negative.
  CHECK(tow({1.0, 0.5, 0.5}, {0.2, 0.5, 0.5}) == 0.0);
}

TEST_CASE("tow: monotonically non-increasing in each distance") {
  CounterRng rng(5, "tow_prop");
  for (int i = 0; i < 200; ++i) {
    std::array<double, 3> m0{}, mu{}, worse{};
    for (int j = 0; j < 3; ++j) {
      m0[j] = rng.next_unit();
      mu[j] = rng.next_unit();
    }
    worse = mu;
    const int axis = static_cast<int>(rng.next_below(3));
    // Push one coordinate further from the reference.
    const double push = (mu[axis] >= m0[axis] ? 1.0 : -1.0) * rng.next_unit();
    worse[axis] = mu[axis] + push;
    CHECK(tow(worse, m0) <= tow(mu, m0) + 1e-12);
  }
}

TEST_CASE("residual: identical sets give zero and arguments commute") {
  const auto arch = linear_arch(2, 2);
  ParamSet params;
  params.add("layer0/W", Tensor2D(2, 2, {1.0, -0.5, 0.25, 0.75}));
  params.add("layer0/b", Tensor2D(1, 2));

  const auto a = dataset_from({{1, 0}, {0, 1}}, {0, 1}, 2);
  const auto b = dataset_from({{2, 1}, {1, 2}}, {1, 0}, 2);
  CHECK(residual(params, arch, a, a) == 0.0);
  CHECK(residual(params, arch, a, b) == residual(params, arch, b, a));

  data::LabeledDataset empty;
  empty.features = Tensor2D(0, 2);
  empty.class_count = 2;
  CHECK_THROWS_AS(residual(params, arch, a, empty), InvalidInputError);
}

TEST_CASE("residual: hand-computed two-example fixture") {
  // Identity weights, 2 classes. Row (z0,z1) gives CE = ln(1+e^(z_other-z_true)).
  const auto arch = linear_arch(2, 2);
  ParamSet params;
  params.add("layer0/W", Tensor2D(2, 2, {1.0, 0.0, 0.0, 1.0}));
  params.add("layer0/b", Tensor2D(1, 2));

  const auto unlearned = dataset_from({{2.0, 0.0}}, {0}, 2);   // CE = ln(1+e^-2)
  const auto non_train = dataset_from({{0.0, 1.0}}, {1}, 2);   // CE = ln(1+e^-1)
  const double expected =
      std::fabs(std::log(1.0 + std::exp(-2.0)) - std::log(1.0 + std::exp(-1.0)));
  CHECK(residual(params, arch, unlearned, non_train) ==
        doctest::Approx(expected).epsilon(1e-12));

  // The alternative max-softmax channel on the same fixture.
  const double conf_u = 1.0 / (1.0 + std::exp(-2.0));
  const double conf_t = 1.0 / (1.0 + std::exp(-1.0));
  CHECK(residual(params, arch, unlearned, non_train, ResidualMetric::kMeanMaxSoftmax) ==
        doctest::Approx(std::fabs(conf_u - conf_t)).epsilon(1e-12));
}

TEST_CASE("roc_curve: perfect separation and degenerate ties") {
  const RocCurve perfect = roc_curve({{0.9, true}, {0.8, true}, {0.2, false}, {0.1, false}});
  CHECK(perfect.auc == doctest::Approx(1.0));
  CHECK(perfect.points.front().fpr == 0.0);
  CHECK(perfect.points.front().tpr == 0.0);
  CHECK(perfect.points.back().fpr == 1.0);
  CHECK(perfect.points.back().tpr == 1.0);

  const RocCurve flat = roc_curve({{0.5, true}, {0.5, false}, {0.5, true}, {0.5, false}});
  CHECK(flat.auc == doctest::Approx(0.5));

  CHECK_THROWS_AS(roc_curve({{0.5, true}, {0.2, true}}), InvalidInputError);
  CHECK_THROWS_AS(roc_curve({}), InvalidInputError);
}

TEST_CASE("roc_curve: AUC equals the exhaustive pairwise probability within 1e-12") {
  for (std::uint64_t set = 0; set < 50; ++set) {
    CounterRng rng(set, "roc_prop");
    const std::size_t n = 2 + rng.next_below(199);
    std::vector<std::pair<double, bool>> scored;
    bool has_member = false, has_non = false;
    for (std::size_t i = 0; i < n; ++i) {
      // Coarse grid so ties actually occur.
      const double score = std::floor(rng.next_unit() * 20.0) / 20.0;
      const bool member = rng.next_unit() < 0.5;
      scored.emplace_back(score, member);
      (member ? has_member : has_non) = true;
    }
    if (!has_member) scored.emplace_back(0.3, true);
    if (!has_non) scored.emplace_back(0.4, false);

    const RocCurve curve = roc_curve(scored);
    CHECK(std::fabs(curve.auc - pairwise_auc(scored)) < 1e-12);

    // Points are sorted by fpr, non-decreasing.
    for (std::size_t i = 1; i < curve.points.size(); ++i) {
      CHECK(curve.points[i].fpr >= curve.points[i - 1].fpr);
      CHECK(curve.points[i].tpr >= curve.points[i - 1].tpr);
    }
  }
}

TEST_CASE("tpr_at_fpr: perfect curve, diagonal curve, recount oracle") {
  const RocCurve perfect = roc_curve({{0.9, true}, {0.1, false}});
  CHECK(tpr_at_fpr(perfect, 0.1) == doctest::Approx(100.0));
  CHECK(tpr_at_fpr(perfect, 0.5) == doctest::Approx(100.0));

  // Identical scores: achieved points are only (0,0) and (1,1), so any
  // target below 1 keeps TPR at 0 under the step convention.
  const RocCurve flat = roc_curve({{0.5, true}, {0.5, false}});
  CHECK(tpr_at_fpr(flat, 0.5) == 0.0);

  // Recount oracle: pick the threshold the curve reports at fpr <= 0.25 and
  // recount by hand with score >= threshold.
  std::vector<std::pair<double, bool>> scored;
  CounterRng rng(7, "tpr_oracle");
  for (int i = 0; i < 40; ++i) {
    scored.emplace_back(rng.next_unit() + (i % 2 == 0 ? 0.3 : 0.0), i % 2 == 0);
  }
  const RocCurve curve = roc_curve(scored);
  const double got = tpr_at_fpr(curve, 0.25);

  double best_thr = 0.0, best_fpr = -1.0;
  for (const auto& pt : curve.points) {
    if (pt.fpr <= 0.25 && pt.fpr >= best_fpr) {
      best_fpr = pt.fpr;
      best_thr = pt.threshold;
    }
  }
  double tp = 0, p = 0, fp = 0, n = 0;
  for (const auto& [score, member] : scored) {
    if (member) {
      p += 1;
      if (score >= best_thr) tp += 1;
    } else {
      n += 1;
      if (score >= best_thr) fp += 1;
    }
  }
  CHECK(fp / n <= 0.25);
  CHECK(got == doctest::Approx(100.0 * tp / p));

  // Monotone in the target.
  CHECK(tpr_at_fpr(curve, 0.05) <= tpr_at_fpr(curve, 0.25));
  CHECK(tpr_at_fpr(curve, 0.25) <= tpr_at_fpr(curve, 0.8));

  CHECK_THROWS_AS(tpr_at_fpr(curve, 0.0), InvalidInputError);
  CHECK_THROWS_AS(tpr_at_fpr(curve, 1.0), InvalidInputError);
}

TEST_CASE("balanced_accuracy: fixtures and the best-threshold sweep") {
  // TPR 0.8, TNR 0.6 -> 70%.
  std::vector<std::pair<double, bool>> scored;
  for (int i = 0; i < 10; ++i) scored.emplace_back(i < 8 ? 1.0 : 0.0, true);
  for (int i = 0; i < 10; ++i) scored.emplace_back(i < 6 ? 0.0 : 1.0, false);
  CHECK(balanced_accuracy(scored, 0.5) == doctest::Approx(70.0));

  // Symmetric no-signal fixture: every threshold gives exactly 50.
  std::vector<std::pair<double, bool>> noise;
  for (int i = 0; i < 20; ++i) {
    noise.emplace_back(static_cast<double>(i % 10), true);
    noise.emplace_back(static_cast<double>(i % 10), false);
  }
  CHECK(balanced_accuracy(noise, 4.0) == doctest::Approx(50.0));
  CHECK(best_balanced_accuracy(noise).first == doctest::Approx(50.0));

  // Perfect separation reaches 100 at the optimal threshold.
  const auto [best, tau] = best_balanced_accuracy(
      {{0.9, true}, {0.8, true}, {0.2, false}, {0.1, false}});
  CHECK(best == doctest::Approx(100.0));
  CHECK(tau >= 0.2);
  CHECK(tau < 0.8);

  CHECK_THROWS_AS(balanced_accuracy({{0.5, true}}, 0.2), InvalidInputError);
}

TEST_CASE("ua_recovery is a plain difference") {
  CHECK(ua_recovery(60.0, 75.0) == doctest::Approx(15.0));
  CHECK(ua_recovery(50.0, 50.0) == 0.0);
  CHECK(ua_recovery(80.0, 70.0) == doctest::Approx(-10.0));
}

namespace {

// Feature extractor for representation tests: identity network so the probe
// layer sees the raw features.
struct IdentityNet {
  nn::MlpArchitecture arch;
  ParamSet params;
};

IdentityNet identity_net(std::size_t dim, std::size_t classes) {
  IdentityNet net;
  net.arch.layer_widths = {dim, dim, classes};
  net.arch.activation = nn::Activation::kRelu;
  Tensor2D eye(dim, dim);
  for (std::size_t i = 0; i < dim; ++i) eye.at(i, i) = 1.0;
  net.params.add("layer0/W", eye);
  net.params.add("layer0/b", Tensor2D(1, dim));
  net.params.add("layer1/W", Tensor2D(dim, classes));
  net.params.add("layer1/b", Tensor2D(1, classes));
  return net;
}

}  // namespace

TEST_CASE("representation_metrics: ideal clusters and coincident clusters") {
  // Non-negative features pass the relu identity layer untouched.
  const auto net = identity_net(2, 3);

  // Tight, far-apart clusters: variance 0, silhouette ~1, overlap ~0.
  std::vector<std::vector<double>> rows;
  std::vector<int> labels;
  for (int c = 0; c < 3; ++c) {
    for (int i = 0; i < 5; ++i) {
      rows.push_back({static_cast<double>(100 * c), static_cast<double>(100 * c)});
      labels.push_back(c);
    }
  }
  const auto ideal = dataset_from(rows, labels, 3);
  const auto m = representation_metrics(net.params, net.arch, ideal, 0, 0);
  CHECK(m.variance == doctest::Approx(0.0));
  CHECK(m.silhouette == doctest::Approx(1.0).epsilon(1e-9));
  CHECK(m.overlap < 0.02);

  // One cluster duplicated under two labels: overlap ~1.
  std::vector<std::vector<double>> dup_rows;
  std::vector<int> dup_labels;
  CounterRng rng(3, "dup");
  for (int i = 0; i < 40; ++i) {
    const double x = rng.next_gaussian() + 5.0;
    const double y = rng.next_gaussian() + 5.0;
    dup_rows.push_back({x, y});
    dup_labels.push_back(i % 2);
  }
  const auto dup = dataset_from(dup_rows, dup_labels, 2);
  const auto md = representation_metrics(net.params, net.arch, dup, 0, 0);
  CHECK(md.overlap > 0.8);
}

TEST_CASE("representation_metrics: silhouette matches the brute-force definition") {
  const auto net = identity_net(2, 3);
  CounterRng rng(17, "sil");
  std::vector<std::vector<double>> rows;
  std::vector<int> labels;
  for (int c = 0; c < 3; ++c) {
    for (int i = 0; i < 5; ++i) {
      rows.push_back({rng.next_unit() * 4.0 + c, rng.next_unit() * 4.0});
      labels.push_back(c);
    }
  }
  const auto d = dataset_from(rows, labels, 3);
  const int target = 1;
  const auto m = representation_metrics(net.params, net.arch, d, 0, target);

  // Definition-based oracle over the raw points.
  const auto dist = [&](std::size_t i, std::size_t j) {
    const double dx = rows[i][0] - rows[j][0];
    const double dy = rows[i][1] - rows[j][1];
    return std::sqrt(dx * dx + dy * dy);
  };
  double sil_sum = 0.0;
  std::size_t count = 0;
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (labels[i] != target) continue;
    double a = 0.0;
    std::size_t same = 0;
    for (std::size_t j = 0; j < rows.size(); ++j) {
      if (j != i && labels[j] == target) {
        a += dist(i, j);
        ++same;
      }
    }
    a /= static_cast<double>(same);
    double b = 1e300;
    for (int other = 0; other < 3; ++other) {
      if (other == target) continue;
      double mean = 0.0;
      std::size_t n = 0;
      for (std::size_t j = 0; j < rows.size(); ++j) {
        if (labels[j] == other) {
          mean += dist(i, j);
          ++n;
        }
      }
      b = std::min(b, mean / static_cast<double>(n));
    }
    sil_sum += (b - a) / std::max(a, b);
    ++count;
  }
  CHECK(m.silhouette == doctest::Approx(sil_sum / static_cast<double>(count)).epsilon(1e-9));
}

TEST_CASE("representation_metrics: singleton target class is rejected") {
  const auto net = identity_net(2, 2);
  const auto d = dataset_from({{1, 1}, {5, 5}, {6, 6}}, {0, 1, 1}, 2);
  CHECK_THROWS_AS(representation_metrics(net.params, net.arch, d, 0, 0),
                  InvalidInputError);
}

TEST_CASE("representation_metrics: variance is translation invariant, quadratic in scale") {
  const auto net = identity_net(2, 2);
  CounterRng rng(25, "var");
  std::vector<std::vector<double>> rows;
  std::vector<int> labels;
  for (int i = 0; i < 12; ++i) {
    rows.push_back({rng.next_unit() * 3.0 + 1.0, rng.next_unit() * 2.0 + 1.0});
    labels.push_back(i % 2);
  }
  const auto base = dataset_from(rows, labels, 2);
  const double v0 = representation_metrics(net.params, net.arch, base, 0, 0).variance;

  auto shifted_rows = rows;
  for (auto& r : shifted_rows) {
    r[0] += 7.0;
    r[1] += 3.0;
  }
  const auto shifted = dataset_from(shifted_rows, labels, 2);
  CHECK(representation_metrics(net.params, net.arch, shifted, 0, 0).variance ==
        doctest::Approx(v0).epsilon(1e-9));

  auto scaled_rows = rows;
  for (auto& r : scaled_rows) {
    r[0] *= 3.0;
    r[1] *= 3.0;
  }
  const auto scaled = dataset_from(scaled_rows, labels, 2);
  CHECK(representation_metrics(net.params, net.arch, scaled, 0, 0).variance ==
        doctest::Approx(9.0 * v0).epsilon(1e-9));
}

TEST_CASE("eval report CSV schema is stable") {
  CHECK(eval_report_csv_header() ==
        "method,trial,ta,ua,ra,mia_efficacy,tow,residual,"
        "rep_variance,rep_silhouette,rep_overlap");
  EvalReport er;
  er.ta = 87.5;
  er.tow = 1.0;
  const std::string row = eval_report_csv_row("ft", 3, er);
  CHECK(row.rfind("ft,3,87.5,", 0) == 0);
}
