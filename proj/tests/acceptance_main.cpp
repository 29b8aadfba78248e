// Acceptance suite: runs every gate the bench must clear, one line each.
// Exits nonzero if any gate fails.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <sstream>
#include <string>
#include <vector>

#include "uforge/attacks.hpp"
#include "uforge/checkpoint.hpp"
#include "uforge/harness.hpp"
#include "uforge/landscape.hpp"
#include "uforge/metrics.hpp"
#include "uforge/rng.hpp"
#include "uforge/unlearn.hpp"

#ifndef UFORGE_CONFIG_DIR
#define UFORGE_CONFIG_DIR "configs"
#endif

namespace fs = std::filesystem;
using namespace uforge;
using Clock = std::chrono::steady_clock;

namespace {

int failures = 0;

void report(int criterion, bool pass, const std::string& detail) {
  std::printf("%s  criterion %2d: %s\n", pass ? "PASS" : "FAIL", criterion,
              detail.c_str());
  std::fflush(stdout);
  if (!pass) ++failures;
}

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

std::string slurp(const fs::path& path) {
  std::ifstream is(path, std::ios::binary);
  return std::string(std::istreambuf_iterator<char>(is), std::istreambuf_iterator<char>());
}

fs::path fresh_dir(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / name;
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

std::string fmt(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.4g", v);
  return buf;
}

// ---------------------------------------------------------------------------
// 1. Gradient correctness on a 16-32-16-8 MLP.
// ---------------------------------------------------------------------------
void criterion_gradients() {
  const auto start = Clock::now();
  double worst = 0.0;

  for (nn::Activation act : {nn::Activation::kTanh, nn::Activation::kRelu}) {
    nn::MlpArchitecture arch;
    arch.layer_widths = {16, 32, 16, 8};
    arch.activation = act;
    arch.seed = act == nn::Activation::kTanh ? 501 : 502;
    ParamSet params = nn::init_params(arch);

    CounterRng rng(601, "acceptance/gradcheck");
    Tensor2D x(8, 16);
    for (double& v : x.values()) v = rng.next_uniform(-1.0, 1.0);
    std::vector<int> labels(8);
    for (int& y : labels) y = static_cast<int>(rng.next_below(8));

    const nn::ForwardTrace trace = nn::forward(params, arch, x);
    const auto ce = nn::cross_entropy(trace.logits(), labels);
    const nn::GradSet analytic = nn::backward(params, arch, trace, ce.grad_logits);

    const double h = 1e-5;
    for (std::size_t e = 0; e < params.entry_count(); ++e) {
      for (std::size_t j = 0; j < params.entry(e).tensor.size(); ++j) {
        double& theta = params.entry(e).tensor.values()[j];
        const double saved = theta;
        theta = saved + h;
        const double up =
            nn::cross_entropy(nn::forward(params, arch, x).logits(), labels).loss;
        theta = saved - h;
        const double down =
            nn::cross_entropy(nn::forward(params, arch, x).logits(), labels).loss;
        theta = saved;
        const double fd = (up - down) / (2.0 * h);
        const double got = analytic.entry(e).tensor.values()[j];
        const double scale = std::max({std::fabs(fd), std::fabs(got), 1.0});
        worst = std::max(worst, std::fabs(fd - got) / scale);
      }
    }
  }
  const double elapsed = seconds_since(start);
  report(1, worst < 1e-5 && elapsed < 10.0,
         "gradient check 16-32-16-8 (tanh+relu): max rel err " + fmt(worst) +
             " < 1e-5, " + fmt(elapsed) + " s < 10 s");
}

// ---------------------------------------------------------------------------
// 2. ROC AUC equals the exhaustive pairwise-ranking probability.
// ---------------------------------------------------------------------------
void criterion_roc_oracle() {
  double worst = 0.0;
  for (std::uint64_t set = 0; set < 50; ++set) {
    CounterRng rng(set, "acceptance/roc");
    const std::size_t n = 2 + rng.next_below(199);
    std::vector<std::pair<double, bool>> scored;
    bool has_m = false, has_n = false;
    for (std::size_t i = 0; i < n; ++i) {
      const double score = std::floor(rng.next_unit() * 25.0) / 25.0;
      const bool member = rng.next_unit() < 0.5;
      scored.emplace_back(score, member);
      (member ? has_m : has_n) = true;
    }
    if (!has_m) scored.emplace_back(0.5, true);
    if (!has_n) scored.emplace_back(0.5, false);

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
    const double auc = metrics::roc_curve(scored).auc;
    worst = std::max(worst, std::fabs(auc - wins / pairs));
  }
  report(2, worst < 1e-12,
         "ROC AUC vs pairwise oracle on 50 random sets: max |diff| " + fmt(worst) +
             " < 1e-12");
}

// ---------------------------------------------------------------------------
// 3. ToW identity and the worked arithmetic example.
// ---------------------------------------------------------------------------
void criterion_tow() {
  const bool identity = metrics::tow({0.4, 0.7, 0.2}, {0.4, 0.7, 0.2}) == 1.0;
  const double worked = metrics::tow({0.5, 0.25, 1.0}, {0.5, 0.5, 1.0});
  report(3, identity && worked == 0.5,
         std::string("ToW(x,x) = 1 exactly: ") + (identity ? "yes" : "no") +
             "; worked example = " + fmt(worked) + " (expect 0.5)");
}

// ---------------------------------------------------------------------------
// 4+5. Class-wise directional pattern through the real pipeline.
// ---------------------------------------------------------------------------
struct ClassWiseResults {
  double retrain_bacc = 0.0;
  double rl_bacc = 0.0;
  double our_bacc = 0.0;
  double our_mean_tow = 0.0;
  double elapsed = 0.0;
  fs::path out_dir;
  harness::ExperimentConfig cfg;
};

ClassWiseResults run_class_wise_experiment() {
  const auto start = Clock::now();
  ClassWiseResults res;
  res.cfg = harness::load_experiment_config(fs::path(UFORGE_CONFIG_DIR) / "classwise.cfg");
  res.out_dir = fresh_dir("uforge_acceptance_classwise");

  harness::cmd_train(res.cfg, res.out_dir);
  for (auto m : {unlearn::Method::kRetrain, unlearn::Method::kRl, unlearn::Method::kOur}) {
    harness::cmd_unlearn(res.cfg, res.out_dir, m);
    harness::cmd_attack(res.cfg, res.out_dir, "rea_class", unlearn::method_name(m));
  }
  harness::cmd_report(res.out_dir);

  const auto bacc_of = [&](const std::string& method) {
    const auto scores = harness::load_pooled_scores(
        res.out_dir / ("pooled_rea_class_" + method + ".csv"));
    return metrics::best_balanced_accuracy(scores).first;
  };
  res.retrain_bacc = bacc_of("retrain");
  res.rl_bacc = bacc_of("rl");
  res.our_bacc = bacc_of("our");

  // Mean ToW of the our rows in results.csv.
  std::ifstream is(res.out_dir / "report" / "results.csv");
  std::string line;
  double tow_sum = 0.0;
  std::size_t tow_count = 0;
  while (std::getline(is, line)) {
    if (line.rfind("our,", 0) != 0) continue;
    std::size_t pos = 0;
    for (int cell = 0; cell < 6; ++cell) pos = line.find(',', pos) + 1;
    tow_sum += std::stod(line.substr(pos, line.find(',', pos) - pos));
    ++tow_count;
  }
  res.our_mean_tow = tow_count ? tow_sum / static_cast<double>(tow_count) : 0.0;
  res.elapsed = seconds_since(start);
  return res;
}

void criterion_rea_pattern(const ClassWiseResults& r) {
  const bool in_band = r.retrain_bacc >= 40.0 && r.retrain_bacc <= 60.0;
  const bool gap = r.rl_bacc >= r.retrain_bacc + 15.0;
  const bool fast = r.elapsed < 900.0;
  report(4, in_band && gap && fast,
         "class-wise ReA over 20 trials: rl " + fmt(r.rl_bacc) + "% >= retrain " +
             fmt(r.retrain_bacc) + "% + 15, retrain in [40,60], experiment " +
             fmt(r.elapsed) + " s < 900 s");
}

void criterion_our_defense(const ClassWiseResults& r) {
  const bool close = std::fabs(r.our_bacc - r.retrain_bacc) <= 10.0;
  const bool aligned = r.our_mean_tow >= 0.85;
  report(5, close && aligned,
         "our defense: ReA " + fmt(r.our_bacc) + "% within 10 of retrain " +
             fmt(r.retrain_bacc) + "%, mean ToW vs retrain " + fmt(r.our_mean_tow) +
             " >= 0.85");
}

// ---------------------------------------------------------------------------
// 6. Sample-wise ReA vs plain LiRA over 20 paired seeds.
// ---------------------------------------------------------------------------
void criterion_sample_wise() {
  harness::ExperimentConfig base =
      harness::load_experiment_config(fs::path(UFORGE_CONFIG_DIR) / "samplewise.cfg");

  std::size_t wins = 0;
  const std::size_t seeds = 20;
  double lira_mean = 0.0, rea_mean = 0.0;
  for (std::size_t s = 0; s < seeds; ++s) {
    harness::ExperimentConfig cfg = base;
    cfg.master_seed = 1000 + s;
    const harness::TrialContext ctx = harness::build_trial(cfg, 0);

    ParamSet original = nn::init_params(ctx.arch);
    nn::TrainConfig tc = cfg.train;
    tc.seed = hash_stream(ctx.seed, "train/shuffle");
    nn::train_sgd(original, ctx.arch, ctx.split.train_full, tc);

    auto uc = cfg.unlearn_for(unlearn::Method::kGa);
    uc.seed = hash_stream(ctx.seed, "unlearn/ga");
    const ParamSet victim =
        unlearn::run_unlearn(original, ctx.arch, ctx.split, uc).final_params;

    // Population in the attacker's order: retained | unlearned | test.
    const auto& sp = ctx.split;
    const std::size_t u_begin = sp.retained.size();
    const std::size_t t_begin = u_begin + sp.unlearned.size();
    data::LabeledDataset population;
    population.class_count = sp.retained.class_count;
    population.name = "population";
    population.features =
        Tensor2D(t_begin + sp.test.size(), sp.retained.dim());
    std::size_t row = 0;
    for (const auto* part : {&sp.retained, &sp.unlearned, &sp.test}) {
      for (std::size_t i = 0; i < part->size(); ++i, ++row) {
        for (std::size_t c = 0; c < part->dim(); ++c) {
          population.features.at(row, c) = part->features.at(i, c);
        }
        population.labels.push_back(part->labels[i]);
      }
    }

    nn::TrainConfig shadow_tc = cfg.train;
    shadow_tc.seed = 0;
    const auto ensemble = attack::train_shadow_ensemble(
        ctx.arch, population, shadow_tc, cfg.shadow_count,
        hash_stream(ctx.seed, "attack/shadows"));

    const auto lira = attack::mia_lira_scores(ensemble, ctx.arch, victim, population);
    attack::ReaSampleConfig rs = cfg.rea_sample;
    rs.pseudo_retain_size = static_cast<std::size_t>(
        cfg.pseudo_retain_fraction * static_cast<double>(population.size()));
    rs.seed = hash_stream(ctx.seed, "attack/rea_sample");
    const auto rea = attack::rea_samplewise(victim, ctx.arch, population, rs, ensemble);

    std::vector<std::pair<double, bool>> lira_pool, rea_pool;
    for (const auto& sc : lira) {
      if (sc.degenerate || static_cast<std::size_t>(sc.target) < u_begin) continue;
      lira_pool.emplace_back(sc.score, static_cast<std::size_t>(sc.target) < t_begin);
    }
    for (const auto& [target, score] : rea.per_target_scores) {
      if (static_cast<std::size_t>(target) < u_begin) continue;
      rea_pool.emplace_back(score, static_cast<std::size_t>(target) < t_begin);
    }
    const double lira_tpr = metrics::tpr_at_fpr(metrics::roc_curve(lira_pool), 0.1);
    const double rea_tpr = metrics::tpr_at_fpr(metrics::roc_curve(rea_pool), 0.1);
    lira_mean += lira_tpr;
    rea_mean += rea_tpr;
    if (rea_tpr >= lira_tpr) ++wins;
  }
  lira_mean /= static_cast<double>(seeds);
  rea_mean /= static_cast<double>(seeds);
  report(6, wins >= 16,
         "sample-wise on ga victims: ReA TPR@0.1FPR >= LiRA in " +
             std::to_string(wins) + "/20 paired seeds (need 16); mean TPR rea " +
             fmt(rea_mean) + "% vs lira " + fmt(lira_mean) + "%");
}

// ---------------------------------------------------------------------------
// 7. Phase-1 orthogonality on the default class-wise configuration.
// ---------------------------------------------------------------------------
void criterion_orthogonality(const ClassWiseResults& r) {
  const harness::TrialContext ctx = harness::build_trial(r.cfg, 0);
  const nn::Checkpoint original =
      nn::load_checkpoint(r.out_dir / "trial_000" / "original.ufck");

  auto uc = r.cfg.unlearn_for(unlearn::Method::kOur);
  uc.seed = hash_stream(ctx.seed, "unlearn/our");
  const auto layers = unlearn::default_orth_layers(ctx.arch);

  const double before = unlearn::mean_feature_sqcos(
      original.params, original.params, ctx.arch, ctx.split.unlearned, layers);
  const auto [after_params, log] =
      unlearn::our_phase1_orthogonal(original.params, ctx.arch, ctx.split, uc);
  (void)log;
  const double after = unlearn::mean_feature_sqcos(after_params, original.params,
                                                   ctx.arch, ctx.split.unlearned, layers);
  report(7, before >= 0.5 && after < 0.1,
         "phase-1 orthogonality: mean squared cosine " + fmt(before) + " -> " +
             fmt(after) + " (need start >= 0.5, end < 0.1)");
}

// ---------------------------------------------------------------------------
// 8. The Delta_max guard at both ends.
// ---------------------------------------------------------------------------
void criterion_delta_guard(const ClassWiseResults& r) {
  const harness::TrialContext ctx = harness::build_trial(r.cfg, 0);
  const nn::Checkpoint original =
      nn::load_checkpoint(r.out_dir / "trial_000" / "original.ufck");

  auto uc = r.cfg.unlearn_for(unlearn::Method::kOur);
  uc.seed = hash_stream(ctx.seed, "unlearn/our");

  // Zero threshold: the first epoch-boundary check must stop the phase and
  // hand back the entry parameters.
  auto zero_cfg = uc;
  zero_cfg.delta_threshold = 0.0;
  const auto [zero_params, zero_log] =
      unlearn::our_phase1_orthogonal(original.params, ctx.arch, ctx.split, zero_cfg);
  const bool zero_ok = zero_log.size() == 2 && zero_log.back().early_stop &&
                       zero_params == original.params;

  // Paper threshold with a small learning rate: all e1 epochs run.
  auto slow_cfg = uc;
  slow_cfg.delta_threshold = 5e-3;
  slow_cfg.epochs_phase1 = 6;
  slow_cfg.sgd_phase1.learning_rate = 1e-4;
  const auto [slow_params, slow_log] =
      unlearn::our_phase1_orthogonal(original.params, ctx.arch, ctx.split, slow_cfg);
  bool any_stop = false;
  for (const auto& rec : slow_log) any_stop |= rec.early_stop;
  const bool slow_ok = slow_log.size() == slow_cfg.epochs_phase1 + 1 && !any_stop &&
                       param_delta(slow_params, original.params).max <= 5e-3;

  report(8, zero_ok && slow_ok,
         std::string("delta guard: thr 0 stops at the first epoch check (") +
             (zero_ok ? "yes" : "no") + "), thr 5e-3 at lr 1e-4 runs all " +
             std::to_string(slow_cfg.epochs_phase1) + " epochs (" +
             (slow_ok ? "yes" : "no") + ")");
}

// ---------------------------------------------------------------------------
// 9. Landscape consistency.
// ---------------------------------------------------------------------------
void criterion_landscape(const ClassWiseResults& r) {
  const harness::TrialContext ctx = harness::build_trial(r.cfg, 0);
  const nn::Checkpoint original =
      nn::load_checkpoint(r.out_dir / "trial_000" / "original.ufck");

  const landscape::PlaneBasis basis = landscape::make_plane(original.params, 71, 0.5, 7);
  const landscape::LossGrid grid = landscape::loss_grid(basis, ctx.arch, ctx.split.test);
  const double direct = nn::dataset_loss(original.params, ctx.arch, ctx.split.test);
  const double center_err = std::fabs(grid.at(3, 3) - direct);

  landscape::PlaneBasis flat = basis;
  flat.extent = 0.0;
  const landscape::LossGrid zero = landscape::loss_grid(flat, ctx.arch, ctx.split.test);
  double flat_err = 0.0;
  for (double v : zero.values) flat_err = std::max(flat_err, std::fabs(v - direct));

  // Quadratic model: mean squared error of a linear map is an exact
  // paraboloid over the plane.
  CounterRng rng(77, "acceptance/quad");
  const std::size_t n = 24, dim = 4;
  std::vector<std::vector<double>> xs(n, std::vector<double>(dim));
  std::vector<double> ys(n);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t d = 0; d < dim; ++d) xs[i][d] = rng.next_uniform(-2, 2);
    ys[i] = rng.next_uniform(-1, 1);
  }
  ParamSet w_origin;
  Tensor2D w(1, dim);
  for (std::size_t d = 0; d < dim; ++d) w.at(0, d) = rng.next_uniform(-1, 1);
  w_origin.add("w", w);
  const auto mse = [&](const ParamSet& p) {
    const Tensor2D& wt = p.tensor("w");
    double total = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      double res = -ys[i];
      for (std::size_t d = 0; d < dim; ++d) res += xs[i][d] * wt.at(0, d);
      total += res * res;
    }
    return total / static_cast<double>(n);
  };
  const landscape::PlaneBasis qbasis = landscape::make_plane(w_origin, 78, 1.0, 9);
  const landscape::LossGrid qgrid = landscape::loss_grid(qbasis, mse);

  const auto& u = qbasis.dir_u.tensor("w");
  const auto& v = qbasis.dir_v.tensor("w");
  double c0 = 0, c1 = 0, c2 = 0, c3 = 0, c4 = 0, c5 = 0;
  for (std::size_t i = 0; i < n; ++i) {
    double res = -ys[i], ux = 0, vx = 0;
    for (std::size_t d = 0; d < dim; ++d) {
      res += xs[i][d] * w_origin.tensor("w").at(0, d);
      ux += xs[i][d] * u.at(0, d);
      vx += xs[i][d] * v.at(0, d);
    }
    c0 += res * res;
    c1 += 2 * res * ux;
    c2 += 2 * res * vx;
    c3 += ux * ux;
    c4 += 2 * ux * vx;
    c5 += vx * vx;
  }
  for (double* c : {&c0, &c1, &c2, &c3, &c4, &c5}) *c /= static_cast<double>(n);
  double quad_err = 0.0;
  for (std::size_t i = 0; i < qgrid.resolution; ++i) {
    for (std::size_t j = 0; j < qgrid.resolution; ++j) {
      const double a = qgrid.alphas[i], b = qgrid.betas[j];
      const double expect = c0 + c1 * a + c2 * b + c3 * a * a + c4 * a * b + c5 * b * b;
      quad_err = std::max(quad_err, std::fabs(qgrid.at(i, j) - expect));
    }
  }

  report(9, center_err < 1e-9 && flat_err == 0.0 && quad_err < 1e-9,
         "landscape: center err " + fmt(center_err) + " < 1e-9, extent-0 spread " +
             fmt(flat_err) + ", quadratic closed-form err " + fmt(quad_err) + " < 1e-9");
}

// ---------------------------------------------------------------------------
// 10. End-to-end determinism.
// ---------------------------------------------------------------------------
void criterion_determinism() {
  const harness::ExperimentConfig cfg =
      harness::load_experiment_config(fs::path(UFORGE_CONFIG_DIR) / "smoke.cfg");

  const fs::path out1 = fresh_dir("uforge_acceptance_det1");
  const fs::path out2 = fresh_dir("uforge_acceptance_det2");
  for (const fs::path& out : {out1, out2}) {
    harness::cmd_train(cfg, out);
    harness::cmd_unlearn(cfg, out, unlearn::Method::kRetrain);
    harness::cmd_unlearn(cfg, out, unlearn::Method::kRl);
    harness::cmd_attack(cfg, out, "rea_class", "rl");
    harness::cmd_report(out);
  }
  const bool results_same =
      slurp(out1 / "report" / "results.csv") == slurp(out2 / "report" / "results.csv");
  const bool pooled_same =
      slurp(out1 / "pooled_rea_class_rl.csv") == slurp(out2 / "pooled_rea_class_rl.csv");
  const bool roc_same = slurp(out1 / "report" / "roc_rea_class_rl.json") ==
                        slurp(out2 / "report" / "roc_rea_class_rl.json");
  fs::remove_all(out1);
  fs::remove_all(out2);
  report(10, results_same && pooled_same && roc_same,
         std::string("two pipeline runs byte-identical: results.csv ") +
             (results_same ? "yes" : "no") + ", pooled csv " +
             (pooled_same ? "yes" : "no") + ", roc json " + (roc_same ? "yes" : "no"));
}

}  // namespace

int main() {
  std::printf("unlearn-forge acceptance suite\n");
  const auto start = Clock::now();

  criterion_gradients();
  criterion_roc_oracle();
  criterion_tow();

  const ClassWiseResults class_wise = run_class_wise_experiment();
  criterion_rea_pattern(class_wise);
  criterion_our_defense(class_wise);
  criterion_sample_wise();
  criterion_orthogonality(class_wise);
  criterion_delta_guard(class_wise);
  criterion_landscape(class_wise);
  criterion_determinism();

  fs::remove_all(class_wise.out_dir);
  std::printf("%d/10 criteria passed in %.1f s\n", 10 - failures,
              seconds_since(start));
  return failures == 0 ? 0 : 1;
}
