#include "uforge/harness.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cstdlib>
#include <fstream>
#include <mutex>
#include <sstream>
#include <thread>

#include <nlohmann/json.hpp>

#include "uforge/checkpoint.hpp"
#include "uforge/errors.hpp"
#include "uforge/landscape.hpp"
#include "uforge/rng.hpp"

namespace uforge::harness {

namespace fs = std::filesystem;

// ---------------------------------------------------------------------------
// Config materialization
// ---------------------------------------------------------------------------

namespace {

nn::Activation activation_from(const std::string& name, const std::string& field) {
  if (name == "relu") return nn::Activation::kRelu;
  if (name == "tanh") return nn::Activation::kTanh;
  throw InvalidInputError("config: field '" + field + "' must be relu or tanh, got '" +
                          name + "'");
}

std::size_t require_positive(std::int64_t v, const std::string& field) {
  if (v <= 0) {
    throw InvalidInputError("config: field '" + field + "' must be positive");
  }
  return static_cast<std::size_t>(v);
}

}  // namespace

ExperimentConfig experiment_config_from(const KvConfig& kv) {
  ExperimentConfig cfg;
  cfg.raw = kv;

  cfg.dataset_kind = kv.get_string("dataset.kind", "synthetic");
  if (cfg.dataset_kind != "synthetic" && cfg.dataset_kind != "csv") {
    throw InvalidInputError("config: field 'dataset.kind' must be synthetic or csv");
  }
  cfg.classes = require_positive(kv.get_int("dataset.classes", 8), "dataset.classes");
  cfg.dim = require_positive(kv.get_int("dataset.dim", 16), "dataset.dim");
  cfg.per_class = require_positive(kv.get_int("dataset.per_class", 200), "dataset.per_class");
  cfg.spread = kv.get_double("dataset.spread", 0.5);
  cfg.ood_count = static_cast<std::size_t>(kv.get_int("dataset.ood_classes", 5));
  cfg.test_fraction = kv.get_double("dataset.test_fraction", 0.25);
  cfg.train_csv = kv.get_string("dataset.train_csv", "");
  cfg.test_csv = kv.get_string("dataset.test_csv", "");

  cfg.hidden = kv.get_size_list("arch.hidden", {32, 16});
  cfg.activation = activation_from(kv.get_string("arch.activation", "relu"),
                                   "arch.activation");

  cfg.train.epochs = static_cast<std::size_t>(kv.get_int("train.epochs", 40));
  cfg.train.batch_size = require_positive(kv.get_int("train.batch", 64), "train.batch");
  cfg.train.sgd.learning_rate = kv.get_double("train.lr", 0.05);
  cfg.train.sgd.momentum = kv.get_double("train.momentum", 0.9);
  cfg.train.sgd.weight_decay = kv.get_double("train.weight_decay", 5e-4);
  cfg.train.sgd.decay_factor = kv.get_double("train.decay_factor", 1.0);
  cfg.train.sgd.decay_epochs = kv.get_size_list("train.decay_epochs", {});

  const std::string mode = kv.get_string("split.mode", "class_wise");
  if (mode == "class_wise") cfg.mode = data::SplitMode::kClassWise;
  else if (mode == "sample_wise") cfg.mode = data::SplitMode::kSampleWise;
  else throw InvalidInputError("config: field 'split.mode' must be class_wise or sample_wise");
  cfg.unlearn_fraction = kv.get_double("split.unlearn_fraction", 0.1);
  cfg.fixed_unlearn_class = static_cast<int>(kv.get_int("split.unlearn_class", -1));

  cfg.trials = require_positive(kv.get_int("trials", 20), "trials");
  cfg.master_seed = kv.get_u64("seed", 42);

  cfg.shadow_count = require_positive(kv.get_int("attack.shadows", 16), "attack.shadows");
  cfg.rea_class.learning_rates =
      kv.get_double_list("attack.rea_class.lrs", {0.001, 0.005, 0.007, 0.01});
  cfg.rea_class.idx_max =
      require_positive(kv.get_int("attack.rea_class.idx_max", 75), "attack.rea_class.idx_max");
  cfg.rea_class.convergence_threshold = kv.get_double("attack.rea_class.threshold", 0.75);
  cfg.rea_class.reference_ratio = kv.get_double("attack.rea_class.ref_ratio", 6.0);
  cfg.rea_class.sgd.momentum = kv.get_double("attack.rea_class.momentum", 0.9);
  cfg.rea_class.sgd.weight_decay = kv.get_double("attack.rea_class.weight_decay", 5e-4);
  cfg.rea_access =
      require_positive(kv.get_int("attack.rea_class.access", 24), "attack.rea_class.access");
  cfg.rea_candidates = require_positive(kv.get_int("attack.rea_class.candidates", 5),
                                        "attack.rea_class.candidates");

  cfg.rea_sample.epochs = static_cast<std::size_t>(kv.get_int("attack.rea_sample.epochs", 5));
  cfg.rea_sample.learning_rate = kv.get_double("attack.rea_sample.lr", 0.005);
  cfg.rea_sample.batch_size =
      require_positive(kv.get_int("attack.rea_sample.batch", 64), "attack.rea_sample.batch");
  cfg.pseudo_retain_fraction = kv.get_double("attack.rea_sample.nr_fraction", 1.0 / 3.0);

  cfg.report_representation = kv.get_bool("report.representation", true);
  const std::string residual = kv.get_string("report.residual_metric", "loss");
  if (residual == "loss") cfg.residual_metric = metrics::ResidualMetric::kMeanLoss;
  else if (residual == "confidence") cfg.residual_metric = metrics::ResidualMetric::kMeanMaxSoftmax;
  else throw InvalidInputError("config: field 'report.residual_metric' must be loss or confidence");

  cfg.validate();
  return cfg;
}

ExperimentConfig load_experiment_config(const fs::path& path) {
  return experiment_config_from(KvConfig::parse_file(path));
}

void ExperimentConfig::validate() const {
  if (classes < 2) throw InvalidInputError("config: field 'dataset.classes' must be >= 2");
  if (test_fraction <= 0.0 || test_fraction > 1.0) {
    throw InvalidInputError("config: field 'dataset.test_fraction' must lie in (0,1]");
  }
  if (mode == data::SplitMode::kSampleWise &&
      (unlearn_fraction <= 0.0 || unlearn_fraction >= 1.0)) {
    throw InvalidInputError("config: field 'split.unlearn_fraction' must lie in (0,1)");
  }
  if (fixed_unlearn_class >= static_cast<int>(classes)) {
    throw InvalidInputError("config: field 'split.unlearn_class' names class " +
                            std::to_string(fixed_unlearn_class) + " but dataset.classes is " +
                            std::to_string(classes));
  }
  if (mode == data::SplitMode::kClassWise && ood_count == 0) {
    throw InvalidInputError("config: field 'dataset.ood_classes' must be > 0 for class-wise runs");
  }
  if (pseudo_retain_fraction <= 0.0 || pseudo_retain_fraction > 1.0) {
    throw InvalidInputError("config: field 'attack.rea_sample.nr_fraction' must lie in (0,1]");
  }
  if (dataset_kind == "csv" && train_csv.empty()) {
    throw InvalidInputError("config: field 'dataset.train_csv' required for csv datasets");
  }
  rea_class.validate();
}

nn::MlpArchitecture ExperimentConfig::base_arch() const {
  nn::MlpArchitecture arch;
  arch.layer_widths.push_back(dim);
  for (std::size_t h : hidden) arch.layer_widths.push_back(h);
  arch.layer_widths.push_back(classes);
  arch.activation = activation;
  arch.validate();
  return arch;
}

unlearn::UnlearnConfig ExperimentConfig::unlearn_for(unlearn::Method method) const {
  const std::string m = unlearn::method_name(method);
  const auto dget = [&](const std::string& key, double fb) {
    return raw.get_double("unlearn." + m + "." + key, raw.get_double("unlearn." + key, fb));
  };
  const auto iget = [&](const std::string& key, std::int64_t fb) {
    return raw.get_int("unlearn." + m + "." + key, raw.get_int("unlearn." + key, fb));
  };
  const auto lget = [&](const std::string& key, const std::vector<std::size_t>& fb) {
    return raw.get_size_list("unlearn." + m + "." + key, raw.get_size_list("unlearn." + key, fb));
  };
  const auto sget = [&](const std::string& key, const std::string& fb) {
    return raw.get_string("unlearn." + m + "." + key, raw.get_string("unlearn." + key, fb));
  };

  unlearn::UnlearnConfig uc;
  uc.method = method;

  // Retraining reuses the original training recipe unless overridden.
  const bool is_retrain = method == unlearn::Method::kRetrain;
  const double default_lr1 = is_retrain ? train.sgd.learning_rate : 0.02;
  const auto default_epochs1 =
      is_retrain ? static_cast<std::int64_t>(train.epochs) : std::int64_t{8};

  uc.epochs_phase1 = static_cast<std::size_t>(iget("epochs1", default_epochs1));
  uc.epochs_phase2 = static_cast<std::size_t>(iget("epochs2", 8));
  uc.batch_size = static_cast<std::size_t>(iget("batch", static_cast<std::int64_t>(train.batch_size)));

  uc.sgd_phase1.learning_rate = dget("lr1", default_lr1);
  uc.sgd_phase1.momentum = dget("momentum", train.sgd.momentum);
  uc.sgd_phase1.weight_decay = dget("weight_decay", train.sgd.weight_decay);
  uc.sgd_phase1.decay_factor = dget("decay_factor", 1.0);
  uc.sgd_phase1.decay_epochs = lget("decay_epochs1", {});

  uc.sgd_phase2.learning_rate = dget("lr2", 0.02);
  uc.sgd_phase2.momentum = uc.sgd_phase1.momentum;
  uc.sgd_phase2.weight_decay = uc.sgd_phase1.weight_decay;
  uc.sgd_phase2.decay_factor = dget("decay_factor2", 0.5);
  uc.sgd_phase2.decay_epochs = lget("decay_epochs2", {3});

  const std::string delta_mode = sget("delta_mode", "fixed");
  if (delta_mode == "fixed") {
    uc.delta_threshold = dget("delta_thr", 5e-3);
  } else if (delta_mode == "computed") {
    // Threshold from data: the max normalized distance between two random
    // models of this architecture.
    nn::MlpArchitecture a = base_arch();
    a.seed = hash_stream(master_seed, "delta_thr/a");
    nn::MlpArchitecture b = base_arch();
    b.seed = hash_stream(master_seed, "delta_thr/b");
    uc.delta_threshold = param_delta(nn::init_params(a), nn::init_params(b)).max;
  } else {
    throw InvalidInputError("config: field 'unlearn.delta_mode' must be fixed or computed");
  }
  uc.delta_check_per_batch = raw.get_bool("unlearn." + m + ".delta_per_batch",
                                          raw.get_bool("unlearn.delta_per_batch", false));

  uc.orth_layers = lget("orth_layers", {});
  const std::string objective = sget("orth_objective", "sqcos");
  if (objective == "sqcos") uc.orth_objective = unlearn::OrthObjective::kSquaredInnerProduct;
  else if (objective == "l2dist") uc.orth_objective = unlearn::OrthObjective::kL2Distance;
  else throw InvalidInputError("config: field 'unlearn.orth_objective' must be sqcos or l2dist");

  uc.l1_lambda = dget("l1_lambda", 1e-5);
  uc.ga_clip_norm = dget("ga_clip", 10.0);
  return uc;
}

// ---------------------------------------------------------------------------
// Trials
// ---------------------------------------------------------------------------

std::uint64_t trial_seed(std::uint64_t master_seed, std::size_t trial) {
  return hash_stream(master_seed, "trial/" + std::to_string(trial));
}

TrialContext build_trial(const ExperimentConfig& cfg, std::size_t trial) {
  TrialContext ctx;
  ctx.index = trial;
  ctx.seed = trial_seed(cfg.master_seed, trial);

  ctx.arch = cfg.base_arch();
  ctx.arch.seed = hash_stream(ctx.seed, "init");

  const std::uint64_t data_seed = hash_stream(ctx.seed, "data");
  data::LabeledDataset full, test;
  if (cfg.dataset_kind == "csv") {
    full = data::load_csv_dataset(cfg.train_csv, cfg.classes + cfg.ood_count);
    test = cfg.test_csv.empty()
               ? data::LabeledDataset{Tensor2D(0, full.dim()), {}, full.class_count, "test"}
               : data::load_csv_dataset(cfg.test_csv, cfg.classes + cfg.ood_count);
  } else {
    const std::size_t clusters =
        cfg.mode == data::SplitMode::kClassWise ? cfg.classes + cfg.ood_count : cfg.classes;
    const auto test_per_class = static_cast<std::size_t>(
        std::max(1.0, std::ceil(cfg.test_fraction * static_cast<double>(cfg.per_class))));
    full = data::make_synthetic_gaussian(clusters, cfg.dim, cfg.per_class, cfg.spread,
                                         data_seed, "train");
    test = data::make_synthetic_gaussian_like(clusters, cfg.dim, test_per_class, cfg.spread,
                                              data_seed, "test");
  }

  data::SplitSpec spec;
  spec.mode = cfg.mode;
  spec.seed = hash_stream(ctx.seed, "split");
  if (cfg.mode == data::SplitMode::kClassWise) {
    const int u = cfg.fixed_unlearn_class >= 0
                      ? cfg.fixed_unlearn_class
                      : static_cast<int>(CounterRng(ctx.seed, "unlearn_class")
                                             .next_below(cfg.classes));
    ctx.unlearned_class = u;
    spec.unlearn_classes = {u};
    for (std::size_t c = cfg.classes; c < cfg.classes + cfg.ood_count; ++c) {
      spec.ood_classes.push_back(static_cast<int>(c));
      ctx.ood_classes.push_back(static_cast<int>(c));
    }
    // The test split must only score the trained head; drop never-trained
    // cluster rows from D_t (they feed the OOD pool instead).
    std::vector<std::size_t> keep;
    for (std::size_t i = 0; i < test.size(); ++i) {
      if (test.labels[i] < static_cast<int>(cfg.classes)) keep.push_back(i);
    }
    test = test.select(keep, test.name);
  } else {
    spec.unlearn_fraction = cfg.unlearn_fraction;
  }

  ctx.split = data::split_for_unlearning(full, test, spec);
  return ctx;
}

// ---------------------------------------------------------------------------
// Paths, manifests, parallel driver
// ---------------------------------------------------------------------------

namespace {

fs::path with_version(const fs::path& path, std::size_t version) {
  if (version == 1) return path;
  fs::path candidate = path;
  const std::string stem = path.stem().string();
  const std::string ext = path.extension().string();
  candidate.replace_filename(stem + ".v" + std::to_string(version) + ext);
  return candidate;
}

}  // namespace

fs::path versioned_path(const fs::path& path) {
  for (std::size_t v = 1;; ++v) {
    const fs::path candidate = with_version(path, v);
    if (!fs::exists(candidate)) return candidate;
  }
}

fs::path latest_path(const fs::path& path) {
  fs::path latest = path;
  for (std::size_t v = 2;; ++v) {
    const fs::path candidate = with_version(path, v);
    if (!fs::exists(candidate)) return latest;
    latest = candidate;
  }
}

namespace {

std::size_t thread_cap() {
  if (const char* env = std::getenv(kThreadsEnvVar)) {
    const long v = std::strtol(env, nullptr, 10);
    if (v >= 1) return static_cast<std::size_t>(v);
    return 1;
  }
  const unsigned hw = std::thread::hardware_concurrency();
  return hw == 0 ? 1 : hw;
}

template <typename Fn>
void parallel_trials(std::size_t n, Fn&& fn) {
  const std::size_t workers = std::min(thread_cap(), n);
  if (workers <= 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr first_error;
  std::mutex error_mutex;
  std::vector<std::thread> pool;
  for (std::size_t w = 0; w < workers; ++w) {
    pool.emplace_back([&]() {
      for (;;) {
        const std::size_t i = next.fetch_add(1);
        if (i >= n) return;
        try {
          fn(i);
        } catch (...) {
          std::lock_guard<std::mutex> lock(error_mutex);
          if (!first_error) first_error = std::current_exception();
          return;
        }
      }
    });
  }
  for (auto& t : pool) t.join();
  if (first_error) std::rethrow_exception(first_error);
}

std::string iso_timestamp() {
  const auto now = std::chrono::system_clock::now();
  const std::time_t tt = std::chrono::system_clock::to_time_t(now);
  char buf[32];
  std::tm tm_utc{};
  gmtime_r(&tt, &tm_utc);
  std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm_utc);
  return buf;
}

fs::path trial_dir(const fs::path& out_dir, std::size_t trial) {
  char buf[16];
  std::snprintf(buf, sizeof(buf), "trial_%03zu", trial);
  return out_dir / buf;
}

void write_manifest(const fs::path& out_dir, const std::string& command,
                    const ExperimentConfig* cfg,
                    const std::vector<fs::path>& artifacts) {
  nlohmann::json j;
  j["command"] = command;
  j["tool_version"] = kToolVersion;
  j["timestamp"] = iso_timestamp();
  if (cfg) {
    j["config_echo"] = cfg->raw.raw_text();
    nlohmann::json seeds = nlohmann::json::array();
    for (std::size_t t = 0; t < cfg->trials; ++t) {
      seeds.push_back(trial_seed(cfg->master_seed, t));
    }
    j["trial_seeds"] = seeds;
    j["master_seed"] = cfg->master_seed;
  }
  nlohmann::json arts = nlohmann::json::array();
  for (const fs::path& p : artifacts) arts.push_back(p.lexically_relative(out_dir).string());
  j["artifacts"] = arts;

  const fs::path path = versioned_path(out_dir / ("manifest_" + command + ".json"));
  std::ofstream os(path, std::ios::trunc);
  if (!os) throw IoError("manifest: cannot open " + path.string());
  os << j.dump(2) << '\n';
}

ParamSet load_victim(const fs::path& out_dir, std::size_t trial, const std::string& tag,
                     const nn::MlpArchitecture& expected_arch) {
  const fs::path path = latest_path(trial_dir(out_dir, trial) / (tag + ".ufck"));
  if (!fs::exists(path)) {
    throw IoError("checkpoint not found: " + path.string() +
                  " (run the producing command first)");
  }
  nn::Checkpoint ck = nn::load_checkpoint(path);
  if (ck.arch.layer_widths != expected_arch.layer_widths) {
    throw InternalConsistencyError("checkpoint architecture does not match config: " +
                                   path.string());
  }
  return std::move(ck.params);
}

struct PooledRow {
  std::size_t trial = 0;
  int target = 0;
  bool is_member = false;
  double score = 0.0;
};

void write_pooled_csv(const fs::path& path, const std::vector<PooledRow>& rows) {
  std::ofstream os(path, std::ios::trunc);
  if (!os) throw IoError("pooled csv: cannot open " + path.string());
  os << "trial,target,is_member,score\n";
  std::ostringstream buf;
  buf.precision(17);
  for (const PooledRow& r : rows) {
    buf << r.trial << ',' << r.target << ',' << (r.is_member ? 1 : 0) << ',' << r.score << '\n';
  }
  os << buf.str();
}

}  // namespace

std::vector<std::pair<double, bool>> load_pooled_scores(const fs::path& pooled_csv) {
  std::ifstream is(pooled_csv);
  if (!is) throw IoError("load_pooled_scores: cannot open " + pooled_csv.string());
  std::vector<std::pair<double, bool>> out;
  std::string line;
  std::getline(is, line);  // header
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    std::istringstream row(line);
    std::string trial, target, member, score;
    std::getline(row, trial, ',');
    std::getline(row, target, ',');
    std::getline(row, member, ',');
    std::getline(row, score, ',');
    out.emplace_back(std::stod(score), member == "1");
  }
  return out;
}

// ---------------------------------------------------------------------------
// Commands
// ---------------------------------------------------------------------------

CommandResult cmd_train(const ExperimentConfig& cfg, const fs::path& out_dir) {
  fs::create_directories(out_dir);

  // Echo the config so later commands (and report) are self-contained.
  {
    const fs::path echo = versioned_path(out_dir / "config.echo.cfg");
    std::ofstream os(echo, std::ios::trunc);
    if (!os) throw IoError("cmd_train: cannot open " + echo.string());
    os << cfg.raw.raw_text();
  }

  std::vector<std::vector<fs::path>> per_trial(cfg.trials);
  parallel_trials(cfg.trials, [&](std::size_t t) {
    const TrialContext ctx = build_trial(cfg, t);
    const fs::path dir = trial_dir(out_dir, t);
    fs::create_directories(dir);

    ParamSet params = nn::init_params(ctx.arch);
    nn::TrainConfig tc = cfg.train;
    tc.seed = hash_stream(ctx.seed, "train/shuffle");
    const nn::PhaseLog log = nn::train_sgd(params, ctx.arch, ctx.split.train_full, tc);

    const fs::path split_path = versioned_path(dir / "split.json");
    data::save_split_manifest(split_path, ctx.split);
    const fs::path ck_path = versioned_path(dir / "original.ufck");
    nn::save_checkpoint(ck_path, ctx.arch, params);
    const fs::path log_path = versioned_path(dir / "original_train.csv");
    unlearn::save_phase_log(log_path, log);

    per_trial[t] = {split_path, ck_path, log_path};
  });

  CommandResult result;
  result.artifacts.push_back(out_dir / "config.echo.cfg");
  for (auto& paths : per_trial) {
    result.artifacts.insert(result.artifacts.end(), paths.begin(), paths.end());
  }
  write_manifest(out_dir, "train", &cfg, result.artifacts);
  return result;
}

CommandResult cmd_unlearn(const ExperimentConfig& cfg, const fs::path& out_dir,
                          unlearn::Method method) {
  const std::string tag = unlearn::method_name(method);
  std::vector<std::vector<fs::path>> per_trial(cfg.trials);

  parallel_trials(cfg.trials, [&](std::size_t t) {
    const TrialContext ctx = build_trial(cfg, t);
    const ParamSet original = load_victim(out_dir, t, "original", ctx.arch);

    unlearn::UnlearnConfig uc = cfg.unlearn_for(method);
    uc.seed = hash_stream(ctx.seed, "unlearn/" + tag);
    const unlearn::UnlearnOutcome outcome =
        unlearn::run_unlearn(original, ctx.arch, ctx.split, uc);

    const fs::path dir = trial_dir(out_dir, t);
    const fs::path ck_path = versioned_path(dir / (tag + ".ufck"));
    nn::save_checkpoint(ck_path, ctx.arch, outcome.final_params);
    const fs::path log_path = versioned_path(dir / (tag + "_phases.csv"));
    unlearn::save_phase_log(log_path, outcome.phase_log);

    nlohmann::json meta;
    meta["method_tag"] = outcome.method_tag;
    meta["rte_seconds"] = outcome.rte_seconds;
    meta["epochs_phase1"] = uc.epochs_phase1;
    meta["epochs_phase2"] = uc.epochs_phase2;
    const fs::path meta_path = versioned_path(dir / (tag + ".meta.json"));
    std::ofstream os(meta_path, std::ios::trunc);
    if (!os) throw IoError("cmd_unlearn: cannot open " + meta_path.string());
    os << meta.dump(2) << '\n';

    per_trial[t] = {ck_path, log_path, meta_path};
  });

  CommandResult result;
  for (auto& paths : per_trial) {
    result.artifacts.insert(result.artifacts.end(), paths.begin(), paths.end());
  }
  write_manifest(out_dir, "unlearn_" + tag, &cfg, result.artifacts);
  return result;
}

// ---------------------------------------------------------------------------
// Attacks
// ---------------------------------------------------------------------------

namespace {

// The attacker's per-candidate sample sets for one class-wise trial:
// access-limited draws from D_u for the unlearned class and from the OOD
// pool for candidate OOD classes.
data::LabeledDataset candidate_access_set(const TrialContext& ctx, int candidate,
                                          std::size_t access, std::uint64_t seed) {
  const bool is_unlearned = candidate == ctx.unlearned_class;
  const data::LabeledDataset& source = is_unlearned ? ctx.split.unlearned : ctx.split.ood_pool;
  std::vector<std::size_t> rows;
  for (std::size_t i = 0; i < source.size(); ++i) {
    if (source.labels[i] == candidate) rows.push_back(i);
  }
  if (rows.empty()) {
    throw InternalConsistencyError("candidate class " + std::to_string(candidate) +
                                   " has no rows to attack with");
  }
  CounterRng rng(seed, "attack/access/" + std::to_string(candidate));
  for (std::size_t i = rows.size(); i > 1; --i) {
    std::swap(rows[i - 1], rows[rng.next_below(i)]);
  }
  rows.resize(std::min(access, rows.size()));
  return source.select(rows, "candidate_" + std::to_string(candidate));
}

data::LabeledDataset concat_datasets(const std::vector<const data::LabeledDataset*>& parts,
                                     std::size_t limit, std::string name) {
  std::size_t total = 0;
  for (const auto* p : parts) total += p->size();
  total = std::min(total, limit);

  data::LabeledDataset out;
  out.name = std::move(name);
  out.class_count = parts.empty() ? 0 : parts.front()->class_count;
  out.features = Tensor2D(total, parts.empty() ? 0 : parts.front()->dim());
  out.labels.reserve(total);

  std::size_t row = 0;
  for (const auto* p : parts) {
    for (std::size_t i = 0; i < p->size() && row < total; ++i, ++row) {
      for (std::size_t c = 0; c < p->dim(); ++c) out.features.at(row, c) = p->features.at(i, c);
      out.labels.push_back(p->labels[i]);
    }
  }
  return out;
}

struct ClassWiseTrialResult {
  attack::AttackReport report;
  std::vector<PooledRow> pooled;
};

ClassWiseTrialResult run_rea_class_trial(const ExperimentConfig& cfg, const TrialContext& ctx,
                                         const ParamSet& victim) {
  attack::ReaClassConfig rc = cfg.rea_class;
  rc.unlearn_label = ctx.unlearned_class;
  rc.seed = hash_stream(ctx.seed, "attack/rea_class");

  // The first rea_candidates OOD classes are inferred; any remaining OOD
  // classes form a reference pool shared by every candidate, which keeps the
  // anchor term identical across candidates.
  const std::size_t n_cand = std::min(cfg.rea_candidates, ctx.ood_classes.size());
  std::vector<int> candidates{ctx.unlearned_class};
  for (std::size_t i = 0; i < n_cand; ++i) candidates.push_back(ctx.ood_classes[i]);
  const std::vector<int> ref_classes(ctx.ood_classes.begin() + static_cast<std::ptrdiff_t>(n_cand),
                                     ctx.ood_classes.end());

  std::vector<data::LabeledDataset> access;
  access.reserve(candidates.size());
  for (int c : candidates) {
    access.push_back(candidate_access_set(ctx, c, cfg.rea_access, rc.seed));
  }

  data::LabeledDataset shared_reference;
  if (!ref_classes.empty()) {
    std::vector<std::size_t> rows;
    for (std::size_t i = 0; i < ctx.split.ood_pool.size(); ++i) {
      for (int c : ref_classes) {
        if (ctx.split.ood_pool.labels[i] == c) rows.push_back(i);
      }
    }
    CounterRng rng(rc.seed, "attack/refpool");
    for (std::size_t i = rows.size(); i > 1; --i) {
      std::swap(rows[i - 1], rows[rng.next_below(i)]);
    }
    rows.resize(std::min(rows.size(), static_cast<std::size_t>(
                                          rc.reference_ratio *
                                          static_cast<double>(cfg.rea_access))));
    shared_reference = ctx.split.ood_pool.select(rows, "reference_pool");
  }

  ClassWiseTrialResult out;
  out.report.attack_tag = "rea_class";
  for (std::size_t i = 0; i < candidates.size(); ++i) {
    data::LabeledDataset reference;
    if (!ref_classes.empty()) {
      reference = shared_reference;
    } else {
      // No reference-only classes configured: fall back to the other
      // candidates' access sets.
      std::vector<const data::LabeledDataset*> others;
      for (std::size_t j = 0; j < candidates.size(); ++j) {
        if (j != i) others.push_back(&access[j]);
      }
      const auto ref_limit = static_cast<std::size_t>(
          rc.reference_ratio * static_cast<double>(access[i].size()));
      reference = concat_datasets(others, ref_limit,
                                  "reference_" + std::to_string(candidates[i]));
    }

    const attack::ReaClassResult res =
        attack::rea_classwise(victim, ctx.arch, access[i], reference, rc);

    out.report.per_target_scores.emplace_back(candidates[i], res.confidence);
    for (auto cell : res.runs) {
      cell.target = candidates[i];
      out.report.resonance_indices.push_back(cell);
    }
    out.pooled.push_back(PooledRow{ctx.index, candidates[i],
                                   candidates[i] == ctx.unlearned_class, res.confidence});
  }
  return out;
}

// Population for sample-wise attacks: the attacker's mixed dataset in the
// fixed order retained | unlearned | test. Returns the first unlearned row
// and first test row offsets so callers can recover membership roles.
data::LabeledDataset sample_wise_population(const TrialContext& ctx,
                                            std::size_t& unlearned_begin,
                                            std::size_t& test_begin) {
  const auto& s = ctx.split;
  unlearned_begin = s.retained.size();
  test_begin = s.retained.size() + s.unlearned.size();
  return concat_datasets({&s.retained, &s.unlearned, &s.test},
                         s.retained.size() + s.unlearned.size() + s.test.size(),
                         "population");
}

attack::ShadowEnsemble sample_wise_shadows(const ExperimentConfig& cfg,
                                           const TrialContext& ctx,
                                           const data::LabeledDataset& population) {
  nn::TrainConfig tc = cfg.train;
  tc.seed = 0;  // per-shadow streams are derived inside the ensemble builder
  return attack::train_shadow_ensemble(ctx.arch, population, tc, cfg.shadow_count,
                                       hash_stream(ctx.seed, "attack/shadows"));
}

// Shadows that repeat the victim's unlearning pipeline on their own data;
// the MIA-UP prerequisite.
attack::ShadowEnsemble unlearned_shadow_ensemble(const ExperimentConfig& cfg,
                                                 const TrialContext& ctx,
                                                 const data::LabeledDataset& population,
                                                 unlearn::Method method) {
  const std::uint64_t seed = hash_stream(ctx.seed, "attack/up_shadows");
  attack::ShadowEnsemble ens;
  ens.shadow_count = cfg.shadow_count;
  ens.seed = seed;

  for (std::size_t s = 0; s < cfg.shadow_count; ++s) {
    const std::string tag = "shadow/" + std::to_string(s);
    CounterRng mask_rng(seed, tag + "/mask");
    std::vector<std::uint8_t> train_mask(population.size());
    std::vector<std::size_t> in_rows;
    for (std::size_t i = 0; i < population.size(); ++i) {
      train_mask[i] = mask_rng.next_unit() < 0.5 ? 1 : 0;
      if (train_mask[i]) in_rows.push_back(i);
    }
    if (in_rows.empty()) in_rows.push_back(0), train_mask[0] = 1;

    data::LabeledDataset shadow_train = population.select(in_rows, tag);
    data::SplitSpec spec;
    spec.mode = data::SplitMode::kSampleWise;
    spec.unlearn_fraction = cfg.unlearn_fraction;
    spec.seed = hash_stream(seed, tag + "/split");
    data::UnlearnSplit split = data::split_for_unlearning(
        shadow_train, data::LabeledDataset{Tensor2D(0, population.dim()), {},
                                           population.class_count, "none"},
        spec);

    nn::MlpArchitecture arch = ctx.arch;
    arch.seed = hash_stream(seed, tag + "/init");
    ParamSet params = nn::init_params(arch);
    nn::TrainConfig tc = cfg.train;
    tc.seed = hash_stream(seed, tag + "/shuffle");
    nn::train_sgd(params, ctx.arch, split.train_full, tc);

    unlearn::UnlearnConfig uc = cfg.unlearn_for(method);
    uc.seed = hash_stream(seed, tag + "/unlearn");
    unlearn::UnlearnOutcome outcome = unlearn::run_unlearn(params, ctx.arch, split, uc);

    // Unlearned rows, mapped back to population indices.
    std::vector<std::uint8_t> unlearn_mask(population.size(), 0);
    for (std::size_t local : split.unlearned_indices) {
      unlearn_mask[in_rows[local]] = 1;
    }
    ens.shadow_params.push_back(std::move(outcome.final_params));
    ens.train_masks.push_back(std::move(train_mask));
    ens.unlearn_masks.push_back(std::move(unlearn_mask));
  }
  return ens;
}

struct SampleWiseTrialResult {
  attack::AttackReport report;
  std::vector<PooledRow> pooled;
};

SampleWiseTrialResult run_sample_wise_trial(const ExperimentConfig& cfg,
                                            const TrialContext& ctx, const ParamSet& victim,
                                            const std::string& attack_name,
                                            unlearn::Method victim_method) {
  std::size_t unlearned_begin = 0, test_begin = 0;
  const data::LabeledDataset population =
      sample_wise_population(ctx, unlearned_begin, test_begin);

  SampleWiseTrialResult out;
  if (attack_name == "lira") {
    const attack::ShadowEnsemble ens = sample_wise_shadows(cfg, ctx, population);
    const auto scores = attack::mia_lira_scores(ens, ctx.arch, victim, population);
    out.report.attack_tag = "lira";
    for (const auto& s : scores) {
      if (s.degenerate) out.report.degenerate_targets.push_back(s.target);
      else out.report.per_target_scores.emplace_back(s.target, s.score);
    }
  } else if (attack_name == "rea_sample") {
    const attack::ShadowEnsemble ens = sample_wise_shadows(cfg, ctx, population);
    attack::ReaSampleConfig rs = cfg.rea_sample;
    rs.pseudo_retain_size = static_cast<std::size_t>(
        cfg.pseudo_retain_fraction * static_cast<double>(population.size()));
    rs.seed = hash_stream(ctx.seed, "attack/rea_sample");
    out.report = attack::rea_samplewise(victim, ctx.arch, population, rs, ens);
  } else if (attack_name == "up") {
    const attack::ShadowEnsemble ens =
        unlearned_shadow_ensemble(cfg, ctx, population, victim_method);
    out.report = attack::mia_up(ens, ctx.arch, victim, population);
  } else {
    throw InvalidInputError("unknown sample-wise attack '" + attack_name + "'");
  }

  // Pool only the rows whose membership the attack is judged on: unlearned
  // rows are members, test rows non-members, retained rows are distractors.
  for (const auto& [target, score] : out.report.per_target_scores) {
    const auto idx = static_cast<std::size_t>(target);
    if (idx < unlearned_begin) continue;
    out.pooled.push_back(PooledRow{ctx.index, target, idx < test_begin, score});
  }
  return out;
}

}  // namespace

CommandResult cmd_attack(const ExperimentConfig& cfg, const fs::path& out_dir,
                         const std::string& attack_name, const std::string& victim_tag) {
  const bool class_wise = cfg.mode == data::SplitMode::kClassWise;
  if (class_wise && attack_name != "rea_class") {
    throw InvalidInputError("class-wise runs support attack 'rea_class', got '" +
                            attack_name + "'");
  }
  if (!class_wise && attack_name == "rea_class") {
    throw InvalidInputError("attack 'rea_class' needs a class-wise run");
  }
  const unlearn::Method victim_method = unlearn::method_from_name(victim_tag);

  std::vector<std::vector<fs::path>> per_trial(cfg.trials);
  std::vector<std::vector<PooledRow>> pooled(cfg.trials);

  parallel_trials(cfg.trials, [&](std::size_t t) {
    const TrialContext ctx = build_trial(cfg, t);
    const ParamSet victim = load_victim(out_dir, t, victim_tag, ctx.arch);

    attack::AttackReport report;
    if (class_wise) {
      ClassWiseTrialResult res = run_rea_class_trial(cfg, ctx, victim);
      report = std::move(res.report);
      pooled[t] = std::move(res.pooled);
    } else {
      SampleWiseTrialResult res =
          run_sample_wise_trial(cfg, ctx, victim, attack_name, victim_method);
      report = std::move(res.report);
      pooled[t] = std::move(res.pooled);
    }

    const fs::path dir = trial_dir(out_dir, t);
    fs::create_directories(dir);
    const std::string base = "attack_" + attack_name + "_" + victim_tag;
    const fs::path json_path = versioned_path(dir / (base + ".json"));
    attack::save_attack_report_json(json_path, report);
    const fs::path csv_path = versioned_path(dir / (base + ".csv"));
    attack::save_attack_report_csv(csv_path, report);
    per_trial[t] = {json_path, csv_path};
  });

  std::vector<PooledRow> all_rows;
  for (auto& rows : pooled) {
    all_rows.insert(all_rows.end(), rows.begin(), rows.end());
  }
  const fs::path pooled_path =
      versioned_path(out_dir / ("pooled_" + attack_name + "_" + victim_tag + ".csv"));
  write_pooled_csv(pooled_path, all_rows);

  CommandResult result;
  for (auto& paths : per_trial) {
    result.artifacts.insert(result.artifacts.end(), paths.begin(), paths.end());
  }
  result.artifacts.push_back(pooled_path);
  write_manifest(out_dir, "attack_" + attack_name + "_" + victim_tag, &cfg, result.artifacts);
  return result;
}

// ---------------------------------------------------------------------------
// Report
// ---------------------------------------------------------------------------

CommandResult cmd_report(const fs::path& out_dir) {
  const fs::path report_dir = out_dir / "report";
  fs::create_directories(report_dir);

  std::vector<std::string> gaps;
  const fs::path echo = latest_path(out_dir / "config.echo.cfg");
  if (!fs::exists(echo)) {
    // Nothing to report on; still produce the explicit empty report.
    const fs::path summary_path = versioned_path(report_dir / "summary.txt");
    std::ofstream os(summary_path, std::ios::trunc);
    os << "no artifacts found in " << out_dir.string() << "\n";
    CommandResult result;
    result.artifacts.push_back(summary_path);
    write_manifest(out_dir, "report", nullptr, result.artifacts);
    return result;
  }
  const ExperimentConfig cfg = load_experiment_config(echo);
  const bool class_wise = cfg.mode == data::SplitMode::kClassWise;

  // Methods present = meta.json files in the first trial directory.
  std::vector<std::string> methods;
  const fs::path first_dir = trial_dir(out_dir, 0);
  if (fs::exists(first_dir)) {
    for (const auto& entry : fs::directory_iterator(first_dir)) {
      const std::string name = entry.path().filename().string();
      const std::string suffix = ".meta.json";
      if (name.size() > suffix.size() &&
          name.compare(name.size() - suffix.size(), suffix.size(), suffix) == 0 &&
          name.find(".v") == std::string::npos) {
        methods.push_back(name.substr(0, name.size() - suffix.size()));
      }
    }
  }
  std::sort(methods.begin(), methods.end());

  const std::string primary_attack = class_wise ? "rea_class" : "rea_sample";

  // Pooled attack stats for the mia_efficacy column, per method.
  std::map<std::string, metrics::RocCurve> pooled_curves;
  for (const std::string& method : methods) {
    const fs::path pooled =
        latest_path(out_dir / ("pooled_" + primary_attack + "_" + method + ".csv"));
    if (!fs::exists(pooled)) {
      gaps.push_back("no pooled " + primary_attack + " scores for " + method);
      continue;
    }
    pooled_curves[method] = metrics::roc_curve(load_pooled_scores(pooled));
  }

  // Retrain reference metrics per trial, for ToW.
  std::map<std::size_t, std::array<double, 3>> retrain_metrics;

  struct Row {
    std::string method;
    std::size_t trial;
    metrics::EvalReport report;
  };
  std::vector<Row> rows;

  for (const std::string& method : methods) {
    for (std::size_t t = 0; t < cfg.trials; ++t) {
      const fs::path ck = latest_path(trial_dir(out_dir, t) / (method + ".ufck"));
      if (!fs::exists(ck)) {
        gaps.push_back(method + " checkpoint missing for trial " + std::to_string(t));
        continue;
      }
      const TrialContext ctx = build_trial(cfg, t);
      const ParamSet params = load_victim(out_dir, t, method, ctx.arch);

      metrics::EvalReport er;
      er.ta = metrics::accuracy_on(params, ctx.arch, ctx.split.test);
      er.ua = metrics::accuracy_on(params, ctx.arch, ctx.split.unlearned);
      er.ra = metrics::accuracy_on(params, ctx.arch, ctx.split.retained);

      if (class_wise) {
        // Matched non-training data: test rows of the unlearned class.
        std::vector<std::size_t> match;
        for (std::size_t i = 0; i < ctx.split.test.size(); ++i) {
          if (ctx.split.test.labels[i] == ctx.unlearned_class) match.push_back(i);
        }
        if (!match.empty()) {
          er.residual = metrics::residual(params, ctx.arch, ctx.split.unlearned,
                                          ctx.split.test.select(match, "match"),
                                          cfg.residual_metric);
        }
        if (cfg.report_representation) {
          er.representation = metrics::representation_metrics(
              params, ctx.arch, ctx.split.test, ctx.arch.layer_count() - 2,
              ctx.unlearned_class);
        }
      } else {
        er.residual = metrics::residual(params, ctx.arch, ctx.split.unlearned,
                                        ctx.split.test, cfg.residual_metric);
      }

      const fs::path meta_path = latest_path(trial_dir(out_dir, t) / (method + ".meta.json"));
      if (fs::exists(meta_path)) {
        std::ifstream ms(meta_path);
        nlohmann::json meta;
        ms >> meta;
        er.rte_seconds = meta.value("rte_seconds", 0.0);
      }

      if (method == "retrain") {
        retrain_metrics[t] = {er.ta / 100.0, er.ua / 100.0, er.ra / 100.0};
      }
      rows.push_back(Row{method, t, er});
    }
  }

  // Second pass: ToW against the retrain reference, and MIA efficacy from
  // the pooled curve (one pooled sweep per method).
  for (Row& row : rows) {
    const auto ref = retrain_metrics.find(row.trial);
    if (ref != retrain_metrics.end()) {
      row.report.tow = metrics::tow({row.report.ta / 100.0, row.report.ua / 100.0,
                                     row.report.ra / 100.0},
                                    ref->second);
    } else {
      gaps.push_back("no retrain reference for trial " + std::to_string(row.trial) +
                     "; tow left at 0");
    }
    const auto curve = pooled_curves.find(row.method);
    if (curve != pooled_curves.end()) {
      row.report.mia_efficacy = metrics::tpr_at_fpr(curve->second, 0.1);
    }
  }

  std::stable_sort(rows.begin(), rows.end(), [](const Row& a, const Row& b) {
    return a.method != b.method ? a.method < b.method : a.trial < b.trial;
  });

  const fs::path results_path = versioned_path(report_dir / "results.csv");
  {
    std::ofstream os(results_path, std::ios::trunc);
    if (!os) throw IoError("cmd_report: cannot open " + results_path.string());
    os << metrics::eval_report_csv_header() << '\n';
    for (const Row& row : rows) {
      os << metrics::eval_report_csv_row(row.method, row.trial, row.report) << '\n';
    }
  }

  // Wall-clock lives in its own artifact so results.csv stays bit-stable
  // across reruns of an identical configuration.
  const fs::path timings_path = versioned_path(report_dir / "timings.csv");
  {
    std::ofstream os(timings_path, std::ios::trunc);
    if (!os) throw IoError("cmd_report: cannot open " + timings_path.string());
    os << "method,trial,rte_seconds\n";
    std::ostringstream buf;
    buf.precision(17);
    for (const Row& row : rows) {
      buf << row.method << ',' << row.trial << ',' << row.report.rte_seconds << '\n';
    }
    os << buf.str();
  }

  CommandResult result;
  result.artifacts.push_back(results_path);
  result.artifacts.push_back(timings_path);

  // Full ROC artifacts + summary for every pooled attack file present.
  const fs::path summary_path = versioned_path(report_dir / "summary.txt");
  std::ofstream summary(summary_path, std::ios::trunc);
  summary << "unlearn-forge report (" << (class_wise ? "class-wise" : "sample-wise")
          << ", " << cfg.trials << " trials)\n\n";
  summary.precision(4);
  summary << std::fixed;

  for (const auto& entry : fs::directory_iterator(out_dir)) {
    const std::string name = entry.path().filename().string();
    if (name.rfind("pooled_", 0) != 0 || entry.path().extension() != ".csv" ||
        name.find(".v") != std::string::npos) {
      continue;
    }
    const auto scores = load_pooled_scores(latest_path(entry.path()));
    if (scores.empty()) continue;
    const metrics::RocCurve curve = metrics::roc_curve(scores);
    const auto [best_acc, best_tau] = metrics::best_balanced_accuracy(scores);

    const std::string stem = entry.path().stem().string();  // pooled_<attack>_<method>
    const fs::path roc_path = versioned_path(report_dir / ("roc_" + stem.substr(7) + ".json"));
    metrics::save_roc_json(roc_path, curve);
    result.artifacts.push_back(roc_path);

    summary << stem.substr(7) << ": auc=" << curve.auc
            << " tpr@0.1fpr=" << metrics::tpr_at_fpr(curve, 0.1)
            << "% balanced_acc=" << best_acc << "% (tau=" << best_tau << ")";

    if (stem.rfind("pooled_rea_class_", 0) == 0) {
      // Resonance difference: mean per-lr iteration gap between candidate
      // OOD classes and the unlearned class, recovered from the aggregated
      // confidences.
      double pos_sum = 0.0, neg_sum = 0.0;
      std::size_t pos_n = 0, neg_n = 0;
      for (const auto& [score, member] : scores) {
        (member ? pos_sum : neg_sum) += score;
        (member ? pos_n : neg_n) += 1;
      }
      if (pos_n > 0 && neg_n > 0) {
        const double diff = static_cast<double>(cfg.rea_class.idx_max) *
                            (pos_sum / static_cast<double>(pos_n) -
                             neg_sum / static_cast<double>(neg_n));
        summary << " resonance_diff=" << diff;
      }
    }
    summary << '\n';
  }

  summary << "\nresults: " << rows.size() << " rows -> " << results_path.filename().string()
          << "\n";
  if (rows.empty()) summary << "no artifacts: no method checkpoints were found\n";
  if (!gaps.empty()) {
    summary << "\ngaps:\n";
    for (const std::string& g : gaps) summary << "  - " << g << '\n';
  }
  summary.close();
  result.artifacts.push_back(summary_path);

  write_manifest(out_dir, "report", &cfg, result.artifacts);
  return result;
}

// ---------------------------------------------------------------------------
// Landscape
// ---------------------------------------------------------------------------

CommandResult cmd_landscape(const ExperimentConfig& cfg, const fs::path& out_dir,
                            const std::string& victim_tag, std::size_t trial,
                            double extent, std::size_t resolution) {
  const TrialContext ctx = build_trial(cfg, trial);
  const ParamSet victim = load_victim(out_dir, trial, victim_tag, ctx.arch);

  const fs::path dir =
      out_dir / ("landscape_" + victim_tag + "_trial" + std::to_string(trial));
  fs::create_directories(dir);

  const landscape::PlaneBasis basis = landscape::make_plane(
      victim, hash_stream(ctx.seed, "landscape"), extent, resolution);

  CommandResult result;
  const auto emit = [&](const data::LabeledDataset& dataset, const std::string& name) {
    if (dataset.size() == 0) return;
    const landscape::LossGrid grid = landscape::loss_grid(basis, ctx.arch, dataset);
    const fs::path csv = versioned_path(dir / ("grid_" + name + ".csv"));
    const fs::path json = versioned_path(dir / ("grid_" + name + ".json"));
    landscape::save_loss_grid(csv, json, grid, basis, name);
    result.artifacts.push_back(csv);
    result.artifacts.push_back(json);
  };
  emit(ctx.split.unlearned, "unlearned");
  emit(ctx.split.test, "test");
  emit(ctx.split.ood_pool, "ood");

  // Guided fine-tuning trajectory: a short replay on retained data,
  // projected onto the plane.
  std::vector<ParamSet> checkpoints{victim};
  ParamSet theta = victim;
  nn::TrainConfig tc;
  tc.sgd = cfg.unlearn_for(unlearn::Method::kFt).sgd_phase1;
  tc.epochs = 1;
  tc.batch_size = cfg.train.batch_size;
  for (std::size_t e = 0; e < 5; ++e) {
    tc.seed = hash_stream(ctx.seed, "landscape/traj/" + std::to_string(e));
    nn::train_sgd(theta, ctx.arch, ctx.split.retained, tc);
    checkpoints.push_back(theta);
  }
  const auto trajectory = landscape::project_trajectory(checkpoints, basis);
  const fs::path traj_path = versioned_path(dir / "trajectory.csv");
  landscape::save_trajectory(traj_path, trajectory);
  result.artifacts.push_back(traj_path);

  write_manifest(out_dir, "landscape_" + victim_tag, &cfg, result.artifacts);
  return result;
}

}  // namespace uforge::harness
