#include <benchmark/benchmark.h>

#include "uforge/attacks.hpp"
#include "uforge/metrics.hpp"
#include "uforge/rng.hpp"
#include "uforge/train.hpp"

using namespace uforge;

namespace {

nn::MlpArchitecture bench_arch() {
  nn::MlpArchitecture arch;
  arch.layer_widths = {16, 32, 16, 8};
  arch.activation = nn::Activation::kRelu;
  arch.seed = 1;
  return arch;
}

data::LabeledDataset bench_data(std::size_t per_class) {
  return data::make_synthetic_gaussian(8, 16, per_class, 0.95, 11);
}

}  // namespace

static void BM_ForwardBackward(benchmark::State& state) {
  const auto arch = bench_arch();
  const ParamSet params = nn::init_params(arch);
  const auto data = bench_data(8);  // one 64-row batch
  for (auto _ : state) {
    const nn::ForwardTrace trace = nn::forward(params, arch, data.features);
    const auto ce = nn::cross_entropy(trace.logits(), data.labels);
    benchmark::DoNotOptimize(nn::backward(params, arch, trace, ce.grad_logits));
  }
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(data.size()));
}
BENCHMARK(BM_ForwardBackward);

static void BM_TrainEpoch(benchmark::State& state) {
  const auto arch = bench_arch();
  const auto data = bench_data(200);  // 1600 rows, the desk-scale default
  for (auto _ : state) {
    state.PauseTiming();
    ParamSet params = nn::init_params(arch);
    CounterRng shuffle(7, "bench/shuffle");
    nn::SgdState sgd_state;
    nn::SgdConfig sgd;
    sgd.learning_rate = 0.05;
    sgd.momentum = 0.9;
    state.ResumeTiming();
    benchmark::DoNotOptimize(
        nn::sgd_epoch(params, arch, data, sgd, 64, shuffle, sgd_state));
  }
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(data.size()));
}
BENCHMARK(BM_TrainEpoch);

static void BM_ResonanceIndex(benchmark::State& state) {
  const auto arch = bench_arch();
  const auto data = bench_data(40);
  ParamSet params = nn::init_params(arch);
  nn::TrainConfig tc;
  tc.sgd.learning_rate = 0.05;
  tc.sgd.momentum = 0.9;
  tc.epochs = 10;
  tc.batch_size = 64;
  tc.seed = 3;
  nn::train_sgd(params, arch, data, tc);

  std::vector<std::size_t> inferred_rows, reference_rows;
  for (std::size_t i = 0; i < data.size(); ++i) {
    if (data.labels[i] == 0) inferred_rows.push_back(i);
    if (data.labels[i] == 1 || data.labels[i] == 2) reference_rows.push_back(i);
  }
  const auto inferred = data.select(inferred_rows, "inferred");
  const auto reference = data.select(reference_rows, "reference");

  attack::ReaClassConfig cfg;
  cfg.unlearn_label = 3;  // a slot the inferred class does not own
  cfg.idx_max = 25;
  for (auto _ : state) {
    benchmark::DoNotOptimize(
        attack::resonance_index(params, arch, inferred, reference, 0.005, cfg));
  }
}
BENCHMARK(BM_ResonanceIndex);

static void BM_RocCurve(benchmark::State& state) {
  CounterRng rng(5, "bench/roc");
  std::vector<std::pair<double, bool>> scored;
  const auto n = static_cast<std::size_t>(state.range(0));
  scored.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    scored.emplace_back(rng.next_unit(), rng.next_unit() < 0.5);
  }
  for (auto _ : state) {
    benchmark::DoNotOptimize(metrics::roc_curve(scored));
  }
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(n));
}
BENCHMARK(BM_RocCurve)->Arg(1000)->Arg(10000);

BENCHMARK_MAIN();
