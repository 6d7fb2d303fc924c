#include <benchmark/benchmark.h>

#include "leda/group_maps.hpp"
#include "leda/model.hpp"
#include "leda/synth.hpp"
#include "oracles.hpp"

using namespace leda;

namespace {

DeformationField sample_field(int size) {
  SynthConfig cfg;
  cfg.grid = {size, size};
  cfg.seed = 4;
  return SyntheticFamily(cfg).pair(0).fwd;
}

void BM_Compose(benchmark::State& st) {
  const DeformationField f = sample_field(static_cast<int>(st.range(0)));
  for (auto _ : st) benchmark::DoNotOptimize(compose(f, f));
  st.SetItemsProcessed(st.iterations() * st.range(0) * st.range(0));
}
BENCHMARK(BM_Compose)->Arg(32)->Arg(64)->Arg(128);

void BM_ExpScalingSquaring(benchmark::State& st) {
  const VectorField v = testing::smooth_field({32, 32}, 2.0, 1);
  for (auto _ : st) benchmark::DoNotOptimize(exp_scaling_squaring(v));
}
BENCHMARK(BM_ExpScalingSquaring);

void BM_ExpOracle(benchmark::State& st) {
  const VectorField v = testing::smooth_field({32, 32}, 2.0, 1);
  for (auto _ : st) benchmark::DoNotOptimize(exp_ode_oracle(v, 1.0));
}
BENCHMARK(BM_ExpOracle)->Unit(benchmark::kMillisecond);

void BM_IssLog(benchmark::State& st) {
  const DeformationField f = sample_field(32);
  for (auto _ : st) benchmark::DoNotOptimize(iss_log(f));
}
BENCHMARK(BM_IssLog)->Unit(benchmark::kMillisecond);

void BM_Encode(benchmark::State& st) {
  const LedaModel m({32, 32}, LedaConfig{});
  const DeformationField f = sample_field(32);
  for (auto _ : st) benchmark::DoNotOptimize(m.encode(f));
}
BENCHMARK(BM_Encode)->Unit(benchmark::kMicrosecond);

void BM_InferLog(benchmark::State& st) {
  const LedaModel m({32, 32}, LedaConfig{});
  const DeformationField f = sample_field(32);
  for (auto _ : st) benchmark::DoNotOptimize(m.infer_log(f));
}
BENCHMARK(BM_InferLog)->Unit(benchmark::kMicrosecond);

void BM_TrainStep(benchmark::State& st) {
  const LedaModel m({32, 32}, LedaConfig{});
  SynthConfig cfg;
  cfg.seed = 5;
  const SyntheticFamily fam(cfg);
  std::vector<FieldPair> batch;
  for (int i = 0; i < 8; ++i) {
    const SyntheticPair p = fam.pair(i);
    batch.push_back({p.fwd, p.bwd});
  }
  std::vector<ad::Tensor> grads;
  for (auto _ : st) benchmark::DoNotOptimize(loss_and_gradient(m, batch, &grads));
}
BENCHMARK(BM_TrainStep)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
