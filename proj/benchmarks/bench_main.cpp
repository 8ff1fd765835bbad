#include <benchmark/benchmark.h>

#include "dpvae/datagen.hpp"
#include "dpvae/metrics.hpp"
#include "dpvae/objectives.hpp"

using namespace dpvae;

namespace {

VaeModel bench_model(PriorMode mode) {
  Rng rng(1);
  return make_vae(VaeArchitecture{}, mode, rng);
}

void BM_TrainingStep(benchmark::State& state) {
  const auto mode = state.range(0) == 0 ? PriorMode::standard : PriorMode::decoupled;
  VaeModel m = bench_model(mode);
  const ObjectiveConfig cfg = ObjectiveConfig::defaults(ObjectiveKind::beta_h, mode);
  Rng rng(2);
  const Matrix x = two_moons(100, 0.05, 3).points;
  const ObjectiveNoise noise = draw_objective_noise(cfg, 100, 2, rng);
  for (auto _ : state) {
    Tape tape;
    LossTerms l = evaluate_objective(tape, m, cfg, x, noise, {});
    tape.backward(l.total);
    m.params.zero_grad();
    tape.accumulate_gradients(m.params);
    benchmark::DoNotOptimize(m.params.entry(0).grad.data());
  }
}
BENCHMARK(BM_TrainingStep)->Arg(0)->Arg(1)->Unit(benchmark::kMicrosecond);

void BM_FlowForward(benchmark::State& state) {
  const VaeModel m = bench_model(PriorMode::decoupled);
  Rng rng(4);
  const Matrix z = standard_normal(rng, state.range(0), 2);
  for (auto _ : state) benchmark::DoNotOptimize(m.prior->forward_values(m.params, z));
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_FlowForward)->Arg(100)->Arg(5000)->Unit(benchmark::kMicrosecond);

void BM_AggregateDensity(benchmark::State& state) {
  Rng rng(5);
  const AggregatePosterior agg{standard_normal(rng, state.range(0), 2), 0.1 * standard_normal(rng, state.range(0), 2)};
  const Matrix z = standard_normal(rng, 1000, 2);
  for (auto _ : state) benchmark::DoNotOptimize(aggregate_posterior_log_density(agg, z));
  state.SetItemsProcessed(state.iterations() * 1000 * state.range(0));
}
BENCHMARK(BM_AggregateDensity)->Arg(512)->Arg(2048)->Unit(benchmark::kMillisecond);

void BM_GradCheck(benchmark::State& state) {
  VaeArchitecture arch;
  arch.hidden = {7, 5};
  arch.flow.width = 6;
  Rng rng(6);
  VaeModel m = make_vae(arch, PriorMode::decoupled, rng);
  const ObjectiveConfig cfg = ObjectiveConfig::defaults(ObjectiveKind::vanilla, PriorMode::decoupled);
  const Matrix x = standard_normal(rng, 8, 2);
  const ObjectiveNoise noise = draw_objective_noise(cfg, 8, 2, rng);
  for (auto _ : state) {
    benchmark::DoNotOptimize(
        grad_check([&](Tape& t) { return evaluate_objective(t, m, cfg, x, noise, {}).total; }, m.params));
  }
}
BENCHMARK(BM_GradCheck)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
