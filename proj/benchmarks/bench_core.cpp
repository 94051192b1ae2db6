#include <benchmark/benchmark.h>

#include "doseins/design.hpp"
#include "doseins/simulation.hpp"
#include "doseins/skeleton.hpp"
#include "doseins/trial.hpp"

using namespace doseins;

namespace {

const DoseGrid kGrid{{300, 900, 1500, 2400}, 2400, std::nullopt};
const DoseData kData{{3, 0, 0}, {3, 0, 1}, {6, 1, 2}, {6, 3, 3}};

void BM_BoinBoundaries(benchmark::State& st) {
  const ToxicityTargets t{0.3, 0.18, 0.42};
  for (auto _ : st) benchmark::DoNotOptimize(boin_boundaries(t));
}
BENCHMARK(BM_BoinBoundaries);

void BM_InformativeBoundaries(benchmark::State& st) {
  const ToxicityTargets t{0.3, 0.18, 0.42};
  const auto prior = iboin_hypothesis_prior({4, 0.25}, t);
  int n = 1;
  for (auto _ : st) {
    benchmark::DoNotOptimize(iboin_boundaries(prior, n, t));
    n = n % 12 + 1;
  }
}
BENCHMARK(BM_InformativeBoundaries);

void BM_BlrmFit(benchmark::State& st) {
  auto prior = BlrmPrior::for_target(0.3);
  prior.grid_points = static_cast<int>(st.range(0));
  for (auto _ : st) benchmark::DoNotOptimize(toxicity_skeleton(fit_blrm(kGrid, kData, prior), 2100));
}
BENCHMARK(BM_BlrmFit)->Arg(101)->Arg(201)->Arg(401)->Unit(benchmark::kMillisecond);

void BM_FpSelection(benchmark::State& st) {
  for (auto _ : st) benchmark::DoNotOptimize(select_fp_powers(kGrid.doses, kData, 1440));
}
BENCHMARK(BM_FpSelection)->Unit(benchmark::kMicrosecond);

void BM_Step(benchmark::State& st) {
  const auto v = static_cast<Variant>(st.range(0));
  const auto cfg = EngineConfig::defaults(v);
  auto s = resume_trial(kGrid, kData, 3, cfg, RngStream(1, 1));
  s = insert_dose(s, 2100, cfg, true).state;
  for (auto _ : st) benchmark::DoNotOptimize(step(s, {3, 1, 1}, cfg));
}
BENCHMARK(BM_Step)
    ->Arg(static_cast<int>(Variant::kBoin))
    ->Arg(static_cast<int>(Variant::kHybridIboin))
    ->Arg(static_cast<int>(Variant::kHybridIboinEt));

void BM_RunTrial(benchmark::State& st) {
  BatchSpec spec;
  spec.scenario = st.range(1) ? "random" : "T2";
  spec.engine = EngineConfig::defaults(static_cast<Variant>(st.range(0)));
  int r = 0;
  for (auto _ : st) benchmark::DoNotOptimize(run_trial(spec, r++));
}
BENCHMARK(BM_RunTrial)
    ->ArgsProduct({{static_cast<int>(Variant::kBoin), static_cast<int>(Variant::kHybridIboin),
                    static_cast<int>(Variant::kHybridIboinEt)},
                   {0, 1}})
    ->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
