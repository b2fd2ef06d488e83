#include <benchmark/benchmark.h>

#include "figsbd/atti.hpp"
#include "figsbd/distill.hpp"
#include "figsbd/evalharness.hpp"
#include "figsbd/figs.hpp"

namespace {

using namespace figsbd;

const eval::SynthData& synth() {
  static const auto data = eval::synth_generate({});
  return data;
}

const FigsModel& bird_model() {
  static const auto model =
      distill::distill(synth().train, BinarizerMode::kInterpretable, distill::kBirdDefaults);
  return model;
}

void BM_FitRules(benchmark::State& state) {
  const auto& train = synth().train;
  const Matrix x = distill::student_inputs(bird_model(), train.concept_preds);
  HyperParams p = distill::kBirdDefaults;
  p.max_rules = static_cast<int>(state.range(0));
  for (auto _ : state) benchmark::DoNotOptimize(figs::fit(x, train.logits, p));
}
BENCHMARK(BM_FitRules)->Arg(25)->Arg(100)->Arg(200)->Unit(benchmark::kMillisecond);

void BM_PredictBatch(benchmark::State& state) {
  const Matrix x = distill::student_inputs(bird_model(), synth().test.concept_preds);
  for (auto _ : state) benchmark::DoNotOptimize(figs::predict(bird_model(), x));
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(x.rows()));
}
BENCHMARK(BM_PredictBatch);

void BM_FigsAttiRank(benchmark::State& state) {
  const Matrix x = distill::student_inputs(bird_model(), synth().test.concept_preds);
  std::size_t i = 0;
  for (auto _ : state) {
    benchmark::DoNotOptimize(atti::figs_atti_rank(bird_model(), x.row(i)));
    i = (i + 1) % x.rows();
  }
}
BENCHMARK(BM_FigsAttiRank);

void BM_TopkCurve(benchmark::State& state) {
  const auto artifacts = eval::build_artifacts(bird_model(), synth().train);
  eval::EvalOptions opt;
  opt.ranker = static_cast<eval::Ranker>(state.range(0));
  for (auto _ : state) benchmark::DoNotOptimize(eval::topk_curve(artifacts, synth().test, opt));
}
BENCHMARK(BM_TopkCurve)->Arg(0)->Arg(2)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
