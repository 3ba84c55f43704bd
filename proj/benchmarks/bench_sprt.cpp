// SPDX-License-Identifier: Apache-2.0
#include <benchmark/benchmark.h>

#include <string>
#include <vector>

#include "spitfilter/engine.hpp"
#include "spitfilter/simulator.hpp"
#include "spitfilter/sprt.hpp"

namespace {

using namespace spitfilter;

void BM_SprtUpdate(benchmark::State& state) {
  const ExponentialPair model(1.0, 0.999);
  const AccuracySpec spec(1e-9, 1e-9);
  Rng rng(1);
  std::vector<double> xs(4096);
  for (auto& x : xs) x = model.log_likelihood_ratio(draw_exponential(rng, 1.0));
  SprtState s;
  std::size_t i = 0;
  for (auto _ : state) {
    auto step = update(s, spec, xs[i++ & 4095]);
    if (step.verdict != Verdict::Continue) step.state = SprtState{};
    s = step.state;
    benchmark::DoNotOptimize(s);
  }
}
BENCHMARK(BM_SprtUpdate);

void BM_EngineRequestComplete(benchmark::State& state) {
  FilterEngine engine(ExponentialPair(1.0, 0.999), AccuracySpec(1e-9, 1e-9));
  std::vector<SourceId> ids;
  for (int i = 0; i < state.range(0); ++i) ids.emplace_back("src" + std::to_string(i));
  Rng rng(2);
  std::size_t i = 0;
  for (auto _ : state) {
    const SourceId& id = ids[i++ % ids.size()];
    if (engine.on_call_request(id) == EngineAction::Accept) {
      benchmark::DoNotOptimize(engine.on_call_completed(id, draw_exponential(rng, 1.0)));
    }
  }
}
BENCHMARK(BM_EngineRequestComplete)->Arg(1)->Arg(1000)->Arg(100000);

void BM_RunTrial(benchmark::State& state) {
  const ExponentialPair model(1.0, 0.1);
  const TrialConfig config{exponential_source(1.0), Hypothesis::Spit, model, AccuracySpec(0.001, 0.001)};
  Rng rng(3);
  for (auto _ : state) benchmark::DoNotOptimize(run_trial(config, rng));
}
BENCHMARK(BM_RunTrial);

}  // namespace

BENCHMARK_MAIN();
