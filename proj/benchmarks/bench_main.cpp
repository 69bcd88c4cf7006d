#include <benchmark/benchmark.h>

#include "roundbuy/baseline.hpp"
#include "roundbuy/evaluation.hpp"
#include "roundbuy/synth.hpp"
#include "roundbuy/training.hpp"

namespace rb = roundbuy;
namespace ad = roundbuy::ad;

namespace {

// One support round of the first player of a default synthetic match.
const rb::RoundExample& sample_round() {
  static const auto tasks = [] {
    rb::SynthConfig sc;
    sc.n_matches = 1;
    return rb::build_tasks(rb::synth_matches(sc, rb::Catalog::default_fixture()).front(), 5);
  }();
  return tasks.front().support.back();
}

void BM_StateRepr(benchmark::State& st) {
  const rb::PolicyModel model(rb::Catalog::default_fixture(), {});
  const auto params = model.init_params(1);
  const auto& ex = sample_round();
  for (auto _ : st) {
    ad::Graph g(params);
    benchmark::DoNotOptimize(model.state_repr(g, ex.state).value()[0]);
  }
}
BENCHMARK(BM_StateRepr);

void BM_GreedyDecode(benchmark::State& st) {
  const rb::PolicyModel model(rb::Catalog::default_fixture(), {});
  const auto params = model.init_params(1);
  const auto& ex = sample_round();
  for (auto _ : st)
    benchmark::DoNotOptimize(model.generate_purchase(params, ex.state, rb::DecodeMode::Greedy, 0));
}
BENCHMARK(BM_GreedyDecode);

void BM_RoundGradient(benchmark::State& st) {
  const rb::PolicyModel model(rb::Catalog::default_fixture(), {});
  const auto params = model.init_params(1);
  const auto& ex = sample_round();
  const rb::TrainConfig tc;
  const auto phase = st.range(0) == 0 ? rb::Phase::Warmup : rb::Phase::Scst;
  std::uint64_t seed = 0;
  for (auto _ : st) benchmark::DoNotOptimize(rb::round_gradient(model, params, ex, phase, tc, ++seed));
}
BENCHMARK(BM_RoundGradient)->Arg(0)->Arg(1)->ArgNames({"scst"});

void BM_GreedyBaseline(benchmark::State& st) {
  const auto& c = rb::Catalog::default_fixture();
  const auto cash = static_cast<rb::Dollars>(st.range(0));
  for (auto _ : st) benchmark::DoNotOptimize(rb::greedy_purchase(c, cash, {}));
}
BENCHMARK(BM_GreedyBaseline)->Arg(800)->Arg(16000);

void BM_SetF1(benchmark::State& st) {
  const rb::ActionSequence a{{23, 36, 37, 35, 43}}, b{{24, 36, 35, 35, 42, 43}};
  for (auto _ : st) benchmark::DoNotOptimize(rb::f1_action_set(a, b));
}
BENCHMARK(BM_SetF1);

}  // namespace
BENCHMARK_MAIN();
