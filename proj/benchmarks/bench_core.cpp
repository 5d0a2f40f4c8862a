#include <benchmark/benchmark.h>

#include "ggq/experiments.hpp"

using namespace ggq;

namespace {

Problem section_problem() {
  return Problem::make("bench", uniform_kernel_mdp(4, 2, 0.9, random_rewards(1, 4, 2)), uniform_policy(4, 2),
                       FeatureMap::random(1, 4, 2, 2));
}

void BM_GqStep(benchmark::State& state) {
  const auto p = section_problem();
  const SoftmaxPolicy pol(1.0);
  const auto schedule = StepSchedule::constant(1 << 30, 1e-3, 1e-2);
  CounterRng rng(1);
  LearnerState s{Eigen::Vector2d(1, 2), Eigen::Vector2d(0.1, 0.1), 0, 1};
  for (auto _ : state) {
    const auto o = sample_transition(p.mdp, p.behavior, s.s, rng);
    s = gq_step(s, o, schedule, pol, p.features, p.mdp.gamma);
    benchmark::DoNotOptimize(s.theta.data());
  }
}
BENCHMARK(BM_GqStep);

void BM_OracleEvaluate(benchmark::State& state) {
  const auto p = section_problem();
  const SoftmaxPolicy pol(static_cast<double>(state.range(0)));
  const Eigen::VectorXd theta = Eigen::Vector2d(0.4, -1.1);
  for (auto _ : state) benchmark::DoNotOptimize(p.oracle->evaluate(pol, theta));
}
BENCHMARK(BM_OracleEvaluate)->Arg(1)->Arg(20);

void BM_StationaryModel(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  const auto mdp = random_mdp(3, n, 2, 0.9);
  const auto b = random_policy(3, n, 2);
  const auto f = FeatureMap::random(3, n, 2, 4);
  for (auto _ : state) benchmark::DoNotOptimize(build_stationary_model(mdp, b, f));
}
BENCHMARK(BM_StationaryModel)->Arg(4)->Arg(16)->Arg(64);

void BM_Run(benchmark::State& state) {
  const auto p = section_problem();
  const auto T = static_cast<std::size_t>(state.range(0));
  const LearnerInit init{1, Eigen::Vector2d(1, 2), Eigen::Vector2d(0.1, 0.1)};
  std::uint64_t seed = 0;
  for (auto _ : state) {
    RunOptions opts{StepSchedule::exponents(T, 2.0 / 3, 1.0 / 3), {}, 0, seed++, "", 1e6};
    benchmark::DoNotOptimize(run(p.mdp, p.behavior, p.features, SoftmaxPolicy(1.0), init, opts, p.oracle.get()));
  }
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(T));
}
BENCHMARK(BM_Run)->Arg(1000)->Arg(10000)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
