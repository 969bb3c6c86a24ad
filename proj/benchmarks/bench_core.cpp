#include <benchmark/benchmark.h>

#include <random>

#include "plmpc/experiments.hpp"

namespace {

using namespace plmpc;

double uniform(std::mt19937_64& rng, double lo, double hi) {
  return lo + (hi - lo) * ((rng() >> 11) * 0x1.0p-53);
}

Eigen::VectorXd random_pose(std::mt19937_64& rng) {
  Eigen::VectorXd x(6);
  x << uniform(rng, -65, 65), uniform(rng, -65, 65), uniform(rng, -3.1, 3.1), 0, 0, 0;
  return x;
}

const StabilizationSetup& setup() {
  static StabilizationSetup s = make_stabilization_setup();
  return s;
}

void BM_UsvStep(benchmark::State& state) {
  const UsvModel& model = *setup().model;
  std::mt19937_64 rng(7);
  Eigen::VectorXd x = random_pose(rng);
  Eigen::VectorXd u(2);
  u << 10.0, 1.0;
  for (auto _ : state) benchmark::DoNotOptimize(model.step(x, u));
}
BENCHMARK(BM_UsvStep);

void BM_Rollout(benchmark::State& state) {
  const auto& s = setup();
  std::mt19937_64 rng(11);
  Eigen::VectorXd x = random_pose(rng);
  ControlSequence U(s.spec.horizon, 2);
  for (auto _ : state)
    benchmark::DoNotOptimize(rollout_data(x, U, *s.model, true));
}
BENCHMARK(BM_Rollout);

void BM_SolveCold(benchmark::State& state) {
  const auto& s = setup();
  SolverConfig cfg;
  std::mt19937_64 rng(13);
  for (auto _ : state) {
    Eigen::VectorXd x = random_pose(rng);
    benchmark::DoNotOptimize(solve_ocp(x, s.spec, *s.model, cfg, nullptr));
  }
}
BENCHMARK(BM_SolveCold)->Unit(benchmark::kMillisecond);

void BM_SolveWarm(benchmark::State& state) {
  const auto& s = setup();
  SolverConfig cfg;
  std::mt19937_64 rng(17);
  Eigen::VectorXd x = random_pose(rng);
  SolveResult first = solve_ocp(x, s.spec, *s.model, cfg, nullptr);
  for (auto _ : state)
    benchmark::DoNotOptimize(solve_ocp(x, s.spec, *s.model, cfg, &first.control));
}
BENCHMARK(BM_SolveWarm)->Unit(benchmark::kMillisecond);

void BM_NetworkForward(benchmark::State& state) {
  const auto& s = setup();
  PolicyModel policy = make_policy(s.spec, s.input_scale, 5);
  std::mt19937_64 rng(19);
  Eigen::VectorXd x = random_pose(rng);
  for (auto _ : state) benchmark::DoNotOptimize(policy.eval(x));
}
BENCHMARK(BM_NetworkForward)->Unit(benchmark::kMicrosecond);

void BM_ControllerAct(benchmark::State& state) {
  const auto& s = setup();
  PolicyModel policy = make_policy(s.spec, s.input_scale, 5);
  PlmpcController ctl(policy, s.spec, s.law, GuardConfig{});
  std::mt19937_64 rng(23);
  Eigen::VectorXd x = random_pose(rng);
  GuardConfig guard;
  for (auto _ : state) {
    StepInfo info;
    try {
      benchmark::DoNotOptimize(ctl.act(x, *s.model, &info));
    } catch (const UnrecoverableStep&) {
      // untrained network; guard failures are part of the measured path
    }
  }
}
BENCHMARK(BM_ControllerAct)->Unit(benchmark::kMicrosecond);

}  // namespace

BENCHMARK_MAIN();
