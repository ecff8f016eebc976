#include <benchmark/benchmark.h>

#include <vector>

#include "spheresel/eta.hpp"
#include "spheresel/harness.hpp"
#include "spheresel/numerics.hpp"
#include "spheresel/procedures.hpp"
#include "spheresel/rng.hpp"
#include "spheresel/samplers.hpp"

using namespace spheresel;

static void BM_LogBesselI(benchmark::State& state) {
  const double nu = static_cast<double>(state.range(0));
  double x = 0.5;
  for (auto _ : state) {
    benchmark::DoNotOptimize(numerics::log_bessel_i(nu, x));
    x = x < 1e4 ? x * 1.37 : 0.5;
  }
}
BENCHMARK(BM_LogBesselI)->Arg(1)->Arg(30)->Arg(500);

static void BM_IntegrateF(benchmark::State& state) {
  for (auto _ : state) benchmark::DoNotOptimize(eta::integrate_f(64, 3.5, state.range(0)));
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_IntegrateF)->Arg(10'000)->Arg(1'000'000)->Unit(benchmark::kMillisecond);

static void BM_EvaluatorExpectation(benchmark::State& state) {
  const eta::ApproxLevel1Evaluator evaluator(64, state.range(0));
  double e = 3.0;
  for (auto _ : state) {
    benchmark::DoNotOptimize(evaluator.expectation(e));
    e = e < 4.0 ? e + 0.01 : 3.0;
  }
}
BENCHMARK(BM_EvaluatorExpectation)->Arg(1'000'000)->Unit(benchmark::kMillisecond);

static void BM_NormalStream(benchmark::State& state) {
  rng::NormalStream stream(rng::derive_seed(1, 2));
  for (auto _ : state) benchmark::DoNotOptimize(stream.next());
  state.SetItemsProcessed(state.iterations());
}
BENCHMARK(BM_NormalStream);

static void BM_Level1MonteCarlo(benchmark::State& state) {
  rng::NormalStream stream(7);
  for (auto _ : state) {
    eta::Level1MonteCarlo mc(8, 2.83);
    mc.add_samples(10'000, stream);
    benchmark::DoNotOptimize(mc.estimate());
  }
}
BENCHMARK(BM_Level1MonteCarlo)->Unit(benchmark::kMillisecond);

static void BM_DK1Run(benchmark::State& state) {
  const auto k = static_cast<int>(state.range(0));
  eta::SolverSettings settings;
  settings.integration_intervals = 20'000;
  settings.batch_size = 20'000;
  settings.max_batches = 3;
  const auto schedule = eta::build_schedule(k, 0.1, eta::kFitAlpha05, settings);
  const auto scenario = harness::make_scenario("SC-Equal", k);
  const auto config = harness::make_procedure_config(scenario, procedures::Procedure::DK1, &schedule);
  std::uint64_t rep = 0;
  for (auto _ : state) {
    samplers::GaussianSampler sampler(scenario.means, scenario.variances, rng::derive_seed(1, rep++));
    benchmark::DoNotOptimize(procedures::run_dk1(config, sampler));
  }
}
BENCHMARK(BM_DK1Run)->Arg(16)->Arg(128)->Unit(benchmark::kMicrosecond);
BENCHMARK_MAIN();
