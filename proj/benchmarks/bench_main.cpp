#include "optoent/checks.hpp"
#include "optoent/integrator.hpp"
#include "optoent/measures.hpp"
#include "optoent/model.hpp"

#include <benchmark/benchmark.h>

#include <random>

using namespace optoent;

namespace {

SystemParams room() {
  SystemParams p;
  p.gamma_m = 1e-5;
  p.n_th = 6e4;
  return p;
}

void BM_BuildChannel(benchmark::State& state) {
  const auto p = room();
  const auto model = dynamics::build_full_two_mode(p, DriveSpec::blue_sideband(1e5, p));
  dynamics::IntegratorConfig cfg;
  for (auto _ : state) benchmark::DoNotOptimize(dynamics::build_channel(model, 0.0, 0.01, cfg));
}
BENCHMARK(BM_BuildChannel);

// Whole trajectory to t = 10 (the V update dominates once channels are cached).
void BM_Integrate(benchmark::State& state) {
  const auto p = room();
  const auto model = dynamics::build_full_two_mode(p, DriveSpec::blue_sideband(1e5, p));
  dynamics::IntegratorConfig cfg;
  cfg.sample_stride = 0.05;
  const long bits = state.range(0);
  cfg.precision = bits == 53 ? PrecisionPolicy::fixed_double() : PrecisionPolicy::extended(bits);
  for (auto _ : state) benchmark::DoNotOptimize(dynamics::integrate(model, initial_state(p, 2), 10.0, cfg));
}
BENCHMARK(BM_Integrate)->Arg(53)->Arg(256)->Arg(1024)->Unit(benchmark::kMillisecond);

void BM_LogNegativity(benchmark::State& state) {
  std::mt19937_64 rng(1);
  const auto v = checks::random_covariance(rng, 2);
  for (auto _ : state) benchmark::DoNotOptimize(measures::log_negativity(v));
}
BENCHMARK(BM_LogNegativity);

void BM_LogNegativityBig(benchmark::State& state) {
  std::mt19937_64 rng(1);
  PrecisionScope scope(state.range(0));
  const auto v = checks::random_covariance(rng, 2).convert<BigFloat>();
  for (auto _ : state) benchmark::DoNotOptimize(measures::log_negativity(v));
}
BENCHMARK(BM_LogNegativityBig)->Arg(256)->Arg(1024);

void BM_WilliamsonThreeMode(benchmark::State& state) {
  std::mt19937_64 rng(1);
  const auto v = checks::random_covariance(rng, 3);
  for (auto _ : state) benchmark::DoNotOptimize(measures::symplectic_eigs(v, true));
}
BENCHMARK(BM_WilliamsonThreeMode);

}  // namespace
BENCHMARK_MAIN();
