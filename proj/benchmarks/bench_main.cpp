#include <benchmark/benchmark.h>

#include "bwvi/diagnostics.hpp"
#include "bwvi/estimators.hpp"
#include "bwvi/geometry.hpp"
#include "bwvi/optimizers.hpp"
#include "bwvi/targets.hpp"

using namespace bwvi;

namespace {

const LogisticRidgePotential& toy_target() {
  static const LogisticRidgePotential target(toy_logistic_dataset(60, 10, 20240501), 1.0);
  return target;
}

QuadraticPotential quadratic(benchmark::State& state) {
  return make_random_quadratic(state.range(0), 10.0, 1);
}

}  // namespace

static void BM_W2(benchmark::State& state) {
  const auto t = quadratic(state);
  const auto p = GaussianVariational::isotropic(t.dim(), 0.34);
  const auto q = quadratic_optimum(t);
  for (auto _ : state) benchmark::DoNotOptimize(w2_distance_sq(p, q));
}
BENCHMARK(BM_W2)->RangeMultiplier(4)->Range(4, 256);

static void BM_JkoEntropy(benchmark::State& state) {
  const auto t = quadratic(state);
  const Matrix sigma = quadratic_optimum(t).covariance();
  for (auto _ : state) benchmark::DoNotOptimize(jko_entropy(sigma, 0.01));
}
BENCHMARK(BM_JkoEntropy)->RangeMultiplier(4)->Range(4, 256);

static void BM_Estimator(benchmark::State& state) {
  const auto kind = static_cast<EstimatorKind>(state.range(0));
  const auto geometry = static_cast<Geometry>(state.range(1));
  const auto& target = toy_target();
  const auto q = GaussianVariational::isotropic(target.dim(), 0.34);
  std::uint64_t it = 0;
  for (auto _ : state) {
    const auto noise = NoiseBatch::draw({1, 0, it++}, target.dim(), 8);
    benchmark::DoNotOptimize(estimate_gradient(kind, geometry, target, q, noise));
  }
  state.SetLabel(std::string(to_string(kind)) + "/" + std::string(to_string(geometry)));
}
BENCHMARK(BM_Estimator)->ArgsProduct({{0, 1}, {0, 1}});

static void BM_Step(benchmark::State& state) {
  const bool bw = state.range(0) == 1;
  const auto& target = toy_target();
  auto q = GaussianVariational::isotropic(target.dim(), 0.34);
  std::uint64_t it = 0;
  for (auto _ : state) {
    const auto noise = NoiseBatch::draw({2, 0, it++}, target.dim(), 8);
    q = bw ? spbwgd_step(q, target, noise, 1e-3) : spgd_step(q, target, noise, 1e-3);
  }
  state.SetLabel(bw ? "spbwgd" : "spgd");
}
BENCHMARK(BM_Step)->Arg(0)->Arg(1);

static void BM_FreeEnergy(benchmark::State& state) {
  const auto& target = toy_target();
  const auto q = GaussianVariational::isotropic(target.dim(), 0.34);
  std::uint64_t seed = 0;
  for (auto _ : state) benchmark::DoNotOptimize(free_energy_mc(q, target, 4096, seed++));
}
BENCHMARK(BM_FreeEnergy);
BENCHMARK_MAIN();
