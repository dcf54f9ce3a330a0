#include <benchmark/benchmark.h>

#include <cmath>
#include <vector>

#include "btlab/analytic.hpp"
#include "btlab/maps.hpp"

using namespace btlab;

namespace {

DiscreteMap mobius_on(int n, double h) {
  auto g = make_grid(n, 1.0, h, n == 2 ? false : true);
  std::vector<double> a(n, 0.0);
  a[0] = 0.6;
  return sample_mobius(g, a);
}

}  // namespace

// state.range(0): 1/h
static void BM_PEnergy2D(benchmark::State& state) {
  const DiscreteMap u = mobius_on(2, 1.0 / state.range(0));
  const MetricField m = MetricField::euclidean(u.grid());
  for (auto _ : state) benchmark::DoNotOptimize(p_energy(u, m, 2.0).total);
  state.SetItemsProcessed(state.iterations() * static_cast<long>(u.node_count()));
}
BENCHMARK(BM_PEnergy2D)->Arg(32)->Arg(64)->Arg(128);

static void BM_PEnergy3D(benchmark::State& state) {
  const DiscreteMap u = mobius_on(3, 1.0 / state.range(0));
  const MetricField m = MetricField::euclidean(u.grid());
  for (auto _ : state) benchmark::DoNotOptimize(p_energy(u, m, 3.0).total);
  state.SetItemsProcessed(state.iterations() * static_cast<long>(u.node_count()));
}
BENCHMARK(BM_PEnergy3D)->Arg(16)->Arg(32);

static void BM_RegularizedGradient(benchmark::State& state) {
  const DiscreteMap u = mobius_on(2, 1.0 / state.range(0));
  const MetricField m = MetricField::from_function(u.grid(), [](const double* x, double* g) {
    g[0] = 1.0 + x[0] * x[0];
    g[1] = g[2] = 0.0;
    g[3] = 1.0 + x[0] * x[0];
  });
  std::vector<double> grad;
  for (auto _ : state) {
    benchmark::DoNotOptimize(regularized_energy(u, m, 2.5, 1e-3, &grad));
    benchmark::ClobberMemory();
  }
  state.SetItemsProcessed(state.iterations() * static_cast<long>(u.node_count()));
}
BENCHMARK(BM_RegularizedGradient)->Arg(32)->Arg(64)->Arg(128);

static void BM_WeakResidual(benchmark::State& state) {
  const DiscreteMap u = mobius_on(2, 1.0 / state.range(0));
  const MetricField m = MetricField::euclidean(u.grid());
  for (auto _ : state) benchmark::DoNotOptimize(weak_residual(u, m, 2.0).norm);
}
BENCHMARK(BM_WeakResidual)->Arg(64);
BENCHMARK_MAIN();
