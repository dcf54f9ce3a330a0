#include <benchmark/benchmark.h>

#include <cmath>

#include "btlab/bubbletree.hpp"
#include "btlab/concentration.hpp"

using namespace btlab;

namespace {

// Chart bubble of scale 1/16 on the half disc of radius 1/2.
DiscreteMap bubble_map(double h) {
  auto g = make_grid(2, 0.5, h, true);
  const BubblePrototype b = chart_bubble(2);
  return sample(g, 2, [&](const double* x, double* out) {
    const double y[2] = {16.0 * x[0], 16.0 * x[1]};
    b.omega(y, out);
  });
}

}  // namespace

static void BM_ConcentrationBuild(benchmark::State& state) {
  const DiscreteMap u = bubble_map(1.0 / state.range(0));
  const MetricField m = MetricField::euclidean(u.grid());
  for (auto _ : state) {
    ConcentrationField f(u, m, 2.0);
    benchmark::DoNotOptimize(f.total());
  }
}
BENCHMARK(BM_ConcentrationBuild)->Arg(128)->Arg(256);

// Small radii take the direct path, large ones the FFT correlation.
static void BM_ConcentrationQ(benchmark::State& state) {
  const DiscreteMap u = bubble_map(1.0 / 256);
  const ConcentrationField f(u, MetricField::euclidean(u.grid()), 2.0);
  const double t = static_cast<double>(state.range(0)) / 256.0;
  for (auto _ : state) benchmark::DoNotOptimize(f.q(t));
}
BENCHMARK(BM_ConcentrationQ)->Arg(2)->Arg(8)->Arg(32)->Arg(128);

static void BM_Detect(benchmark::State& state) {
  const DiscreteMap u = bubble_map(1.0 / state.range(0));
  const ConcentrationField f(u, MetricField::euclidean(u.grid()), 2.0);
  for (auto _ : state) benchmark::DoNotOptimize(f.detect(0.5 * f.total()).scale);
}
BENCHMARK(BM_Detect)->Arg(128)->Arg(256);
