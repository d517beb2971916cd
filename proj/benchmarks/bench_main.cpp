// Hot paths of registration and diffusion training.

#include <benchmark/benchmark.h>

#include <cmath>
#include <random>

#include "lamod/geodesic.hpp"
#include "lamod/io/lmf1.hpp"
#include "lamod/metric.hpp"
#include "lamod/nn/ops.hpp"
#include "lamod/phantom.hpp"
#include "lamod/registration.hpp"

using namespace lamod;

namespace {

VectorField random_field(const Grid2& g, std::uint64_t seed, double std = 1.0) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> d(0.0, std);
  VectorField v(g);
  for (auto& x : v.x) x = d(rng);
  for (auto& y : v.y) y = d(rng);
  return v;
}

nn::Tensor random_tensor(nn::Shape s, std::uint64_t seed, bool grad = false) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> d;
  std::vector<double> v(nn::numel(s));
  for (auto& x : v) x = d(rng);
  return nn::Tensor::from(s, std::move(v), grad);
}

void BM_ApplyK(benchmark::State& state) {
  const int n = static_cast<int>(state.range(0));
  const MetricOperator op(Grid2::make(n, n));
  const VectorField m = random_field(op.grid(), 1);
  for (auto _ : state) benchmark::DoNotOptimize(op.apply_K(m));
  state.SetItemsProcessed(state.iterations() * n * n);
}
BENCHMARK(BM_ApplyK)->Arg(64)->Arg(128);

void BM_EpdiffRhs(benchmark::State& state) {
  const int n = static_cast<int>(state.range(0));
  const MetricOperator op(Grid2::make(n, n));
  VectorField v = op.apply_K(random_field(op.grid(), 2));
  for (auto _ : state) benchmark::DoNotOptimize(epdiff_rhs(op, v));
}
BENCHMARK(BM_EpdiffRhs)->Arg(64)->Arg(128);

void BM_Interpolate(benchmark::State& state) {
  const int n = static_cast<int>(state.range(0));
  const Grid2 g = Grid2::make(n, n);
  const MapField map = MapField::from_displacement(random_field(g, 3, 2.0));
  ScalarField f(g);
  f.values = random_field(g, 4).x;
  for (auto _ : state) benchmark::DoNotOptimize(interpolate(f, map));
  state.SetItemsProcessed(state.iterations() * n * n);
}
BENCHMARK(BM_Interpolate)->Arg(64)->Arg(128);

// One iteration of pairwise registration: shoot, warp, and backpropagate.
void BM_EnergyGradient(benchmark::State& state) {
  PhantomConfig pc;
  const PhantomSample s = generate(pc);
  const RegistrationConfig cfg(ShootingConfig(MetricOperator(pc.grid), 10));
  VectorField v0 = cfg.shooting.op.apply_K(random_field(pc.grid, 5));
  for (auto _ : state) benchmark::DoNotOptimize(energy_with_gradient(cfg, v0, s.images[0], s.images[4]));
}
BENCHMARK(BM_EnergyGradient)->Unit(benchmark::kMillisecond);

void BM_Conv2dForwardBackward(benchmark::State& state) {
  const std::size_t c = static_cast<std::size_t>(state.range(0));
  const nn::Tensor x = random_tensor({8, c, 64, 64}, 6);
  const nn::Tensor w = random_tensor({c, c, 3, 3}, 7, true);
  const nn::Tensor b = random_tensor({c}, 8, true);
  for (auto _ : state) {
    nn::backward(nn::sum_squares(nn::conv2d(x, w, b)));
    benchmark::DoNotOptimize(w.grad().data());
  }
}
BENCHMARK(BM_Conv2dForwardBackward)->Arg(8)->Arg(16)->Unit(benchmark::kMillisecond);

void BM_Lmf1RoundTrip(benchmark::State& state) {
  io::Container c;
  const nn::Tensor t = random_tensor({8, 2, 64, 64}, 9);
  c.add(io::Record::doubles("motions", {8, 2, 64, 64}, {t.values().begin(), t.values().end()}));
  for (auto _ : state) benchmark::DoNotOptimize(io::decode(io::encode(c)));
}
BENCHMARK(BM_Lmf1RoundTrip);

}  // namespace

BENCHMARK_MAIN();
