#include "doctest.h"

#include <cmath>
#include <complex>
#include <random>

#include "lamod/metric.hpp"
#include "support.hpp"

using namespace lamod;

namespace {

double lambda(const MetricParams& p, int ky, int kx, int h, int w) {
  return p.gamma + 2.0 * p.alpha * ((1.0 - std::cos(2.0 * M_PI * kx / w)) + (1.0 - std::cos(2.0 * M_PI * ky / h)));
}

}  // namespace

TEST_CASE("L and K are inverse") {
  std::mt19937_64 rng(10);
  for (int n : {32, 64}) {
    const MetricOperator op(Grid2::make(n, n));
    const VectorField v = test::random_vector(op.grid(), rng);
    CHECK(test::max_abs_diff(op.apply_K(op.apply_L(v)), v) < 1e-8);
    CHECK(test::max_abs_diff(op.apply_L(op.apply_K(v)), v) < 1e-8);
  }
}

TEST_CASE("constant fields see the zero-frequency multiplier") {
  const MetricParams p{2.0, 1.5, 3};
  const MetricOperator op(Grid2::make(8, 12), p);
  const VectorField l = op.apply_L(VectorField(op.grid(), 1.0, -2.0));
  const VectorField k = op.apply_K(VectorField(op.grid(), 1.0, -2.0));
  const double g3 = std::pow(1.5, 3);
  for (std::size_t i = 0; i < op.grid().size(); ++i) {
    CHECK(l.x[i] == doctest::Approx(g3).epsilon(1e-12));
    CHECK(l.y[i] == doctest::Approx(-2.0 * g3).epsilon(1e-12));
    CHECK(k.x[i] == doctest::Approx(1.0 / g3).epsilon(1e-12));
  }
}

TEST_CASE("single Fourier modes are eigenfunctions (DFT oracle)") {
  const MetricParams p;
  const int h = 12, w = 16;
  const MetricOperator op(Grid2::make(h, w), p);
  for (auto [ky, kx] : {std::pair{0, 1}, std::pair{3, 2}, std::pair{6, 8}, std::pair{5, 7}}) {
    VectorField v(op.grid());
    for (int i = 0; i < h; ++i)
      for (int j = 0; j < w; ++j) v.y[op.grid().index(i, j)] = std::cos(2.0 * M_PI * (static_cast<double>(kx) * j / w + static_cast<double>(ky) * i / h));
    const double lc = std::pow(lambda(p, ky, kx, h, w), p.power);
    CHECK(op.symbol(ky, kx) == doctest::Approx(lambda(p, ky, kx, h, w)).epsilon(1e-14));
    const VectorField l = op.apply_L(v);
    const VectorField k = op.apply_K(v);
    for (std::size_t i = 0; i < op.grid().size(); ++i) {
      CHECK(std::abs(l.y[i] - lc * v.y[i]) < 1e-8);
      CHECK(std::abs(k.y[i] - v.y[i] / lc) < 1e-8);
      CHECK(std::abs(l.x[i]) < 1e-8);
    }
  }
}

TEST_CASE("L against a direct DFT of a random field") {
  std::mt19937_64 rng(11);
  const int h = 8, w = 10;
  const MetricParams p;
  const MetricOperator op(Grid2::make(h, w), p);
  const VectorField v = test::random_vector(op.grid(), rng);
  const auto fv = test::dft2(v.x, h, w);
  const auto fl = test::dft2(op.apply_L(v).x, h, w);
  const auto fk = test::dft2(op.apply_K(v).x, h, w);
  for (int ky = 0; ky < h; ++ky)
    for (int kx = 0; kx < w; ++kx) {
      const std::size_t q = static_cast<std::size_t>(ky * w + kx);
      const double lc = std::pow(lambda(p, ky, kx, h, w), p.power);
      CHECK(std::abs(fl[q] - lc * fv[q]) < 1e-8 * lc * (1.0 + std::abs(fv[q])));
      CHECK(std::abs(fk[q] - fv[q] / lc) < 1e-8 * (1.0 + std::abs(fv[q])));
    }
  // the highest frequency is attenuated by lambda_max^-c
  const std::size_t top = static_cast<std::size_t>((h / 2) * w + w / 2);
  const double lmax = std::pow(p.gamma + 8.0 * p.alpha, p.power);
  CHECK(std::abs(fk[top]) == doctest::Approx(std::abs(fv[top]) / lmax).epsilon(1e-8));
}

TEST_CASE("metric norm") {
  std::mt19937_64 rng(12);
  const int h = 8, w = 8;
  const MetricParams p;
  const MetricOperator op(Grid2::make(h, w), p);
  const VectorField u = test::random_vector(op.grid(), rng), v = test::random_vector(op.grid(), rng);
  CHECK(op.norm(VectorField(op.grid())) == 0.0);
  CHECK(op.norm(-3.0 * v) == doctest::Approx(9.0 * op.norm(v)).epsilon(1e-10));
  // Parseval oracle
  double parseval = 0.0;
  for (const auto* comp : {&v.x, &v.y}) {
    const auto f = test::dft2(*comp, h, w);
    for (int ky = 0; ky < h; ++ky)
      for (int kx = 0; kx < w; ++kx)
        parseval += std::pow(lambda(p, ky, kx, h, w), p.power) * std::norm(f[static_cast<std::size_t>(ky * w + kx)]);
  }
  parseval /= h * w;
  CHECK(op.norm(v) == doctest::Approx(parseval).epsilon(1e-10));
  // symmetry
  const VectorField lu = op.apply_L(u), lv = op.apply_L(v);
  double a = 0.0, b = 0.0;
  for (std::size_t i = 0; i < op.grid().size(); ++i) {
    a += lu.x[i] * v.x[i] + lu.y[i] * v.y[i];
    b += u.x[i] * lv.x[i] + u.y[i] * lv.y[i];
  }
  CHECK(std::abs(a - b) < 1e-9 * std::abs(a));
  // linearity
  const VectorField lin = op.apply_L(2.0 * u + (-0.5) * v);
  CHECK(test::max_abs_diff(lin, 2.0 * lu + (-0.5) * lv) < 1e-10 * 1e3);
}

TEST_CASE("metric norm is positive on random nonzero fields") {
  std::mt19937_64 rng(13);
  const MetricOperator op(Grid2::make(16, 16));
  for (int n = 0; n < 50; ++n) {
    VectorField v(op.grid());
    v.x[rng() % v.x.size()] = 1e-3 * (1.0 + static_cast<double>(n));
    CHECK(op.norm(v) > 0.0);
  }
}

TEST_CASE("operators reject a foreign grid") {
  const MetricOperator op(Grid2::make(8, 8));
  CHECK_THROWS_AS(op.apply_L(VectorField(Grid2::make(8, 16))), DimensionError);
  CHECK_THROWS_AS(op.apply_K(VectorField(Grid2::make(16, 8))), DimensionError);
}

TEST_CASE("smoothing kernel") {
  const SmoothingKernel k = SmoothingKernel::make(1.0, 3);
  double s = 0.0;
  for (double w : k.weights) s += w;
  CHECK(std::abs(s - 1.0) < 1e-12);
  for (int i = 0; i <= k.radius; ++i) CHECK(k.weights[static_cast<std::size_t>(k.radius + i)] == k.weights[static_cast<std::size_t>(k.radius - i)]);
  CHECK(SmoothingKernel::make(2.5, 3).radius == 8);
  CHECK_THROWS(SmoothingKernel::make(0.0, 3));

  SUBCASE("constant input is preserved") {
    const nn::Tensor c = nn::Tensor::filled({2, 9, 9}, 1.7);
    const nn::Tensor out = smooth_noise(k, c);
    for (double v : out.values()) CHECK(v == doctest::Approx(1.7).epsilon(1e-12));
  }
  SUBCASE("impulse gives the outer product stencil") {
    nn::Tensor imp = nn::Tensor::zeros({11, 11});
    imp.values()[5 * 11 + 5] = 1.0;
    const nn::Tensor out = smooth_noise(k, imp);
    for (int i = -3; i <= 3; ++i)
      for (int j = -3; j <= 3; ++j)
        CHECK(out.values()[static_cast<std::size_t>((5 + i) * 11 + 5 + j)] ==
              doctest::Approx(k.weights[static_cast<std::size_t>(3 + i)] * k.weights[static_cast<std::size_t>(3 + j)]).epsilon(1e-12));
  }
  SUBCASE("interior mean is preserved") {
    std::mt19937_64 rng(14);
    nn::Tensor e = nn::Tensor::from({16, 16}, test::normal_vector(256, rng));
    const nn::Tensor out = smooth_noise(k, e);
    // sum over the interior of the output equals the weighted sum of inputs
    // whose whole footprint stays inside: check one interior pixel directly.
    double direct = 0.0;
    for (int i = -3; i <= 3; ++i)
      for (int j = -3; j <= 3; ++j)
        direct += k.weights[static_cast<std::size_t>(3 + i)] * k.weights[static_cast<std::size_t>(3 + j)] * e.values()[static_cast<std::size_t>((8 + i) * 16 + 8 + j)];
    CHECK(out.values()[8 * 16 + 8] == doctest::Approx(direct).epsilon(1e-12));
  }
  SUBCASE("noise variance matches the weight sum") {
    std::mt19937_64 rng(15);
    const int draws = 10000;
    double s1 = 0.0, s2 = 0.0;
    for (int d = 0; d < draws; ++d) {
      nn::Tensor e = nn::Tensor::from({9, 9}, test::normal_vector(81, rng));
      const double v = smooth_noise(k, e).values()[4 * 9 + 4];
      s1 += v;
      s2 += v * v;
    }
    const double var = s2 / draws - (s1 / draws) * (s1 / draws);
    CHECK(var == doctest::Approx(k.white_noise_variance()).epsilon(0.05));
  }
  SUBCASE("needs two spatial axes") { CHECK_THROWS_AS(smooth_noise(k, nn::Tensor::zeros({5})), ShapeError); }
}
