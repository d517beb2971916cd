#pragma once

// Generators and oracles shared by the unit tests.

#include <algorithm>
#include <cmath>
#include <complex>
#include <random>
#include <vector>

#include "lamod/grid.hpp"
#include "lamod/metric.hpp"

namespace lamod::test {

inline std::vector<double> normal_vector(std::size_t n, std::mt19937_64& rng, double std = 1.0) {
  std::normal_distribution<double> d(0.0, std);
  std::vector<double> v(n);
  for (auto& x : v) x = d(rng);
  return v;
}

inline ScalarField random_scalar(const Grid2& g, std::mt19937_64& rng, double std = 1.0) {
  ScalarField f(g);
  f.values = normal_vector(g.size(), rng, std);
  return f;
}

inline VectorField random_vector(const Grid2& g, std::mt19937_64& rng, double std = 1.0) {
  VectorField v(g);
  v.x = normal_vector(g.size(), rng, std);
  v.y = normal_vector(g.size(), rng, std);
  return v;
}

// White noise passed through K (default operator) and rescaled so that
// metric_norm equals `norm`.
inline VectorField smooth_velocity(const MetricOperator& op, std::mt19937_64& rng, double norm) {
  VectorField v = op.apply_K(random_vector(op.grid(), rng));
  const double n = op.norm(v);
  v *= std::sqrt(norm / n);
  return v;
}

// Smooth random field from a handful of low-frequency sinusoids.
inline VectorField smooth_field(const Grid2& g, std::mt19937_64& rng, double amplitude) {
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  VectorField v(g);
  for (int c = 0; c < 2; ++c) {
    for (int term = 0; term < 3; ++term) {
      const double a = amplitude * u(rng) / 3.0, kx = 2.0 * u(rng), ky = 2.0 * u(rng), ph = 3.0 * u(rng);
      for (int i = 0; i < g.height; ++i) {
        for (int j = 0; j < g.width; ++j) {
          v.component(c)[g.index(i, j)] += a * std::sin(2.0 * M_PI * (kx * j / g.width + ky * i / g.height) + ph);
        }
      }
    }
  }
  return v;
}

inline double max_abs_diff(const std::vector<double>& a, const std::vector<double>& b) {
  double m = 0.0;
  for (std::size_t k = 0; k < a.size(); ++k) m = std::max(m, std::abs(a[k] - b[k]));
  return m;
}

inline double max_abs_diff(const VectorField& a, const VectorField& b) {
  return std::max(max_abs_diff(a.x, b.x), max_abs_diff(a.y, b.y));
}

inline double interior_max_abs_diff(const VectorField& a, const VectorField& b, int margin) {
  const Grid2& g = a.grid;
  double m = 0.0;
  for (int i = margin; i < g.height - margin; ++i) {
    for (int j = margin; j < g.width - margin; ++j) {
      const std::size_t k = g.index(i, j);
      m = std::max({m, std::abs(a.x[k] - b.x[k]), std::abs(a.y[k] - b.y[k])});
    }
  }
  return m;
}

// Naive 2-D DFT, used as an oracle for the FFT-based operators.
inline std::vector<std::complex<double>> dft2(const std::vector<double>& f, int h, int w) {
  std::vector<std::complex<double>> out(static_cast<std::size_t>(h * w));
  for (int ky = 0; ky < h; ++ky) {
    for (int kx = 0; kx < w; ++kx) {
      std::complex<double> s = 0.0;
      for (int i = 0; i < h; ++i) {
        for (int j = 0; j < w; ++j) {
          const double ang = -2.0 * M_PI * (static_cast<double>(ky * i) / h + static_cast<double>(kx * j) / w);
          s += f[static_cast<std::size_t>(i * w + j)] * std::polar(1.0, ang);
        }
      }
      out[static_cast<std::size_t>(ky * w + kx)] = s;
    }
  }
  return out;
}

inline double relative_error(double a, double b) { return std::abs(a - b) / std::max({std::abs(a), std::abs(b), 1e-300}); }

}  // namespace lamod::test
