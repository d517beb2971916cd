#include "lamod/metric.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>

#include "lamod/error.hpp"
#include "lamod/fourier.hpp"

namespace lamod {

MetricOperator::MetricOperator(const Grid2& grid, const MetricParams& params)
    : grid_(grid), params_(params), l_mult_(grid.size()), k_mult_(grid.size()) {
  if (!(params.alpha > 0.0) || !(params.gamma > 0.0) || params.power < 1) {
    throw UsageError("MetricOperator: alpha, gamma must be positive and power >= 1");
  }
  for (int ky = 0; ky < grid.height; ++ky) {
    for (int kx = 0; kx < grid.width; ++kx) {
      const double l = std::pow(symbol(ky, kx), params.power);
      l_mult_[grid.index(ky, kx)] = l;
      k_mult_[grid.index(ky, kx)] = 1.0 / l;
    }
  }
}

double MetricOperator::symbol(int ky, int kx) const {
  const double two_pi = 2.0 * std::numbers::pi;
  const double cx = 1.0 - std::cos(two_pi * kx / grid_.width);
  const double cy = 1.0 - std::cos(two_pi * ky / grid_.height);
  return params_.gamma + 2.0 * params_.alpha * (cx + cy);
}

void MetricOperator::require_grid(const Grid2& g, const char* op) const {
  if (!(g == grid_)) throw DimensionError(std::string(op) + ": field grid does not match operator grid");
}

void MetricOperator::apply_L(std::span<const double> in, std::span<double> out) const {
  fourier_multiply(in, grid_, l_mult_, out);
}

void MetricOperator::apply_K(std::span<const double> in, std::span<double> out) const {
  fourier_multiply(in, grid_, k_mult_, out);
}

VectorField MetricOperator::apply_L(const VectorField& v) const {
  require_grid(v.grid, "apply_L");
  VectorField out(grid_);
  apply_L(v.x, out.x);
  apply_L(v.y, out.y);
  return out;
}

VectorField MetricOperator::apply_K(const VectorField& m) const {
  require_grid(m.grid, "apply_K");
  VectorField out(grid_);
  apply_K(m.x, out.x);
  apply_K(m.y, out.y);
  return out;
}

double MetricOperator::norm(const VectorField& v) const {
  const VectorField lv = apply_L(v);
  double acc = 0.0;
  for (std::size_t k = 0; k < v.x.size(); ++k) acc += lv.x[k] * v.x[k] + lv.y[k] * v.y[k];
  return acc;
}

SmoothingKernel SmoothingKernel::make(double std_px, int radius) {
  if (!(std_px > 0.0)) throw UsageError("SmoothingKernel: std must be positive");
  SmoothingKernel k;
  k.std = std_px;
  k.radius = std::max({radius, 1, static_cast<int>(std::ceil(3.0 * std_px))});
  k.weights.resize(static_cast<std::size_t>(2 * k.radius + 1));
  double total = 0.0;
  for (int t = -k.radius; t <= k.radius; ++t) {
    const double w = std::exp(-0.5 * (t * t) / (std_px * std_px));
    k.weights[static_cast<std::size_t>(t + k.radius)] = w;
    total += w;
  }
  for (auto& w : k.weights) w /= total;
  return k;
}

double SmoothingKernel::white_noise_variance() const {
  double s = 0.0;
  for (double w : weights) s += w * w;
  return s * s;
}

std::vector<double> smooth(const SmoothingKernel& kernel, std::span<const double> values,
                           std::span<const std::size_t> shape) {
  if (shape.size() < 2) throw ShapeError("smooth_noise: need at least two spatial dimensions");
  const std::size_t h = shape[shape.size() - 2], w = shape[shape.size() - 1];
  const std::size_t plane = h * w;
  const std::size_t planes = values.size() / plane;
  const int r = kernel.radius;
  const auto clampi = [](long v, long n) { return v < 0 ? 0 : (v >= n ? n - 1 : v); };

  std::vector<double> tmp(values.size()), out(values.size());
  for (std::size_t p = 0; p < planes; ++p) {
    const double* in = values.data() + p * plane;
    double* t = tmp.data() + p * plane;
    double* o = out.data() + p * plane;
    for (std::size_t i = 0; i < h; ++i) {
      for (std::size_t j = 0; j < w; ++j) {
        double acc = 0.0;
        for (int k = -r; k <= r; ++k) {
          const long jj = clampi(static_cast<long>(j) + k, static_cast<long>(w));
          acc += kernel.weights[static_cast<std::size_t>(k + r)] * in[i * w + static_cast<std::size_t>(jj)];
        }
        t[i * w + j] = acc;
      }
    }
    for (std::size_t i = 0; i < h; ++i) {
      for (std::size_t j = 0; j < w; ++j) {
        double acc = 0.0;
        for (int k = -r; k <= r; ++k) {
          const long ii = clampi(static_cast<long>(i) + k, static_cast<long>(h));
          acc += kernel.weights[static_cast<std::size_t>(k + r)] * t[static_cast<std::size_t>(ii) * w + j];
        }
        o[i * w + j] = acc;
      }
    }
  }
  return out;
}

nn::Tensor smooth_noise(const SmoothingKernel& kernel, const nn::Tensor& eps) {
  return nn::Tensor::from(eps.shape(), smooth(kernel, eps.values(), eps.shape()));
}

}  // namespace lamod
