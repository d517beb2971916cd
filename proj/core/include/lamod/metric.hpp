#pragma once

// The metric operator L = (-alpha * Laplacian + gamma * Id)^power, its inverse
// K, and the Gaussian kernel used to smooth diffusion noise.
//
// L and K are applied as Fourier multipliers with a periodic boundary. The
// symbol of the discrete 5-point Laplacian gives
//   lambda(k) = gamma + 2 alpha [(1 - cos(2 pi kx / W)) + (1 - cos(2 pi ky / H))]
// which is strictly positive, so both operators are symmetric positive-definite.

#include <span>
#include <vector>

#include "lamod/grid.hpp"
#include "lamod/nn/tensor.hpp"

namespace lamod {

struct MetricParams {
  double alpha = 3.0;
  double gamma = 1.0;
  int power = 3;
};

class MetricOperator {
 public:
  MetricOperator(const Grid2& grid, const MetricParams& params = {});

  const Grid2& grid() const noexcept { return grid_; }
  const MetricParams& params() const noexcept { return params_; }

  // lambda(k) for frequency indices (ky, kx), without the power.
  double symbol(int ky, int kx) const;
  // lambda^power on the full H x W frequency grid.
  std::span<const double> multipliers() const noexcept { return l_mult_; }

  VectorField apply_L(const VectorField& v) const;
  VectorField apply_K(const VectorField& m) const;
  void apply_L(std::span<const double> in, std::span<double> out) const;
  void apply_K(std::span<const double> in, std::span<double> out) const;

  // <Lv, v> summed over pixels and both components.
  double norm(const VectorField& v) const;

 private:
  void require_grid(const Grid2& g, const char* op) const;

  Grid2 grid_;
  MetricParams params_;
  std::vector<double> l_mult_;
  std::vector<double> k_mult_;
};

inline VectorField apply_L(const MetricOperator& op, const VectorField& v) { return op.apply_L(v); }
inline VectorField apply_K(const MetricOperator& op, const VectorField& m) { return op.apply_K(m); }
inline double metric_norm(const MetricOperator& op, const VectorField& v) { return op.norm(v); }

// Normalized, truncated 1-D Gaussian; applied separably.
struct SmoothingKernel {
  double std = 1.0;
  int radius = 3;
  std::vector<double> weights;  // length 2 * radius + 1

  // radius is raised to ceil(3 * std) when smaller.
  static SmoothingKernel make(double std = 1.0, int radius = 3);

  // Per-pixel variance of the smoothed field for unit white noise, away from
  // the border: sum_ij w_i^2 w_j^2.
  double white_noise_variance() const;
};

// Separable convolution over the two trailing axes with clamped boundaries.
// `shape` must have at least two dimensions.
std::vector<double> smooth(const SmoothingKernel& kernel, std::span<const double> values,
                           std::span<const std::size_t> shape);

// eps' = K(eps) for a tensor with >= 2 trailing spatial axes.
nn::Tensor smooth_noise(const SmoothingKernel& kernel, const nn::Tensor& eps);

}  // namespace lamod
