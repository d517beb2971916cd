#pragma once

// Geodesic shooting: EPDiff integration from an initial velocity and the
// flows it generates. Time [0, horizon] is split into num_steps forward-Euler
// steps.
//
// Sampling a map at a point samples its displacement (clamp-to-edge), so maps
// extend by constant displacement outside the grid.

#include <vector>

#include "lamod/grid.hpp"
#include "lamod/metric.hpp"

namespace lamod {

struct ShootingConfig {
  MetricOperator op;
  int num_steps = 10;
  double horizon = 1.0;

  explicit ShootingConfig(MetricOperator metric, int steps = 10, double horizon_ = 1.0);
  double dt() const noexcept { return horizon / num_steps; }
};

struct GeodesicPath {
  std::vector<VectorField> velocities;  // v at the start of each step
  MapField inverse_map;                 // phi_1^{-1}
  MapField forward_map;                 // phi_1
};

// -K[(Dv)^T m + (Dm) v + m div v] with m = Lv.
VectorField epdiff_rhs(const MetricOperator& op, const VectorField& v);

// [v_0, ..., v_{N-1}] with v_{k+1} = v_k + dt * epdiff_rhs(v_k). Throws
// DivergenceError naming the step if values become non-finite.
std::vector<VectorField> integrate_epdiff(const ShootingConfig& cfg, const VectorField& v0);

// phi_{k+1}^{-1}(x) = phi_k^{-1}(x - dt v_k(x)), starting from the identity.
MapField integrate_inverse_flow(const ShootingConfig& cfg, const std::vector<VectorField>& velocities);

// phi_{k+1} = phi_k + dt * v_k(phi_k), starting from the identity.
MapField integrate_forward_flow(const ShootingConfig& cfg, const std::vector<VectorField>& velocities);

GeodesicPath shoot(const ShootingConfig& cfg, const VectorField& v0);

// Reverse-mode helpers.

// (d epdiff_rhs / d v)^T g at v.
VectorField epdiff_rhs_vjp(const MetricOperator& op, const VectorField& v, const VectorField& g);

// One semi-Lagrangian inverse-flow step on a map's displacement.
MapField inverse_flow_step(const MapField& psi, const VectorField& v, double dt);

}  // namespace lamod
