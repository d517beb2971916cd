#include "lamod/geodesic.hpp"

#include <string>

#include "lamod/error.hpp"

namespace lamod {

ShootingConfig::ShootingConfig(MetricOperator metric, int steps, double horizon_)
    : op(std::move(metric)), num_steps(steps), horizon(horizon_) {
  if (num_steps < 1) throw UsageError("ShootingConfig: num_steps must be >= 1");
  if (!(horizon > 0.0)) throw UsageError("ShootingConfig: horizon must be positive");
}

namespace {

struct EpdiffState {
  VectorField m;
  MatrixField jv;
  MatrixField jm;
  std::vector<double> div;
};

EpdiffState epdiff_state(const MetricOperator& op, const VectorField& v) {
  EpdiffState s;
  s.m = op.apply_L(v);
  s.jv = jacobian(v);
  s.jm = jacobian(s.m);
  s.div.resize(v.x.size());
  for (std::size_t k = 0; k < s.div.size(); ++k) s.div[k] = s.jv.values[k][0][0] + s.jv.values[k][1][1];
  return s;
}

}  // namespace

VectorField epdiff_rhs(const MetricOperator& op, const VectorField& v) {
  const EpdiffState s = epdiff_state(op, v);
  VectorField b(v.grid);
  for (std::size_t k = 0; k < b.x.size(); ++k) {
    const Mat2& jv = s.jv.values[k];
    const Mat2& jm = s.jm.values[k];
    const double mx = s.m.x[k], my = s.m.y[k];
    const double vx = v.x[k], vy = v.y[k];
    // (Dv)^T m: row r is sum_c dv_c/dx_r m_c
    b.x[k] = jv[0][0] * mx + jv[1][0] * my + jm[0][0] * vx + jm[0][1] * vy + mx * s.div[k];
    b.y[k] = jv[0][1] * mx + jv[1][1] * my + jm[1][0] * vx + jm[1][1] * vy + my * s.div[k];
  }
  VectorField out = op.apply_K(b);
  out *= -1.0;
  return out;
}

VectorField epdiff_rhs_vjp(const MetricOperator& op, const VectorField& v, const VectorField& g) {
  const EpdiffState s = epdiff_state(op, v);
  VectorField a = op.apply_K(g);
  a *= -1.0;

  const Grid2& grid = v.grid;
  VectorField dv(grid), dm(grid);
  MatrixField djv(grid), djm(grid);
  for (std::size_t k = 0; k < a.x.size(); ++k) {
    const double ar[2] = {a.x[k], a.y[k]};
    const double mc[2] = {s.m.x[k], s.m.y[k]};
    const double vc[2] = {v.x[k], v.y[k]};
    const Mat2& jv = s.jv.values[k];
    const Mat2& jm = s.jm.values[k];
    const double am = ar[0] * mc[0] + ar[1] * mc[1];
    for (int c = 0; c < 2; ++c) {
      double gm = ar[c] * s.div[k];
      double gv = 0.0;
      for (int r = 0; r < 2; ++r) {
        gm += ar[r] * jv[c][r];
        gv += ar[r] * jm[r][c];
        djv.values[k][c][r] = ar[r] * mc[c];
        djm.values[k][r][c] = ar[r] * vc[c];
      }
      djv.values[k][c][c] += am;
      dm.component(c)[k] = gm;
      dv.component(c)[k] = gv;
    }
  }
  dv += jacobian_adjoint(djv);
  dm += jacobian_adjoint(djm);
  dv += op.apply_L(dm);
  return dv;
}

std::vector<VectorField> integrate_epdiff(const ShootingConfig& cfg, const VectorField& v0) {
  if (!(v0.grid == cfg.op.grid())) throw DimensionError("integrate_epdiff: v0 grid does not match operator");
  std::vector<VectorField> vs;
  vs.reserve(static_cast<std::size_t>(cfg.num_steps));
  vs.push_back(v0);
  const double dt = cfg.dt();
  for (int k = 1; k < cfg.num_steps; ++k) {
    VectorField next = vs.back();
    next.axpy(dt, epdiff_rhs(cfg.op, vs.back()));
    if (!next.all_finite()) {
      throw DivergenceError("integrate_epdiff: non-finite velocity at step " + std::to_string(k));
    }
    vs.push_back(std::move(next));
  }
  return vs;
}

MapField inverse_flow_step(const MapField& psi, const VectorField& v, double dt) {
  const MapField sample_at = MapField::from_displacement(-dt * v);
  VectorField u = warp_vector(psi.displacement(), sample_at);
  u.axpy(-dt, v);
  return MapField::from_displacement(std::move(u));
}

MapField integrate_inverse_flow(const ShootingConfig& cfg, const std::vector<VectorField>& velocities) {
  if (velocities.size() != static_cast<std::size_t>(cfg.num_steps)) {
    throw UsageError("integrate_inverse_flow: expected " + std::to_string(cfg.num_steps) + " velocities, got " +
                     std::to_string(velocities.size()));
  }
  MapField psi = MapField::identity(cfg.op.grid());
  for (const auto& v : velocities) psi = inverse_flow_step(psi, v, cfg.dt());
  return psi;
}

MapField integrate_forward_flow(const ShootingConfig& cfg, const std::vector<VectorField>& velocities) {
  if (velocities.size() != static_cast<std::size_t>(cfg.num_steps)) {
    throw UsageError("integrate_forward_flow: expected " + std::to_string(cfg.num_steps) + " velocities, got " +
                     std::to_string(velocities.size()));
  }
  MapField phi = MapField::identity(cfg.op.grid());
  for (const auto& v : velocities) {
    VectorField step = warp_vector(v, phi);
    phi.displacement().axpy(cfg.dt(), step);
  }
  return phi;
}

GeodesicPath shoot(const ShootingConfig& cfg, const VectorField& v0) {
  GeodesicPath path;
  path.velocities = integrate_epdiff(cfg, v0);
  path.inverse_map = integrate_inverse_flow(cfg, path.velocities);
  path.forward_map = integrate_forward_flow(cfg, path.velocities);
  return path;
}

}  // namespace lamod
