#include "lamod/registration.hpp"

#include <algorithm>
#include <cmath>
#include <string>
#include <tuple>

#include "lamod/error.hpp"
#include "lamod/nn/parameters.hpp"
#include "lamod/parallel.hpp"

namespace lamod {

RegistrationConfig::RegistrationConfig(ShootingConfig s) : shooting(std::move(s)) {}

void RegistrationConfig::validate() const {
  if (!(sigma > 0.0)) throw UsageError("registration: sigma must be positive");
  if (!(learning_rate > 0.0) || !(pair_learning_rate > 0.0)) {
    throw UsageError("registration: learning rates must be positive");
  }
  if (max_iterations < 1) throw UsageError("registration: max_iterations must be >= 1");
  if (!(convergence_tol > 0.0)) throw UsageError("registration: convergence_tol must be positive");
}

namespace {

void require_grids(const RegistrationConfig& cfg, const VectorField& v0, const ScalarField& source,
                   const ScalarField& target) {
  const Grid2& g = cfg.shooting.op.grid();
  if (!(v0.grid == g) || !(source.grid == g) || !(target.grid == g)) {
    throw DimensionError("registration: v0, source and target must share the operator grid");
  }
}

struct Forward {
  std::vector<VectorField> velocities;
  std::vector<MapField> inverse_maps;  // psi_0 .. psi_N
  ScalarField warped;
  EnergyTerms terms;
};

Forward run_forward(const RegistrationConfig& cfg, const VectorField& v0, const ScalarField& source,
                    const ScalarField& target, bool keep_maps) {
  Forward f;
  f.velocities = integrate_epdiff(cfg.shooting, v0);
  MapField psi = MapField::identity(v0.grid);
  if (keep_maps) f.inverse_maps.push_back(psi);
  for (const auto& v : f.velocities) {
    psi = inverse_flow_step(psi, v, cfg.shooting.dt());
    if (keep_maps) f.inverse_maps.push_back(psi);
  }
  f.warped = interpolate(source, psi);
  double dist = 0.0;
  for (std::size_t k = 0; k < target.values.size(); ++k) {
    const double r = f.warped.values[k] - target.values[k];
    dist += r * r;
  }
  f.terms.dist = dist;
  f.terms.reg = metric_norm(cfg.shooting.op, v0);
  f.terms.total = dist / (2.0 * cfg.sigma * cfg.sigma) + f.terms.reg;
  if (!keep_maps) f.inverse_maps.push_back(std::move(psi));
  return f;
}

}  // namespace

EnergyTerms energy(const RegistrationConfig& cfg, const VectorField& v0, const ScalarField& source,
                   const ScalarField& target) {
  require_grids(cfg, v0, source, target);
  return run_forward(cfg, v0, source, target, false).terms;
}

std::pair<EnergyTerms, VectorField> energy_with_gradient(const RegistrationConfig& cfg, const VectorField& v0,
                                                         const ScalarField& source, const ScalarField& target) {
  require_grids(cfg, v0, source, target);
  const Forward f = run_forward(cfg, v0, source, target, true);
  const Grid2& grid = v0.grid;
  const double dt = cfg.shooting.dt();
  const std::size_t n = f.velocities.size();

  // Final warp: warped = S(psi_N).
  std::vector<double> dwarped(grid.size());
  const double inv_s2 = 1.0 / (cfg.sigma * cfg.sigma);
  for (std::size_t k = 0; k < dwarped.size(); ++k) dwarped[k] = (f.warped.values[k] - target.values[k]) * inv_s2;
  VectorField gd(grid);
  interpolate_adjoint_map(source.values, dwarped, f.inverse_maps[n], gd);

  // Inverse flow: d_{k+1} = d_k(x - dt v_k) - dt v_k.
  std::vector<VectorField> gv(n, VectorField(grid));
  for (std::size_t k = n; k-- > 0;) {
    const MapField sample_at = MapField::from_displacement(-dt * f.velocities[k]);
    const VectorField& dk = f.inverse_maps[k].displacement();
    VectorField gy(grid);
    VectorField gd_prev(grid);
    for (int c = 0; c < 2; ++c) {
      interpolate_adjoint_map(dk.component(c), gd.component(c), sample_at, gy);
      interpolate_adjoint_field(gd.component(c), sample_at, gd_prev.component(c));
    }
    gy += gd;
    gv[k].axpy(-dt, gy);
    gd = std::move(gd_prev);
  }

  // EPDiff: v_{k+1} = v_k + dt rhs(v_k).
  for (std::size_t k = n - 1; k-- > 0;) {
    gv[k] += gv[k + 1];
    gv[k].axpy(dt, epdiff_rhs_vjp(cfg.shooting.op, f.velocities[k], gv[k + 1]));
  }

  VectorField grad = std::move(gv[0]);
  grad.axpy(2.0, cfg.shooting.op.apply_L(v0));
  if (!grad.all_finite()) throw DivergenceError("energy_gradient: non-finite gradient");
  return {f.terms, std::move(grad)};
}

VectorField energy_gradient(const RegistrationConfig& cfg, const VectorField& v0, const ScalarField& source,
                            const ScalarField& target) {
  return energy_with_gradient(cfg, v0, source, target).second;
}

namespace {

void flatten(const VectorField& f, std::vector<double>& out) {
  out.resize(2 * f.grid.size());
  std::copy(f.x.begin(), f.x.end(), out.begin());
  std::copy(f.y.begin(), f.y.end(), out.begin() + static_cast<std::ptrdiff_t>(f.grid.size()));
}

void unflatten(const std::vector<double>& in, VectorField& f) {
  const auto n = static_cast<std::ptrdiff_t>(f.grid.size());
  std::copy(in.begin(), in.begin() + n, f.x.begin());
  std::copy(in.begin() + n, in.end(), f.y.begin());
}

bool converged(double prev, double cur, double tol) { return prev > 0.0 && std::abs(prev - cur) / prev < tol; }

void sobolev_descent(const RegistrationConfig& cfg, const ScalarField& source, const ScalarField& target,
                     RegistrationResult& res) {
  auto [terms, grad] = energy_with_gradient(cfg, res.v0, source, target);
  res.energy_trace.push_back(terms.total);
  double step = cfg.pair_learning_rate;
  const double min_step = cfg.pair_learning_rate * 1e-10;
  for (int it = 0; it < cfg.max_iterations && terms.total > 0.0; ++it) {
    const VectorField dir = cfg.shooting.op.apply_K(grad);
    bool accepted = false;
    while (!accepted && step >= min_step) {
      VectorField trial = res.v0;
      trial.axpy(-step, dir);
      try {
        auto [t_terms, t_grad] = energy_with_gradient(cfg, trial, source, target);
        if (t_terms.total <= terms.total) {
          accepted = true;
          const double prev = terms.total;
          res.v0 = std::move(trial);
          terms = t_terms;
          grad = std::move(t_grad);
          res.energy_trace.push_back(terms.total);
          step *= 1.2;
          if (converged(prev, terms.total, cfg.convergence_tol)) return;
        } else {
          step *= 0.5;
        }
      } catch (const DivergenceError&) {
        step *= 0.5;
      }
    }
    if (!accepted) return;
  }
}

void adam(const RegistrationConfig& cfg, const ScalarField& source, const ScalarField& target,
          RegistrationResult& res) {
  const std::size_t n = 2 * res.v0.grid.size();
  nn::AdamState st;
  st.m.assign(n, 0.0);
  st.v.assign(n, 0.0);
  std::vector<double> params(n, 0.0), g;
  auto [terms, grad] = energy_with_gradient(cfg, res.v0, source, target);
  res.energy_trace.push_back(terms.total);
  for (int it = 0; it < cfg.max_iterations && terms.total > 0.0; ++it) {
    flatten(grad, g);
    nn::adam_update(params, g, st, cfg.pair_learning_rate, 0.0);
    unflatten(params, res.v0);
    const double prev = terms.total;
    std::tie(terms, grad) = energy_with_gradient(cfg, res.v0, source, target);
    if (!std::isfinite(terms.total)) {
      throw DivergenceError("register_pair: non-finite energy at iteration " + std::to_string(it + 1));
    }
    res.energy_trace.push_back(terms.total);
    if (converged(prev, terms.total, cfg.convergence_tol)) return;
  }
}

}  // namespace

RegistrationResult register_pair(const RegistrationConfig& cfg, const ScalarField& source, const ScalarField& target) {
  cfg.validate();
  RegistrationResult res;
  res.v0 = VectorField(cfg.shooting.op.grid());
  require_grids(cfg, res.v0, source, target);
  if (cfg.optimizer == PairOptimizer::Adam) {
    adam(cfg, source, target, res);
  } else {
    sobolev_descent(cfg, source, target, res);
  }
  res.path = shoot(cfg.shooting, res.v0);
  res.warped_source = interpolate(source, res.path.inverse_map);
  return res;
}

std::vector<ImagePair> build_pairs(const FieldSequence<ScalarField>& seq) {
  if (seq.size() < 2) throw UsageError("build_pairs: need at least 2 frames, got " + std::to_string(seq.size()));
  require_shared_grid(seq);
  std::vector<ImagePair> pairs;
  pairs.reserve(seq.size() - 1);
  for (std::size_t t = 1; t < seq.size(); ++t) pairs.emplace_back(seq[0], seq[t]);
  return pairs;
}

nn::Tensor pairs_to_tensor(const std::vector<ImagePair>& pairs) {
  if (pairs.empty()) throw UsageError("pairs_to_tensor: no pairs");
  const Grid2& g = pairs.front().first.grid;
  const std::size_t hw = g.size();
  std::vector<double> vals(pairs.size() * 2 * hw);
  for (std::size_t t = 0; t < pairs.size(); ++t) {
    if (!(pairs[t].first.grid == g) || !(pairs[t].second.grid == g)) {
      throw DimensionError("pairs_to_tensor: pairs do not share a grid");
    }
    std::copy(pairs[t].first.values.begin(), pairs[t].first.values.end(), vals.begin() + (2 * t) * hw);
    std::copy(pairs[t].second.values.begin(), pairs[t].second.values.end(), vals.begin() + (2 * t + 1) * hw);
  }
  return nn::Tensor::from({pairs.size(), 2, static_cast<std::size_t>(g.height), static_cast<std::size_t>(g.width)},
                          std::move(vals));
}

nn::Tensor fields_to_tensor(const std::vector<VectorField>& fields) {
  if (fields.empty()) throw UsageError("fields_to_tensor: no fields");
  const Grid2& g = fields.front().grid;
  const std::size_t hw = g.size();
  std::vector<double> vals(fields.size() * 2 * hw);
  for (std::size_t t = 0; t < fields.size(); ++t) {
    if (!(fields[t].grid == g)) throw DimensionError("fields_to_tensor: fields do not share a grid");
    std::copy(fields[t].x.begin(), fields[t].x.end(), vals.begin() + (2 * t) * hw);
    std::copy(fields[t].y.begin(), fields[t].y.end(), vals.begin() + (2 * t + 1) * hw);
  }
  return nn::Tensor::from({fields.size(), 2, static_cast<std::size_t>(g.height), static_cast<std::size_t>(g.width)},
                          std::move(vals));
}

std::vector<VectorField> tensor_to_fields(const nn::Tensor& t, const Grid2& grid) {
  const auto& s = t.shape();
  if (s.size() != 4 || s[1] != 2 || s[2] != static_cast<std::size_t>(grid.height) ||
      s[3] != static_cast<std::size_t>(grid.width)) {
    throw ShapeError("tensor_to_fields: expected (T, 2, " + std::to_string(grid.height) + ", " +
                     std::to_string(grid.width) + "), got " + nn::shape_string(s));
  }
  const std::size_t hw = grid.size();
  auto vals = t.values();
  std::vector<VectorField> out(s[0], VectorField(grid));
  for (std::size_t k = 0; k < s[0]; ++k) {
    std::copy(vals.begin() + (2 * k) * hw, vals.begin() + (2 * k + 1) * hw, out[k].x.begin());
    std::copy(vals.begin() + (2 * k + 1) * hw, vals.begin() + (2 * k + 2) * hw, out[k].y.begin());
  }
  return out;
}

nn::Tensor registration_network_loss(const RegistrationConfig& cfg, const nn::Tensor& v0_batch,
                                     const std::vector<ImagePair>& pairs) {
  const Grid2& grid = cfg.shooting.op.grid();
  const auto v0s = tensor_to_fields(v0_batch, grid);
  if (v0s.size() != pairs.size()) {
    throw ShapeError("registration_network_loss: " + std::to_string(v0s.size()) + " velocities for " +
                     std::to_string(pairs.size()) + " pairs");
  }
  const std::size_t n = pairs.size();
  const bool need_grad = v0_batch.requires_grad();
  std::vector<double> energies(n);
  std::vector<VectorField> grads(need_grad ? n : 0);
  parallel_for(n, [&](std::size_t k) {
    if (need_grad) {
      auto [terms, g] = energy_with_gradient(cfg, v0s[k], pairs[k].first, pairs[k].second);
      energies[k] = terms.total;
      grads[k] = std::move(g);
    } else {
      energies[k] = energy(cfg, v0s[k], pairs[k].first, pairs[k].second).total;
    }
  });
  double mean = 0.0;
  for (double e : energies) mean += e;
  mean /= static_cast<double>(n);

  auto gflat = std::make_shared<std::vector<double>>();
  if (need_grad) {
    gflat->resize(v0_batch.numel());
    const std::size_t hw = grid.size();
    for (std::size_t k = 0; k < n; ++k) {
      std::copy(grads[k].x.begin(), grads[k].x.end(), gflat->begin() + (2 * k) * hw);
      std::copy(grads[k].y.begin(), grads[k].y.end(), gflat->begin() + (2 * k + 1) * hw);
    }
  }
  const double inv_n = 1.0 / static_cast<double>(n);
  return nn::make_result({1}, {mean}, {v0_batch}, [gflat, inv_n](nn::Node& self) {
    const double up = self.grad[0] * inv_n;
    auto& pg = self.parents[0]->grad;
    for (std::size_t k = 0; k < pg.size(); ++k) pg[k] += up * (*gflat)[k];
  });
}

}  // namespace lamod
