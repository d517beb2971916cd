#pragma once

// Pairwise diffeomorphic registration by geodesic shooting.
//
//   E(v0) = dist / (2 sigma^2) + <L v0, v0>,   dist = sum (S o phi_1^{-1} - I)^2
//
// Gradients are exact for the discrete objective: the Euler EPDiff steps, the
// semi-Lagrangian inverse flow and the final bilinear warp are differentiated
// in reverse order.

#include <utility>
#include <vector>

#include "lamod/geodesic.hpp"
#include "lamod/grid.hpp"
#include "lamod/nn/tensor.hpp"

namespace lamod {

enum class PairOptimizer {
  // Gradient descent on v0 in the metric of L (gradient preconditioned by K)
  // with an adaptive step: grown by 1.2 after an accepted step, halved and
  // retried after a step that raises the energy or diverges.
  SobolevDescent,
  // Plain Adam on the pixelwise gradient, every step accepted.
  Adam,
};

struct RegistrationConfig {
  ShootingConfig shooting;
  double sigma = 0.01;
  // Step size for training the registration network.
  double learning_rate = 1e-4;
  PairOptimizer optimizer = PairOptimizer::SobolevDescent;
  // Initial step of SobolevDescent, or the Adam learning rate.
  double pair_learning_rate = 0.01;
  int max_iterations = 500;
  double convergence_tol = 1e-6;

  explicit RegistrationConfig(ShootingConfig s);
  void validate() const;
};

struct EnergyTerms {
  double total = 0.0;
  double dist = 0.0;
  double reg = 0.0;
};

struct RegistrationResult {
  VectorField v0;
  GeodesicPath path;
  std::vector<double> energy_trace;
  ScalarField warped_source;
};

EnergyTerms energy(const RegistrationConfig& cfg, const VectorField& v0, const ScalarField& source,
                   const ScalarField& target);

// Energy and its exact gradient with respect to v0. Throws DivergenceError
// if the gradient is not finite.
std::pair<EnergyTerms, VectorField> energy_with_gradient(const RegistrationConfig& cfg, const VectorField& v0,
                                                         const ScalarField& source, const ScalarField& target);

VectorField energy_gradient(const RegistrationConfig& cfg, const VectorField& v0, const ScalarField& source,
                            const ScalarField& target);

// Optimizes v0 from zero. energy_trace[0] is the initial energy, then one
// entry per accepted step. Stops after max_iterations steps, when the relative
// decrease of a step falls below convergence_tol, or (SobolevDescent) when the
// step size has collapsed.
RegistrationResult register_pair(const RegistrationConfig& cfg, const ScalarField& source, const ScalarField& target);

using ImagePair = std::pair<ScalarField, ScalarField>;

// (I^0, I^tau) for tau = 1..T.
std::vector<ImagePair> build_pairs(const FieldSequence<ScalarField>& seq);

// Packs pairs as a (T, 2, H, W) tensor: channel 0 source, channel 1 target.
nn::Tensor pairs_to_tensor(const std::vector<ImagePair>& pairs);

// Velocity tensors (T, 2, H, W) <-> fields; channel 0 is x, channel 1 is y.
nn::Tensor fields_to_tensor(const std::vector<VectorField>& fields);
std::vector<VectorField> tensor_to_fields(const nn::Tensor& t, const Grid2& grid);

// Mean registration energy over a batch of velocities (T, 2, H, W) and pairs,
// differentiable with respect to v0_batch.
nn::Tensor registration_network_loss(const RegistrationConfig& cfg, const nn::Tensor& v0_batch,
                                     const std::vector<ImagePair>& pairs);

}  // namespace lamod
