#pragma once

// Latent motion diffusion with smoothed Gaussian noise.
//
//   forward step    z_m = sqrt(1 - beta_m) z_{m-1} + sqrt(beta_m) K(eps)
//   closed form     z_m = sqrt(abar_m) z_0 + sqrt(1 - abar_m) K(eps)
//   reverse step    z_{m-1} = (z_m - beta_m / sqrt(1 - abar_m) eps_theta(z_m, m)) / sqrt(alpha_m)
//                             + sigma_m K(gamma),  sigma_m^2 = beta_m, no noise at m = 1
//
// K is the Gaussian SmoothingKernel. Steps are 1-based.

#include <cstdint>
#include <functional>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "lamod/metric.hpp"
#include "lamod/nn/networks.hpp"
#include "lamod/nn/tensor.hpp"

namespace lamod {

struct NoiseSchedule {
  int steps = 0;  // M
  std::vector<double> beta, alpha, alpha_bar, sigma;  // index m - 1
};

// Linear beta from beta_start to beta_end over M steps. M = 0 gives an empty
// schedule (inference then skips diffusion entirely).
NoiseSchedule make_schedule(int steps, double beta_start, double beta_end);

struct DiffusionConfig {
  NoiseSchedule schedule = make_schedule(100, 1e-4, 0.02);
  SmoothingKernel kernel = SmoothingKernel::make(1.0, 3);
  double loss_alpha = 1e-2;
  double lambda_eps = 1e-4;
  double lambda_motion = 1e-4;
  double learning_rate = 1e-4;
  std::size_t batch_size = 32;
  int max_epochs = 2000;
  int patience = 50;
  bool squared_noise_loss = true;
  // Restrict the motion loss to the myocardium mask of each sequence.
  bool masked_motion_loss = false;
  std::uint64_t seed = 0;

  void validate() const;
};

using NoiseModel = std::function<nn::Tensor(const nn::Tensor& z, int m)>;
using MotionModel = std::function<nn::Tensor(const nn::Tensor& z)>;

// Standard normal tensor of the given shape.
nn::Tensor gaussian_like(const nn::Shape& shape, std::mt19937_64& rng);

nn::Tensor forward_step(const NoiseSchedule& s, const SmoothingKernel& k, const nn::Tensor& z_prev, int m,
                        const nn::Tensor& eps);
nn::Tensor forward_sample(const NoiseSchedule& s, const SmoothingKernel& k, const nn::Tensor& z0, int m,
                          const nn::Tensor& eps);
nn::Tensor reverse_step(const NoiseSchedule& s, const SmoothingKernel& k, const nn::Tensor& z_m, int m,
                        const NoiseModel& model, const nn::Tensor& gamma);

// Sum over the batch of ||K(eps) - eps_theta(z_m, m)||^2 (or the unsquared
// norm), with m and eps drawn per item from rng. Differentiable in the model.
nn::Tensor diffusion_loss(const std::vector<nn::Tensor>& z0, const NoiseModel& model, const NoiseSchedule& s,
                          const SmoothingKernel& k, std::mt19937_64& rng, bool squared = true);

// Mean over sequences of the summed squared displacement error. `masks`, when
// given, holds one (H, W) 0/1 weight array per sequence.
nn::Tensor motion_loss(const std::vector<nn::Tensor>& z0, const std::vector<nn::Tensor>& truth,
                       const MotionModel& decoder, const std::vector<std::vector<double>>* masks = nullptr);

struct TrainingItem {
  nn::Tensor latent;            // (T, C, h, w), clean encoder output
  nn::Tensor motion;            // (T, 2, H, W) ground-truth displacement
  std::vector<double> mask;     // (H, W) myocardium weights
};

struct EpochLog {
  int epoch = 0;
  std::string split;
  double l_diffusion = 0.0;
  double l_motion = 0.0;
  double l_total = 0.0;
};

struct TrainState {
  int epoch = 0;  // epochs completed
  double best_validation = 0.0;
  bool has_best = false;
  int epochs_since_best = 0;
  std::vector<std::vector<double>> best_eps_params;
  std::vector<std::vector<double>> best_motion_params;
};

struct TrainResult {
  std::vector<EpochLog> log;
  bool early_stopped = false;
};

// Joint training of the noise predictor and motion decoder. Runs until
// cfg.max_epochs epochs are complete (counting those already in `state`) or
// validation l_total has not improved for cfg.patience epochs, then restores
// the best-validation parameters. `on_epoch` is called after every epoch.
TrainResult train(const std::vector<TrainingItem>& train_items, const std::vector<TrainingItem>& validation_items,
                  const DiffusionConfig& cfg, nn::NoisePredictor& eps_model, nn::MotionDecoder& decoder,
                  TrainState& state, const std::function<void(const EpochLog&)>& on_epoch = {});

// Algorithm: encode, noise to step M in closed form, M reverse steps,
// decode. Consumes M calls of the noise model.
nn::Tensor infer_from_latent(const nn::Tensor& z0, const NoiseSchedule& s, const SmoothingKernel& k,
                             const NoiseModel& model, const MotionModel& decoder, std::mt19937_64& rng);

}  // namespace lamod
