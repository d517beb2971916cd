#pragma once

// Run configuration: one JSON document with a section per module. Unknown
// keys are rejected; omitted keys keep their defaults.

#include <cstdint>
#include <filesystem>
#include <string>

#include "lamod/diffusion.hpp"
#include "lamod/metric.hpp"
#include "lamod/nn/networks.hpp"
#include "lamod/phantom.hpp"
#include "lamod/registration.hpp"

namespace lamod::io {

struct RunConfig {
  struct Grid {
    int height = 64;
    int width = 64;
    double spacing = 1.0;
  } grid;

  MetricParams metric;

  struct Shooting {
    int num_steps = 10;
  } shooting;

  struct Registration {
    double sigma = 0.01;
    double learning_rate = 1e-4;
    std::string pair_optimizer = "sobolev";  // or "adam"
    double pair_learning_rate = 0.01;
    int max_iterations = 500;
    double convergence_tol = 1e-6;
    int network_epochs = 40;
  } registration;

  struct Nets {
    std::size_t base_channels = 16;
    std::size_t latent_channels = 16;
    std::size_t num_down = 2;
    std::size_t time_embed_dim = 32;
  } nets;

  struct Diffusion {
    int steps = 100;
    double beta_start = 1e-4;
    double beta_end = 0.02;
    double kernel_std = 1.0;
    int kernel_radius = 3;
    double loss_alpha = 1e-2;
    double lambda_eps = 1e-4;
    double lambda_motion = 1e-4;
    double learning_rate = 1e-4;
    std::size_t batch_size = 32;
    int max_epochs = 2000;
    int patience = 50;
    bool squared_noise_loss = true;
    bool masked_motion_loss = false;
    // Divide encoder latents by their training-set standard deviation.
    bool normalize_latents = true;
  } diffusion;

  struct Phantom {
    int frames = 8;
    double r_inner = 12.0;
    double r_outer = 20.0;
    double contraction_amp = 0.15;
    double twist_amp = 0.2;
    double intensity_std = 1.0;
    int supersample = 4;
    PhantomRanges ranges;
  } phantom;

  std::uint64_t seed = 0;

  Grid2 make_grid() const;
  MetricOperator make_metric() const;
  ShootingConfig make_shooting() const;
  RegistrationConfig make_registration() const;
  nn::UNetConfig make_unet() const;
  DiffusionConfig make_diffusion() const;
  PhantomConfig make_phantom() const;

  // Checks cross-field invariants by building every derived config.
  void validate() const;
};

// Throws ConfigError naming the offending key.
RunConfig parse_config(const std::string& json_text);
RunConfig load_config(const std::filesystem::path& path);
// Every key with its current value, pretty-printed.
std::string dump_config(const RunConfig& cfg);

}  // namespace lamod::io
