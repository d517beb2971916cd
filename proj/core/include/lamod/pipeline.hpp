#pragma once

// End-to-end glue: registration network training, latent encoding,
// registration-only motion, and diffusion-refined motion.

#include <functional>
#include <random>
#include <vector>

#include "lamod/diffusion.hpp"
#include "lamod/nn/networks.hpp"
#include "lamod/phantom.hpp"
#include "lamod/registration.hpp"

namespace lamod {

// Initial velocities predicted for every (I^0, I^tau) pair of a sequence.
std::vector<VectorField> predict_velocities(const nn::RegistrationNetwork& net, const FieldSequence<ScalarField>& images);

// Frame-0-to-frame-tau displacement of each shot: phi_1 - id.
std::vector<VectorField> displacements_from_velocities(const ShootingConfig& cfg,
                                                       const std::vector<VectorField>& velocities);

std::vector<VectorField> registration_displacements(const RegistrationConfig& cfg, const nn::RegistrationNetwork& net,
                                                    const FieldSequence<ScalarField>& images);

// Encoder latents (T, C, h, w) of a sequence, detached and multiplied by `scale`.
nn::Tensor encode_latents(const nn::RegistrationNetwork& net, const FieldSequence<ScalarField>& images,
                          double scale = 1.0);

// 1 / standard deviation of all latent values (1 when they are constant).
double latent_scale(const std::vector<nn::Tensor>& latents);

struct RegistrationEpoch {
  int epoch = 0;
  double mean_energy = 0.0;
};

// Adam on registration_network_loss, one sequence (T pairs) per step, for
// `epochs` passes over `sequences` in seeded random order.
std::vector<RegistrationEpoch> train_registration_network(
    const RegistrationConfig& cfg, nn::RegistrationNetwork& net,
    const std::vector<FieldSequence<ScalarField>>& sequences, int epochs, double learning_rate, std::uint64_t seed,
    const std::function<void(const RegistrationEpoch&)>& on_epoch = {});

// Motion tensor (T, 2, H, W) and mask weights for a phantom sample.
TrainingItem make_training_item(const nn::Tensor& latent, const PhantomSample& sample);

// Diffusion-refined displacements for one sequence.
std::vector<VectorField> lamod_infer(const nn::RegistrationNetwork& net, double scale, const nn::NoisePredictor& eps,
                                     const nn::MotionDecoder& decoder, const NoiseSchedule& s,
                                     const SmoothingKernel& k, const FieldSequence<ScalarField>& images,
                                     std::mt19937_64& rng);

}  // namespace lamod
