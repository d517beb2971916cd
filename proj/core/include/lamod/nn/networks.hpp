#pragma once

// The four networks: registration encoder/decoder, noise predictor and
// motion decoder. All are small UNet-style stacks of 3x3 convolutions.
//
// The registration encoder and decoder act on each frame independently (the
// frame axis is the batch axis). The noise predictor and motion decoder fold
// the T frames into channels so their convolutions mix frames.

#include <cstdint>
#include <string>
#include <vector>

#include "lamod/nn/ops.hpp"
#include "lamod/nn/parameters.hpp"

namespace lamod::nn {

struct UNetConfig {
  std::size_t in_channels = 2;
  std::size_t base_channels = 16;
  std::size_t latent_channels = 16;
  std::size_t num_down = 2;
  std::size_t time_embed_dim = 32;
  // Zero the last layer of every decoder-like network so that a fresh model
  // predicts zero.
  bool zero_init_output = true;
  std::uint64_t seed = 0;

  void validate() const;
};

struct LatentFeatures {
  Tensor z;  // (T, C, h, w)
  std::size_t height = 0;  // original H
  std::size_t width = 0;   // original W
  std::size_t factor = 1;  // H / h

  std::size_t frames() const { return z.dim(0); }
};

// Skip activations kept by the encoder for the velocity decoder; index l is
// the output of level l (full resolution first).
struct EncoderOutput {
  LatentFeatures latent;
  std::vector<Tensor> skips;
};

// Per-frame UNet: image pairs (T, 2, H, W) -> latents -> velocities (T, 2, H, W).
class RegistrationNetwork {
 public:
  explicit RegistrationNetwork(const UNetConfig& cfg);

  EncoderOutput encode(const Tensor& pairs) const;
  Tensor decode(const EncoderOutput& enc) const;
  Tensor forward(const Tensor& pairs) const { return decode(encode(pairs)); }

  const UNetConfig& config() const noexcept { return cfg_; }
  ParameterStore& parameters() noexcept { return params_; }
  const ParameterStore& parameters() const noexcept { return params_; }

 private:
  UNetConfig cfg_;
  ParameterStore params_;
};

// Sinusoidal embedding of the step index: (1, dim).
Tensor step_embedding(int m, std::size_t dim);

// Noise predictor over latents (T, C, h, w) for a fixed T.
class NoisePredictor {
 public:
  NoisePredictor(const UNetConfig& cfg, std::size_t frames, int num_steps);

  Tensor forward(const Tensor& z_noisy, int m) const;

  std::size_t frames() const noexcept { return frames_; }
  int num_steps() const noexcept { return num_steps_; }
  ParameterStore& parameters() noexcept { return params_; }
  const ParameterStore& parameters() const noexcept { return params_; }

 private:
  UNetConfig cfg_;
  std::size_t frames_;
  int num_steps_;
  ParameterStore params_;
};

// Latents (T, C, h, w) -> displacements (T, 2, H, W).
class MotionDecoder {
 public:
  MotionDecoder(const UNetConfig& cfg, std::size_t frames);

  Tensor forward(const Tensor& z) const;

  std::size_t frames() const noexcept { return frames_; }
  ParameterStore& parameters() noexcept { return params_; }
  const ParameterStore& parameters() const noexcept { return params_; }

 private:
  UNetConfig cfg_;
  std::size_t frames_;
  ParameterStore params_;
};

}  // namespace lamod::nn
