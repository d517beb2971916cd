#include "lamod/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "lamod/error.hpp"

namespace lamod {

std::vector<VectorField> predict_velocities(const nn::RegistrationNetwork& net,
                                            const FieldSequence<ScalarField>& images) {
  const auto pairs = build_pairs(images);
  return tensor_to_fields(net.forward(pairs_to_tensor(pairs)), images.front().grid);
}

std::vector<VectorField> displacements_from_velocities(const ShootingConfig& cfg,
                                                       const std::vector<VectorField>& velocities) {
  std::vector<VectorField> out;
  out.reserve(velocities.size());
  for (const auto& v : velocities) out.push_back(shoot(cfg, v).forward_map.displacement());
  return out;
}

std::vector<VectorField> registration_displacements(const RegistrationConfig& cfg, const nn::RegistrationNetwork& net,
                                                    const FieldSequence<ScalarField>& images) {
  return displacements_from_velocities(cfg.shooting, predict_velocities(net, images));
}

nn::Tensor encode_latents(const nn::RegistrationNetwork& net, const FieldSequence<ScalarField>& images, double scale) {
  const auto pairs = build_pairs(images);
  nn::Tensor z = net.encode(pairs_to_tensor(pairs)).latent.z.detach();
  if (scale != 1.0) {
    for (auto& v : z.values()) v *= scale;
  }
  return z;
}

double latent_scale(const std::vector<nn::Tensor>& latents) {
  double sum = 0.0, sq = 0.0;
  std::size_t n = 0;
  for (const auto& z : latents) {
    for (double v : z.values()) {
      sum += v;
      sq += v * v;
      ++n;
    }
  }
  if (n == 0) throw UsageError("latent_scale: no latents");
  const double mean = sum / static_cast<double>(n);
  const double var = sq / static_cast<double>(n) - mean * mean;
  return var > 0.0 ? 1.0 / std::sqrt(var) : 1.0;
}

std::vector<RegistrationEpoch> train_registration_network(
    const RegistrationConfig& cfg, nn::RegistrationNetwork& net,
    const std::vector<FieldSequence<ScalarField>>& sequences, int epochs, double learning_rate, std::uint64_t seed,
    const std::function<void(const RegistrationEpoch&)>& on_epoch) {
  if (sequences.empty()) throw UsageError("train_registration_network: no sequences");
  std::vector<std::vector<ImagePair>> pairs;
  std::vector<nn::Tensor> inputs;
  for (const auto& s : sequences) {
    pairs.push_back(build_pairs(s));
    inputs.push_back(pairs_to_tensor(pairs.back()));
  }
  std::vector<RegistrationEpoch> log;
  std::vector<std::size_t> order(sequences.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::mt19937_64 rng(seed);
  for (int e = 1; e <= epochs; ++e) {
    std::shuffle(order.begin(), order.end(), rng);
    double total = 0.0;
    for (std::size_t k : order) {
      net.parameters().zero_grad();
      const nn::Tensor loss = registration_network_loss(cfg, net.forward(inputs[k]), pairs[k]);
      nn::backward(loss);
      nn::adam_step(net.parameters(), learning_rate, 0.0);
      total += loss.item();
    }
    log.push_back({e, total / static_cast<double>(order.size())});
    if (on_epoch) on_epoch(log.back());
  }
  return log;
}

TrainingItem make_training_item(const nn::Tensor& latent, const PhantomSample& sample) {
  TrainingItem it;
  it.latent = latent;
  it.motion = fields_to_tensor(sample.motions);
  it.mask.assign(sample.mask.labels.begin(), sample.mask.labels.end());
  return it;
}

std::vector<VectorField> lamod_infer(const nn::RegistrationNetwork& net, double scale, const nn::NoisePredictor& eps,
                                     const nn::MotionDecoder& decoder, const NoiseSchedule& s,
                                     const SmoothingKernel& k, const FieldSequence<ScalarField>& images,
                                     std::mt19937_64& rng) {
  const nn::Tensor z0 = encode_latents(net, images, scale);
  const NoiseModel em = [&](const nn::Tensor& x, int m) { return eps.forward(x, m); };
  const MotionModel dm = [&](const nn::Tensor& x) { return decoder.forward(x); };
  const nn::Tensor phi = infer_from_latent(z0, s, k, em, dm, rng);
  return tensor_to_fields(phi, images.front().grid);
}

}  // namespace lamod
