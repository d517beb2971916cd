#include "lamod/diffusion.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "lamod/error.hpp"
#include "lamod/nn/ops.hpp"

namespace lamod {

NoiseSchedule make_schedule(int steps, double beta_start, double beta_end) {
  if (steps < 0) throw UsageError("make_schedule: steps must be >= 0");
  if (!(beta_start > 0.0 && beta_start <= beta_end && beta_end < 1.0)) {
    throw UsageError("make_schedule: need 0 < beta_start <= beta_end < 1");
  }
  NoiseSchedule s;
  s.steps = steps;
  double bar = 1.0;
  for (int m = 1; m <= steps; ++m) {
    const double t = steps == 1 ? 0.0 : static_cast<double>(m - 1) / (steps - 1);
    const double b = beta_start + (beta_end - beta_start) * t;
    bar *= 1.0 - b;
    s.beta.push_back(b);
    s.alpha.push_back(1.0 - b);
    s.alpha_bar.push_back(bar);
    s.sigma.push_back(std::sqrt(b));
  }
  return s;
}

void DiffusionConfig::validate() const {
  if (!(loss_alpha >= 0.0) || !(lambda_eps >= 0.0) || !(lambda_motion >= 0.0)) {
    throw UsageError("diffusion: loss weights and weight decays must be >= 0");
  }
  if (!(learning_rate > 0.0)) throw UsageError("diffusion: learning_rate must be positive");
  if (batch_size == 0) throw UsageError("diffusion: batch_size must be positive");
  if (max_epochs < 1 || patience < 1) throw UsageError("diffusion: max_epochs and patience must be >= 1");
}

nn::Tensor gaussian_like(const nn::Shape& shape, std::mt19937_64& rng) {
  std::normal_distribution<double> n(0.0, 1.0);
  std::vector<double> v(nn::numel(shape));
  for (auto& x : v) x = n(rng);
  return nn::Tensor::from(shape, std::move(v));
}

namespace {

void require_step(const NoiseSchedule& s, int m, const char* op) {
  if (m < 1 || m > s.steps) {
    throw UsageError(std::string(op) + ": step " + std::to_string(m) + " outside 1.." + std::to_string(s.steps));
  }
}

void require_like(const nn::Tensor& a, const nn::Tensor& b, const char* op) {
  if (a.shape() != b.shape()) {
    throw ShapeError(std::string(op) + ": noise " + nn::shape_string(b.shape()) + " does not match latent " +
                     nn::shape_string(a.shape()));
  }
}

// a * x + b * y elementwise, outside any graph.
nn::Tensor combine(double a, const nn::Tensor& x, double b, const nn::Tensor& y) {
  auto xv = x.values();
  auto yv = y.values();
  std::vector<double> out(xv.size());
  for (std::size_t k = 0; k < out.size(); ++k) out[k] = a * xv[k] + b * yv[k];
  return nn::Tensor::from(x.shape(), std::move(out));
}

}  // namespace

nn::Tensor forward_step(const NoiseSchedule& s, const SmoothingKernel& k, const nn::Tensor& z_prev, int m,
                        const nn::Tensor& eps) {
  require_step(s, m, "forward_step");
  require_like(z_prev, eps, "forward_step");
  const double b = s.beta[static_cast<std::size_t>(m - 1)];
  return combine(std::sqrt(1.0 - b), z_prev, std::sqrt(b), smooth_noise(k, eps));
}

nn::Tensor forward_sample(const NoiseSchedule& s, const SmoothingKernel& k, const nn::Tensor& z0, int m,
                          const nn::Tensor& eps) {
  require_step(s, m, "forward_sample");
  require_like(z0, eps, "forward_sample");
  const double ab = s.alpha_bar[static_cast<std::size_t>(m - 1)];
  return combine(std::sqrt(ab), z0, std::sqrt(1.0 - ab), smooth_noise(k, eps));
}

nn::Tensor reverse_step(const NoiseSchedule& s, const SmoothingKernel& k, const nn::Tensor& z_m, int m,
                        const NoiseModel& model, const nn::Tensor& gamma) {
  require_step(s, m, "reverse_step");
  require_like(z_m, gamma, "reverse_step");
  const std::size_t i = static_cast<std::size_t>(m - 1);
  const nn::Tensor pred = model(z_m, m);
  require_like(z_m, pred, "reverse_step");
  const double inv_sqrt_a = 1.0 / std::sqrt(s.alpha[i]);
  const double c = s.beta[i] / std::sqrt(1.0 - s.alpha_bar[i]);
  nn::Tensor mean = combine(inv_sqrt_a, z_m, -inv_sqrt_a * c, pred);
  if (m == 1) return mean;
  return combine(1.0, mean, s.sigma[i], smooth_noise(k, gamma));
}

nn::Tensor diffusion_loss(const std::vector<nn::Tensor>& z0, const NoiseModel& model, const NoiseSchedule& s,
                          const SmoothingKernel& k, std::mt19937_64& rng, bool squared) {
  if (z0.empty()) throw UsageError("diffusion_loss: empty batch");
  if (s.steps < 1) throw UsageError("diffusion_loss: schedule has no steps");
  std::uniform_int_distribution<int> step(1, s.steps);
  nn::Tensor total;
  for (const auto& z : z0) {
    const int m = step(rng);
    const nn::Tensor eps = gaussian_like(z.shape(), rng);
    const nn::Tensor target = smooth_noise(k, eps);
    const nn::Tensor zm = forward_sample(s, k, z, m, eps);
    const nn::Tensor diff = nn::sub(model(zm, m), target);
    const nn::Tensor term = squared ? nn::sum_squares(diff) : nn::l2_norm(diff);
    total = total.defined() ? nn::add(total, term) : term;
  }
  return total;
}

nn::Tensor motion_loss(const std::vector<nn::Tensor>& z0, const std::vector<nn::Tensor>& truth,
                       const MotionModel& decoder, const std::vector<std::vector<double>>* masks) {
  if (z0.empty()) throw UsageError("motion_loss: empty batch");
  if (z0.size() != truth.size() || (masks && masks->size() != z0.size())) {
    throw ShapeError("motion_loss: latent, truth and mask batch sizes differ");
  }
  nn::Tensor total;
  for (std::size_t n = 0; n < z0.size(); ++n) {
    const nn::Tensor pred = decoder(z0[n]);
    if (pred.shape() != truth[n].shape()) {
      throw ShapeError("motion_loss: prediction " + nn::shape_string(pred.shape()) + " vs truth " +
                       nn::shape_string(truth[n].shape()));
    }
    nn::Tensor diff = nn::sub(pred, truth[n]);
    if (masks) {
      const auto& w = (*masks)[n];
      const std::size_t plane = truth[n].dim(2) * truth[n].dim(3);
      if (w.size() != plane) throw ShapeError("motion_loss: mask does not match the motion grid");
      std::vector<double> full(truth[n].numel());
      for (std::size_t k = 0; k < full.size(); ++k) full[k] = w[k % plane];
      diff = nn::mul(diff, nn::Tensor::from(truth[n].shape(), std::move(full)));
    }
    const nn::Tensor term = nn::sum_squares(diff);
    total = total.defined() ? nn::add(total, term) : term;
  }
  return nn::scale(total, 1.0 / static_cast<double>(z0.size()));
}

namespace {

std::vector<std::vector<double>> snapshot(const nn::ParameterStore& store) {
  std::vector<std::vector<double>> out;
  for (const auto& e : store.entries()) out.emplace_back(e.tensor.values().begin(), e.tensor.values().end());
  return out;
}

void restore(nn::ParameterStore& store, const std::vector<std::vector<double>>& vals) {
  auto& es = store.entries();
  if (vals.size() != es.size()) throw UsageError("restore: parameter count mismatch");
  for (std::size_t k = 0; k < es.size(); ++k) {
    auto dst = es[k].tensor.values();
    if (dst.size() != vals[k].size()) throw UsageError("restore: parameter size mismatch");
    std::copy(vals[k].begin(), vals[k].end(), dst.begin());
  }
}

struct Losses {
  nn::Tensor diffusion, motion, total;
};

Losses batch_losses(const std::vector<const TrainingItem*>& items, const DiffusionConfig& cfg,
                    const nn::NoisePredictor& eps_model, const nn::MotionDecoder& decoder, std::mt19937_64& rng) {
  std::vector<nn::Tensor> z, phi;
  std::vector<std::vector<double>> masks;
  for (const auto* it : items) {
    z.push_back(it->latent);
    phi.push_back(it->motion);
    masks.push_back(it->mask);
  }
  const NoiseModel em = [&](const nn::Tensor& x, int m) { return eps_model.forward(x, m); };
  const MotionModel dm = [&](const nn::Tensor& x) { return decoder.forward(x); };
  Losses l;
  l.diffusion = diffusion_loss(z, em, cfg.schedule, cfg.kernel, rng, cfg.squared_noise_loss);
  l.motion = motion_loss(z, phi, dm, cfg.masked_motion_loss ? &masks : nullptr);
  l.total = nn::add(l.diffusion, nn::scale(l.motion, cfg.loss_alpha));
  return l;
}

std::mt19937_64 epoch_rng(std::uint64_t seed, int epoch, std::uint32_t stream) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(epoch), stream};
  return std::mt19937_64(seq);
}

}  // namespace

TrainResult train(const std::vector<TrainingItem>& train_items, const std::vector<TrainingItem>& validation_items,
                  const DiffusionConfig& cfg, nn::NoisePredictor& eps_model, nn::MotionDecoder& decoder,
                  TrainState& state, const std::function<void(const EpochLog&)>& on_epoch) {
  cfg.validate();
  if (train_items.empty()) throw UsageError("train: no training items");
  if (validation_items.empty()) throw UsageError("train: no validation items");
  TrainResult res;
  if (state.has_best && state.best_eps_params.empty()) {
    // Resumed from a checkpoint that holds only the best parameters.
    state.best_eps_params = snapshot(eps_model.parameters());
    state.best_motion_params = snapshot(decoder.parameters());
  }

  std::vector<const TrainingItem*> val;
  for (const auto& it : validation_items) val.push_back(&it);

  while (state.epoch < cfg.max_epochs) {
    const int epoch = state.epoch + 1;
    std::mt19937_64 rng = epoch_rng(cfg.seed, epoch, 0);
    std::vector<std::size_t> order(train_items.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::shuffle(order.begin(), order.end(), rng);

    EpochLog tr{epoch, "train", 0.0, 0.0, 0.0};
    std::size_t batches = 0;
    for (std::size_t start = 0; start < order.size(); start += cfg.batch_size) {
      std::vector<const TrainingItem*> batch;
      for (std::size_t k = start; k < std::min(order.size(), start + cfg.batch_size); ++k) {
        batch.push_back(&train_items[order[k]]);
      }
      eps_model.parameters().zero_grad();
      decoder.parameters().zero_grad();
      const Losses l = batch_losses(batch, cfg, eps_model, decoder, rng);
      nn::backward(l.total);
      nn::adam_step(eps_model.parameters(), cfg.learning_rate, cfg.lambda_eps);
      nn::adam_step(decoder.parameters(), cfg.learning_rate, cfg.lambda_motion);
      tr.l_diffusion += l.diffusion.item();
      tr.l_motion += l.motion.item();
      tr.l_total += l.total.item();
      ++batches;
    }
    tr.l_diffusion /= static_cast<double>(batches);
    tr.l_motion /= static_cast<double>(batches);
    tr.l_total /= static_cast<double>(batches);

    // Validation noise is fixed across epochs so the totals are comparable.
    std::mt19937_64 vrng = epoch_rng(cfg.seed, 0, 1);
    const Losses vl = batch_losses(val, cfg, eps_model, decoder, vrng);
    const EpochLog va{epoch, "validation", vl.diffusion.item(), vl.motion.item(), vl.total.item()};

    state.epoch = epoch;
    res.log.push_back(tr);
    res.log.push_back(va);
    if (on_epoch) {
      on_epoch(tr);
      on_epoch(va);
    }

    if (!state.has_best || va.l_total < state.best_validation) {
      state.has_best = true;
      state.best_validation = va.l_total;
      state.epochs_since_best = 0;
      state.best_eps_params = snapshot(eps_model.parameters());
      state.best_motion_params = snapshot(decoder.parameters());
    } else if (++state.epochs_since_best >= cfg.patience) {
      res.early_stopped = true;
      break;
    }
  }
  if (state.has_best) {
    restore(eps_model.parameters(), state.best_eps_params);
    restore(decoder.parameters(), state.best_motion_params);
  }
  return res;
}

nn::Tensor infer_from_latent(const nn::Tensor& z0, const NoiseSchedule& s, const SmoothingKernel& k,
                             const NoiseModel& model, const MotionModel& decoder, std::mt19937_64& rng) {
  if (s.steps == 0) return decoder(z0);
  nn::Tensor z = forward_sample(s, k, z0, s.steps, gaussian_like(z0.shape(), rng));
  for (int m = s.steps; m >= 1; --m) {
    const nn::Tensor gamma = gaussian_like(z0.shape(), rng);
    z = reverse_step(s, k, z, m, model, gamma);
  }
  return decoder(z);
}

}  // namespace lamod
