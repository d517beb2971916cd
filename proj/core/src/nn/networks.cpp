#include "lamod/nn/networks.hpp"

#include <cmath>
#include <random>

#include "lamod/error.hpp"

namespace lamod::nn {

void UNetConfig::validate() const {
  if (in_channels == 0 || base_channels == 0 || latent_channels == 0 || time_embed_dim == 0) {
    throw UsageError("UNetConfig: channel counts must be positive");
  }
  if (num_down < 1) throw UsageError("UNetConfig: num_down must be >= 1");
  if (time_embed_dim % 2 != 0) throw UsageError("UNetConfig: time_embed_dim must be even");
}

namespace {

struct Conv {
  Tensor w, b;
  Tensor operator()(const Tensor& x) const { return conv2d(x, w, b); }
};

Conv add_conv(ParameterStore& store, std::mt19937_64& rng, const std::string& name, std::size_t cin, std::size_t cout,
              bool bias = true, bool zero = false) {
  Conv c;
  Tensor w = zero ? Tensor::zeros({cout, cin, 3, 3}) : kaiming_uniform({cout, cin, 3, 3}, cin * 9, rng);
  c.w = store.add(name + ".w", std::move(w));
  if (bias) c.b = store.add(name + ".b", Tensor::zeros({cout}));
  return c;
}

Conv find_conv(const ParameterStore& store, const std::string& name) {
  Conv c;
  c.w = store.get(name + ".w");
  if (store.contains(name + ".b")) c.b = store.get(name + ".b");
  return c;
}

void require_spatial(const Tensor& x, std::size_t num_down, const char* who) {
  if (x.rank() != 4) throw ShapeError(std::string(who) + ": expected a 4-D tensor, got " + shape_string(x.shape()));
  const std::size_t f = std::size_t{1} << num_down;
  if (x.dim(2) % f != 0 || x.dim(3) % f != 0) {
    throw ShapeError(std::string(who) + ": spatial size " + shape_string(x.shape()) + " not divisible by " +
                     std::to_string(f));
  }
}

std::string level(const char* prefix, std::size_t l) { return std::string(prefix) + std::to_string(l); }

}  // namespace

// ---------------------------------------------------------------------------

RegistrationNetwork::RegistrationNetwork(const UNetConfig& cfg) : cfg_(cfg) {
  cfg_.validate();
  std::mt19937_64 rng(cfg_.seed);
  const std::size_t B = cfg_.base_channels, C = cfg_.latent_channels;
  add_conv(params_, rng, "enc.in0", cfg_.in_channels, B);
  add_conv(params_, rng, "enc.in1", B, B);
  for (std::size_t l = 1; l <= cfg_.num_down; ++l) add_conv(params_, rng, level("enc.down", l), B, B);
  add_conv(params_, rng, "enc.latent", B, C);
  add_conv(params_, rng, "dec.in", C, B);
  for (std::size_t l = cfg_.num_down + 1; l-- > 0;) add_conv(params_, rng, level("dec.up", l), 2 * B, B);
  add_conv(params_, rng, "dec.out", B, 2, false, cfg_.zero_init_output);
}

EncoderOutput RegistrationNetwork::encode(const Tensor& pairs) const {
  require_spatial(pairs, cfg_.num_down, "encoder");
  if (pairs.dim(1) != cfg_.in_channels) {
    throw ShapeError("encoder: expected " + std::to_string(cfg_.in_channels) + " input channels, got " +
                     shape_string(pairs.shape()));
  }
  EncoderOutput out;
  Tensor x = relu(find_conv(params_, "enc.in0")(pairs));
  x = relu(find_conv(params_, "enc.in1")(x));
  out.skips.push_back(x);
  for (std::size_t l = 1; l <= cfg_.num_down; ++l) {
    x = relu(find_conv(params_, level("enc.down", l))(avgpool2(x)));
    out.skips.push_back(x);
  }
  out.latent.z = find_conv(params_, "enc.latent")(x);
  out.latent.height = pairs.dim(2);
  out.latent.width = pairs.dim(3);
  out.latent.factor = std::size_t{1} << cfg_.num_down;
  return out;
}

Tensor RegistrationNetwork::decode(const EncoderOutput& enc) const {
  if (enc.skips.size() != cfg_.num_down + 1) throw ShapeError("decoder: wrong number of skip tensors");
  const Tensor& z = enc.latent.z;
  const Tensor& deepest = enc.skips.back();
  if (z.rank() != 4 || z.dim(0) != deepest.dim(0) || z.dim(2) != deepest.dim(2) || z.dim(3) != deepest.dim(3)) {
    throw ShapeError("decoder: latent " + shape_string(z.shape()) + " does not match stored skips " +
                     shape_string(deepest.shape()));
  }
  Tensor x = relu(find_conv(params_, "dec.in")(z));
  for (std::size_t l = cfg_.num_down + 1; l-- > 0;) {
    if (l < cfg_.num_down) x = upsample2(x);
    x = relu(find_conv(params_, level("dec.up", l))(concat_channels(x, enc.skips[l])));
  }
  return find_conv(params_, "dec.out")(x);
}

// ---------------------------------------------------------------------------

Tensor step_embedding(int m, std::size_t dim) {
  std::vector<double> v(dim);
  const std::size_t half = dim / 2;
  for (std::size_t i = 0; i < half; ++i) {
    const double freq = std::pow(10000.0, -static_cast<double>(i) / static_cast<double>(half));
    v[2 * i] = std::sin(m * freq);
    v[2 * i + 1] = std::cos(m * freq);
  }
  return Tensor::from({1, dim}, std::move(v));
}

NoisePredictor::NoisePredictor(const UNetConfig& cfg, std::size_t frames, int num_steps)
    : cfg_(cfg), frames_(frames), num_steps_(num_steps) {
  cfg_.validate();
  if (frames_ == 0 || num_steps_ < 1) throw UsageError("NoisePredictor: frames and num_steps must be positive");
  std::mt19937_64 rng(cfg_.seed + 1);
  const std::size_t B = cfg_.base_channels, E = cfg_.time_embed_dim, TC = frames_ * cfg_.latent_channels;
  params_.add("emb.fc0.w", kaiming_uniform({E, E}, E, rng));
  params_.add("emb.fc0.b", Tensor::zeros({E}));
  params_.add("emb.fc1.w", kaiming_uniform({2 * B, E}, E, rng));
  params_.add("emb.fc1.b", Tensor::zeros({2 * B}));
  add_conv(params_, rng, "in", TC, B);
  add_conv(params_, rng, "mid", B, B);
  add_conv(params_, rng, "down", B, B);
  add_conv(params_, rng, "up", 2 * B, B);
  add_conv(params_, rng, "out", B, TC, true, cfg_.zero_init_output);
}

Tensor NoisePredictor::forward(const Tensor& z, int m) const {
  if (m < 1 || m > num_steps_) {
    throw UsageError("NoisePredictor: step " + std::to_string(m) + " outside 1.." + std::to_string(num_steps_));
  }
  if (z.rank() != 4 || z.dim(0) != frames_ || z.dim(1) != cfg_.latent_channels) {
    throw ShapeError("NoisePredictor: expected (" + std::to_string(frames_) + ", " +
                     std::to_string(cfg_.latent_channels) + ", h, w), got " + shape_string(z.shape()));
  }
  require_spatial(z, 1, "NoisePredictor");
  const std::size_t B = cfg_.base_channels;
  const std::size_t h = z.dim(2), w = z.dim(3);

  Tensor e = step_embedding(m, cfg_.time_embed_dim);
  e = relu(linear(e, params_.get("emb.fc0.w"), params_.get("emb.fc0.b")));
  e = linear(e, params_.get("emb.fc1.w"), params_.get("emb.fc1.b"));

  Tensor x = reshape(z, {1, frames_ * cfg_.latent_channels, h, w});
  x = relu(find_conv(params_, "in")(x));
  x = scale_shift(x, slice_channels(e, 0, B), slice_channels(e, B, 2 * B));
  const Tensor skip = relu(find_conv(params_, "mid")(x));
  Tensor y = relu(find_conv(params_, "down")(avgpool2(skip)));
  y = relu(find_conv(params_, "up")(concat_channels(upsample2(y), skip)));
  y = find_conv(params_, "out")(y);
  return reshape(y, z.shape());
}

// ---------------------------------------------------------------------------

MotionDecoder::MotionDecoder(const UNetConfig& cfg, std::size_t frames) : cfg_(cfg), frames_(frames) {
  cfg_.validate();
  if (frames_ == 0) throw UsageError("MotionDecoder: frames must be positive");
  std::mt19937_64 rng(cfg_.seed + 2);
  const std::size_t B = cfg_.base_channels, TC = frames_ * cfg_.latent_channels;
  add_conv(params_, rng, "in", TC, B);
  add_conv(params_, rng, "mid", B, B);
  for (std::size_t l = 0; l < cfg_.num_down; ++l) add_conv(params_, rng, level("up", l), B, B);
  add_conv(params_, rng, "out", B, 2 * frames_, true, cfg_.zero_init_output);
}

Tensor MotionDecoder::forward(const Tensor& z) const {
  if (z.rank() != 4 || z.dim(0) != frames_ || z.dim(1) != cfg_.latent_channels) {
    throw ShapeError("MotionDecoder: expected (" + std::to_string(frames_) + ", " +
                     std::to_string(cfg_.latent_channels) + ", h, w), got " + shape_string(z.shape()));
  }
  const std::size_t h = z.dim(2), w = z.dim(3);
  Tensor x = reshape(z, {1, frames_ * cfg_.latent_channels, h, w});
  x = relu(find_conv(params_, "in")(x));
  x = relu(find_conv(params_, "mid")(x));
  for (std::size_t l = 0; l < cfg_.num_down; ++l) x = relu(find_conv(params_, level("up", l))(upsample2(x)));
  x = find_conv(params_, "out")(x);
  const std::size_t f = std::size_t{1} << cfg_.num_down;
  return reshape(x, {frames_, 2, h * f, w * f});
}

}  // namespace lamod::nn
