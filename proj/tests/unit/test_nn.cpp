#include "doctest.h"

#include <cmath>
#include <functional>
#include <random>
#include <set>

#include "lamod/error.hpp"
#include "lamod/nn/networks.hpp"
#include "lamod/nn/ops.hpp"
#include "lamod/nn/parameters.hpp"
#include "support.hpp"

using namespace lamod;
using namespace lamod::nn;

namespace {

Tensor randn(Shape s, std::mt19937_64& rng, bool grad = true) {
  return Tensor::from(s, test::normal_vector(numel(s), rng), grad);
}

// Projects the output on fixed random weights so every output element
// contributes to the scalar loss.
Tensor project(const Tensor& y, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  const Tensor w = Tensor::from(y.shape(), test::normal_vector(y.numel(), rng));
  return sum(mul(y, w));
}

// Central differences of loss(inputs) at `probes` random coordinates of each
// input; returns the worst relative error.
double fd_check(std::vector<Tensor> inputs, const std::function<Tensor(const std::vector<Tensor>&)>& loss,
                std::mt19937_64& rng, int probes = 10, double h = 1e-6) {
  for (auto& t : inputs) t.zero_grad();
  const Tensor l = loss(inputs);
  backward(l);
  double worst = 0.0;
  for (auto& t : inputs) {
    const std::vector<double> analytic(t.grad().begin(), t.grad().end());
    for (int p = 0; p < probes; ++p) {
      const std::size_t k = rng() % t.numel();
      const double keep = t.values()[k];
      t.values()[k] = keep + h;
      const double up = loss(inputs).item();
      t.values()[k] = keep - h;
      const double down = loss(inputs).item();
      t.values()[k] = keep;
      const double fd = (up - down) / (2 * h);
      if (std::abs(fd) < 1e-7 && std::abs(analytic[k]) < 1e-7) continue;
      worst = std::max(worst, test::relative_error(analytic[k], fd));
    }
  }
  return worst;
}

// Loss = sum of squares of the output, backpropagated into the store.
template <typename F>
void backprop_square(F&& forward) {
  backward(sum_squares(forward()));
}

}  // namespace

TEST_CASE("primitive gradients match finite differences") {
  std::mt19937_64 rng(30);
  SUBCASE("conv2d") {
    CHECK(fd_check({randn({2, 3, 5, 6}, rng), randn({4, 3, 3, 3}, rng), randn({4}, rng)},
                   [](const auto& t) { return project(conv2d(t[0], t[1], t[2]), 1); }, rng) < 1e-3);
    CHECK(fd_check({randn({1, 2, 4, 4}, rng), randn({2, 2, 3, 3}, rng)},
                   [](const auto& t) { return project(conv2d(t[0], t[1]), 2); }, rng) < 1e-3);
  }
  SUBCASE("avgpool2 and upsample2") {
    CHECK(fd_check({randn({2, 3, 4, 6}, rng)}, [](const auto& t) { return project(avgpool2(t[0]), 3); }, rng) < 1e-3);
    CHECK(fd_check({randn({2, 3, 3, 2}, rng)}, [](const auto& t) { return project(upsample2(t[0]), 4); }, rng) < 1e-3);
  }
  SUBCASE("relu") {
    // keep values away from the kink
    Tensor x = randn({3, 7}, rng);
    for (auto& v : x.values()) v += v > 0 ? 0.1 : -0.1;
    CHECK(fd_check({x}, [](const auto& t) { return project(relu(t[0]), 5); }, rng) < 1e-3);
  }
  SUBCASE("elementwise") {
    CHECK(fd_check({randn({2, 5}, rng), randn({2, 5}, rng)}, [](const auto& t) { return project(add(t[0], t[1]), 6); }, rng) < 1e-3);
    CHECK(fd_check({randn({2, 5}, rng), randn({2, 5}, rng)}, [](const auto& t) { return project(sub(t[0], t[1]), 7); }, rng) < 1e-3);
    CHECK(fd_check({randn({2, 5}, rng), randn({2, 5}, rng)}, [](const auto& t) { return project(mul(t[0], t[1]), 8); }, rng) < 1e-3);
    CHECK(fd_check({randn({2, 5}, rng)}, [](const auto& t) { return project(scale(t[0], -1.7), 9); }, rng) < 1e-3);
  }
  SUBCASE("channel plumbing") {
    CHECK(fd_check({randn({2, 2, 3, 3}, rng), randn({2, 3, 3, 3}, rng)},
                   [](const auto& t) { return project(concat_channels(t[0], t[1]), 10); }, rng) < 1e-3);
    CHECK(fd_check({randn({2, 5, 3, 3}, rng)}, [](const auto& t) { return project(slice_channels(t[0], 1, 4), 11); }, rng) < 1e-3);
    CHECK(fd_check({randn({2, 6, 2, 2}, rng)}, [](const auto& t) { return project(reshape(t[0], {4, 3, 2, 2}), 12); }, rng) < 1e-3);
  }
  SUBCASE("linear and scale_shift") {
    CHECK(fd_check({randn({3, 4}, rng), randn({5, 4}, rng), randn({5}, rng)},
                   [](const auto& t) { return project(linear(t[0], t[1], t[2]), 13); }, rng) < 1e-3);
    CHECK(fd_check({randn({2, 3, 4, 4}, rng), randn({3}, rng), randn({3}, rng)},
                   [](const auto& t) { return project(scale_shift(t[0], t[1], t[2]), 14); }, rng) < 1e-3);
  }
  SUBCASE("reductions") {
    CHECK(fd_check({randn({4, 3}, rng)}, [](const auto& t) { return sum(t[0]); }, rng) < 1e-3);
    CHECK(fd_check({randn({4, 3}, rng)}, [](const auto& t) { return sum_squares(t[0]); }, rng) < 1e-3);
    CHECK(fd_check({randn({4, 3}, rng)}, [](const auto& t) { return l2_norm(t[0]); }, rng) < 1e-3);
  }
}

TEST_CASE("primitive edge cases") {
  std::mt19937_64 rng(31);
  SUBCASE("identity kernel") {
    const Tensor x = randn({1, 2, 5, 5}, rng, false);
    Tensor w = Tensor::zeros({2, 2, 3, 3});
    w.values()[0 * 18 + 0 * 9 + 4] = 1.0;
    w.values()[1 * 18 + 1 * 9 + 4] = 1.0;
    const Tensor y = conv2d(x, w);
    for (std::size_t k = 0; k < x.numel(); ++k) CHECK(y.values()[k] == x.values()[k]);
  }
  SUBCASE("relu gradient vanishes on the negative side and at zero") {
    Tensor x = Tensor::from({4}, {-1.0, 0.0, 2.0, -3.0}, true);
    backward(sum(relu(x)));
    CHECK(x.grad()[0] == 0.0);
    CHECK(x.grad()[1] == 0.0);
    CHECK(x.grad()[2] == 1.0);
    CHECK(x.grad()[3] == 0.0);
  }
  SUBCASE("l2 norm at the origin") {
    Tensor x = Tensor::zeros({3}, true);
    backward(l2_norm(x));
    for (double g : x.grad()) CHECK(g == 0.0);
  }
  SUBCASE("shape errors") {
    CHECK_THROWS_AS(add(Tensor::zeros({2, 3}), Tensor::zeros({3, 2})), ShapeError);
    CHECK_THROWS_AS(conv2d(Tensor::zeros({1, 2, 4, 4}), Tensor::zeros({1, 3, 3, 3})), ShapeError);
    CHECK_THROWS_AS(avgpool2(Tensor::zeros({1, 1, 3, 4})), ShapeError);
    CHECK_THROWS_AS(reshape(Tensor::zeros({2, 3}), {5}), ShapeError);
  }
  SUBCASE("backward accumulates") {
    Tensor x = randn({5}, rng);
    backward(sum_squares(x));
    const std::vector<double> once(x.grad().begin(), x.grad().end());
    backward(sum_squares(x));
    for (std::size_t k = 0; k < 5; ++k) CHECK(x.grad()[k] == 2.0 * once[k]);
  }
  SUBCASE("backward needs a scalar") { CHECK_THROWS_AS(backward(randn({2}, rng)), UsageError); }
}

TEST_CASE("adam") {
  SUBCASE("zero gradient and no decay keeps parameters") {
    ParameterStore s;
    Tensor p = s.add("p", Tensor::from({3}, {1.0, -2.0, 0.5}));
    p.grad();  // materialize a zero gradient
    backward(scale(sum(p), 0.0));
    adam_step(s, 0.1, 0.0);
    CHECK(p.values()[0] == 1.0);
    CHECK(p.values()[1] == -2.0);
  }
  SUBCASE("converges on a 1-D quadratic") {
    ParameterStore s;
    Tensor p = s.add("p", Tensor::scalar(0.0));
    for (int it = 0; it < 500; ++it) {
      backward(sum_squares(sub(p, Tensor::scalar(3.0))));
      adam_step(s, 0.1, 0.0);
    }
    CHECK(std::abs(p.item() - 3.0) < 1e-3);
  }
  SUBCASE("weight decay shrinks an untouched parameter geometrically") {
    ParameterStore s;
    Tensor used = s.add("used", Tensor::scalar(1.0));
    Tensor idle = s.add("idle", Tensor::scalar(2.0));
    const double lr = 0.1, wd = 1e-4;
    for (int it = 0; it < 10; ++it) {
      backward(sum(used));
      adam_step(s, lr, wd);
    }
    CHECK(idle.item() == doctest::Approx(2.0 * std::pow(1.0 - lr * wd, 10)).epsilon(1e-14));
  }
  SUBCASE("no gradient anywhere is a usage error") {
    ParameterStore s;
    s.add("p", Tensor::scalar(1.0));
    CHECK_THROWS_AS(adam_step(s, 0.1, 0.0), UsageError);
  }
  SUBCASE("duplicate names are rejected") {
    ParameterStore s;
    s.add("p", Tensor::scalar(1.0));
    CHECK_THROWS_AS(s.add("p", Tensor::scalar(2.0)), UsageError);
  }
}

TEST_CASE("registration network") {
  UNetConfig cfg;
  cfg.base_channels = 4;
  cfg.latent_channels = 3;
  cfg.seed = 1;
  RegistrationNetwork net(cfg);
  std::mt19937_64 rng(32);
  const Tensor pairs = randn({3, 2, 16, 16}, rng, false);
  const EncoderOutput enc = net.encode(pairs);
  CHECK(enc.latent.z.shape() == Shape{3, 3, 4, 4});
  CHECK(enc.latent.factor == 4);
  CHECK(net.decode(enc).shape() == Shape{3, 2, 16, 16});

  SUBCASE("per-frame encoding") {
    const Tensor one = slice_channels(reshape(pairs, {1, 6, 16, 16}), 2, 4);
    const Tensor z1 = net.encode(reshape(one, {1, 2, 16, 16})).latent.z;
    const Tensor z3 = enc.latent.z;
    for (std::size_t k = 0; k < z1.numel(); ++k) CHECK(z1.values()[k] == z3.values()[z1.numel() + k]);
  }
  SUBCASE("identical pairs give identical latents") {
    std::vector<double> v(2 * 2 * 16 * 16);
    for (std::size_t k = 0; k < 512; ++k) v[k] = v[512 + k] = std::sin(0.1 * static_cast<double>(k));
    const Tensor z = net.encode(Tensor::from({2, 2, 16, 16}, v)).latent.z;
    const std::size_t n = z.numel() / 2;
    for (std::size_t k = 0; k < n; ++k) CHECK(z.values()[k] == z.values()[n + k]);
  }
  SUBCASE("fresh network predicts zero velocity") {
    const Tensor v = net.forward(pairs);
    for (double x : v.values()) CHECK(x == 0.0);
  }
  SUBCASE("all-zero parameters give zero output") {
    UNetConfig c2 = cfg;
    c2.zero_init_output = false;
    RegistrationNetwork n2(c2);
    for (auto& e : n2.parameters().entries())
      for (auto& x : e.tensor.values()) x = 0.0;
    const Tensor v = n2.forward(pairs);
    for (double x : v.values()) CHECK(x == 0.0);
  }
  SUBCASE("indivisible input") { CHECK_THROWS_AS(net.encode(Tensor::zeros({1, 2, 14, 16})), ShapeError); }
}

TEST_CASE("noise predictor") {
  UNetConfig cfg;
  cfg.base_channels = 4;
  cfg.latent_channels = 3;
  cfg.time_embed_dim = 8;
  cfg.zero_init_output = false;
  NoisePredictor eps(cfg, 2, 10);
  std::mt19937_64 rng(33);
  const Tensor z = randn({2, 3, 4, 4}, rng, false);
  CHECK(eps.forward(z, 1).shape() == z.shape());
  CHECK_THROWS_AS(eps.forward(z, 0), UsageError);
  CHECK_THROWS_AS(eps.forward(z, 11), UsageError);
  CHECK_THROWS_AS(eps.forward(randn({3, 3, 4, 4}, rng, false), 1), ShapeError);

  // distinct embeddings and outputs for every step
  std::set<std::vector<double>> embeds, outs;
  for (int m = 1; m <= 10; ++m) {
    const Tensor e = step_embedding(m, 8);
    embeds.insert(std::vector<double>(e.values().begin(), e.values().end()));
    const Tensor o = eps.forward(z, m);
    outs.insert(std::vector<double>(o.values().begin(), o.values().end()));
  }
  CHECK(embeds.size() == 10);
  CHECK(outs.size() == 10);
}

TEST_CASE("motion decoder") {
  UNetConfig cfg;
  cfg.latent_channels = 16;
  MotionDecoder dec(cfg, 8);
  CHECK(dec.forward(Tensor::zeros({8, 16, 16, 16})).shape() == Shape{8, 2, 64, 64});
  const Tensor zero_motion = dec.forward(Tensor::zeros({8, 16, 16, 16}));
  for (double x : zero_motion.values()) CHECK(x == 0.0);

  SUBCASE("overfits a single pair") {
    UNetConfig small;
    small.base_channels = 4;
    small.latent_channels = 2;
    small.seed = 3;
    MotionDecoder d(small, 2);
    std::mt19937_64 rng(34);
    const Tensor zin = randn({2, 2, 4, 4}, rng, false);
    const Tensor target = Tensor::from({2, 2, 16, 16}, test::normal_vector(2 * 2 * 16 * 16, rng, 0.5));
    auto mse = [&] { return sum_squares(sub(d.forward(zin), target)); };
    const double initial = mse().item();
    for (int it = 0; it < 500; ++it) {
      backward(mse());
      adam_step(d.parameters(), 1e-2, 0.0);
    }
    // noise targets are not representable exactly; smooth targets are
    // tested below
    CHECK(mse().item() < initial);
  }
  SUBCASE("overfits a smooth motion") {
    UNetConfig small;
    small.base_channels = 16;
    small.latent_channels = 4;
    small.seed = 4;
    MotionDecoder d(small, 2);
    std::mt19937_64 rng(35);
    const Tensor zin = randn({2, 4, 4, 4}, rng, false);
    const VectorField a = test::smooth_field(Grid2::make(16, 16), rng, 1.0);
    const VectorField b = test::smooth_field(Grid2::make(16, 16), rng, 1.0);
    std::vector<double> vals;
    for (const auto* f : {&a, &b}) {
      vals.insert(vals.end(), f->x.begin(), f->x.end());
      vals.insert(vals.end(), f->y.begin(), f->y.end());
    }
    const Tensor target = Tensor::from({2, 2, 16, 16}, vals);
    auto mse = [&] { return sum_squares(sub(d.forward(zin), target)); };
    const double initial = mse().item();
    for (int it = 0; it < 500; ++it) {
      backward(mse());
      adam_step(d.parameters(), 1e-3, 0.0);
    }
    CHECK(mse().item() < 1e-3 * initial);
  }
}

TEST_CASE("network parameter gradients match finite differences") {
  std::mt19937_64 rng(36);
  UNetConfig cfg;
  cfg.base_channels = 3;
  cfg.latent_channels = 2;
  cfg.time_embed_dim = 8;
  cfg.zero_init_output = false;
  cfg.seed = 5;
  auto check_store = [&](ParameterStore& store, const std::function<Tensor()>& loss) {
    store.zero_grad();
    backward(loss());
    double worst = 0.0;
    for (auto& e : store.entries()) {
      const std::vector<double> analytic(e.tensor.grad().begin(), e.tensor.grad().end());
      for (int p = 0; p < 3; ++p) {
        const std::size_t k = rng() % e.tensor.numel();
        const double keep = e.tensor.values()[k], h = 1e-6;
        e.tensor.values()[k] = keep + h;
        const double up = loss().item();
        e.tensor.values()[k] = keep - h;
        const double down = loss().item();
        e.tensor.values()[k] = keep;
        const double fd = (up - down) / (2 * h);
        if (std::abs(fd) < 1e-6 && std::abs(analytic[k]) < 1e-6) continue;
        worst = std::max(worst, test::relative_error(analytic[k], fd));
      }
    }
    return worst;
  };
  SUBCASE("registration network") {
    RegistrationNetwork net(cfg);
    const Tensor x = randn({2, 2, 8, 8}, rng, false);
    CHECK(check_store(net.parameters(), [&] { return project(net.forward(x), 40); }) < 1e-3);
  }
  SUBCASE("noise predictor") {
    NoisePredictor eps(cfg, 2, 5);
    const Tensor z = randn({2, 2, 4, 4}, rng, false);
    CHECK(check_store(eps.parameters(), [&] { return project(eps.forward(z, 3), 41); }) < 1e-3);
  }
  SUBCASE("motion decoder") {
    MotionDecoder dec(cfg, 2);
    const Tensor z = randn({2, 2, 4, 4}, rng, false);
    CHECK(check_store(dec.parameters(), [&] { return project(dec.forward(z), 42); }) < 1e-3);
  }
}

TEST_CASE("no network has unused parameters") {
  std::mt19937_64 rng(37);
  UNetConfig cfg;
  cfg.base_channels = 4;
  cfg.latent_channels = 3;
  cfg.time_embed_dim = 8;
  cfg.zero_init_output = false;
  RegistrationNetwork reg(cfg);
  backprop_square([&] { return reg.forward(randn({2, 2, 16, 16}, rng, false)); });
  CHECK(unused_parameters(reg.parameters()).empty());
  NoisePredictor eps(cfg, 2, 4);
  backprop_square([&] { return eps.forward(randn({2, 3, 4, 4}, rng, false), 2); });
  CHECK(unused_parameters(eps.parameters()).empty());
  MotionDecoder dec(cfg, 2);
  backprop_square([&] { return dec.forward(randn({2, 3, 4, 4}, rng, false)); });
  CHECK(unused_parameters(dec.parameters()).empty());

  ParameterStore s;
  Tensor a = s.add("a", Tensor::scalar(1.0));
  s.add("b", Tensor::scalar(1.0));
  backward(sum(a));
  CHECK(unused_parameters(s) == std::vector<std::string>{"b"});
}
