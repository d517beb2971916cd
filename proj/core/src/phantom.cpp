#include "lamod/phantom.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>

#include "lamod/error.hpp"
#include "lamod/metric.hpp"

namespace lamod {

void PhantomConfig::validate() const {
  Grid2::make(grid.height, grid.width, grid.spacing);
  if (frames < 1) throw UsageError("phantom: frames must be >= 1");
  const double limit = std::min(grid.height, grid.width) / 2.0 - 2.0;
  if (!(r_inner >= 2.0 && r_inner < r_outer && r_outer + center_jitter <= limit)) {
    throw UsageError("phantom: need 2 <= r_inner < r_outer and r_outer + center_jitter <= " + std::to_string(limit));
  }
  if (!(contraction_amp >= 0.0 && contraction_amp <= 0.3)) throw UsageError("phantom: contraction_amp must lie in [0, 0.3]");
  if (!(twist_amp >= 0.0 && twist_amp <= 0.5)) throw UsageError("phantom: twist_amp must lie in [0, 0.5]");
  if (!(center_jitter >= 0.0)) throw UsageError("phantom: center_jitter must be >= 0");
  if (!(intensity_std >= 0.0)) throw UsageError("phantom: intensity_std must be >= 0");
  if (supersample < 1) throw UsageError("phantom: supersample must be >= 1");
}

double cycle_profile(const PhantomConfig& cfg, double tau) {
  if (!(tau >= 0.0 && tau <= cfg.frames)) {
    throw UsageError("phantom: tau " + std::to_string(tau) + " outside [0, " + std::to_string(cfg.frames) + "]");
  }
  return 0.5 * (1.0 - std::cos(2.0 * std::numbers::pi * tau / cfg.frames));
}

namespace {

struct Draws {
  Point2 center;
  double insertion_angle;
};

Draws draw(const PhantomConfig& cfg) {
  std::mt19937_64 rng(cfg.seed);
  std::uniform_real_distribution<double> jitter(-1.0, 1.0);
  std::uniform_real_distribution<double> angle(0.0, 2.0 * std::numbers::pi);
  Draws d;
  d.center.x = 0.5 * (cfg.grid.width - 1) + cfg.center_jitter * jitter(rng);
  d.center.y = 0.5 * (cfg.grid.height - 1) + cfg.center_jitter * jitter(rng);
  d.insertion_angle = angle(rng);
  return d;
}

// Counterclockwise rotation in the y-up frame, applied to pixel offsets.
void rotate(double theta, double dx, double dy, double& ox, double& oy) {
  const double c = std::cos(theta), s = std::sin(theta);
  ox = c * dx + s * dy;
  oy = -s * dx + c * dy;
}

}  // namespace

Point2 phantom_center(const PhantomConfig& cfg) { return draw(cfg).center; }

VectorField motion_model(const PhantomConfig& cfg, double tau) {
  cfg.validate();
  const double s = cycle_profile(cfg, tau);
  const Point2 c = phantom_center(cfg);
  const double scale = 1.0 - cfg.contraction_amp * s;
  const double theta = cfg.twist_amp * s;
  VectorField u(cfg.grid);
  if (s == 0.0) return u;
  for (int i = 0; i < cfg.grid.height; ++i) {
    for (int j = 0; j < cfg.grid.width; ++j) {
      double rx, ry;
      rotate(theta, j - c.x, i - c.y, rx, ry);
      const std::size_t k = cfg.grid.index(i, j);
      u.x[k] = c.x + scale * rx - j;
      u.y[k] = c.y + scale * ry - i;
    }
  }
  return u;
}

MapField inverse_motion(const PhantomConfig& cfg, double tau) {
  cfg.validate();
  const double s = cycle_profile(cfg, tau);
  const Point2 c = phantom_center(cfg);
  const double scale = 1.0 - cfg.contraction_amp * s;
  const double theta = cfg.twist_amp * s;
  VectorField u(cfg.grid);
  for (int i = 0; i < cfg.grid.height; ++i) {
    for (int j = 0; j < cfg.grid.width; ++j) {
      double rx, ry;
      rotate(-theta, j - c.x, i - c.y, rx, ry);
      const std::size_t k = cfg.grid.index(i, j);
      u.x[k] = c.x + rx / scale - j;
      u.y[k] = c.y + ry / scale - i;
    }
  }
  return MapField::from_displacement(std::move(u));
}

ScalarField render_frame(const PhantomConfig& cfg, double tau) {
  cfg.validate();
  const double s = cycle_profile(cfg, tau);
  const Point2 c = phantom_center(cfg);
  const double scale = 1.0 - cfg.contraction_amp * s;
  const double ri = cfg.r_inner * scale, ro = cfg.r_outer * scale;
  const int n = cfg.supersample;
  const double inv = 1.0 / (static_cast<double>(n) * n);
  ScalarField f(cfg.grid);
  for (int i = 0; i < cfg.grid.height; ++i) {
    for (int j = 0; j < cfg.grid.width; ++j) {
      int hits = 0;
      for (int a = 0; a < n; ++a) {
        for (int b = 0; b < n; ++b) {
          const double y = i + (a + 0.5) / n - 0.5;
          const double x = j + (b + 0.5) / n - 0.5;
          const double r = std::hypot(x - c.x, y - c.y);
          hits += (r >= ri && r < ro) ? 1 : 0;
        }
      }
      f(i, j) = hits * inv;
    }
  }
  if (cfg.intensity_std > 0.0) {
    const SmoothingKernel k = SmoothingKernel::make(cfg.intensity_std);
    const std::size_t shape[2] = {static_cast<std::size_t>(cfg.grid.height), static_cast<std::size_t>(cfg.grid.width)};
    f.values = smooth(k, f.values, shape);
  }
  return f;
}

Mask phantom_mask(const PhantomConfig& cfg) {
  cfg.validate();
  const Point2 c = phantom_center(cfg);
  Mask m(cfg.grid);
  for (int i = 0; i < cfg.grid.height; ++i) {
    for (int j = 0; j < cfg.grid.width; ++j) {
      const double r = std::hypot(j - c.x, i - c.y);
      m.labels[cfg.grid.index(i, j)] = (r >= cfg.r_inner && r < cfg.r_outer) ? 1 : 0;
    }
  }
  return m;
}

PhantomSample generate(const PhantomConfig& cfg) {
  cfg.validate();
  PhantomSample out;
  out.config = cfg;
  const Draws d = draw(cfg);
  out.center = d.center;
  out.insertion_angle = d.insertion_angle;
  for (int t = 0; t <= cfg.frames; ++t) out.images.push_back(render_frame(cfg, t));
  for (int t = 1; t <= cfg.frames; ++t) out.motions.push_back(motion_model(cfg, t));
  out.mask = phantom_mask(cfg);
  return out;
}

DatasetSplit split_dataset(std::size_t n, std::uint64_t seed) {
  if (n < 3) throw UsageError("dataset needs at least 3 sequences, got " + std::to_string(n));
  const std::size_t nval = std::max<std::size_t>(1, n * 101 / 741);
  const std::size_t ntest = std::max<std::size_t>(1, n * 102 / 741);
  std::vector<std::size_t> ids(n);
  for (std::size_t k = 0; k < n; ++k) ids[k] = k;
  std::mt19937_64 rng(seed ^ 0x5eed5b1175ULL);
  std::shuffle(ids.begin(), ids.end(), rng);
  DatasetSplit s;
  s.validation.assign(ids.begin(), ids.begin() + static_cast<std::ptrdiff_t>(nval));
  s.test.assign(ids.begin() + static_cast<std::ptrdiff_t>(nval), ids.begin() + static_cast<std::ptrdiff_t>(nval + ntest));
  s.train.assign(ids.begin() + static_cast<std::ptrdiff_t>(nval + ntest), ids.end());
  for (auto* v : {&s.train, &s.validation, &s.test}) std::sort(v->begin(), v->end());
  return s;
}

std::vector<PhantomConfig> dataset_configs(std::size_t n, const PhantomConfig& base, const PhantomRanges& ranges,
                                           std::uint64_t seed) {
  std::vector<PhantomConfig> out;
  out.reserve(n);
  for (std::size_t k = 0; k < n; ++k) {
    std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                      static_cast<std::uint32_t>(k)};
    std::mt19937_64 rng(seq);
    auto uni = [&](double lo, double hi) { return std::uniform_real_distribution<double>(lo, hi)(rng); };
    PhantomConfig c = base;
    c.contraction_amp = uni(ranges.contraction_min, ranges.contraction_max);
    c.twist_amp = uni(ranges.twist_min, ranges.twist_max);
    c.r_inner = uni(ranges.r_inner_min, ranges.r_inner_max);
    c.r_outer = c.r_inner + uni(ranges.thickness_min, ranges.thickness_max);
    c.center_jitter = ranges.center_jitter;
    c.seed = rng();
    c.validate();
    out.push_back(c);
  }
  return out;
}

Dataset make_dataset(std::size_t n, const PhantomConfig& base, const PhantomRanges& ranges, std::uint64_t seed) {
  Dataset d;
  d.split = split_dataset(n, seed);
  for (const auto& c : dataset_configs(n, base, ranges, seed)) d.samples.push_back(generate(c));
  return d;
}

}  // namespace lamod
