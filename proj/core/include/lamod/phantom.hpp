#pragma once

// Synthetic beating-annulus sequences with analytic motion.
//
// A point at radius r and angle phi about the center moves to radius
// r (1 - a s(tau)) and angle phi + theta_max s(tau), with the cycle profile
// s(tau) = (1 - cos(2 pi tau / T)) / 2. The annulus is rotationally
// symmetric, so the twist never shows up in the rendered frames.

#include <cstdint>
#include <string>
#include <vector>

#include "lamod/grid.hpp"
#include "lamod/strain.hpp"

namespace lamod {

struct PhantomConfig {
  Grid2 grid = Grid2{64, 64, 1.0};
  int frames = 8;  // T, frames after the reference
  double r_inner = 12.0;
  double r_outer = 20.0;
  double contraction_amp = 0.15;  // a in [0, 0.3]
  double twist_amp = 0.2;         // theta_max in [0, 0.5] rad
  double center_jitter = 0.0;     // max center offset in px, per axis
  double intensity_std = 1.0;     // Gaussian blur of the frames; 0 disables
  int supersample = 4;            // per-axis subsamples for edge anti-aliasing; 1 disables
  std::uint64_t seed = 0;

  void validate() const;
};

struct PhantomSample {
  FieldSequence<ScalarField> images;   // T + 1 frames
  FieldSequence<VectorField> motions;  // Phi^1 .. Phi^T
  Mask mask;                           // reference-frame myocardium
  double insertion_angle = 0.0;
  Point2 center;
  PhantomConfig config;
};

double cycle_profile(const PhantomConfig& cfg, double tau);

// Center of the annulus for this config (grid center plus seeded jitter).
Point2 phantom_center(const PhantomConfig& cfg);

// Phi^tau: displacement from the reference frame, defined on the whole grid.
VectorField motion_model(const PhantomConfig& cfg, double tau);

// Maps each pixel y to the reference position that moves onto y at tau, so
// interpolate(frame 0, inverse_motion) approximates frame tau.
MapField inverse_motion(const PhantomConfig& cfg, double tau);

ScalarField render_frame(const PhantomConfig& cfg, double tau);

// Reference-frame annulus membership at pixel centers.
Mask phantom_mask(const PhantomConfig& cfg);

PhantomSample generate(const PhantomConfig& cfg);

struct PhantomRanges {
  double contraction_min = 0.1, contraction_max = 0.2;
  double twist_min = 0.1, twist_max = 0.3;
  double r_inner_min = 9.0, r_inner_max = 13.0;
  double thickness_min = 6.0, thickness_max = 9.0;
  double center_jitter = 2.0;
};

struct DatasetSplit {
  std::vector<std::size_t> train, validation, test;
};

// Split sizes follow 538/101/102 of 741: validation floor(n 101/741), test
// floor(n 102/741), each at least 1; the rest train. Ids are shuffled by seed.
DatasetSplit split_dataset(std::size_t n, std::uint64_t seed);

// Per-sequence configs drawn from `ranges`; sequence k is deterministic in
// (seed, k).
std::vector<PhantomConfig> dataset_configs(std::size_t n, const PhantomConfig& base, const PhantomRanges& ranges,
                                           std::uint64_t seed);

struct Dataset {
  std::vector<PhantomSample> samples;
  DatasetSplit split;
};

Dataset make_dataset(std::size_t n, const PhantomConfig& base, const PhantomRanges& ranges, std::uint64_t seed);

}  // namespace lamod
