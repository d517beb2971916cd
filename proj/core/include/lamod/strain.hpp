#pragma once

// Strain and motion-error analytics on 2-D displacement fields.
//
// Angles are measured counterclockwise in the mathematical frame, i.e. with
// the image y axis flipped so that it points up: theta = atan2(-(y - cy), x - cx).
// Set `clockwise` to measure the other way round.

#include <array>
#include <cstdint>
#include <optional>
#include <vector>

#include "lamod/grid.hpp"

namespace lamod {

struct Point2 {
  double x = 0.0;
  double y = 0.0;
};

struct Mask {
  Grid2 grid;
  std::vector<std::uint8_t> labels;  // 1 = myocardium

  Mask() = default;
  explicit Mask(const Grid2& g) : grid(g), labels(g.size(), 0) {}

  bool operator()(int i, int j) const { return labels[grid.index(i, j)] != 0; }
  std::size_t count() const;
  Point2 centroid() const;  // throws UsageError for an empty mask
};

struct SegmentMap {
  Grid2 grid;
  std::vector<int> labels;  // 0 = background, 1..6 = segment
};

struct StrainMap {
  Grid2 grid;
  std::vector<double> ecc;
  std::vector<double> err;
  Mask valid;
};

using SegmentValues = std::array<std::optional<double>, 6>;

// F = I + jacobian(u).
MatrixField deformation_gradient(const VectorField& u);

// E = (F^T F - I) / 2.
MatrixField green_lagrange(const MatrixField& f);

// Projections of E onto the circumferential and radial unit vectors about
// `center`. Pixels within 1 px of the center are invalid.
StrainMap circumferential_strain(const MatrixField& e, Point2 center);

// Pixel angle about `center`, counterclockwise from the +x axis, in [0, 2 pi).
double polar_angle(double x, double y, Point2 center, bool clockwise = false);

// Segment 1 + floor(6 * theta / 2 pi) with theta measured from insertion_angle.
SegmentMap segment_mask(const Mask& mask, Point2 center, double insertion_angle, bool clockwise = false);

// Mean Ecc over valid pixels of each segment; empty segments are nullopt.
SegmentValues segmental_strain(const StrainMap& s, const SegmentMap& seg);

// |mean_pred - mean_truth| per segment; missing in either input stays missing.
SegmentValues segmental_strain_error(const StrainMap& pred, const StrainMap& truth, const SegmentMap& seg);

// Mean end-point error over the mask in mm (pixel norm times spacing).
double epe(const VectorField& pred, const VectorField& truth, const Mask& mask);

// Ecc/Err map of a displacement field about `center`.
StrainMap strain_from_displacement(const VectorField& u, Point2 center);

}  // namespace lamod
