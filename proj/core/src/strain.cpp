#include "lamod/strain.hpp"

#include <cmath>
#include <numbers>
#include <string>

#include "lamod/error.hpp"

namespace lamod {

std::size_t Mask::count() const {
  std::size_t n = 0;
  for (auto l : labels) n += l != 0;
  return n;
}

Point2 Mask::centroid() const {
  double sx = 0.0, sy = 0.0;
  std::size_t n = 0;
  for (int i = 0; i < grid.height; ++i) {
    for (int j = 0; j < grid.width; ++j) {
      if ((*this)(i, j)) {
        sx += j;
        sy += i;
        ++n;
      }
    }
  }
  if (n == 0) throw UsageError("centroid of an empty mask");
  return {sx / static_cast<double>(n), sy / static_cast<double>(n)};
}

MatrixField deformation_gradient(const VectorField& u) {
  MatrixField f = jacobian(u);
  for (auto& m : f.values) {
    m[0][0] += 1.0;
    m[1][1] += 1.0;
  }
  return f;
}

MatrixField green_lagrange(const MatrixField& f) {
  MatrixField e(f.grid);
  for (std::size_t k = 0; k < f.values.size(); ++k) {
    const Mat2& a = f.values[k];
    Mat2& out = e.values[k];
    for (int r = 0; r < 2; ++r) {
      for (int c = 0; c < 2; ++c) out[r][c] = 0.5 * (a[0][r] * a[0][c] + a[1][r] * a[1][c] - (r == c ? 1.0 : 0.0));
    }
  }
  return e;
}

namespace {

void require_center(const Grid2& g, Point2 c) {
  if (!(c.x >= 0.0 && c.y >= 0.0 && c.x <= g.width - 1 && c.y <= g.height - 1)) {
    throw UsageError("center (" + std::to_string(c.x) + ", " + std::to_string(c.y) + ") is outside the grid");
  }
}

}  // namespace

StrainMap circumferential_strain(const MatrixField& e, Point2 center) {
  const Grid2& g = e.grid;
  require_center(g, center);
  StrainMap s;
  s.grid = g;
  s.ecc.assign(g.size(), 0.0);
  s.err.assign(g.size(), 0.0);
  s.valid = Mask(g);
  for (int i = 0; i < g.height; ++i) {
    for (int j = 0; j < g.width; ++j) {
      const double dx = j - center.x, dy = i - center.y;
      const double r = std::hypot(dx, dy);
      if (r <= 1.0) continue;
      const std::size_t k = g.index(i, j);
      const double er[2] = {dx / r, dy / r};
      const double ec[2] = {-er[1], er[0]};
      const Mat2& m = e.values[k];
      double cc = 0.0, rr = 0.0;
      for (int a = 0; a < 2; ++a) {
        for (int b = 0; b < 2; ++b) {
          cc += ec[a] * m[a][b] * ec[b];
          rr += er[a] * m[a][b] * er[b];
        }
      }
      s.ecc[k] = cc;
      s.err[k] = rr;
      s.valid.labels[k] = 1;
    }
  }
  return s;
}

double polar_angle(double x, double y, Point2 center, bool clockwise) {
  const double two_pi = 2.0 * std::numbers::pi;
  double t = std::atan2(-(y - center.y), x - center.x);
  if (clockwise) t = -t;
  t = std::fmod(t, two_pi);
  if (t < 0.0) t += two_pi;
  return t;
}

SegmentMap segment_mask(const Mask& mask, Point2 center, double insertion_angle, bool clockwise) {
  if (mask.count() == 0) throw UsageError("segment_mask: empty mask");
  const double two_pi = 2.0 * std::numbers::pi;
  const Grid2& g = mask.grid;
  SegmentMap seg{g, std::vector<int>(g.size(), 0)};
  for (int i = 0; i < g.height; ++i) {
    for (int j = 0; j < g.width; ++j) {
      if (!mask(i, j)) continue;
      double t = std::fmod(polar_angle(j, i, center, clockwise) - insertion_angle, two_pi);
      if (t < 0.0) t += two_pi;
      // Bins are half-open; angles within 1e-9 of a boundary go to the upper
      // bin, and a full turn wraps back to segment 1.
      int s = 1 + static_cast<int>(std::floor(6.0 * t / two_pi + 1e-9));
      if (s > 6) s = 1;
      seg.labels[g.index(i, j)] = s;
    }
  }
  return seg;
}

SegmentValues segmental_strain(const StrainMap& s, const SegmentMap& seg) {
  if (!(s.grid == seg.grid)) throw DimensionError("segmental_strain: strain and segment grids differ");
  std::array<double, 6> sum{};
  std::array<std::size_t, 6> n{};
  for (std::size_t k = 0; k < seg.labels.size(); ++k) {
    const int l = seg.labels[k];
    if (l < 1 || l > 6 || !s.valid.labels[k]) continue;
    sum[static_cast<std::size_t>(l - 1)] += s.ecc[k];
    n[static_cast<std::size_t>(l - 1)] += 1;
  }
  SegmentValues out;
  for (std::size_t q = 0; q < 6; ++q) {
    if (n[q] > 0) out[q] = sum[q] / static_cast<double>(n[q]);
  }
  return out;
}

SegmentValues segmental_strain_error(const StrainMap& pred, const StrainMap& truth, const SegmentMap& seg) {
  const SegmentValues p = segmental_strain(pred, seg);
  const SegmentValues t = segmental_strain(truth, seg);
  SegmentValues out;
  for (std::size_t q = 0; q < 6; ++q) {
    if (p[q] && t[q]) out[q] = std::abs(*p[q] - *t[q]);
  }
  return out;
}

double epe(const VectorField& pred, const VectorField& truth, const Mask& mask) {
  if (!(pred.grid == truth.grid) || !(pred.grid == mask.grid)) {
    throw DimensionError("epe: prediction, truth and mask grids differ");
  }
  double acc = 0.0;
  std::size_t n = 0;
  for (std::size_t k = 0; k < mask.labels.size(); ++k) {
    if (!mask.labels[k]) continue;
    acc += std::hypot(pred.x[k] - truth.x[k], pred.y[k] - truth.y[k]);
    ++n;
  }
  if (n == 0) throw UsageError("epe: empty mask");
  return acc / static_cast<double>(n) * pred.grid.spacing;
}

StrainMap strain_from_displacement(const VectorField& u, Point2 center) {
  return circumferential_strain(green_lagrange(deformation_gradient(u)), center);
}

}  // namespace lamod
