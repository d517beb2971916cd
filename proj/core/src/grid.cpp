#include "lamod/grid.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace lamod {

namespace {

void require_same_grid(const Grid2& a, const Grid2& b, const char* op) {
  if (!(a == b)) {
    throw DimensionError(std::string(op) + ": grid mismatch (" + std::to_string(a.height) + "x" +
                         std::to_string(a.width) + " vs " + std::to_string(b.height) + "x" +
                         std::to_string(b.width) + ")");
  }
}

// Cell lookup for clamp-to-edge bilinear sampling along one axis.
struct Axis {
  int lo;          // lower knot, in [0, n-2]
  double t;        // fractional position in [0, 1]
  bool clamped;    // coordinate fell outside [0, n-1]
};

inline Axis locate(double c, int n) {
  const double hi = static_cast<double>(n - 1);
  Axis a{0, 0.0, false};
  if (c < 0.0) {
    c = 0.0;
    a.clamped = true;
  } else if (c > hi) {
    c = hi;
    a.clamped = true;
  }
  int lo = static_cast<int>(std::floor(c));
  lo = std::min(lo, n - 2);
  a.lo = lo;
  a.t = c - static_cast<double>(lo);
  return a;
}

}  // namespace

Grid2 Grid2::make(int height, int width, double spacing) {
  if (height < 4 || width < 4) {
    throw UsageError("Grid2: height and width must be >= 4 (got " + std::to_string(height) + "x" +
                     std::to_string(width) + ")");
  }
  if (!(spacing > 0.0) || !std::isfinite(spacing)) throw UsageError("Grid2: spacing must be positive");
  return Grid2{height, width, spacing};
}

bool ScalarField::all_finite() const {
  return std::all_of(values.begin(), values.end(), [](double v) { return std::isfinite(v); });
}

bool VectorField::all_finite() const {
  auto fin = [](double v) { return std::isfinite(v); };
  return std::all_of(x.begin(), x.end(), fin) && std::all_of(y.begin(), y.end(), fin);
}

VectorField& VectorField::operator+=(const VectorField& other) {
  require_same_grid(grid, other.grid, "VectorField +=");
  for (std::size_t k = 0; k < x.size(); ++k) {
    x[k] += other.x[k];
    y[k] += other.y[k];
  }
  return *this;
}

VectorField& VectorField::operator-=(const VectorField& other) {
  require_same_grid(grid, other.grid, "VectorField -=");
  for (std::size_t k = 0; k < x.size(); ++k) {
    x[k] -= other.x[k];
    y[k] -= other.y[k];
  }
  return *this;
}

VectorField& VectorField::operator*=(double s) {
  for (auto& v : x) v *= s;
  for (auto& v : y) v *= s;
  return *this;
}

VectorField& VectorField::axpy(double s, const VectorField& other) {
  require_same_grid(grid, other.grid, "VectorField axpy");
  for (std::size_t k = 0; k < x.size(); ++k) {
    x[k] += s * other.x[k];
    y[k] += s * other.y[k];
  }
  return *this;
}

VectorField operator+(VectorField a, const VectorField& b) { return a += b; }
VectorField operator-(VectorField a, const VectorField& b) { return a -= b; }
VectorField operator*(double s, VectorField v) { return v *= s; }

MapField MapField::from_coordinates(const VectorField& coords) {
  VectorField u = coords;
  const Grid2& g = coords.grid;
  for (int i = 0; i < g.height; ++i) {
    for (int j = 0; j < g.width; ++j) {
      u.x[g.index(i, j)] -= static_cast<double>(j);
      u.y[g.index(i, j)] -= static_cast<double>(i);
    }
  }
  return MapField(std::move(u));
}

VectorField MapField::coordinates() const {
  VectorField c = disp_;
  const Grid2& g = disp_.grid;
  for (int i = 0; i < g.height; ++i) {
    for (int j = 0; j < g.width; ++j) {
      c.x[g.index(i, j)] += static_cast<double>(j);
      c.y[g.index(i, j)] += static_cast<double>(i);
    }
  }
  return c;
}

double sample_bilinear(std::span<const double> f, const Grid2& g, double x, double y) {
  const Axis ax = locate(x, g.width);
  const Axis ay = locate(y, g.height);
  const std::size_t k00 = g.index(ay.lo, ax.lo);
  const std::size_t k10 = k00 + static_cast<std::size_t>(g.width);
  // Weighted form keeps samples at knots exact (t = 0 or t = 1).
  const double top = (1.0 - ax.t) * f[k00] + ax.t * f[k00 + 1];
  const double bottom = (1.0 - ax.t) * f[k10] + ax.t * f[k10 + 1];
  return (1.0 - ay.t) * top + ay.t * bottom;
}

double sample_bilinear(const ScalarField& f, double x, double y) {
  return sample_bilinear(f.values, f.grid, x, y);
}

ScalarField interpolate(const ScalarField& field, const MapField& map) {
  require_same_grid(field.grid, map.grid(), "interpolate");
  const Grid2& g = field.grid;
  ScalarField out(g);
  for (int i = 0; i < g.height; ++i) {
    for (int j = 0; j < g.width; ++j) {
      out.values[g.index(i, j)] = sample_bilinear(field.values, g, map.x(i, j), map.y(i, j));
    }
  }
  return out;
}

VectorField warp_vector(const VectorField& field, const MapField& map) {
  require_same_grid(field.grid, map.grid(), "warp_vector");
  const Grid2& g = field.grid;
  VectorField out(g);
  for (int i = 0; i < g.height; ++i) {
    for (int j = 0; j < g.width; ++j) {
      const double px = map.x(i, j);
      const double py = map.y(i, j);
      out.x[g.index(i, j)] = sample_bilinear(field.x, g, px, py);
      out.y[g.index(i, j)] = sample_bilinear(field.y, g, px, py);
    }
  }
  return out;
}

MapField compose(const MapField& outer, const MapField& inner) {
  require_same_grid(outer.grid(), inner.grid(), "compose");
  // outer(inner(x)) - x = inner_disp(x) + outer_disp(inner(x))
  VectorField u = warp_vector(outer.displacement(), inner);
  u += inner.displacement();
  return MapField::from_displacement(std::move(u));
}

MapField displacement_to_map(const VectorField& u) { return MapField::from_displacement(u); }

VectorField map_to_displacement(const MapField& phi) { return phi.displacement(); }

void diff_x(std::span<const double> f, const Grid2& g, std::span<double> out) {
  const int w = g.width;
  for (int i = 0; i < g.height; ++i) {
    const double* row = f.data() + g.index(i, 0);
    double* o = out.data() + g.index(i, 0);
    o[0] = row[1] - row[0];
    for (int j = 1; j < w - 1; ++j) o[j] = 0.5 * (row[j + 1] - row[j - 1]);
    o[w - 1] = row[w - 1] - row[w - 2];
  }
}

void diff_y(std::span<const double> f, const Grid2& g, std::span<double> out) {
  const int h = g.height;
  const int w = g.width;
  const std::size_t sw = static_cast<std::size_t>(w);
  for (int j = 0; j < w; ++j) {
    out[g.index(0, j)] = f[g.index(1, j)] - f[g.index(0, j)];
    out[g.index(h - 1, j)] = f[g.index(h - 1, j)] - f[g.index(h - 2, j)];
  }
  for (int i = 1; i < h - 1; ++i) {
    const double* up = f.data() + g.index(i - 1, 0);
    const double* dn = up + 2 * sw;
    double* o = out.data() + g.index(i, 0);
    for (int j = 0; j < w; ++j) o[j] = 0.5 * (dn[j] - up[j]);
  }
}

void diff_x_adjoint(std::span<const double> go, const Grid2& g, std::span<double> out) {
  const int w = g.width;
  for (int i = 0; i < g.height; ++i) {
    const double* gr = go.data() + g.index(i, 0);
    double* o = out.data() + g.index(i, 0);
    o[1] += gr[0];
    o[0] -= gr[0];
    for (int j = 1; j < w - 1; ++j) {
      o[j + 1] += 0.5 * gr[j];
      o[j - 1] -= 0.5 * gr[j];
    }
    o[w - 1] += gr[w - 1];
    o[w - 2] -= gr[w - 1];
  }
}

void diff_y_adjoint(std::span<const double> go, const Grid2& g, std::span<double> out) {
  const int h = g.height;
  const int w = g.width;
  for (int j = 0; j < w; ++j) {
    out[g.index(1, j)] += go[g.index(0, j)];
    out[g.index(0, j)] -= go[g.index(0, j)];
    out[g.index(h - 1, j)] += go[g.index(h - 1, j)];
    out[g.index(h - 2, j)] -= go[g.index(h - 1, j)];
  }
  for (int i = 1; i < h - 1; ++i) {
    for (int j = 0; j < w; ++j) {
      const double v = 0.5 * go[g.index(i, j)];
      out[g.index(i + 1, j)] += v;
      out[g.index(i - 1, j)] -= v;
    }
  }
}

MatrixField jacobian(const VectorField& v) {
  const Grid2& g = v.grid;
  MatrixField jac(g);
  std::vector<double> d(g.size());
  for (int r = 0; r < 2; ++r) {
    const auto& comp = v.component(r);
    diff_x(comp, g, d);
    for (std::size_t k = 0; k < d.size(); ++k) jac.values[k][r][0] = d[k];
    diff_y(comp, g, d);
    for (std::size_t k = 0; k < d.size(); ++k) jac.values[k][r][1] = d[k];
  }
  return jac;
}

VectorField jacobian_adjoint(const MatrixField& grad_jac) {
  const Grid2& g = grad_jac.grid;
  VectorField out(g);
  std::vector<double> gx(g.size()), gy(g.size());
  for (int r = 0; r < 2; ++r) {
    for (std::size_t k = 0; k < g.size(); ++k) {
      gx[k] = grad_jac.values[k][r][0];
      gy[k] = grad_jac.values[k][r][1];
    }
    diff_x_adjoint(gx, g, out.component(r));
    diff_y_adjoint(gy, g, out.component(r));
  }
  return out;
}

ScalarField divergence(const VectorField& v) {
  const Grid2& g = v.grid;
  ScalarField out(g);
  std::vector<double> d(g.size());
  diff_x(v.x, g, out.values);
  diff_y(v.y, g, d);
  for (std::size_t k = 0; k < d.size(); ++k) out.values[k] += d[k];
  return out;
}

ScalarField jacobian_determinant(const MapField& phi) {
  const MatrixField jac = jacobian(phi.displacement());
  ScalarField det(phi.grid());
  for (std::size_t k = 0; k < det.values.size(); ++k) {
    const Mat2& m = jac.values[k];
    det.values[k] = (1.0 + m[0][0]) * (1.0 + m[1][1]) - m[0][1] * m[1][0];
  }
  return det;
}

void interpolate_adjoint_field(std::span<const double> grad_out, const MapField& map,
                               std::span<double> grad_field) {
  const Grid2& g = map.grid();
  const std::size_t sw = static_cast<std::size_t>(g.width);
  for (int i = 0; i < g.height; ++i) {
  for (int j = 0; j < g.width; ++j) {
    const std::size_t k = g.index(i, j);
    const double go = grad_out[k];
    if (go == 0.0) continue;
    const Axis ax = locate(map.x(i, j), g.width);
    const Axis ay = locate(map.y(i, j), g.height);
    const std::size_t k00 = g.index(ay.lo, ax.lo);
    grad_field[k00] += go * (1.0 - ax.t) * (1.0 - ay.t);
    grad_field[k00 + 1] += go * ax.t * (1.0 - ay.t);
    grad_field[k00 + sw] += go * (1.0 - ax.t) * ay.t;
    grad_field[k00 + sw + 1] += go * ax.t * ay.t;
  }
  }
}

void interpolate_adjoint_map(std::span<const double> f, std::span<const double> grad_out,
                             const MapField& map, VectorField& grad_map) {
  const Grid2& g = map.grid();
  const std::size_t sw = static_cast<std::size_t>(g.width);
  for (int i = 0; i < g.height; ++i) {
  for (int j = 0; j < g.width; ++j) {
    const std::size_t k = g.index(i, j);
    const double go = grad_out[k];
    if (go == 0.0) continue;
    const Axis ax = locate(map.x(i, j), g.width);
    const Axis ay = locate(map.y(i, j), g.height);
    const std::size_t k00 = g.index(ay.lo, ax.lo);
    const double f00 = f[k00], f01 = f[k00 + 1], f10 = f[k00 + sw], f11 = f[k00 + sw + 1];
    if (!ax.clamped) grad_map.x[k] += go * ((1.0 - ay.t) * (f01 - f00) + ay.t * (f11 - f10));
    if (!ay.clamped) grad_map.y[k] += go * ((1.0 - ax.t) * (f10 - f00) + ax.t * (f11 - f01));
  }
  }
}

}  // namespace lamod
