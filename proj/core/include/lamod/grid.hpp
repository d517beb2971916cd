#pragma once

// Regular 2-D grids and the fields that live on them.
//
// Conventions used throughout the library:
//   * pixel (i, j) is row i (y axis, pointing down) and column j (x axis);
//   * storage is row-major, index = i * width + j;
//   * vector fields carry an x (column) and a y (row) component in pixel units;
//   * a MapField represents absolute target coordinates, so the identity map has
//     coordinates (x, y) = (j, i) at pixel (i, j);
//   * sampling outside the domain clamps to the nearest edge, and finite
//     differences are central in the interior and one-sided at the border.

#include <array>
#include <cstddef>
#include <span>
#include <vector>

#include "lamod/error.hpp"

namespace lamod {

struct Grid2 {
  int height = 0;
  int width = 0;
  double spacing = 1.0;  // mm per pixel, isotropic

  // Validates height, width >= 4 and spacing > 0.
  static Grid2 make(int height, int width, double spacing = 1.0);

  std::size_t size() const noexcept {
    return static_cast<std::size_t>(height) * static_cast<std::size_t>(width);
  }
  std::size_t index(int i, int j) const noexcept {
    return static_cast<std::size_t>(i) * static_cast<std::size_t>(width) + static_cast<std::size_t>(j);
  }
  // Interior pixels are those where central differences apply in both axes.
  bool interior(int i, int j) const noexcept { return i > 0 && j > 0 && i < height - 1 && j < width - 1; }

  friend bool operator==(const Grid2&, const Grid2&) = default;
};

struct ScalarField {
  Grid2 grid;
  std::vector<double> values;

  ScalarField() = default;
  explicit ScalarField(const Grid2& g, double fill = 0.0) : grid(g), values(g.size(), fill) {}

  double& operator()(int i, int j) { return values[grid.index(i, j)]; }
  double operator()(int i, int j) const { return values[grid.index(i, j)]; }

  bool all_finite() const;
};

struct VectorField {
  Grid2 grid;
  std::vector<double> x;
  std::vector<double> y;

  VectorField() = default;
  explicit VectorField(const Grid2& g, double fx = 0.0, double fy = 0.0)
      : grid(g), x(g.size(), fx), y(g.size(), fy) {}

  std::vector<double>& component(int c) { return c == 0 ? x : y; }
  const std::vector<double>& component(int c) const { return c == 0 ? x : y; }

  bool all_finite() const;

  VectorField& operator+=(const VectorField& other);
  VectorField& operator-=(const VectorField& other);
  VectorField& operator*=(double s);
  // this += s * other
  VectorField& axpy(double s, const VectorField& other);
};

VectorField operator+(VectorField a, const VectorField& b);
VectorField operator-(VectorField a, const VectorField& b);
VectorField operator*(double s, VectorField v);

// A deformation x -> phi(x) in absolute pixel coordinates. The map is stored
// as its displacement phi(x) - x so that conversions to and from displacement
// fields are exact; x()/y() return absolute coordinates.
class MapField {
 public:
  MapField() = default;

  static MapField identity(const Grid2& g) { return MapField(VectorField(g)); }
  static MapField from_displacement(VectorField u) { return MapField(std::move(u)); }
  static MapField from_coordinates(const VectorField& coords);

  const Grid2& grid() const noexcept { return disp_.grid; }

  double x(int i, int j) const { return static_cast<double>(j) + disp_.x[disp_.grid.index(i, j)]; }
  double y(int i, int j) const { return static_cast<double>(i) + disp_.y[disp_.grid.index(i, j)]; }

  VectorField coordinates() const;
  const VectorField& displacement() const noexcept { return disp_; }
  VectorField& displacement() noexcept { return disp_; }

 private:
  explicit MapField(VectorField u) : disp_(std::move(u)) {}
  VectorField disp_;
};

// Row-major 2x2 matrix; m[r][c].
using Mat2 = std::array<std::array<double, 2>, 2>;

struct MatrixField {
  Grid2 grid;
  std::vector<Mat2> values;

  MatrixField() = default;
  explicit MatrixField(const Grid2& g) : grid(g), values(g.size(), Mat2{}) {}

  Mat2& operator()(int i, int j) { return values[grid.index(i, j)]; }
  const Mat2& operator()(int i, int j) const { return values[grid.index(i, j)]; }
};

// Frames of a sequence all share one grid; frame 0 is the reference.
template <typename Field>
using FieldSequence = std::vector<Field>;

// Throws DimensionError if the frames do not share a grid.
template <typename Field>
void require_shared_grid(const FieldSequence<Field>& seq) {
  for (const auto& f : seq) {
    if (!(f.grid == seq.front().grid)) throw DimensionError("sequence frames do not share a grid");
  }
}

// ---------------------------------------------------------------------------
// Sampling and warping

// Bilinear sample with clamp-to-edge; (x, y) are continuous pixel coordinates.
double sample_bilinear(const ScalarField& f, double x, double y);
double sample_bilinear(std::span<const double> values, const Grid2& g, double x, double y);

// output(p) = field(map(p)).
ScalarField interpolate(const ScalarField& field, const MapField& map);
VectorField warp_vector(const VectorField& field, const MapField& map);

// result(p) = outer(inner(p)).
MapField compose(const MapField& outer, const MapField& inner);

MapField displacement_to_map(const VectorField& u);
VectorField map_to_displacement(const MapField& phi);

// ---------------------------------------------------------------------------
// Differential operators (pixel units)

// Derivative along x (columns) and y (rows) of a scalar array.
void diff_x(std::span<const double> f, const Grid2& g, std::span<double> out);
void diff_y(std::span<const double> f, const Grid2& g, std::span<double> out);

// entry (r, c) = d v_r / d x_c with index 0 = x, 1 = y.
MatrixField jacobian(const VectorField& v);
ScalarField divergence(const VectorField& v);
ScalarField jacobian_determinant(const MapField& phi);

// ---------------------------------------------------------------------------
// Vector-Jacobian products used by reverse-mode differentiation of the
// registration energy. Each returns (or accumulates) the adjoint of the
// corresponding forward operation.

// Transpose of diff_x / diff_y; accumulates into out.
void diff_x_adjoint(std::span<const double> g_out, const Grid2& g, std::span<double> out);
void diff_y_adjoint(std::span<const double> g_out, const Grid2& g, std::span<double> out);

// Adjoint of jacobian(): given dL/dJ per pixel, returns dL/dv.
VectorField jacobian_adjoint(const MatrixField& grad_jac);

// For out = interpolate(field, map): scatter grad_out back onto the field
// (accumulated into grad_field).
void interpolate_adjoint_field(std::span<const double> grad_out, const MapField& map,
                               std::span<double> grad_field);

// For out = interpolate(field, map): dL/dmap = grad_out * d(field)/d(x, y)
// evaluated at the sample point (zero along clamped axes). Accumulated into
// grad_map, which is also the gradient with respect to the map's displacement.
void interpolate_adjoint_map(std::span<const double> field, std::span<const double> grad_out,
                             const MapField& map, VectorField& grad_map);

}  // namespace lamod
