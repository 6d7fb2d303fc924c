#pragma once

#include <array>
#include <cmath>
#include <cstddef>
#include <span>
#include <vector>

#include "leda/error.hpp"

namespace leda {

/// Regular 2D pixel grid with unit spacing.
struct Grid2 {
  int height = 0;
  int width = 0;

  std::size_t pixels() const noexcept { return static_cast<std::size_t>(height) * width; }
  bool valid() const noexcept { return height >= 4 && width >= 4; }
  friend bool operator==(const Grid2&, const Grid2&) = default;
};

/// Throws InvalidArgument unless both dimensions are at least 4.
void require_valid(const Grid2& grid);

using Vec2 = std::array<double, 2>;

/// H x W x 2 field of (row, column) components in grid-index units, stored
/// row-major with the component index fastest.
class VectorField {
 public:
  VectorField() = default;
  explicit VectorField(Grid2 grid);
  VectorField(Grid2 grid, std::vector<double> data);

  const Grid2& grid() const noexcept { return grid_; }
  std::span<const double> data() const noexcept { return data_; }
  std::span<double> data() noexcept { return data_; }
  std::size_t size() const noexcept { return data_.size(); }

  double& at(int row, int col, int comp) { return data_[index(row, col, comp)]; }
  double at(int row, int col, int comp) const { return data_[index(row, col, comp)]; }
  Vec2 operator()(int row, int col) const {
    const std::size_t i = index(row, col, 0);
    return {data_[i], data_[i + 1]};
  }

  friend bool operator==(const VectorField&, const VectorField&) = default;

 private:
  std::size_t index(int row, int col, int comp) const noexcept {
    return (static_cast<std::size_t>(row) * grid_.width + col) * 2 + comp;
  }

  Grid2 grid_{};
  std::vector<double> data_;
};

/// phi(x) = x + u(x). Positivity of the Jacobian is a diagnostic only.
struct DeformationField {
  VectorField displacement;

  const Grid2& grid() const noexcept { return displacement.grid(); }
  friend bool operator==(const DeformationField&, const DeformationField&) = default;
};

/// H x W scalar map (images, log-determinant maps).
class ScalarField {
 public:
  ScalarField() = default;
  explicit ScalarField(Grid2 grid, double fill = 0.0);
  ScalarField(Grid2 grid, std::vector<double> data);

  const Grid2& grid() const noexcept { return grid_; }
  std::span<const double> data() const noexcept { return data_; }
  std::span<double> data() noexcept { return data_; }

  double& at(int row, int col) { return data_[static_cast<std::size_t>(row) * grid_.width + col]; }
  double at(int row, int col) const { return data_[static_cast<std::size_t>(row) * grid_.width + col]; }

  friend bool operator==(const ScalarField&, const ScalarField&) = default;

 private:
  Grid2 grid_{};
  std::vector<double> data_;
};

namespace detail {

// One axis of the clamped bilinear stencil. A clamped query has zero
// derivative along that axis. A query on the last node uses i1 == i0.
struct AxisStencil {
  int i0;
  int i1;
  double frac;
  bool clamped;
};

inline AxisStencil axis_stencil(double q, int n) {
  const double hi = static_cast<double>(n - 1);
  bool clamped = false;
  if (q < 0.0) {
    q = 0.0;
    clamped = true;
  } else if (q > hi) {
    q = hi;
    clamped = true;
  }
  int i0 = static_cast<int>(std::floor(q));
  if (i0 > n - 1) i0 = n - 1;
  const int i1 = i0 + 1 < n ? i0 + 1 : n - 1;
  return {i0, i1, q - i0, clamped};
}

// Lerp-form bilinear interpolation of one channel; exact at nodes and for
// constant data.
inline double bilerp(double f00, double f01, double f10, double f11, double fr, double fc) {
  const double top = f00 + fc * (f01 - f00);
  const double bot = f10 + fc * (f11 - f10);
  return top + fr * (bot - top);
}

}  // namespace detail

/// Clamped bilinear sample of a vector field at a real (row, col) position.
inline Vec2 sample(const VectorField& f, double row, double col) {
  const Grid2& g = f.grid();
  const auto sr = detail::axis_stencil(row, g.height);
  const auto sc = detail::axis_stencil(col, g.width);
  Vec2 out{};
  for (int k = 0; k < 2; ++k) {
    out[k] = detail::bilerp(f.at(sr.i0, sc.i0, k), f.at(sr.i0, sc.i1, k), f.at(sr.i1, sc.i0, k),
                            f.at(sr.i1, sc.i1, k), sr.frac, sc.frac);
  }
  return out;
}

/// Clamped bilinear sample of a scalar map.
inline double sample(const ScalarField& f, double row, double col) {
  const Grid2& g = f.grid();
  const auto sr = detail::axis_stencil(row, g.height);
  const auto sc = detail::axis_stencil(col, g.width);
  return detail::bilerp(f.at(sr.i0, sc.i0), f.at(sr.i0, sc.i1), f.at(sr.i1, sc.i0), f.at(sr.i1, sc.i1),
                        sr.frac, sc.frac);
}

DeformationField make_identity(Grid2 grid);

/// Samples `f` at each (row, col) point. Throws InvalidArgument on non-finite
/// coordinates.
std::vector<Vec2> sample_displacement(const VectorField& f, std::span<const Vec2> points);

/// (outer o inner)(x) = outer(inner(x)).
DeformationField compose(const DeformationField& outer, const DeformationField& inner);

/// C_{2^n}(f) by n repeated squarings.
DeformationField self_compose(const DeformationField& f, int n_doublings);

VectorField negate(const VectorField& f);
VectorField scaled(const VectorField& f, double s);
VectorField sum(const VectorField& a, const VectorField& b);
VectorField difference(const VectorField& a, const VectorField& b);

/// Mean Euclidean norm of the displacement of fwd o bwd. Pixels closer than
/// `margin` to the border are excluded.
double inverse_consistency_residual(const DeformationField& fwd, const DeformationField& bwd, int margin = 0);

/// sqrt(mean |u|^2) over pixels at least `margin` from the border.
double rms(const VectorField& f, int margin = 0);
double rms_difference(const VectorField& a, const VectorField& b, int margin = 0);
/// ||estimate - reference|| / ||reference|| in the L2 sense.
double relative_l2(const VectorField& estimate, const VectorField& reference);
double max_norm(const VectorField& f);

/// Jacobian determinant of phi = x + u; central differences inside,
/// one-sided on the border.
ScalarField jacobian_det(const DeformationField& f);
/// log det J, NaN where det <= 0.
ScalarField jacobian_logdet(const DeformationField& f);
double min_jacobian_det(const DeformationField& f);

/// out(x) = img(phi(x)) with clamped bilinear sampling.
ScalarField warp_image(const ScalarField& img, const DeformationField& f);

}  // namespace leda
