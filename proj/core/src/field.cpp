#include "leda/field.hpp"

#include <algorithm>
#include <limits>
#include <string>

namespace leda {

void require_valid(const Grid2& grid) {
  if (!grid.valid()) {
    throw InvalidArgument("grid must be at least 4x4, got " + std::to_string(grid.height) + "x" +
                          std::to_string(grid.width));
  }
}

VectorField::VectorField(Grid2 grid) : grid_(grid), data_(grid.pixels() * 2, 0.0) {}

VectorField::VectorField(Grid2 grid, std::vector<double> data) : grid_(grid), data_(std::move(data)) {
  if (data_.size() != grid_.pixels() * 2) {
    throw ShapeMismatch("vector field data has " + std::to_string(data_.size()) + " entries, grid needs " +
                        std::to_string(grid_.pixels() * 2));
  }
}

ScalarField::ScalarField(Grid2 grid, double fill) : grid_(grid), data_(grid.pixels(), fill) {}

ScalarField::ScalarField(Grid2 grid, std::vector<double> data) : grid_(grid), data_(std::move(data)) {
  if (data_.size() != grid_.pixels()) {
    throw ShapeMismatch("scalar field data has " + std::to_string(data_.size()) + " entries, grid needs " +
                        std::to_string(grid_.pixels()));
  }
}

namespace {

void require_same_grid(const Grid2& a, const Grid2& b, const char* what) {
  if (!(a == b)) {
    throw GridMismatch(std::string(what) + ": grids differ (" + std::to_string(a.height) + "x" +
                       std::to_string(a.width) + " vs " + std::to_string(b.height) + "x" +
                       std::to_string(b.width) + ")");
  }
}

bool in_interior(const Grid2& g, int r, int c, int margin) {
  return r >= margin && c >= margin && r < g.height - margin && c < g.width - margin;
}

}  // namespace

DeformationField make_identity(Grid2 grid) {
  require_valid(grid);
  return DeformationField{VectorField(grid)};
}

std::vector<Vec2> sample_displacement(const VectorField& f, std::span<const Vec2> points) {
  std::vector<Vec2> out;
  out.reserve(points.size());
  for (const Vec2& p : points) {
    if (!std::isfinite(p[0]) || !std::isfinite(p[1])) {
      throw InvalidArgument("sample_displacement: non-finite query coordinate");
    }
    out.push_back(sample(f, p[0], p[1]));
  }
  return out;
}

DeformationField compose(const DeformationField& outer, const DeformationField& inner) {
  require_same_grid(outer.grid(), inner.grid(), "compose");
  const Grid2& g = inner.grid();
  const VectorField& ui = inner.displacement;
  const VectorField& uo = outer.displacement;
  VectorField out(g);
  for (int r = 0; r < g.height; ++r) {
    for (int c = 0; c < g.width; ++c) {
      const double dr = ui.at(r, c, 0);
      const double dc = ui.at(r, c, 1);
      const Vec2 s = sample(uo, r + dr, c + dc);
      out.at(r, c, 0) = dr + s[0];
      out.at(r, c, 1) = dc + s[1];
    }
  }
  return DeformationField{std::move(out)};
}

DeformationField self_compose(const DeformationField& f, int n_doublings) {
  if (n_doublings < 0) throw InvalidArgument("self_compose: n_doublings must be >= 0");
  DeformationField psi = f;
  for (int i = 0; i < n_doublings; ++i) psi = compose(psi, psi);
  return psi;
}

VectorField negate(const VectorField& f) { return scaled(f, -1.0); }

VectorField scaled(const VectorField& f, double s) {
  VectorField out = f;
  for (double& x : out.data()) x *= s;
  return out;
}

VectorField sum(const VectorField& a, const VectorField& b) {
  require_same_grid(a.grid(), b.grid(), "sum");
  VectorField out = a;
  auto o = out.data();
  auto bd = b.data();
  for (std::size_t i = 0; i < o.size(); ++i) o[i] += bd[i];
  return out;
}

VectorField difference(const VectorField& a, const VectorField& b) {
  require_same_grid(a.grid(), b.grid(), "difference");
  VectorField out = a;
  auto o = out.data();
  auto bd = b.data();
  for (std::size_t i = 0; i < o.size(); ++i) o[i] -= bd[i];
  return out;
}

double inverse_consistency_residual(const DeformationField& fwd, const DeformationField& bwd, int margin) {
  require_same_grid(fwd.grid(), bwd.grid(), "inverse_consistency_residual");
  const DeformationField both = compose(fwd, bwd);
  const Grid2& g = both.grid();
  double total = 0.0;
  std::size_t count = 0;
  for (int r = 0; r < g.height; ++r) {
    for (int c = 0; c < g.width; ++c) {
      if (!in_interior(g, r, c, margin)) continue;
      const Vec2 u = both.displacement(r, c);
      total += std::hypot(u[0], u[1]);
      ++count;
    }
  }
  return count ? total / count : 0.0;
}

double rms(const VectorField& f, int margin) {
  const Grid2& g = f.grid();
  double total = 0.0;
  std::size_t count = 0;
  for (int r = 0; r < g.height; ++r) {
    for (int c = 0; c < g.width; ++c) {
      if (!in_interior(g, r, c, margin)) continue;
      const Vec2 u = f(r, c);
      total += u[0] * u[0] + u[1] * u[1];
      ++count;
    }
  }
  return count ? std::sqrt(total / count) : 0.0;
}

double rms_difference(const VectorField& a, const VectorField& b, int margin) {
  return rms(difference(a, b), margin);
}

double relative_l2(const VectorField& estimate, const VectorField& reference) {
  require_same_grid(estimate.grid(), reference.grid(), "relative_l2");
  double num = 0.0;
  double den = 0.0;
  auto e = estimate.data();
  auto r = reference.data();
  for (std::size_t i = 0; i < e.size(); ++i) {
    num += (e[i] - r[i]) * (e[i] - r[i]);
    den += r[i] * r[i];
  }
  if (den == 0.0) return num == 0.0 ? 0.0 : std::numeric_limits<double>::infinity();
  return std::sqrt(num / den);
}

double max_norm(const VectorField& f) {
  const Grid2& g = f.grid();
  double best = 0.0;
  for (int r = 0; r < g.height; ++r) {
    for (int c = 0; c < g.width; ++c) {
      const Vec2 u = f(r, c);
      best = std::max(best, std::hypot(u[0], u[1]));
    }
  }
  return best;
}

namespace {

// Derivative of component k of u along axis (0 = rows, 1 = cols).
double partial(const VectorField& u, int r, int c, int k, int axis) {
  const Grid2& g = u.grid();
  const int n = axis == 0 ? g.height : g.width;
  const int i = axis == 0 ? r : c;
  auto value = [&](int j) { return axis == 0 ? u.at(j, c, k) : u.at(r, j, k); };
  if (i == 0) return value(1) - value(0);
  if (i == n - 1) return value(n - 1) - value(n - 2);
  return 0.5 * (value(i + 1) - value(i - 1));
}

}  // namespace

ScalarField jacobian_det(const DeformationField& f) {
  const VectorField& u = f.displacement;
  const Grid2& g = u.grid();
  ScalarField out(g);
  for (int r = 0; r < g.height; ++r) {
    for (int c = 0; c < g.width; ++c) {
      const double a = 1.0 + partial(u, r, c, 0, 0);
      const double b = partial(u, r, c, 0, 1);
      const double d = partial(u, r, c, 1, 0);
      const double e = 1.0 + partial(u, r, c, 1, 1);
      out.at(r, c) = a * e - b * d;
    }
  }
  return out;
}

ScalarField jacobian_logdet(const DeformationField& f) {
  ScalarField det = jacobian_det(f);
  for (double& x : det.data()) {
    x = x > 0.0 ? std::log(x) : std::numeric_limits<double>::quiet_NaN();
  }
  return det;
}

double min_jacobian_det(const DeformationField& f) {
  const ScalarField det = jacobian_det(f);
  double best = std::numeric_limits<double>::infinity();
  for (double x : det.data()) best = std::min(best, x);
  return best;
}

ScalarField warp_image(const ScalarField& img, const DeformationField& f) {
  require_same_grid(img.grid(), f.grid(), "warp_image");
  const Grid2& g = img.grid();
  ScalarField out(g);
  for (int r = 0; r < g.height; ++r) {
    for (int c = 0; c < g.width; ++c) {
      const Vec2 u = f.displacement(r, c);
      out.at(r, c) = sample(img, r + u[0], c + u[1]);
    }
  }
  return out;
}

}  // namespace leda
