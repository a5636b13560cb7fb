#pragma once

#include <cmath>
#include <limits>
#include <utility>
#include <vector>

#include "xsam/autodiff/surface.hpp"

namespace xsam {

/// Orthonormal 2D frame through ϑ₀: e_y along g₀, e_x along the part of g₁
/// orthogonal to g₀.
struct PlaneBasis {
  ParamVector origin;
  GradVector e_x;
  GradVector e_y;

  ParamVector at(double x, double y) const { return origin + x * e_x + y * e_y; }

  /// Plane coordinates of `p` and its distance from the plane.
  std::pair<Eigen::Vector2d, double> coordinates(const ParamVector& p) const {
    const Eigen::VectorXd d = p - origin;
    const Eigen::Vector2d xy(d.dot(e_x), d.dot(e_y));
    const double off = (d - xy[0] * e_x - xy[1] * e_y).norm();
    return {xy, off};
  }
};

inline PlaneBasis plane_basis(const ParamVector& theta, const GradVector& g0, const GradVector& g1) {
  if (g0.size() != theta.size() || g1.size() != theta.size()) {
    throw DimensionMismatch("plane_basis: dimension mismatch");
  }
  const double n0 = g0.norm();
  if (!(n0 > 0.0)) throw DegenerateFrame("plane_basis: g0 is zero");
  PlaneBasis b{theta, GradVector(), g0 / n0};
  GradVector perp = g1 - g1.dot(b.e_y) * b.e_y;
  // second Gram-Schmidt pass for orthogonality at the 1e-16 level
  perp -= perp.dot(b.e_y) * b.e_y;
  const double np = perp.norm();
  if (!(np > 1e-10 * std::max(1.0, g1.norm()))) throw DegenerateFrame("plane_basis: g1 parallel to g0");
  b.e_x = perp / np;
  return b;
}

struct SurfaceGrid {
  PlaneBasis basis;
  std::pair<double, double> x_range;
  std::pair<double, double> y_range;
  std::pair<int, int> resolution;
  Eigen::VectorXd xs;
  Eigen::VectorXd ys;
  Matrix losses;  // losses(i, j) = L(origin + xs[i]·e_x + ys[j]·e_y); NaN when not evaluable
  int nonfinite_cells = 0;
};

/// Loss over a rectangular grid in the plane. Counts one forward per cell.
inline SurfaceGrid surface_grid(const LossSurface& surface, const PlaneBasis& basis,
                                std::pair<double, double> x_range, std::pair<double, double> y_range,
                                std::pair<int, int> resolution, PassCount& count) {
  if (resolution.first < 2 || resolution.second < 2) throw ConfigError("surface_grid: resolution must be >= 2x2");
  SurfaceGrid g{basis, x_range, y_range, resolution, inclusive_grid(x_range.first, x_range.second, resolution.first),
                inclusive_grid(y_range.first, y_range.second, resolution.second),
                Matrix(resolution.first, resolution.second), 0};
  for (int i = 0; i < resolution.first; ++i) {
    for (int j = 0; j < resolution.second; ++j) {
      try {
        g.losses(i, j) = evaluate(surface, basis.at(g.xs[i], g.ys[j]), count);
      } catch (const NumericError&) {
        g.losses(i, j) = std::numeric_limits<double>::quiet_NaN();
        ++g.nonfinite_cells;
      }
    }
  }
  return g;
}

}  // namespace xsam
