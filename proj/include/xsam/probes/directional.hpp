#pragma once

#include <algorithm>
#include <limits>
#include <utility>
#include <vector>

#include "xsam/autodiff/surface.hpp"
#include "xsam/optimizers/alpha_search.hpp"
#include "xsam/optimizers/slerp.hpp"

namespace xsam {

struct GapPoint {
  double rho_m;
  double gap;
};

/// L(ϑ₀ + ρ_m·ĝ₁) − L(ϑ₀ + ρ_m·ĝ₀) for each radius; NaN where either side
/// is not evaluable.
inline std::vector<GapPoint> directional_loss_gap(const LossSurface& surface, const ParamVector& theta,
                                                  const GradVector& g0, const GradVector& g1,
                                                  const std::vector<double>& radii, PassCount& count) {
  const double n0 = g0.norm(), n1 = g1.norm();
  if (!(n0 > 0.0) || !(n1 > 0.0)) throw DegenerateFrame("directional_loss_gap: zero gradient");
  const GradVector u0 = g0 / n0, u1 = g1 / n1;
  std::vector<GapPoint> out;
  out.reserve(radii.size());
  for (double r : radii) {
    if (r == 0.0) {
      out.push_back({r, 0.0});
      continue;
    }
    try {
      const double l1 = evaluate(surface, theta + r * u1, count);
      const double l0 = evaluate(surface, theta + r * u0, count);
      out.push_back({r, l1 - l0});
    } catch (const NumericError&) {
      out.push_back({r, std::numeric_limits<double>::quiet_NaN()});
    }
  }
  return out;
}

struct AlphaLandscape {
  std::vector<double> alphas;
  std::vector<double> losses;
  std::size_t argmax = 0;
};

/// The α-probe curve L(ϑ₀ + ρ_m·v(α)) on the search grid, optionally min-max
/// normalized to [0, 1]. Its argmax is the α* search_alpha would pick.
inline AlphaLandscape alpha_landscape(const LossSurface& surface, const ParamVector& theta,
                                      const SlerpFrame& frame, double rho_m, double a, int n,
                                      PassCount& count, bool normalize = false) {
  const AlphaSearch s = search_alpha(surface, theta, frame, rho_m, a, n, count);
  AlphaLandscape out{s.alphas, s.losses, 0};
  out.argmax = static_cast<std::size_t>(std::find(s.alphas.begin(), s.alphas.end(), s.alpha_star) - s.alphas.begin());
  if (normalize) {
    double lo = std::numeric_limits<double>::infinity(), hi = -lo;
    for (double v : out.losses) {
      if (std::isfinite(v)) {
        lo = std::min(lo, v);
        hi = std::max(hi, v);
      }
    }
    const double span = hi - lo;
    for (double& v : out.losses) v = span > 0.0 ? (v - lo) / span : 0.0;
  }
  return out;
}

}  // namespace xsam
