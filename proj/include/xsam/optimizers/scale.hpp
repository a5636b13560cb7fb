#pragma once

#include <algorithm>
#include <optional>

#include "xsam/autodiff/surface.hpp"
#include "xsam/optimizers/ascent.hpp"
#include "xsam/optimizers/config.hpp"

namespace xsam {

/// Magnitude attached to a unit descent direction.
///
/// `v_alpha` is the chosen direction and `probe_loss`, when present, an
/// already computed L(ϑ₀ + ρ_m·v_alpha) that slope_m reuses instead of
/// spending a forward. Slope strategies fall back to ‖g_k‖ when their
/// denominator vanishes and are floored at zero.
inline double gradient_scale(ScaleStrategy strategy, const AscentTrail& trail,
                             const LossSurface& surface, const GradVector& v_alpha, double rho_m,
                             PassCount& count, std::optional<double> probe_loss = std::nullopt) {
  const double gk = trail.last_grad().norm();
  switch (strategy) {
    case ScaleStrategy::g_k:
      return gk;
    case ScaleStrategy::g_0:
      return trail.grads.front().norm();
    case ScaleStrategy::mean: {
      double s = 0.0;
      for (const auto& g : trail.grads) s += g.norm();
      return s / static_cast<double>(trail.grads.size());
    }
    case ScaleStrategy::max: {
      double m = 0.0;
      for (const auto& g : trail.grads) m = std::max(m, g.norm());
      return m;
    }
    case ScaleStrategy::slope_k: {
      const double dist = (trail.points.back() - trail.points.front()).norm();
      if (dist < 1e-12) return gk;
      return std::max(0.0, (trail.losses.back() - trail.losses.front()) / dist);
    }
    case ScaleStrategy::slope_m: {
      if (rho_m < 1e-12) return gk;
      double far = 0.0;
      if (probe_loss && std::isfinite(*probe_loss)) {
        far = *probe_loss;
      } else {
        try {
          far = evaluate(surface, trail.origin() + rho_m * v_alpha, count);
        } catch (const NumericError&) {
          return gk;
        }
      }
      return std::max(0.0, (far - trail.losses.front()) / rho_m);
    }
  }
  return gk;
}

}  // namespace xsam
