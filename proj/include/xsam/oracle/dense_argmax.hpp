#pragma once

#include <cmath>
#include <limits>

#include "xsam/autodiff/surface.hpp"
#include "xsam/optimizers/slerp.hpp"

namespace xsam::oracle {

/// Brute-force α maximizing L(ϑ₀ + ρ_m·v(α)) over `n_dense` evenly spaced
/// points of [0, a]. Near-ties (within 1e-12 relative) keep the smaller α.
/// Test oracle for the production α* search; it shares no code with it.
inline double dense_argmax_direction(const LossSurface& surface, const ParamVector& theta,
                                     const SlerpFrame& frame, double rho_m, double a, int n_dense) {
  const double s = std::sin(frame.psi);
  double best_alpha = 0.0;
  double best = -std::numeric_limits<double>::infinity();
  for (int i = 0; i < n_dense; ++i) {
    const double alpha = i == n_dense - 1 ? a : a * static_cast<double>(i) / static_cast<double>(n_dense - 1);
    const Eigen::VectorXd dir =
        (std::sin((1.0 - alpha) * frame.psi) * frame.v0 + std::sin(alpha * frame.psi) * frame.v1) / s;
    const double loss = surface.value(theta + rho_m * dir);
    if (!std::isfinite(loss)) continue;
    const double margin = 1e-12 * (std::isfinite(best) ? std::max(1.0, std::abs(best)) : 1.0);
    if (!std::isfinite(best) || loss > best + margin) {
      best = loss;
      best_alpha = alpha;
    }
  }
  return best_alpha;
}

}  // namespace xsam::oracle
