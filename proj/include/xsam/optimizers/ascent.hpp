#pragma once

#include <cstddef>
#include <optional>
#include <vector>

#include "xsam/autodiff/surface.hpp"

namespace xsam {

inline constexpr double kMinGradNorm = 1e-12;

/// The normalized gradient-ascent path ϑ₀..ϑ_k with gradients and losses at
/// every point and the per-step radii ρ₀..ρ_{k−1}.
struct AscentTrail {
  std::vector<ParamVector> points;
  std::vector<GradVector> grads;
  std::vector<double> losses;
  std::vector<double> radii;

  std::size_t k() const { return radii.size(); }
  const ParamVector& origin() const { return points.front(); }
  const GradVector& last_grad() const { return grads.back(); }
  double total_radius() const {
    double s = 0.0;
    for (double r : radii) s += r;
    return s;
  }
};

namespace detail {

struct AscentOutcome {
  AscentTrail trail;  // points/grads filled up to the failure
  std::optional<std::size_t> degenerate_at;
};

inline AscentOutcome ascend_partial(const LossSurface& surface, const ParamVector& theta,
                                    const std::vector<double>& radii, PassCount& count) {
  AscentOutcome out;
  AscentTrail& trail = out.trail;
  trail.points.push_back(theta);
  for (std::size_t i = 0; i <= radii.size(); ++i) {
    ValueAndGrad vg = gradient_with_value(surface, trail.points[i], count);
    const double norm = vg.grad.norm();
    trail.grads.push_back(std::move(vg.grad));
    trail.losses.push_back(vg.value);
    if (norm < kMinGradNorm) {
      out.degenerate_at = i;
      return out;
    }
    if (i == radii.size()) break;
    trail.radii.push_back(radii[i]);
    trail.points.push_back(trail.points[i] + radii[i] * (trail.grads[i] / norm));
  }
  return out;
}

}  // namespace detail

/// k normalized ascent steps of radius ρᵢ, then the gradient at ϑ_k; every
/// query uses the surface's current batch. Costs k+1 forward and backward
/// passes. Throws DegenerateGradient if any ‖gᵢ‖ < 1e-12.
inline AscentTrail ascend(const LossSurface& surface, const ParamVector& theta,
                          const std::vector<double>& radii, PassCount& count) {
  if (radii.empty()) throw ConfigError("ascend: k must be >= 1");
  for (double r : radii) {
    if (!(r > 0.0)) throw ConfigError("ascend: radii must be positive");
  }
  auto out = detail::ascend_partial(surface, theta, radii, count);
  if (out.degenerate_at) throw DegenerateGradient(*out.degenerate_at);
  return std::move(out.trail);
}

inline AscentTrail ascend(const LossSurface& surface, const ParamVector& theta, int k, double rho,
                          PassCount& count) {
  if (k < 1) throw ConfigError("ascend: k must be >= 1");
  return ascend(surface, theta, std::vector<double>(static_cast<std::size_t>(k), rho), count);
}

}  // namespace xsam
