#pragma once

#include <cmath>
#include <limits>
#include <span>
#include <vector>

#include "xsam/autodiff/surface.hpp"
#include "xsam/optimizers/slerp.hpp"

namespace xsam {

/// Index of the largest finite value; a later entry wins only when it beats
/// the incumbent by more than 1e-12·max(1, |best|), so near-ties resolve to
/// the smallest index. Returns nullopt when nothing is finite.
inline std::optional<std::size_t> argmax_first(std::span<const double> values) {
  std::optional<std::size_t> best;
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (!std::isfinite(values[i])) continue;
    if (!best) {
      best = i;
      continue;
    }
    const double incumbent = values[*best];
    if (values[i] > incumbent + 1e-12 * std::max(1.0, std::abs(incumbent))) best = i;
  }
  return best;
}

struct AlphaSearch {
  double alpha_star = 1.0;
  std::vector<double> alphas;
  std::vector<double> losses;  // NaN where the probe point was not evaluable
  double best_loss = std::numeric_limits<double>::quiet_NaN();
};

/// L(ϑ₀ + ρ_m·v(α)) over `alphas`. Unevaluable probe points become NaN.
/// Counts one forward per probe.
inline std::vector<double> probe_losses(const LossSurface& surface, const ParamVector& origin,
                                        const SlerpFrame& frame, double rho_m,
                                        std::span<const double> alphas, PassCount& count) {
  std::vector<double> out;
  out.reserve(alphas.size());
  for (double a : alphas) {
    try {
      out.push_back(evaluate(surface, origin + rho_m * slerp(frame, a), count));
    } catch (const NumericError&) {
      out.push_back(std::numeric_limits<double>::quiet_NaN());
    }
  }
  return out;
}

/// α* = argmax over n evenly spaced α in [0, a] of L(ϑ₀ + ρ_m·v(α)).
/// Throws ProbeFailure when no probe is finite.
inline AlphaSearch search_alpha(const LossSurface& surface, const ParamVector& origin,
                                const SlerpFrame& frame, double rho_m, double a, int n,
                                PassCount& count) {
  if (n < 2) throw ConfigError("search_alpha: need at least two samples");
  if (frame.degenerate()) throw DegenerateFrame("search_alpha: degenerate frame");
  AlphaSearch out;
  const Eigen::VectorXd grid = inclusive_grid(0.0, a, n);
  out.alphas.assign(grid.data(), grid.data() + grid.size());
  out.losses = probe_losses(surface, origin, frame, rho_m, out.alphas, count);
  const auto best = argmax_first(out.losses);
  if (!best) throw ProbeFailure("search_alpha: every probe loss is non-finite");
  out.alpha_star = out.alphas[*best];
  out.best_loss = out.losses[*best];
  return out;
}

}  // namespace xsam
