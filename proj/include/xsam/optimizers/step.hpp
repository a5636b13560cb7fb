#pragma once

#include <cmath>
#include <numbers>
#include <optional>
#include <string>
#include <vector>

#include "xsam/autodiff/surface.hpp"
#include "xsam/optimizers/alpha_search.hpp"
#include "xsam/optimizers/ascent.hpp"
#include "xsam/optimizers/config.hpp"
#include "xsam/optimizers/scale.hpp"
#include "xsam/optimizers/slerp.hpp"

namespace xsam {

/// Position of the current iteration inside the run.
struct IterationInfo {
  std::int64_t iter = 0;
  std::int64_t epoch = 0;
  bool first_in_epoch = true;
};

/// One iteration's descent vector, split as unit direction times scale.
struct StepResult {
  GradVector descent_direction;
  double scale = 0.0;
  std::optional<double> alpha_star;
  AscentTrail trail;
  double loss_at_theta = 0.0;

  bool sgd_fallback = false;     // degenerate ascent gradient
  bool frame_degenerate = false;  // v₀ ∥ v₁, v₁ used directly
  bool probe_failed = false;      // every α probe non-finite, α = 1 used
  bool alpha_refreshed = false;
  std::optional<AlphaSearch> search;
  std::vector<std::string> notes;

  GradVector update() const { return descent_direction * scale; }
};

inline double lr_at(LrSchedule schedule, double lr0, std::int64_t t, std::int64_t total) {
  if (schedule == LrSchedule::constant) return lr0;
  if (total <= 0) throw ConfigError("lr_at: total iterations must be positive");
  return lr0 * 0.5 * (1.0 + std::cos(std::numbers::pi * static_cast<double>(t) / static_cast<double>(total)));
}

/// Whether XSAM searches α* this iteration.
inline bool alpha_due(const AlphaRefresh& refresh, const IterationInfo& info, bool have_alpha) {
  if (!have_alpha) return true;
  switch (refresh.kind) {
    case AlphaRefresh::Kind::per_epoch:
      return info.first_in_epoch;
    case AlphaRefresh::Kind::every:
      return info.iter % refresh.period == 0;
    case AlphaRefresh::Kind::never:
      return false;
  }
  return false;
}

namespace detail {

inline GradVector unit(const GradVector& v) { return v / v.norm(); }

// Σ wᵢgᵢ over i ∈ [first, k], renormalized; falls back to ĝ_k if it cancels.
inline GradVector combined_direction(const AscentTrail& trail, std::size_t first, bool per_step_unit) {
  GradVector sum = GradVector::Zero(trail.grads.front().size());
  for (std::size_t i = first; i < trail.grads.size(); ++i) {
    sum += per_step_unit ? GradVector(trail.grads[i] / trail.grads[i].norm()) : trail.grads[i];
  }
  if (sum.norm() < kMinGradNorm) return unit(trail.last_grad());
  return unit(sum);
}

inline StepResult sgd_step(const AscentTrail& zero_step, const LossSurface& surface,
                           const OptimizerConfig& config, PassCount& count) {
  StepResult r;
  r.trail = zero_step;
  r.loss_at_theta = zero_step.losses.front();
  const GradVector& g0 = zero_step.grads.front();
  if (g0.norm() < kMinGradNorm) {
    r.descent_direction = GradVector::Zero(g0.size());
    r.scale = 0.0;
    r.notes.emplace_back("zero gradient at theta");
    return r;
  }
  r.descent_direction = unit(g0);
  r.scale = gradient_scale(config.scale_strategy, r.trail, surface, r.descent_direction, config.rho_m, count);
  return r;
}

}  // namespace detail

/// Computes the descent vector of `config.rule` at `theta`.
///
/// `stored_alpha` carries α* across iterations for XSAM and is updated when a
/// search runs.
inline StepResult compute_step(const LossSurface& surface, const ParamVector& theta,
                               const OptimizerConfig& config, std::optional<double>& stored_alpha,
                               const IterationInfo& info, PassCount& count) {
  if (config.rule == Rule::sgd) {
    auto zero = detail::ascend_partial(surface, theta, {}, count);
    return detail::sgd_step(zero.trail, surface, config, count);
  }

  const std::vector<double> radii(static_cast<std::size_t>(config.k), config.rho);
  auto outcome = detail::ascend_partial(surface, theta, radii, count);
  if (outcome.degenerate_at) {
    AscentTrail head;
    head.points = {theta};
    head.grads = {outcome.trail.grads.front()};
    head.losses = {outcome.trail.losses.front()};
    StepResult r = detail::sgd_step(head, surface, config, count);
    r.sgd_fallback = true;
    r.notes.push_back("degenerate gradient at ascent step " + std::to_string(*outcome.degenerate_at) +
                      "; SGD fallback");
    return r;
  }

  StepResult r;
  r.trail = std::move(outcome.trail);
  r.loss_at_theta = r.trail.losses.front();
  const AscentTrail& trail = r.trail;
  std::optional<double> probe_loss;

  switch (config.rule) {
    case Rule::sam:
      r.descent_direction = detail::unit(detail::unit(trail.last_grad()));
      break;
    case Rule::xsam:
    case Rule::wsam_fixed_alpha: {
      const SlerpFrame frame = make_frame(trail.points.back() - trail.origin(), trail.last_grad());
      if (frame.degenerate()) {
        r.frame_degenerate = true;
        r.notes.emplace_back("degenerate slerp frame; using v1");
        r.descent_direction = detail::unit(frame.v1);
        break;
      }
      double alpha = config.fixed_alpha;
      if (config.rule == Rule::xsam) {
        if (alpha_due(config.t_alpha, info, stored_alpha.has_value())) {
          r.alpha_refreshed = true;
          try {
            r.search = search_alpha(surface, trail.origin(), frame, config.rho_m, config.alpha_range_a,
                                    config.alpha_samples, count);
            stored_alpha = r.search->alpha_star;
            probe_loss = r.search->best_loss;
          } catch (const ProbeFailure& e) {
            r.probe_failed = true;
            r.notes.emplace_back(std::string(e.what()) + "; alpha = 1");
            stored_alpha = 1.0;
          }
        }
        alpha = *stored_alpha;
        r.alpha_star = alpha;
      }
      r.descent_direction = detail::unit(slerp(frame, alpha));
      break;
    }
    case Rule::msam:
      r.descent_direction = detail::combined_direction(trail, 1, false);
      break;
    case Rule::lsam:
      r.descent_direction = detail::combined_direction(trail, 1, true);
      break;
    case Rule::msam_plus:
      r.descent_direction = detail::combined_direction(trail, 0, false);
      break;
    case Rule::lsam_plus:
      r.descent_direction = detail::combined_direction(trail, 0, true);
      break;
    case Rule::sgd:
      break;
  }
  r.scale = gradient_scale(config.scale_strategy, trail, surface, r.descent_direction, config.rho_m, count,
                           probe_loss);
  return r;
}

/// Heavy-ball update: buf ← μ·buf + (direction·scale + λ·θ); θ ← θ − η·buf.
inline ParamVector apply_update(const ParamVector& theta, const StepResult& result, double lr,
                                GradVector& momentum_buf, double momentum, double weight_decay) {
  if (momentum_buf.size() != theta.size()) throw DimensionMismatch("apply_update: momentum buffer");
  momentum_buf = momentum * momentum_buf + (result.update() + weight_decay * theta);
  ParamVector next = theta - lr * momentum_buf;
  if (!next.allFinite()) throw NumericError("apply_update: non-finite parameters after update");
  return next;
}

/// Stateful driver: momentum buffer plus the persisted α*.
class SharpnessOptimizer {
 public:
  SharpnessOptimizer(OptimizerConfig config, Eigen::Index dim)
      : config_(std::move(config)),
        momentum_buf_(GradVector::Zero(dim)),
        alpha_(config_.initial_alpha) {
    warnings_ = config_.validate();
  }

  StepResult step(const LossSurface& surface, const ParamVector& theta, const IterationInfo& info,
                  PassCount& count) {
    return compute_step(surface, theta, config_, alpha_, info, count);
  }

  ParamVector apply(const ParamVector& theta, const StepResult& result, double lr) {
    return apply_update(theta, result, lr, momentum_buf_, config_.momentum, config_.weight_decay);
  }

  const OptimizerConfig& config() const { return config_; }
  const GradVector& momentum_buffer() const { return momentum_buf_; }
  std::optional<double> alpha_star() const { return alpha_; }
  void set_alpha_star(std::optional<double> a) { alpha_ = a; }
  const std::vector<std::string>& warnings() const { return warnings_; }

 private:
  OptimizerConfig config_;
  GradVector momentum_buf_;
  std::optional<double> alpha_;
  std::vector<std::string> warnings_;
};

}  // namespace xsam
