#pragma once

// Exact checks of the SAM-vs-SGD and better-than-SAM direction inequalities
// on quadratic losses, where the second-order expansion has no remainder.

#include <Eigen/Eigenvalues>

#include <cmath>
#include <cstdint>
#include <optional>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "xsam/landscapes/quadratic.hpp"
#include "xsam/types.hpp"

namespace xsam::oracle {

class TrialRejected : public Error {
 public:
  using Error::Error;
};

/// Quadratic setup: gradient g₀ at ϑ₀, Hessian H, ascent radius ρ, and the
/// exact single-step ascent gradient g₁ = g₀ + ρ·H·g₀/‖g₀‖.
struct Prop1Trial {
  Matrix H;
  Eigen::VectorXd g0;
  double rho = 0.0;
  Eigen::VectorXd g1;
  double lambda1 = 0.0;
};

inline constexpr double kParallelTolerance = 1e-8;

/// Rejects zero or eigenvector g₀ (|cos∠(g₀, Hg₀)| > 1 − 1e-8) and
/// non-positive-definite H.
inline Prop1Trial make_trial(const Matrix& H, const Eigen::VectorXd& g0, double rho) {
  if (H.rows() != H.cols() || H.rows() != g0.size()) throw DimensionMismatch("prop1: H/g0 dimensions");
  if (!(rho > 0.0)) throw TrialRejected("prop1: rho must be positive");
  Eigen::SelfAdjointEigenSolver<Matrix> eig(0.5 * (H + H.transpose()), Eigen::EigenvaluesOnly);
  if (eig.eigenvalues().minCoeff() <= 0.0) throw TrialRejected("prop1: H not positive definite");
  const double n0 = g0.norm();
  if (!(n0 > 0.0)) throw TrialRejected("prop1: g0 is zero");
  const Eigen::VectorXd hg = H * g0;
  const double cosine = g0.dot(hg) / (n0 * hg.norm());
  if (std::abs(cosine) > 1.0 - kParallelTolerance) {
    throw TrialRejected("prop1: g0 is an eigenvector of H (g1 parallel to g0)");
  }
  return Prop1Trial{H, g0, rho, g0 + rho * hg / n0, eig.eigenvalues().maxCoeff()};
}

/// L(ϑ₀ + r·u) − L(ϑ₀) on the exact quadratic model.
inline double model_increase(const Prop1Trial& t, double r, const Eigen::VectorXd& u) {
  return r * t.g0.dot(u) + 0.5 * r * r * u.dot(t.H * u);
}

/// L(ϑ₀ + r·ĝ₁) − L(ϑ₀ + r·ĝ₀).
inline double loss_gap(const Prop1Trial& t, double r) {
  return model_increase(t, r, t.g1.normalized()) - model_increase(t, r, t.g0.normalized());
}

struct Part1Result {
  std::optional<double> rho0;         // refined crossing radius
  double closed_form_crossing = 0.0;  // root of the gap's r(a + b·r) form
  bool verified = false;
  std::vector<std::pair<double, bool>> holds_at;  // (ρ_m, gap > 0)
};

/// Scans ρ_m geometrically over [1e-3, 1e3]·‖g₀‖/λ₁ for the radius above which
/// the ĝ₁ direction gains more loss than ĝ₀, then bisects the bracketing pair.
inline Part1Result run_part1(const Prop1Trial& t, int samples = 601) {
  Part1Result out;
  const double unit = t.g0.norm() / t.lambda1;
  const double lo = std::log(1e-3), hi = std::log(1e3);
  std::vector<double> radii(static_cast<std::size_t>(samples));
  for (int i = 0; i < samples; ++i) {
    radii[static_cast<std::size_t>(i)] = unit * std::exp(lo + (hi - lo) * i / (samples - 1));
  }
  std::optional<std::size_t> last_nonpositive;
  for (std::size_t i = 0; i < radii.size(); ++i) {
    const bool holds = loss_gap(t, radii[i]) > 0.0;
    out.holds_at.emplace_back(radii[i], holds);
    if (!holds) last_nonpositive = i;
  }
  const Eigen::VectorXd u0 = t.g0.normalized(), u1 = t.g1.normalized();
  const double a = t.g0.dot(u1) - t.g0.norm();
  const double b = 0.5 * (u1.dot(t.H * u1) - u0.dot(t.H * u0));
  out.closed_form_crossing = b > 0.0 ? -a / b : std::numeric_limits<double>::infinity();

  if (last_nonpositive && *last_nonpositive + 1 == radii.size()) return out;  // no crossing on grid
  double left = last_nonpositive ? radii[*last_nonpositive] : 0.0;
  double right = last_nonpositive ? radii[*last_nonpositive + 1] : radii.front();
  for (int it = 0; it < 200 && right - left > 1e-15 * right; ++it) {
    const double mid = 0.5 * (left + right);
    (loss_gap(t, mid) > 0.0 ? right : left) = mid;
  }
  out.rho0 = right;
  out.verified = true;
  return out;
}

/// f(α) = g_αᵀHg_α / ‖g_α‖² with g_α = α·g₁ + (1−α)·g₀.
inline double quadratic_ratio(const Prop1Trial& t, double alpha) {
  const Eigen::VectorXd g = alpha * t.g1 + (1.0 - alpha) * t.g0;
  return g.dot(t.H * g) / g.squaredNorm();
}

inline bool is_part2_witness(const Prop1Trial& t, double alpha) {
  return quadratic_ratio(t, alpha) > quadratic_ratio(t, 1.0);
}

struct Part2Result {
  std::optional<double> alpha_witness;
  double f_at_one = 0.0;
  double f_at_witness = 0.0;
};

/// Searches α ∈ [−2, 4] (601 points) for f(α) > f(1), preferring the best
/// α > 1; falls back to α = 1 + 2⁻ʲ when the grid step overshoots the bump.
inline Part2Result run_part2(const Prop1Trial& t, double lo = -2.0, double hi = 4.0, int samples = 601) {
  Part2Result out;
  out.f_at_one = quadratic_ratio(t, 1.0);
  const Eigen::VectorXd grid = inclusive_grid(lo, hi, samples);
  auto consider = [&](double a, bool above_one_only) {
    if (above_one_only && !(a > 1.0)) return;
    const double f = quadratic_ratio(t, a);
    if (f > out.f_at_one && (!out.alpha_witness || f > out.f_at_witness)) {
      out.alpha_witness = a;
      out.f_at_witness = f;
    }
  };
  for (double a : grid) consider(a, true);
  for (int j = 1; !out.alpha_witness && j <= 52; ++j) consider(1.0 + std::ldexp(1.0, -j), true);
  if (!out.alpha_witness) {
    for (double a : grid) consider(a, false);
  }
  return out;
}

struct SignTermReport {
  double cauchy_schwarz_gap = 0.0;
  double chebyshev_gap_1 = 0.0;
  double chebyshev_gap_2 = 0.0;
  double cauchy_schwarz_scale = 0.0;
  double chebyshev_scale_1 = 0.0;
  double chebyshev_scale_2 = 0.0;

  /// CS strictly positive, both Chebyshev terms ≥ −slack·scale.
  bool holds(double slack = 1e-12) const {
    return cauchy_schwarz_gap > 0.0 && chebyshev_gap_1 >= -slack * chebyshev_scale_1 &&
           chebyshev_gap_2 >= -slack * chebyshev_scale_2;
  }
};

/// Zero-, first- and second-order terms of the expansion of f′(1).
inline SignTermReport sign_terms(const Matrix& H, const Eigen::VectorXd& g0) {
  const Eigen::VectorXd h1 = H * g0;
  const double n2 = g0.squaredNorm();
  const double m1 = g0.dot(h1);   // g₀ᵀHg₀
  const double m2 = h1.squaredNorm();  // g₀ᵀH²g₀
  const double m3 = h1.dot(H * h1);    // g₀ᵀH³g₀
  SignTermReport r;
  r.cauchy_schwarz_gap = n2 * m2 - m1 * m1;
  r.chebyshev_gap_1 = n2 * m3 - m1 * m2;
  r.chebyshev_gap_2 = m3 * m1 - m2 * m2;
  r.cauchy_schwarz_scale = n2 * m2;
  r.chebyshev_scale_1 = n2 * m3;
  r.chebyshev_scale_2 = m3 * m1;
  return r;
}

struct TrialOutcome {
  std::size_t index = 0;
  bool rejected = false;
  std::string reject_reason;
  std::optional<Prop1Trial> trial;
  Part1Result part1;
  Part2Result part2;
  SignTermReport signs;

  bool passed() const {
    return !rejected && part1.verified && part2.alpha_witness && *part2.alpha_witness > 1.0 && signs.holds();
  }
};

inline TrialOutcome evaluate_trial(std::size_t index, const Matrix& H, const Eigen::VectorXd& g0, double rho) {
  TrialOutcome o;
  o.index = index;
  try {
    o.trial = make_trial(H, g0, rho);
  } catch (const TrialRejected& e) {
    o.rejected = true;
    o.reject_reason = e.what();
    return o;
  }
  o.part1 = run_part1(*o.trial);
  o.part2 = run_part2(*o.trial);
  o.signs = sign_terms(H, g0);
  return o;
}

/// Seeded random trial: H from make_quadratic, g₀ Gaussian, ρ log-uniform in
/// [ρ_lo, ρ_hi]·‖g₀‖/λ₁.
struct RandomTrialSpec {
  int dim_min = 2;
  int dim_max = 10;
  double eig_min = 0.1;
  double eig_max = 10.0;
  double rho_lo = 1e-3;
  double rho_hi = 1.0;
};

struct TrialInputs {
  Matrix H;
  Eigen::VectorXd g0;
  double rho;
};

inline TrialInputs random_trial(const RandomTrialSpec& spec, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<int> dim_dist(spec.dim_min, spec.dim_max);
  const int dim = dim_dist(rng);
  const QuadraticInstance q = make_quadratic(dim, spec.eig_min, spec.eig_max, rng());
  std::normal_distribution<double> normal;
  Eigen::VectorXd g0(dim);
  for (int i = 0; i < dim; ++i) g0[i] = normal(rng);
  std::uniform_real_distribution<double> u(std::log(spec.rho_lo), std::log(spec.rho_hi));
  const double rho = std::exp(u(rng)) * g0.norm() / q.eigenvalues.maxCoeff();
  return {q.spec.hessian, g0, rho};
}

}  // namespace xsam::oracle
