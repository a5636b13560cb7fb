#pragma once

#include <Eigen/Eigenvalues>

#include <cmath>
#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "xsam/autodiff/surface.hpp"

namespace xsam {

enum class PerturbationMode { element_wise, filter_wise };

inline std::string to_string(PerturbationMode m) {
  return m == PerturbationMode::element_wise ? "element_wise" : "filter_wise";
}
inline PerturbationMode parse_perturbation_mode(const std::string& s) {
  if (s == "element_wise") return PerturbationMode::element_wise;
  if (s == "filter_wise") return PerturbationMode::filter_wise;
  throw ConfigError("unknown perturbation mode '" + s + "'");
}

/// Top `top_k` Hessian eigenvalues, descending.
inline std::vector<double> hessian_spectrum(const LossSurface& surface, const ParamVector& theta, int top_k) {
  const Matrix h = exact_hessian(surface, theta);
  Eigen::SelfAdjointEigenSolver<Matrix> eig(h, Eigen::EigenvaluesOnly);
  if (eig.info() != Eigen::Success) throw NumericError("hessian_spectrum: eigendecomposition failed");
  const Eigen::VectorXd& ev = eig.eigenvalues();  // ascending
  std::vector<double> out;
  for (Eigen::Index i = ev.size() - 1; i >= 0 && static_cast<int>(out.size()) < top_k; --i) out.push_back(ev[i]);
  return out;
}

struct SharpnessPoint {
  double radius;
  double mean_delta_loss;
};

struct SharpnessReport {
  double lambda1 = std::nan("");
  double lambda1_over_lambda5 = std::nan("");
  std::vector<SharpnessPoint> avg_sharpness_curve;
  int n_directions = 0;
  PerturbationMode mode = PerturbationMode::element_wise;
};

/// Unit-norm random direction. filter_wise gives every parameter group the
/// same share of the norm (each block unit, then the whole scaled by 1/√B).
inline Eigen::VectorXd random_direction(const LossSurface& surface, PerturbationMode mode, std::mt19937_64& rng,
                                        const std::vector<std::vector<Eigen::Index>>& groups) {
  std::normal_distribution<double> normal;
  Eigen::VectorXd d(surface.dim());
  for (Eigen::Index i = 0; i < d.size(); ++i) d[i] = normal(rng);
  if (mode == PerturbationMode::element_wise) return d / d.norm();
  const double share = 1.0 / std::sqrt(static_cast<double>(groups.size()));
  for (const auto& g : groups) {
    double sq = 0.0;
    for (Eigen::Index i : g) sq += d[i] * d[i];
    const double f = share / std::sqrt(sq);
    for (Eigen::Index i : g) d[i] *= f;
  }
  return d;
}

/// Mean of L(θ + r·d) − L(θ) over `n_directions` seeded random directions,
/// per radius. The same directions are reused at every radius.
inline std::vector<SharpnessPoint> average_sharpness(const LossSurface& surface, const ParamVector& theta,
                                                     const std::vector<double>& radii, int n_directions,
                                                     PerturbationMode mode, std::uint64_t seed, PassCount& count) {
  if (n_directions < 1) throw ConfigError("average_sharpness: n_directions must be >= 1");
  for (std::size_t i = 1; i < radii.size(); ++i) {
    if (!(radii[i] > radii[i - 1])) throw ConfigError("average_sharpness: radii must be strictly increasing");
  }
  const double base = evaluate(surface, theta, count);
  std::mt19937_64 rng(seed);
  const auto groups = surface.parameter_groups();
  std::vector<Eigen::VectorXd> dirs;
  dirs.reserve(static_cast<std::size_t>(n_directions));
  for (int i = 0; i < n_directions; ++i) dirs.push_back(random_direction(surface, mode, rng, groups));
  std::vector<SharpnessPoint> curve;
  for (double r : radii) {
    if (r == 0.0) {
      curve.push_back({r, 0.0});
      continue;
    }
    double acc = 0.0;
    for (const auto& d : dirs) acc += evaluate(surface, theta + r * d, count) - base;
    curve.push_back({r, acc / static_cast<double>(n_directions)});
  }
  return curve;
}

/// λ₁, λ₁/λ₅ (NaN below five parameters) and the average-sharpness curve.
inline SharpnessReport flatness_report(const LossSurface& surface, const ParamVector& theta,
                                       const std::vector<double>& radii, int n_directions, PerturbationMode mode,
                                       std::uint64_t seed, PassCount& count) {
  SharpnessReport rep;
  const auto top = hessian_spectrum(surface, theta, 5);
  rep.lambda1 = top.front();
  if (top.size() >= 5) rep.lambda1_over_lambda5 = top[0] / top[4];
  rep.avg_sharpness_curve = average_sharpness(surface, theta, radii, n_directions, mode, seed, count);
  rep.n_directions = n_directions;
  rep.mode = mode;
  return rep;
}

}  // namespace xsam
