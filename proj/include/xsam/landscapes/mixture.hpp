#pragma once

#include <array>
#include <limits>
#include <optional>
#include <cmath>
#include <string>

#include "xsam/autodiff/surface.hpp"
#include "xsam/autodiff/tape.hpp"

namespace xsam {

/// KL(N(μ, σ²) ‖ N(μᵢ, σᵢ²)).
inline double kl_gauss(double mu, double sigma, double mu_i, double sigma_i) {
  if (!(sigma > 0.0) || !(sigma_i > 0.0)) throw DimensionMismatch("kl_gauss: sigma must be positive");
  const double d = mu - mu_i;
  return std::log(sigma_i / sigma) + (sigma * sigma + d * d) / (2.0 * sigma_i * sigma_i) - 0.5;
}

struct MixtureComponent {
  double mu;
  double sigma;
  double weight;
  double scale;
};

/// Two-well test landscape over (μ, σ):
///   L = −log(Σᵢ wᵢ·exp(−KL((μ,σ) ‖ (μᵢ,σᵢ)) / scaleᵢ²)).
struct Gauss2Mixture {
  std::array<MixtureComponent, 2> components{
      MixtureComponent{20.0, 30.0, 0.7, 1.8},
      MixtureComponent{-20.0, 10.0, 0.3, 1.2},
  };

  void validate() const {
    for (const auto& c : components) {
      if (!(c.sigma > 0.0) || !(c.weight > 0.0) || !(c.scale > 0.0)) {
        throw ConfigError("mixture: sigma, weight and scale must be positive");
      }
    }
  }
};

inline double mixture_loss(const Gauss2Mixture& spec, double mu, double sigma) {
  if (!(sigma > 0.0)) throw DimensionMismatch("mixture_loss: sigma must be positive");
  double inner = 0.0;
  for (const auto& c : spec.components) {
    inner += c.weight * std::exp(-kl_gauss(mu, sigma, c.mu, c.sigma) / (c.scale * c.scale));
  }
  if (!(inner > 0.0)) throw NumericError("mixture_loss: log argument underflowed");
  return -std::log(inner);
}

/// The mixture as a LossSurface over θ = (μ, σ). σ is kept ≥ `sigma_floor`
/// by project().
class MixtureSurface final : public LossSurface {
 public:
  explicit MixtureSurface(Gauss2Mixture spec = {}, double sigma_floor = 0.5)
      : spec_(spec), sigma_floor_(sigma_floor) {
    spec_.validate();
  }

  Eigen::Index dim() const override { return 2; }
  std::string name() const override { return "mixture"; }

  double value(const ParamVector& x) const override {
    require_dim(x, 2, "mixture");
    if (!(x[1] > 0.0)) return std::numeric_limits<double>::quiet_NaN();
    double inner = 0.0;
    for (const auto& c : spec_.components) {
      inner += c.weight * std::exp(-kl_gauss(x[0], x[1], c.mu, c.sigma) / (c.scale * c.scale));
    }
    return -std::log(inner);
  }

  ValueAndGrad value_and_grad(const ParamVector& x) const override {
    require_dim(x, 2, "mixture");
    if (!(x[1] > 0.0)) {
      return {std::numeric_limits<double>::quiet_NaN(), GradVector::Constant(2, std::nan(""))};
    }
    autodiff::Tape tape;
    autodiff::Var theta = tape.leaf(Matrix(x));
    autodiff::Var mu = autodiff::slice(theta, 0, 1, 1);
    autodiff::Var sigma = autodiff::slice(theta, 1, 1, 1);
    autodiff::Var log_sigma = autodiff::log(sigma);
    autodiff::Var inner;
    bool first = true;
    for (const auto& c : spec_.components) {
      autodiff::Var diff = mu - c.mu;
      autodiff::Var kl = (std::log(c.sigma) - log_sigma) +
                         (sigma * sigma + diff * diff) / (2.0 * c.sigma * c.sigma) - 0.5;
      autodiff::Var term = c.weight * autodiff::exp(kl * (-1.0 / (c.scale * c.scale)));
      inner = first ? term : inner + term;
      first = false;
    }
    autodiff::Var loss = -autodiff::log(inner);
    tape.backward(loss);
    return {loss.scalar(), theta.grad().col(0)};
  }

  /// Closed form: with uᵢ = log wᵢ − Kᵢ/sᵢ² and softmax weights pᵢ,
  /// ∇²L = −Σ pᵢ∇²uᵢ − (Σ pᵢ∇uᵢ∇uᵢᵀ − ūūᵀ), ū = Σ pᵢ∇uᵢ.
  std::optional<Matrix> analytic_hessian(const ParamVector& x) const override {
    require_dim(x, 2, "mixture");
    const double mu = x[0], s = x[1];
    if (!(s > 0.0)) return Matrix::Constant(2, 2, std::nan(""));
    std::array<double, 2> u{};
    std::array<Eigen::Vector2d, 2> du;
    std::array<Eigen::Matrix2d, 2> d2u;
    for (std::size_t i = 0; i < 2; ++i) {
      const auto& c = spec_.components[i];
      const double ss = c.scale * c.scale, vi = c.sigma * c.sigma;
      u[i] = std::log(c.weight) - kl_gauss(mu, s, c.mu, c.sigma) / ss;
      du[i] = Eigen::Vector2d((mu - c.mu) / vi, -1.0 / s + s / vi) * (-1.0 / ss);
      d2u[i] << 1.0 / vi, 0.0, 0.0, 1.0 / (s * s) + 1.0 / vi;
      d2u[i] *= -1.0 / ss;
    }
    const double m = std::max(u[0], u[1]);
    const double e0 = std::exp(u[0] - m), e1 = std::exp(u[1] - m);
    const double p0 = e0 / (e0 + e1), p1 = e1 / (e0 + e1);
    const Eigen::Vector2d mean = p0 * du[0] + p1 * du[1];
    Matrix h = -(p0 * d2u[0] + p1 * d2u[1]) -
               (p0 * du[0] * du[0].transpose() + p1 * du[1] * du[1].transpose() -
                mean * mean.transpose());
    return h;
  }

  bool project(ParamVector& x) const override {
    if (x[1] < sigma_floor_) {
      x[1] = sigma_floor_;
      return true;
    }
    return false;
  }

  const Gauss2Mixture& spec() const { return spec_; }
  double sigma_floor() const { return sigma_floor_; }

 private:
  Gauss2Mixture spec_;
  double sigma_floor_;
};

}  // namespace xsam
