#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <random>
#include <string>
#include <unistd.h>

#include "xsam/autodiff/surface.hpp"

namespace xsam::test {

/// Central-difference gradient of surface.value, independent of the tape.
inline Eigen::VectorXd fd_gradient(const LossSurface& s, const Eigen::VectorXd& x, double h = 1e-6) {
  Eigen::VectorXd g(x.size()), p = x;
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    const double step = h * (1.0 + std::abs(x[i]));
    p[i] = x[i] + step;
    const double fp = s.value(p);
    p[i] = x[i] - step;
    const double fm = s.value(p);
    p[i] = x[i];
    g[i] = (fp - fm) / (2.0 * step);
  }
  return g;
}

inline double rel_err(const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
  return (a - b).norm() / std::max(1e-8, std::max(a.norm(), b.norm()));
}

inline Eigen::VectorXd gaussian(Eigen::Index n, std::mt19937_64& rng, double scale = 1.0) {
  std::normal_distribution<double> d(0.0, scale);
  Eigen::VectorXd v(n);
  for (Eigen::Index i = 0; i < n; ++i) v[i] = d(rng);
  return v;
}

inline double uniform(std::mt19937_64& rng, double lo, double hi) {
  return std::uniform_real_distribution<double>(lo, hi)(rng);
}

/// Fresh empty directory under the system temp dir.
inline std::filesystem::path scratch_dir(const std::string& tag) {
  static std::uint64_t counter = 0;
  auto p = std::filesystem::temp_directory_path() /
           ("xsam_test_" + tag + "_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
  std::filesystem::remove_all(p);
  std::filesystem::create_directories(p);
  return p;
}

/// f(x) = Σ sin(xᵢ)·xᵢ₊₁ + ¼Σxᵢ⁴: a smooth non-quadratic test surface with a
/// hand-written gradient, no tape involved.
class WavySurface final : public LossSurface {
 public:
  explicit WavySurface(Eigen::Index n) : n_(n) {}
  Eigen::Index dim() const override { return n_; }
  std::string name() const override { return "wavy"; }
  double value(const ParamVector& x) const override {
    double v = 0.0;
    for (Eigen::Index i = 0; i + 1 < n_; ++i) v += std::sin(x[i]) * x[i + 1];
    for (Eigen::Index i = 0; i < n_; ++i) v += 0.25 * std::pow(x[i], 4);
    return v;
  }
  ValueAndGrad value_and_grad(const ParamVector& x) const override {
    GradVector g = GradVector::Zero(n_);
    for (Eigen::Index i = 0; i + 1 < n_; ++i) {
      g[i] += std::cos(x[i]) * x[i + 1];
      g[i + 1] += std::sin(x[i]);
    }
    for (Eigen::Index i = 0; i < n_; ++i) g[i] += x[i] * x[i] * x[i];
    return {value(x), g};
  }

 private:
  Eigen::Index n_;
};

}  // namespace xsam::test
