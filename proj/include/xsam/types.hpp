#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <cstddef>
#include <cstdint>

#include "xsam/errors.hpp"

namespace xsam {

/// Flat parameter vector (θ, ϑᵢ, perturbations).
using ParamVector = Eigen::VectorXd;
/// Gradient of a loss with respect to a ParamVector; same dimension.
using GradVector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

inline bool all_finite(const Eigen::Ref<const Eigen::MatrixXd>& m) {
  return m.allFinite();
}

inline void require_dim(const Eigen::Ref<const Eigen::VectorXd>& v, Eigen::Index dim,
                        const char* what) {
  if (v.size() != dim) {
    throw DimensionMismatch(std::string(what) + ": expected dimension " + std::to_string(dim) +
                            ", got " + std::to_string(v.size()));
  }
}

/// Evenly spaced values over [lo, hi] with both endpoints included.
inline Eigen::VectorXd inclusive_grid(double lo, double hi, int n) {
  Eigen::VectorXd out(n);
  if (n == 1) {
    out[0] = lo;
    return out;
  }
  const double step = (hi - lo) / static_cast<double>(n - 1);
  for (int i = 0; i < n; ++i) out[i] = lo + step * static_cast<double>(i);
  out[n - 1] = hi;
  return out;
}

}  // namespace xsam
