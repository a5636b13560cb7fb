#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "xsam/autodiff/tape.hpp"
#include "xsam/types.hpp"

namespace xsam {

/// Forward/backward pass counters. Each run (or each probe shard) owns one;
/// shards are merged with +=.
struct PassCount {
  std::int64_t forwards = 0;
  std::int64_t backwards = 0;

  PassCount& operator+=(const PassCount& other) {
    forwards += other.forwards;
    backwards += other.backwards;
    return *this;
  }
  friend bool operator==(const PassCount&, const PassCount&) = default;
};

/// Loss value together with its gradient from a single forward+backward.
struct ValueAndGrad {
  double value = 0.0;
  GradVector grad;
};

/// Differentiable scalar objective over a flat parameter vector.
///
/// Implementations are immutable after construction except for the batch
/// selector, which optimizers advance only between iterations.
class LossSurface {
 public:
  virtual ~LossSurface() = default;

  virtual Eigen::Index dim() const = 0;

  /// Loss at `x` for the current batch. May return non-finite values; the
  /// free function evaluate() turns those into NumericError.
  virtual double value(const ParamVector& x) const = 0;

  /// Loss and reverse-mode gradient at `x` for the current batch.
  virtual ValueAndGrad value_and_grad(const ParamVector& x) const = 0;

  /// Closed-form Hessian when the surface has one.
  virtual std::optional<Matrix> analytic_hessian(const ParamVector&) const { return std::nullopt; }

  /// Number of distinct batches; 1 for analytic surfaces.
  virtual std::int64_t batch_count() const { return 1; }
  virtual void set_batch(std::int64_t) {}
  virtual std::int64_t batch() const { return 0; }

  /// Projects `x` back into the surface's domain. Returns true if it moved.
  virtual bool project(ParamVector&) const { return false; }

  /// Parameter index blocks used by filter-wise perturbations. The default is
  /// one block holding every parameter.
  virtual std::vector<std::vector<Eigen::Index>> parameter_groups() const {
    std::vector<Eigen::Index> all(static_cast<std::size_t>(dim()));
    for (Eigen::Index i = 0; i < dim(); ++i) all[static_cast<std::size_t>(i)] = i;
    return {std::move(all)};
  }

  virtual std::string name() const = 0;
};

inline constexpr Eigen::Index kMaxDenseHessianDim = 2000;

/// Loss at `point`; counts one forward pass.
inline double evaluate(const LossSurface& surface, const ParamVector& point, PassCount& count) {
  require_dim(point, surface.dim(), surface.name().c_str());
  ++count.forwards;
  const double v = surface.value(point);
  if (!std::isfinite(v)) throw NumericError(surface.name() + ": non-finite loss");
  return v;
}

/// Exact gradient at `point`; counts one forward and one backward pass.
inline ValueAndGrad gradient_with_value(const LossSurface& surface, const ParamVector& point,
                                        PassCount& count) {
  require_dim(point, surface.dim(), surface.name().c_str());
  ++count.forwards;
  ++count.backwards;
  ValueAndGrad out = surface.value_and_grad(point);
  if (!std::isfinite(out.value) || !out.grad.allFinite()) {
    throw NumericError(surface.name() + ": non-finite loss or gradient");
  }
  return out;
}

inline GradVector gradient(const LossSurface& surface, const ParamVector& point, PassCount& count) {
  return gradient_with_value(surface, point, count).grad;
}

/// Relative asymmetry ‖H − Hᵀ‖∞ / ‖H‖∞ (0 for the zero matrix).
inline double asymmetry(const Matrix& h) {
  const double scale = h.cwiseAbs().rowwise().sum().maxCoeff();
  if (scale == 0.0) return 0.0;
  return (h - h.transpose()).cwiseAbs().rowwise().sum().maxCoeff() / scale;
}

/// Dense Hessian: closed form when the surface has one, otherwise central
/// differences of the exact gradient with step 1e-4·(1+|xᵢ|). The result is
/// symmetrized; `asymmetry_tol` bounds the raw asymmetry allowed before that.
inline Matrix exact_hessian(const LossSurface& surface, const ParamVector& point,
                            double asymmetry_tol = 1e-4) {
  require_dim(point, surface.dim(), surface.name().c_str());
  const Eigen::Index n = surface.dim();
  if (n > kMaxDenseHessianDim) {
    throw DimensionTooLarge("exact_hessian: dimension " + std::to_string(n) + " exceeds " +
                            std::to_string(kMaxDenseHessianDim));
  }
  Matrix h;
  if (auto closed = surface.analytic_hessian(point)) {
    h = std::move(*closed);
  } else {
    h.resize(n, n);
    ParamVector x = point;
    for (Eigen::Index j = 0; j < n; ++j) {
      const double step = 1e-4 * (1.0 + std::abs(point[j]));
      x[j] = point[j] + step;
      const GradVector gp = surface.value_and_grad(x).grad;
      x[j] = point[j] - step;
      const GradVector gm = surface.value_and_grad(x).grad;
      x[j] = point[j];
      h.col(j) = (gp - gm) / (2.0 * step);
    }
  }
  if (!h.allFinite()) throw NumericError(surface.name() + ": non-finite Hessian");
  if (asymmetry(h) > asymmetry_tol) {
    throw NumericError(surface.name() + ": Hessian asymmetry beyond tolerance");
  }
  return 0.5 * (h + h.transpose());
}

}  // namespace xsam
