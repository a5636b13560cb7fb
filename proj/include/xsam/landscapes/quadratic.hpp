#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <random>
#include <string>

#include "xsam/autodiff/surface.hpp"
#include "xsam/autodiff/tape.hpp"

namespace xsam {

/// L(x) = offset + ½(x − center)ᵀH(x − center) with H symmetric positive
/// definite.
struct QuadraticSpec {
  Matrix hessian;
  ParamVector center;
  double offset = 0.0;

  void validate() const {
    const Eigen::Index n = hessian.rows();
    if (n < 1 || hessian.cols() != n) throw ConfigError("quadratic: H must be square");
    require_dim(center, n, "quadratic center");
    if (asymmetry(hessian) > 1e-10) throw ConfigError("quadratic: H must be symmetric");
    Eigen::SelfAdjointEigenSolver<Matrix> eig(hessian, Eigen::EigenvaluesOnly);
    if (eig.eigenvalues().minCoeff() <= 0.0) throw ConfigError("quadratic: H must be positive definite");
  }
};

/// Seeded random orthogonal matrix: QR of a Gaussian matrix with the signs of
/// R's diagonal folded into Q.
inline Matrix random_orthogonal(Eigen::Index n, std::mt19937_64& rng) {
  std::normal_distribution<double> normal;
  Matrix g(n, n);
  for (Eigen::Index j = 0; j < n; ++j) {
    for (Eigen::Index i = 0; i < n; ++i) g(i, j) = normal(rng);
  }
  Eigen::HouseholderQR<Matrix> qr(g);
  Matrix q = qr.householderQ() * Matrix::Identity(n, n);
  const Matrix r = qr.matrixQR().triangularView<Eigen::Upper>();
  for (Eigen::Index j = 0; j < n; ++j) {
    if (r(j, j) < 0.0) q.col(j) = -q.col(j);
  }
  return q;
}

struct QuadraticInstance {
  QuadraticSpec spec;
  Eigen::VectorXd eigenvalues;  // the requested spectrum, in draw order
};

/// H = QΛQᵀ with Λ uniform in [eig_min, eig_max], centered at the origin.
inline QuadraticInstance make_quadratic(Eigen::Index dim, double eig_min, double eig_max,
                                        std::uint64_t seed) {
  if (dim < 2) throw ConfigError("make_quadratic: dim must be at least 2");
  if (!(eig_min > 0.0) || !(eig_max >= eig_min)) {
    throw ConfigError("make_quadratic: need 0 < eig_min <= eig_max");
  }
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unif(eig_min, eig_max);
  Eigen::VectorXd lambda(dim);
  for (Eigen::Index i = 0; i < dim; ++i) lambda[i] = eig_min == eig_max ? eig_min : unif(rng);
  const Matrix q = random_orthogonal(dim, rng);
  Matrix h = q * lambda.asDiagonal() * q.transpose();
  h = (0.5 * (h + h.transpose())).eval();  // eval: transpose aliases h
  QuadraticInstance out{QuadraticSpec{h, ParamVector::Zero(dim), 0.0}, lambda};
  out.spec.validate();
  return out;
}

class QuadraticSurface final : public LossSurface {
 public:
  explicit QuadraticSurface(QuadraticSpec spec) : spec_(std::move(spec)) { spec_.validate(); }

  Eigen::Index dim() const override { return spec_.hessian.rows(); }
  std::string name() const override { return "quadratic"; }

  double value(const ParamVector& x) const override {
    require_dim(x, dim(), "quadratic");
    const Eigen::VectorXd d = x - spec_.center;
    return spec_.offset + 0.5 * d.dot(spec_.hessian * d);
  }

  ValueAndGrad value_and_grad(const ParamVector& x) const override {
    require_dim(x, dim(), "quadratic");
    autodiff::Tape tape;
    autodiff::Var xv = tape.leaf(Matrix(x));
    autodiff::Var d = xv - tape.constant(Matrix(spec_.center));
    autodiff::Var loss = 0.5 * autodiff::dot(d, autodiff::matvec(spec_.hessian, d)) + spec_.offset;
    tape.backward(loss);
    return {loss.scalar(), xv.grad().col(0)};
  }

  std::optional<Matrix> analytic_hessian(const ParamVector& x) const override {
    require_dim(x, dim(), "quadratic");
    return spec_.hessian;
  }

  const QuadraticSpec& spec() const { return spec_; }

 private:
  QuadraticSpec spec_;
};

}  // namespace xsam
