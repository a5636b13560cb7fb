#pragma once

// Reverse-mode automatic differentiation on a dense-matrix tape.
//
// Every node stores an Eigen matrix value; scalars are 1x1 matrices. Ops
// record a closure that pushes the node's adjoint into its inputs. The tape
// is single-use per evaluation: build the expression, call backward() once,
// read the leaf adjoints.

#include <Eigen/Dense>

#include <cmath>
#include <cstddef>
#include <functional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "xsam/errors.hpp"

namespace xsam::autodiff {

using Matrix = Eigen::MatrixXd;

class Tape;

/// Handle to a node on a Tape. Cheap to copy; valid while the tape lives.
class Var {
 public:
  Var() = default;

  Tape& tape() const { return *tape_; }
  std::size_t id() const { return id_; }
  const Matrix& value() const;
  const Matrix& grad() const;
  double scalar() const;
  Eigen::Index rows() const { return value().rows(); }
  Eigen::Index cols() const { return value().cols(); }

 private:
  friend class Tape;
  Var(Tape* tape, std::size_t id) : tape_(tape), id_(id) {}

  Tape* tape_ = nullptr;
  std::size_t id_ = 0;
};

class Tape {
 public:
  using Backprop = std::function<void(Tape&, std::size_t self)>;

  Tape() { nodes_.reserve(64); }
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  Var leaf(Matrix value) { return push(std::move(value), nullptr, true); }
  Var leaf(const Eigen::VectorXd& value) { return leaf(Matrix(value)); }
  Var constant(Matrix value) { return push(std::move(value), nullptr, false); }
  Var constant(double value) { return constant(Matrix::Constant(1, 1, value)); }

  /// Records an op node. `inputs` decide whether the node needs an adjoint.
  Var push_op(Matrix value, std::initializer_list<Var> inputs, Backprop backprop) {
    bool needs = false;
    for (const Var& in : inputs) needs = needs || nodes_[in.id()].needs_grad;
    return push(std::move(value), needs ? std::move(backprop) : nullptr, needs);
  }

  /// Seeds d(out)/d(out) = 1 and propagates adjoints to every leaf.
  void backward(const Var& out) {
    if (out.value().size() != 1) throw Error("backward() requires a scalar output");
    for (auto& n : nodes_) {
      if (n.needs_grad) n.adjoint.setZero(n.value.rows(), n.value.cols());
    }
    backward_done_ = true;
    if (!nodes_[out.id()].needs_grad) return;
    nodes_[out.id()].adjoint(0, 0) = 1.0;
    for (std::size_t i = out.id() + 1; i-- > 0;) {
      if (nodes_[i].backprop) nodes_[i].backprop(*this, i);
    }
  }

  const Matrix& value(std::size_t id) const { return nodes_[id].value; }
  const Matrix& adjoint(std::size_t id) const {
    if (!backward_done_) throw Error("adjoint requested before backward()");
    return nodes_[id].adjoint;
  }
  bool needs_grad(std::size_t id) const { return nodes_[id].needs_grad; }

  /// Adds `delta` into the adjoint of node `id` when it participates in grads.
  template <typename Derived>
  void accumulate(std::size_t id, const Eigen::MatrixBase<Derived>& delta) {
    if (nodes_[id].needs_grad) nodes_[id].adjoint += delta;
  }
  void accumulate_scalar(std::size_t id, double delta) {
    if (nodes_[id].needs_grad) nodes_[id].adjoint.array() += delta;
  }
  Matrix& adjoint_mut(std::size_t id) { return nodes_[id].adjoint; }

  std::size_t size() const { return nodes_.size(); }

 private:
  struct Node {
    Matrix value;
    Matrix adjoint;
    Backprop backprop;
    bool needs_grad = false;
  };

  Var push(Matrix value, Backprop backprop, bool needs_grad) {
    nodes_.push_back(Node{std::move(value), Matrix(), std::move(backprop), needs_grad});
    backward_done_ = false;
    return Var(this, nodes_.size() - 1);
  }

  std::vector<Node> nodes_;
  bool backward_done_ = false;
};

inline const Matrix& Var::value() const { return tape_->value(id_); }
inline const Matrix& Var::grad() const { return tape_->adjoint(id_); }
inline double Var::scalar() const {
  const Matrix& v = value();
  if (v.size() != 1) throw Error("scalar() on a non-scalar node");
  return v(0, 0);
}

namespace detail {

inline bool is_scalar(const Var& v) { return v.value().size() == 1; }

inline void check_binary(const Var& a, const Var& b, const char* op) {
  if (&a.tape() != &b.tape()) throw Error(std::string(op) + ": operands on different tapes");
  if (is_scalar(a) || is_scalar(b)) return;
  if (a.rows() != b.rows() || a.cols() != b.cols()) {
    throw DimensionMismatch(std::string(op) + ": shape mismatch");
  }
}

// Broadcasts a 1x1 operand to `like`'s shape.
inline Matrix expand(const Matrix& m, const Matrix& like) {
  if (m.size() == 1 && like.size() != 1) return Matrix::Constant(like.rows(), like.cols(), m(0, 0));
  return m;
}

// Pushes `delta` into `id`, summing it down when the operand was broadcast.
inline void reduce_into(Tape& t, std::size_t id, const Matrix& delta) {
  if (!t.needs_grad(id)) return;
  if (t.value(id).size() == 1 && delta.size() != 1) {
    t.accumulate_scalar(id, delta.sum());
  } else {
    t.accumulate(id, delta);
  }
}

inline Matrix shape_of(const Var& a, const Var& b) {
  return is_scalar(a) ? b.value() : a.value();
}

}  // namespace detail

inline Var operator+(const Var& a, const Var& b) {
  detail::check_binary(a, b, "add");
  const Matrix like = detail::shape_of(a, b);
  Matrix out = detail::expand(a.value(), like) + detail::expand(b.value(), like);
  const std::size_t ia = a.id(), ib = b.id();
  return a.tape().push_op(std::move(out), {a, b}, [ia, ib](Tape& t, std::size_t self) {
    const Matrix& g = t.adjoint(self);
    detail::reduce_into(t, ia, g);
    detail::reduce_into(t, ib, g);
  });
}

inline Var operator-(const Var& a, const Var& b) {
  detail::check_binary(a, b, "sub");
  const Matrix like = detail::shape_of(a, b);
  Matrix out = detail::expand(a.value(), like) - detail::expand(b.value(), like);
  const std::size_t ia = a.id(), ib = b.id();
  return a.tape().push_op(std::move(out), {a, b}, [ia, ib](Tape& t, std::size_t self) {
    const Matrix& g = t.adjoint(self);
    detail::reduce_into(t, ia, g);
    detail::reduce_into(t, ib, -g);
  });
}

/// Elementwise product (with scalar broadcast).
inline Var operator*(const Var& a, const Var& b) {
  detail::check_binary(a, b, "mul");
  const Matrix like = detail::shape_of(a, b);
  Matrix av = detail::expand(a.value(), like);
  Matrix bv = detail::expand(b.value(), like);
  Matrix out = av.cwiseProduct(bv);
  const std::size_t ia = a.id(), ib = b.id();
  return a.tape().push_op(std::move(out), {a, b},
                          [ia, ib, av = std::move(av), bv = std::move(bv)](Tape& t, std::size_t self) {
                            const Matrix& g = t.adjoint(self);
                            detail::reduce_into(t, ia, g.cwiseProduct(bv));
                            detail::reduce_into(t, ib, g.cwiseProduct(av));
                          });
}

inline Var operator/(const Var& a, const Var& b) {
  detail::check_binary(a, b, "div");
  const Matrix like = detail::shape_of(a, b);
  Matrix av = detail::expand(a.value(), like);
  Matrix bv = detail::expand(b.value(), like);
  Matrix out = av.cwiseQuotient(bv);
  const std::size_t ia = a.id(), ib = b.id();
  return a.tape().push_op(
      out, {a, b}, [ia, ib, out, bv = std::move(bv)](Tape& t, std::size_t self) {
        const Matrix& g = t.adjoint(self);
        detail::reduce_into(t, ia, g.cwiseQuotient(bv));
        detail::reduce_into(t, ib, -g.cwiseProduct(out).cwiseQuotient(bv));
      });
}

inline Var operator-(const Var& a) {
  const std::size_t ia = a.id();
  return a.tape().push_op(-a.value(), {a}, [ia](Tape& t, std::size_t self) {
    t.accumulate(ia, -t.adjoint(self));
  });
}

inline Var operator+(const Var& a, double c) {
  const std::size_t ia = a.id();
  return a.tape().push_op((a.value().array() + c).matrix(), {a}, [ia](Tape& t, std::size_t self) {
    t.accumulate(ia, t.adjoint(self));
  });
}
inline Var operator+(double c, const Var& a) { return a + c; }
inline Var operator-(const Var& a, double c) { return a + (-c); }
inline Var operator-(double c, const Var& a) { return (-a) + c; }

inline Var operator*(const Var& a, double c) {
  const std::size_t ia = a.id();
  return a.tape().push_op(a.value() * c, {a}, [ia, c](Tape& t, std::size_t self) {
    t.accumulate(ia, t.adjoint(self) * c);
  });
}
inline Var operator*(double c, const Var& a) { return a * c; }
inline Var operator/(const Var& a, double c) { return a * (1.0 / c); }

inline Var exp(const Var& a) {
  Matrix out = a.value().array().exp().matrix();
  const std::size_t ia = a.id();
  return a.tape().push_op(out, {a}, [ia, out](Tape& t, std::size_t self) {
    t.accumulate(ia, t.adjoint(self).cwiseProduct(out));
  });
}

inline Var log(const Var& a) {
  Matrix in = a.value();
  Matrix out = in.array().log().matrix();
  const std::size_t ia = a.id();
  return a.tape().push_op(std::move(out), {a}, [ia, in = std::move(in)](Tape& t, std::size_t self) {
    t.accumulate(ia, t.adjoint(self).cwiseQuotient(in));
  });
}

inline Var square(const Var& a) { return a * a; }

inline Var tanh(const Var& a) {
  Matrix out = a.value().array().tanh().matrix();
  const std::size_t ia = a.id();
  return a.tape().push_op(out, {a}, [ia, out](Tape& t, std::size_t self) {
    t.accumulate(ia, t.adjoint(self).cwiseProduct((1.0 - out.array().square()).matrix()));
  });
}

inline Var relu(const Var& a) {
  Matrix out = a.value().cwiseMax(0.0);
  const std::size_t ia = a.id();
  return a.tape().push_op(out, {a}, [ia, out](Tape& t, std::size_t self) {
    Matrix mask = (out.array() > 0.0).cast<double>().matrix();
    t.accumulate(ia, t.adjoint(self).cwiseProduct(mask));
  });
}

inline Var sum(const Var& a) {
  const std::size_t ia = a.id();
  const Eigen::Index r = a.rows(), c = a.cols();
  return a.tape().push_op(Matrix::Constant(1, 1, a.value().sum()), {a},
                          [ia, r, c](Tape& t, std::size_t self) {
                            t.accumulate(ia, Matrix::Constant(r, c, t.adjoint(self)(0, 0)));
                          });
}

inline Var mean(const Var& a) { return sum(a) / static_cast<double>(a.value().size()); }

/// Inner product of two equally shaped nodes.
inline Var dot(const Var& a, const Var& b) { return sum(a * b); }

/// Matrix product a·b.
inline Var matmul(const Var& a, const Var& b) {
  if (a.cols() != b.rows()) throw DimensionMismatch("matmul: inner dimensions differ");
  const std::size_t ia = a.id(), ib = b.id();
  Matrix av = a.value(), bv = b.value();
  Matrix out = av * bv;
  return a.tape().push_op(std::move(out), {a, b},
                          [ia, ib, av = std::move(av), bv = std::move(bv)](Tape& t, std::size_t self) {
                            const Matrix& g = t.adjoint(self);
                            if (t.needs_grad(ia)) t.accumulate(ia, g * bv.transpose());
                            if (t.needs_grad(ib)) t.accumulate(ib, av.transpose() * g);
                          });
}

/// a·bᵀ, the dense-layer product X·Wᵀ.
inline Var matmul_nt(const Var& a, const Var& b) {
  if (a.cols() != b.cols()) throw DimensionMismatch("matmul_nt: inner dimensions differ");
  const std::size_t ia = a.id(), ib = b.id();
  Matrix av = a.value(), bv = b.value();
  Matrix out = av * bv.transpose();
  return a.tape().push_op(std::move(out), {a, b},
                          [ia, ib, av = std::move(av), bv = std::move(bv)](Tape& t, std::size_t self) {
                            const Matrix& g = t.adjoint(self);
                            if (t.needs_grad(ia)) t.accumulate(ia, g * bv);
                            if (t.needs_grad(ib)) t.accumulate(ib, g.transpose() * av);
                          });
}

/// Adds a row vector (1 x cols) to every row of `a`.
inline Var add_row(const Var& a, const Var& row) {
  if (row.rows() != 1 || row.cols() != a.cols()) throw DimensionMismatch("add_row: bias shape");
  const std::size_t ia = a.id(), ir = row.id();
  Matrix out = a.value().rowwise() + row.value().row(0);
  return a.tape().push_op(std::move(out), {a, row}, [ia, ir](Tape& t, std::size_t self) {
    const Matrix& g = t.adjoint(self);
    t.accumulate(ia, g);
    if (t.needs_grad(ir)) t.accumulate(ir, g.colwise().sum());
  });
}

/// Row-major rows x cols view of `count` entries of column vector `v`
/// starting at `offset`. Gradients scatter back into `v`.
inline Var slice(const Var& v, Eigen::Index offset, Eigen::Index rows, Eigen::Index cols) {
  if (v.cols() != 1 || offset < 0 || offset + rows * cols > v.rows()) {
    throw DimensionMismatch("slice: out of range");
  }
  Matrix out(rows, cols);
  const Matrix& src = v.value();
  for (Eigen::Index r = 0; r < rows; ++r) {
    for (Eigen::Index c = 0; c < cols; ++c) out(r, c) = src(offset + r * cols + c, 0);
  }
  const std::size_t iv = v.id();
  return v.tape().push_op(std::move(out), {v}, [iv, offset, rows, cols](Tape& t, std::size_t self) {
    if (!t.needs_grad(iv)) return;
    const Matrix& g = t.adjoint(self);
    Matrix& dst = t.adjoint_mut(iv);
    for (Eigen::Index r = 0; r < rows; ++r) {
      for (Eigen::Index c = 0; c < cols; ++c) dst(offset + r * cols + c, 0) += g(r, c);
    }
  });
}

/// Constant matrix times a column node.
inline Var matvec(const Matrix& m, const Var& x) {
  if (m.cols() != x.rows()) throw DimensionMismatch("matvec: inner dimensions differ");
  const std::size_t ix = x.id();
  return x.tape().push_op(m * x.value(), {x}, [ix, m](Tape& t, std::size_t self) {
    t.accumulate(ix, m.transpose() * t.adjoint(self));
  });
}

/// Mean softmax cross-entropy of row-wise logits against integer labels.
inline Var softmax_cross_entropy(const Var& logits, std::span<const int> labels) {
  const Matrix& z = logits.value();
  if (static_cast<Eigen::Index>(labels.size()) != z.rows()) {
    throw DimensionMismatch("softmax_cross_entropy: label count");
  }
  const Eigen::Index n = z.rows(), c = z.cols();
  Matrix prob(n, c);
  double total = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) {
    const int y = labels[static_cast<std::size_t>(i)];
    if (y < 0 || y >= c) throw DimensionMismatch("softmax_cross_entropy: label out of range");
    const double zmax = z.row(i).maxCoeff();
    const Eigen::RowVectorXd e = (z.row(i).array() - zmax).exp().matrix();
    const double s = e.sum();
    prob.row(i) = e / s;
    total += std::log(s) + zmax - z(i, y);
  }
  std::vector<int> ys(labels.begin(), labels.end());
  const std::size_t il = logits.id();
  return logits.tape().push_op(
      Matrix::Constant(1, 1, total / static_cast<double>(n)), {logits},
      [il, prob = std::move(prob), ys = std::move(ys)](Tape& t, std::size_t self) {
        Matrix d = prob;
        for (Eigen::Index i = 0; i < d.rows(); ++i) d(i, ys[static_cast<std::size_t>(i)]) -= 1.0;
        d *= t.adjoint(self)(0, 0) / static_cast<double>(d.rows());
        t.accumulate(il, d);
      });
}

/// Mean over all entries of (pred - target)².
inline Var mean_squared_error(const Var& pred, const Matrix& target) {
  if (pred.rows() != target.rows() || pred.cols() != target.cols()) {
    throw DimensionMismatch("mean_squared_error: shape mismatch");
  }
  Matrix diff = pred.value() - target;
  const double count = static_cast<double>(diff.size());
  const std::size_t ip = pred.id();
  return pred.tape().push_op(Matrix::Constant(1, 1, diff.squaredNorm() / count), {pred},
                             [ip, diff, count](Tape& t, std::size_t self) {
                               t.accumulate(ip, diff * (2.0 * t.adjoint(self)(0, 0) / count));
                             });
}

}  // namespace xsam::autodiff
