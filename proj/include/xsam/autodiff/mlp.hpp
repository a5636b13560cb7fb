#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <cstdint>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "xsam/autodiff/surface.hpp"
#include "xsam/autodiff/tape.hpp"

namespace xsam {

enum class Activation { tanh, relu };
enum class MlpLoss { cross_entropy, mse };

inline std::string to_string(Activation a) { return a == Activation::tanh ? "tanh" : "relu"; }
inline std::string to_string(MlpLoss l) { return l == MlpLoss::cross_entropy ? "cross_entropy" : "mse"; }

/// Dense feed-forward network shape. Parameters are laid out layer by layer,
/// each layer as a row-major (out x in) weight block followed by its bias.
struct MlpSpec {
  std::vector<int> layer_widths;
  Activation activation = Activation::tanh;
  MlpLoss loss = MlpLoss::cross_entropy;

  void validate() const {
    if (layer_widths.size() < 2) throw ConfigError("mlp: need at least input and output widths");
    for (int w : layer_widths) {
      if (w <= 0) throw ConfigError("mlp: layer widths must be positive");
    }
  }

  Eigen::Index param_count() const {
    Eigen::Index total = 0;
    for (std::size_t i = 0; i + 1 < layer_widths.size(); ++i) {
      total += static_cast<Eigen::Index>(layer_widths[i]) * layer_widths[i + 1] + layer_widths[i + 1];
    }
    return total;
  }

  /// Offset of layer `l`'s weight block; its bias follows at + out*in.
  Eigen::Index layer_offset(std::size_t l) const {
    Eigen::Index off = 0;
    for (std::size_t i = 0; i < l; ++i) {
      off += static_cast<Eigen::Index>(layer_widths[i]) * layer_widths[i + 1] + layer_widths[i + 1];
    }
    return off;
  }

  std::size_t layer_count() const { return layer_widths.size() - 1; }

  friend bool operator==(const MlpSpec&, const MlpSpec&) = default;

  /// Glorot-uniform weights, zero biases.
  ParamVector init(std::uint64_t seed) const {
    validate();
    ParamVector p = ParamVector::Zero(param_count());
    std::mt19937_64 rng(seed);
    for (std::size_t l = 0; l < layer_count(); ++l) {
      const int in = layer_widths[l], out = layer_widths[l + 1];
      const double bound = std::sqrt(6.0 / static_cast<double>(in + out));
      std::uniform_real_distribution<double> dist(-bound, bound);
      const Eigen::Index off = layer_offset(l);
      for (Eigen::Index i = 0; i < static_cast<Eigen::Index>(in) * out; ++i) p[off + i] = dist(rng);
    }
    return p;
  }
};

/// In-memory supervised data. `labels` drive cross-entropy; `targets`
/// (samples x outputs) drive mse and default to one-hot labels.
struct MlpData {
  Matrix features;
  std::vector<int> labels;
  Matrix targets;
};

/// Mean loss of an MLP over fixed-size, contiguous minibatches.
class MlpSurface final : public LossSurface {
 public:
  MlpSurface(MlpSpec spec, MlpData data, Eigen::Index batch_size)
      : spec_(std::move(spec)), data_(std::move(data)), batch_size_(batch_size) {
    spec_.validate();
    const Eigen::Index n = data_.features.rows();
    if (data_.features.cols() != spec_.layer_widths.front()) {
      throw ConfigError("mlp: feature width does not match input layer");
    }
    if (batch_size_ <= 0 || n % batch_size_ != 0) {
      throw ConfigError("mlp: batch size must divide the sample count");
    }
    const int outputs = spec_.layer_widths.back();
    if (spec_.loss == MlpLoss::cross_entropy || data_.targets.size() == 0) {
      if (static_cast<Eigen::Index>(data_.labels.size()) != n) {
        throw ConfigError("mlp: label count does not match sample count");
      }
      for (int y : data_.labels) {
        if (y < 0 || y >= outputs) throw ConfigError("mlp: label outside output range");
      }
    }
    if (spec_.loss == MlpLoss::mse && data_.targets.size() == 0) {
      data_.targets = Matrix::Zero(n, outputs);
      for (Eigen::Index i = 0; i < n; ++i) data_.targets(i, data_.labels[static_cast<std::size_t>(i)]) = 1.0;
    }
    if (spec_.loss == MlpLoss::mse &&
        (data_.targets.rows() != n || data_.targets.cols() != outputs)) {
      throw ConfigError("mlp: target matrix shape");
    }
  }

  Eigen::Index dim() const override { return spec_.param_count(); }
  std::string name() const override { return "mlp"; }

  std::int64_t batch_count() const override { return data_.features.rows() / batch_size_; }
  void set_batch(std::int64_t b) override {
    if (b < 0 || b >= batch_count()) throw Error("mlp: batch index out of range");
    batch_ = b;
  }
  std::int64_t batch() const override { return batch_; }

  double value(const ParamVector& x) const override {
    autodiff::Tape tape;
    return build(tape, tape.constant(Matrix(x)), batch_ * batch_size_, batch_size_).scalar();
  }

  ValueAndGrad value_and_grad(const ParamVector& x) const override {
    autodiff::Tape tape;
    autodiff::Var params = tape.leaf(Matrix(x));
    autodiff::Var loss = build(tape, params, batch_ * batch_size_, batch_size_);
    tape.backward(loss);
    return {loss.scalar(), params.grad().col(0)};
  }

  /// One block per neuron: its incoming weight row plus its bias.
  std::vector<std::vector<Eigen::Index>> parameter_groups() const override {
    std::vector<std::vector<Eigen::Index>> groups;
    for (std::size_t l = 0; l < spec_.layer_count(); ++l) {
      const Eigen::Index in = spec_.layer_widths[l], out = spec_.layer_widths[l + 1];
      const Eigen::Index off = spec_.layer_offset(l);
      for (Eigen::Index j = 0; j < out; ++j) {
        std::vector<Eigen::Index> g;
        g.reserve(static_cast<std::size_t>(in + 1));
        for (Eigen::Index i = 0; i < in; ++i) g.push_back(off + j * in + i);
        g.push_back(off + out * in + j);
        groups.push_back(std::move(g));
      }
    }
    return groups;
  }

  /// Network outputs for arbitrary inputs (no tape).
  Matrix logits(const ParamVector& x, const Matrix& features) const {
    require_dim(x, dim(), "mlp");
    Matrix h = features;
    for (std::size_t l = 0; l < spec_.layer_count(); ++l) {
      const Eigen::Index in = spec_.layer_widths[l], out = spec_.layer_widths[l + 1];
      const Eigen::Index off = spec_.layer_offset(l);
      Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>> w(
          x.data() + off, out, in);
      Eigen::Map<const Eigen::RowVectorXd> b(x.data() + off + out * in, out);
      Matrix z = (h * w.transpose()).rowwise() + b;
      if (l + 1 < spec_.layer_count()) {
        z = spec_.activation == Activation::tanh ? Matrix(z.array().tanh()) : Matrix(z.cwiseMax(0.0));
      }
      h = std::move(z);
    }
    return h;
  }

  /// Mean loss over the whole dataset (not a pass-counted optimizer query).
  double dataset_loss(const ParamVector& x) const {
    autodiff::Tape tape;
    return build(tape, tape.constant(Matrix(x)), 0, data_.features.rows()).scalar();
  }

  /// Fraction of samples whose argmax output equals the label.
  double dataset_accuracy(const ParamVector& x) const {
    const Matrix z = logits(x, data_.features);
    Eigen::Index correct = 0;
    for (Eigen::Index i = 0; i < z.rows(); ++i) {
      Eigen::Index arg = 0;
      z.row(i).maxCoeff(&arg);
      if (!data_.labels.empty() && arg == data_.labels[static_cast<std::size_t>(i)]) ++correct;
    }
    return static_cast<double>(correct) / static_cast<double>(z.rows());
  }

  const MlpSpec& spec() const { return spec_; }
  const MlpData& data() const { return data_; }
  Eigen::Index batch_size() const { return batch_size_; }

 private:
  autodiff::Var build(autodiff::Tape& tape, const autodiff::Var& params, Eigen::Index start,
                      Eigen::Index count) const {
    require_dim(params.value().col(0), dim(), "mlp");
    autodiff::Var h = tape.constant(data_.features.middleRows(start, count));
    for (std::size_t l = 0; l < spec_.layer_count(); ++l) {
      const Eigen::Index in = spec_.layer_widths[l], out = spec_.layer_widths[l + 1];
      const Eigen::Index off = spec_.layer_offset(l);
      autodiff::Var w = autodiff::slice(params, off, out, in);
      autodiff::Var b = autodiff::slice(params, off + out * in, 1, out);
      autodiff::Var z = autodiff::add_row(autodiff::matmul_nt(h, w), b);
      if (l + 1 < spec_.layer_count()) {
        z = spec_.activation == Activation::tanh ? autodiff::tanh(z) : autodiff::relu(z);
      }
      h = z;
    }
    if (spec_.loss == MlpLoss::cross_entropy) {
      return autodiff::softmax_cross_entropy(
          h, std::span<const int>(data_.labels).subspan(static_cast<std::size_t>(start),
                                                        static_cast<std::size_t>(count)));
    }
    return autodiff::mean_squared_error(h, data_.targets.middleRows(start, count));
  }

  MlpSpec spec_;
  MlpData data_;
  Eigen::Index batch_size_;
  std::int64_t batch_ = 0;
};

}  // namespace xsam
