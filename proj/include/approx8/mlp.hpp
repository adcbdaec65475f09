#pragma once

#include <cmath>
#include <cstddef>
#include <functional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "approx8/errors.hpp"
#include "approx8/random.hpp"

namespace approx8 {

template <typename Scalar>
using RowMatrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <typename Scalar>
using RowVector = Eigen::Matrix<Scalar, 1, Eigen::Dynamic>;

/// Callbacks invoked on tensors that would cross devices under model
/// parallelism. `layer` is the 1-based hidden layer index; data is contiguous.
template <typename Scalar>
struct BoundaryHooks {
  std::function<void(int layer, Scalar* data, std::size_t n)> activation;
  std::function<void(int layer, Scalar* data, std::size_t n)> error;
};

template <typename Scalar>
struct MlpGradients {
  std::vector<RowMatrix<Scalar>> weights;
  std::vector<RowVector<Scalar>> biases;
};

/// Fully connected ReLU network with a softmax output, batch-major.
///
/// weights[l] is fan_in x fan_out; a forward step is a * W + b. Dropout is
/// inverted: kept units are scaled by 1 / (1 - rate) during training so
/// evaluation needs no rescaling. dropout[l] applies to the input of layer l.
template <typename Scalar>
class Mlp {
 public:
  using Matrix = RowMatrix<Scalar>;
  using Vector = RowVector<Scalar>;

  Mlp() = default;

  /// Uniform(+-sqrt(6 / (fan_in + fan_out))) weights, zero biases.
  Mlp(const std::vector<int>& layer_sizes, Rng& rng) {
    if (layer_sizes.size() < 2) throw ConfigError("layer_sizes needs at least 2 entries");
    for (std::size_t l = 0; l + 1 < layer_sizes.size(); ++l) {
      const int in = layer_sizes[l], out = layer_sizes[l + 1];
      if (in < 1 || out < 1) throw ConfigError("layer_sizes entries must be >= 1");
      const double limit = std::sqrt(6.0 / (in + out));
      Matrix w(in, out);
      for (Eigen::Index i = 0; i < w.size(); ++i)
        w.data()[i] = static_cast<Scalar>((2.0 * rng.uniform() - 1.0) * limit);
      weights_.push_back(std::move(w));
      biases_.push_back(Vector::Zero(out));
    }
  }

  std::size_t layer_count() const { return weights_.size(); }
  Eigen::Index input_size() const { return weights_.front().rows(); }
  Eigen::Index output_size() const { return weights_.back().cols(); }

  std::vector<Matrix>& weights() { return weights_; }
  std::vector<Vector>& biases() { return biases_; }
  const std::vector<Matrix>& weights() const { return weights_; }
  const std::vector<Vector>& biases() const { return biases_; }

  /// Logits for a batch, no dropout. Activation hooks still fire.
  Matrix logits(const Matrix& x, const BoundaryHooks<Scalar>* hooks = nullptr) const {
    Matrix a = x;
    for (std::size_t l = 0; l < weights_.size(); ++l) {
      Matrix z = (a * weights_[l]).rowwise() + biases_[l];
      if (l + 1 == weights_.size()) return z;
      a = z.cwiseMax(Scalar(0));
      if (hooks && hooks->activation) hooks->activation(static_cast<int>(l) + 1, a.data(), static_cast<std::size_t>(a.size()));
    }
    return a;
  }

  /// Argmax predictions.
  std::vector<int> predict(const Matrix& x, const BoundaryHooks<Scalar>* hooks = nullptr) const {
    const Matrix z = logits(x, hooks);
    std::vector<int> out(static_cast<std::size_t>(z.rows()));
    for (Eigen::Index r = 0; r < z.rows(); ++r) {
      Eigen::Index arg;
      z.row(r).maxCoeff(&arg);
      out[static_cast<std::size_t>(r)] = static_cast<int>(arg);
    }
    return out;
  }

  /// Mean softmax cross-entropy over the batch and its gradients.
  /// `dropout` holds one rate per non-output layer, or is empty for none.
  Scalar loss_and_gradients(const Matrix& x, const Matrix& y, MlpGradients<Scalar>& grads,
                            const std::vector<double>& dropout = {}, Rng* rng = nullptr,
                            const BoundaryHooks<Scalar>* hooks = nullptr) const {
    const std::size_t L = weights_.size();
    if (!dropout.empty() && (dropout.size() != L || rng == nullptr))
      throw UsageError("dropout needs one rate per non-output layer and an rng");
    if (x.cols() != input_size() || y.cols() != output_size() || x.rows() != y.rows())
      throw UsageError("batch shape does not match the network");

    std::vector<Matrix> inputs(L);   // input of layer l after dropout
    std::vector<Matrix> masks(L);    // scaled dropout masks, empty when unused
    std::vector<Matrix> pre(L);      // pre-activations

    auto apply_dropout = [&](Matrix& a, std::size_t l) {
      if (dropout.empty() || dropout[l] <= 0.0) return;
      const double keep = 1.0 - dropout[l];
      masks[l].resize(a.rows(), a.cols());
      for (Eigen::Index i = 0; i < a.size(); ++i)
        masks[l].data()[i] = rng->uniform() < keep ? static_cast<Scalar>(1.0 / keep) : Scalar(0);
      a.array() *= masks[l].array();
    };

    Matrix a = x;
    apply_dropout(a, 0);
    for (std::size_t l = 0; l < L; ++l) {
      inputs[l] = a;
      pre[l] = (a * weights_[l]).rowwise() + biases_[l];
      if (l + 1 == L) break;
      a = pre[l].cwiseMax(Scalar(0));
      if (hooks && hooks->activation) hooks->activation(static_cast<int>(l) + 1, a.data(), static_cast<std::size_t>(a.size()));
      apply_dropout(a, l + 1);
    }

    // softmax cross-entropy
    const Matrix& z = pre[L - 1];
    Matrix p = (z.colwise() - z.rowwise().maxCoeff()).array().exp().matrix();
    p.array().colwise() /= p.rowwise().sum().array();
    const auto batch = static_cast<Scalar>(x.rows());
    const Scalar loss = -(y.array() * (p.array().max(Scalar(1e-30))).log()).sum() / batch;

    grads.weights.resize(L);
    grads.biases.resize(L);
    Matrix delta = (p - y) / batch;
    for (std::size_t l = L; l-- > 0;) {
      grads.weights[l].noalias() = inputs[l].transpose() * delta;
      grads.biases[l] = delta.colwise().sum();
      if (l == 0) break;
      Matrix upstream = delta * weights_[l].transpose();
      if (masks[l].size()) upstream.array() *= masks[l].array();
      delta = upstream.cwiseProduct((pre[l - 1].array() > Scalar(0)).template cast<Scalar>().matrix());
      if (hooks && hooks->error) hooks->error(static_cast<int>(l), delta.data(), static_cast<std::size_t>(delta.size()));
    }
    return loss;
  }

 private:
  std::vector<Matrix> weights_;
  std::vector<Vector> biases_;
};

/// RMSProp: acc = decay * acc + (1 - decay) * g^2; w -= lr * g / sqrt(acc + eps).
template <typename Scalar>
class RmsProp {
 public:
  RmsProp(const Mlp<Scalar>& net, double lr, double decay, double eps)
      : lr_(lr), decay_(decay), eps_(eps) {
    for (const auto& w : net.weights()) acc_w_.push_back(RowMatrix<Scalar>::Zero(w.rows(), w.cols()));
    for (const auto& b : net.biases()) acc_b_.push_back(RowVector<Scalar>::Zero(b.cols()));
  }

  void step(Mlp<Scalar>& net, const MlpGradients<Scalar>& g) {
    for (std::size_t l = 0; l < net.layer_count(); ++l) {
      update(net.weights()[l], acc_w_[l], g.weights[l]);
      update(net.biases()[l], acc_b_[l], g.biases[l]);
    }
  }

 private:
  template <typename Param, typename Grad>
  void update(Param& w, Param& acc, const Grad& g) {
    const auto decay = static_cast<Scalar>(decay_);
    acc.array() = decay * acc.array() + (Scalar(1) - decay) * g.array().square();
    w.array() -= static_cast<Scalar>(lr_) * g.array() / (acc.array() + static_cast<Scalar>(eps_)).sqrt();
  }

  double lr_, decay_, eps_;
  std::vector<RowMatrix<Scalar>> acc_w_;
  std::vector<RowVector<Scalar>> acc_b_;
};

}  // namespace approx8
