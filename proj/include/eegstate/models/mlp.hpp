#pragma once

#include <cmath>
#include <cstdint>
#include <optional>
#include <random>
#include <vector>

#include <Eigen/Core>

#include "eegstate/error.hpp"

namespace eegstate {

enum class Activation { Relu, Tanh };

template <typename Scalar>
struct DenseLayer {
  using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
  using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;
  Matrix weights;  // out x in
  Vector bias;     // out
};

/// Fully connected network: hidden layers use `activation`, the last layer feeds a softmax.
/// Inputs and outputs are column-per-sample.
template <typename Scalar>
struct MlpModel {
  using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
  using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

  std::vector<DenseLayer<Scalar>> layers;
  Activation activation = Activation::Relu;
  /// Index of the hidden layer whose output passes through dropout (training only).
  std::optional<std::size_t> dropout_after;
  Scalar dropout_rate = Scalar(0);

  Eigen::Index input_dim() const { return layers.front().weights.cols(); }
  Eigen::Index output_dim() const { return layers.back().weights.rows(); }

  Eigen::Index parameter_count() const {
    Eigen::Index n = 0;
    for (const auto& l : layers) n += l.weights.size() + l.bias.size();
    return n;
  }

  void validate() const {
    require(!layers.empty(), ErrorCode::ShapeMismatch, "network has no layers");
    for (std::size_t i = 0; i < layers.size(); ++i) {
      require(layers[i].bias.size() == layers[i].weights.rows(), ErrorCode::ShapeMismatch,
              "bias/weight mismatch in layer " + std::to_string(i));
      if (i > 0) {
        require(layers[i].weights.cols() == layers[i - 1].weights.rows(), ErrorCode::ShapeMismatch,
                "layer " + std::to_string(i) + " input does not match previous output");
      }
    }
    if (dropout_after) {
      require(*dropout_after + 1 < layers.size(), ErrorCode::ShapeMismatch,
              "dropout must follow a hidden layer");
      require(dropout_rate >= Scalar(0) && dropout_rate < Scalar(1), ErrorCode::BadArgs,
              "dropout rate must be in [0, 1)");
    }
  }
};

/// Builds a network with the given layer widths (input first, output last). Weights are drawn
/// from U(-1/sqrt(fan_in), 1/sqrt(fan_in)); biases start at zero.
template <typename Scalar>
MlpModel<Scalar> make_mlp(const std::vector<Eigen::Index>& widths, Activation activation,
                          std::uint64_t seed) {
  require(widths.size() >= 2, ErrorCode::ShapeMismatch, "need at least input and output widths");
  MlpModel<Scalar> model;
  model.activation = activation;
  std::mt19937_64 rng(seed);
  for (std::size_t i = 1; i < widths.size(); ++i) {
    const Eigen::Index in = widths[i - 1];
    const Eigen::Index out = widths[i];
    require(in >= 1 && out >= 1, ErrorCode::ShapeMismatch, "layer widths must be positive");
    const double bound = 1.0 / std::sqrt(static_cast<double>(in));
    std::uniform_real_distribution<double> dist(-bound, bound);
    DenseLayer<Scalar> layer;
    layer.weights.resize(out, in);
    for (Eigen::Index c = 0; c < in; ++c) {
      for (Eigen::Index r = 0; r < out; ++r) layer.weights(r, c) = static_cast<Scalar>(dist(rng));
    }
    layer.bias = DenseLayer<Scalar>::Vector::Zero(out);
    model.layers.push_back(std::move(layer));
  }
  return model;
}

namespace detail {

template <typename Derived>
auto activate(const Eigen::MatrixBase<Derived>& z, Activation a) {
  using Scalar = typename Derived::Scalar;
  using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
  if (a == Activation::Relu) return Matrix(z.cwiseMax(Scalar(0)));
  return Matrix(z.array().tanh().matrix());
}

// Derivative expressed through the activation output h.
template <typename Derived>
auto activation_slope(const Eigen::MatrixBase<Derived>& h, Activation a) {
  using Scalar = typename Derived::Scalar;
  using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
  if (a == Activation::Relu) return Matrix((h.array() > Scalar(0)).template cast<Scalar>().matrix());
  return Matrix((Scalar(1) - h.array().square()).matrix());
}

/// Column-wise log-softmax.
template <typename Derived>
auto log_softmax(const Eigen::MatrixBase<Derived>& logits) {
  using Scalar = typename Derived::Scalar;
  using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
  Matrix out = logits;
  for (Eigen::Index c = 0; c < out.cols(); ++c) {
    const Scalar m = out.col(c).maxCoeff();
    const Scalar lse = m + std::log((out.col(c).array() - m).exp().sum());
    out.col(c).array() -= lse;
  }
  return out;
}

}  // namespace detail

/// Class probabilities for a batch (input_dim x batch). Dropout is inactive.
template <typename Scalar, typename Derived>
Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic> mlp_forward_batch(
    const MlpModel<Scalar>& model, const Eigen::MatrixBase<Derived>& inputs) {
  require(inputs.rows() == model.input_dim(), ErrorCode::ShapeMismatch,
          "input has " + std::to_string(inputs.rows()) + " rows, network expects " +
              std::to_string(model.input_dim()));
  Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic> h = inputs.template cast<Scalar>();
  for (std::size_t l = 0; l < model.layers.size(); ++l) {
    const auto& layer = model.layers[l];
    Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic> z = layer.weights * h;
    z.colwise() += layer.bias;
    h = (l + 1 < model.layers.size()) ? detail::activate(z, model.activation) : z;
  }
  return detail::log_softmax(h).array().exp().matrix();
}

template <typename Scalar, typename Derived>
Eigen::Matrix<Scalar, Eigen::Dynamic, 1> mlp_forward(const MlpModel<Scalar>& model,
                                                     const Eigen::MatrixBase<Derived>& x) {
  require(x.cols() == 1, ErrorCode::ShapeMismatch, "mlp_forward expects a column vector");
  return mlp_forward_batch(model, x).col(0);
}

template <typename Scalar>
struct MlpGradients {
  std::vector<typename DenseLayer<Scalar>::Matrix> weights;
  std::vector<typename DenseLayer<Scalar>::Vector> bias;
  Scalar loss = Scalar(0);

  Scalar squared_norm() const {
    Scalar s = Scalar(0);
    for (const auto& w : weights) s += w.squaredNorm();
    for (const auto& b : bias) s += b.squaredNorm();
    return s;
  }
};

/// Gradients of the mean cross-entropy between softmax outputs and `targets`
/// (output_dim x batch, each column a distribution; one-hot for hard labels).
/// When dropout_rng is given and the model has dropout, one inverted-dropout mask is drawn and
/// used by both passes.
template <typename Scalar, typename DerivedX, typename DerivedT>
MlpGradients<Scalar> mlp_backward(const MlpModel<Scalar>& model,
                                  const Eigen::MatrixBase<DerivedX>& inputs,
                                  const Eigen::MatrixBase<DerivedT>& targets,
                                  std::mt19937_64* dropout_rng = nullptr) {
  using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
  require(inputs.rows() == model.input_dim(), ErrorCode::ShapeMismatch, "input width mismatch");
  require(targets.rows() == model.output_dim() && targets.cols() == inputs.cols(),
          ErrorCode::ShapeMismatch, "targets must be output_dim x batch");
  require(inputs.cols() >= 1, ErrorCode::ShapeMismatch, "empty batch");
  const auto batch = static_cast<Scalar>(inputs.cols());
  const std::size_t n_layers = model.layers.size();

  // activations[0] is the input; activations[l+1] the (post-dropout) output of layer l.
  std::vector<Matrix> activations;
  activations.reserve(n_layers + 1);
  activations.push_back(inputs.template cast<Scalar>());
  std::optional<Matrix> mask;
  Matrix pre_dropout;
  for (std::size_t l = 0; l < n_layers; ++l) {
    Matrix z = model.layers[l].weights * activations.back();
    z.colwise() += model.layers[l].bias;
    if (l + 1 == n_layers) {
      activations.push_back(std::move(z));
      break;
    }
    Matrix h = detail::activate(z, model.activation);
    if (dropout_rng && model.dropout_after && *model.dropout_after == l && model.dropout_rate > 0) {
      const Scalar keep = Scalar(1) - model.dropout_rate;
      std::bernoulli_distribution coin(static_cast<double>(keep));
      Matrix m(h.rows(), h.cols());
      for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = coin(*dropout_rng) ? Scalar(1) / keep : Scalar(0);
      pre_dropout = h;
      h = h.cwiseProduct(m);
      mask = std::move(m);
    }
    activations.push_back(std::move(h));
  }

  const Matrix log_probs = detail::log_softmax(activations.back());
  MlpGradients<Scalar> grads;
  grads.loss = -(targets.template cast<Scalar>().array() * log_probs.array()).sum() / batch;
  grads.weights.resize(n_layers);
  grads.bias.resize(n_layers);

  Matrix delta = (log_probs.array().exp().matrix() - targets.template cast<Scalar>()) / batch;
  for (std::size_t l = n_layers; l-- > 0;) {
    grads.weights[l] = delta * activations[l].transpose();
    grads.bias[l] = delta.rowwise().sum();
    if (l == 0) break;
    Matrix upstream = model.layers[l].weights.transpose() * delta;
    if (mask && *model.dropout_after == l - 1) {
      delta = upstream.cwiseProduct(*mask).cwiseProduct(
          detail::activation_slope(pre_dropout, model.activation));
    } else {
      delta = upstream.cwiseProduct(detail::activation_slope(activations[l], model.activation));
    }
  }
  return grads;
}

/// One-hot target matrix (n_classes x labels.size()).
template <typename Scalar = double>
Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic> one_hot(const std::vector<int>& labels,
                                                             Eigen::Index n_classes) {
  Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic> t =
      Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>::Zero(n_classes, static_cast<Eigen::Index>(labels.size()));
  for (std::size_t i = 0; i < labels.size(); ++i) {
    require(labels[i] >= 0 && labels[i] < n_classes, ErrorCode::ShapeMismatch, "label out of range");
    t(labels[i], static_cast<Eigen::Index>(i)) = Scalar(1);
  }
  return t;
}

using Mlp = MlpModel<double>;

}  // namespace eegstate
