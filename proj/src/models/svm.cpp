#include "eegstate/models/svm.hpp"

#include <algorithm>
#include <numeric>
#include <random>
#include <vector>

#include "eegstate/error.hpp"
#include "eegstate/seed.hpp"

namespace eegstate {

Eigen::MatrixXd LinearSvm::decision_function(const Eigen::MatrixXd& x) const {
  require(weights.size() > 0, ErrorCode::NotFitted, "SVM not fitted");
  require(x.cols() == weights.cols(), ErrorCode::ShapeMismatch, "feature width mismatch");
  Eigen::MatrixXd scores = x * weights.transpose();
  scores.rowwise() += bias.transpose();
  return scores;
}

Eigen::MatrixXd LinearSvm::predict_proba(const Eigen::MatrixXd& x) const {
  Eigen::MatrixXd p = decision_function(x);
  for (Eigen::Index i = 0; i < p.rows(); ++i) {
    const double mx = p.row(i).maxCoeff();
    p.row(i) = (p.row(i).array() - mx).exp();
    p.row(i) /= p.row(i).sum();
  }
  return p;
}

LinearSvm fit_linear_svm(const Eigen::MatrixXd& x, std::span<const int> labels, int n_classes,
                         const LinearSvmParams& params, std::uint64_t seed) {
  require(x.rows() > 0, ErrorCode::EmptyTrain, "no training rows");
  require(static_cast<std::size_t>(x.rows()) == labels.size(), ErrorCode::LengthMismatch,
          "feature rows and labels differ in count");
  require(params.c > 0.0 && params.epochs >= 1, ErrorCode::BadArgs, "SVM needs C > 0, epochs >= 1");
  const Eigen::Index n = x.rows();
  const Eigen::Index d = x.cols();
  const double lambda = 1.0 / (params.c * static_cast<double>(n));

  LinearSvm svm;
  svm.weights.setZero(n_classes, d);
  svm.bias.setZero(n_classes);
  std::vector<Eigen::Index> order(static_cast<std::size_t>(n));

  for (int k = 0; k < n_classes; ++k) {
    std::mt19937_64 rng(derive_seed({seed, static_cast<std::uint64_t>(k)}));
    std::iota(order.begin(), order.end(), Eigen::Index{0});
    Eigen::VectorXd w = Eigen::VectorXd::Zero(d);
    double b = 0.0;
    Eigen::VectorXd w_avg = Eigen::VectorXd::Zero(d);
    double b_avg = 0.0;
    double t = 0.0;
    for (int epoch = 0; epoch < params.epochs; ++epoch) {
      std::shuffle(order.begin(), order.end(), rng);
      const bool last = epoch + 1 == params.epochs;
      for (Eigen::Index i : order) {
        t += 1.0;
        const double eta = 1.0 / (lambda * t);
        const double y = labels[static_cast<std::size_t>(i)] == k ? 1.0 : -1.0;
        const double margin = y * (x.row(i).dot(w) + b);
        w *= 1.0 - eta * lambda;
        if (margin < 1.0) {
          // Bias steps are damped to the regularised rate so the unregularised term stays stable.
          w += (eta * y) * x.row(i).transpose();
          b += std::min(eta, 1.0) * y;
        }
        if (last) {
          w_avg += w;
          b_avg += b;
        }
      }
    }
    svm.weights.row(k) = (w_avg / static_cast<double>(n)).transpose();
    svm.bias[k] = b_avg / static_cast<double>(n);
  }
  return svm;
}

}  // namespace eegstate
