#pragma once

#include <cstdint>
#include <span>

#include <Eigen/Core>

namespace eegstate {

struct LinearSvmParams {
  double c = 1.0;
  int epochs = 20;
};

/// One-vs-rest linear SVM. Row k of `weights` scores class k against the rest.
struct LinearSvm {
  Eigen::MatrixXd weights;  // classes x features
  Eigen::VectorXd bias;     // classes

  /// n x classes raw margins.
  Eigen::MatrixXd decision_function(const Eigen::MatrixXd& x) const;
  /// Softmax of the margins; only the argmax is meaningful as a prediction.
  Eigen::MatrixXd predict_proba(const Eigen::MatrixXd& x) const;
};

/// Each binary problem minimises lambda/2 |w|^2 + mean hinge with lambda = 1/(C n) by
/// stochastic subgradient steps of size 1/(lambda t) (Pegasos); the returned weights are the
/// average of the iterates over the final epoch. The bias is unregularised.
LinearSvm fit_linear_svm(const Eigen::MatrixXd& x, std::span<const int> labels, int n_classes,
                         const LinearSvmParams& params, std::uint64_t seed);

}  // namespace eegstate
