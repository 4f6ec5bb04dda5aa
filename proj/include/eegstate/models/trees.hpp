#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <random>
#include <span>
#include <vector>

#include <Eigen/Core>
#include <json.hpp>

namespace eegstate {

inline constexpr int kTreeClasses = 3;

/// Flat binary tree. Internal nodes route x[feature] <= threshold to `left`. Thresholds are
/// always observed training values, so routing is unchanged by any strictly increasing
/// transform applied to a feature at both fit and predict time.
struct DecisionTree {
  struct Node {
    int feature = -1;  // -1 marks a leaf
    double threshold = 0.0;
    int left = -1;
    int right = -1;
    std::array<double, kTreeClasses> value{};  // class distribution, or value[0] for regression
  };
  std::vector<Node> nodes;

  template <typename Row>
  const Node& leaf(const Row& x) const {
    int i = 0;
    while (nodes[static_cast<std::size_t>(i)].feature >= 0) {
      const auto& n = nodes[static_cast<std::size_t>(i)];
      i = x[n.feature] <= n.threshold ? n.left : n.right;
    }
    return nodes[static_cast<std::size_t>(i)];
  }

  int depth() const;
};

struct TreeParams {
  int max_depth = 0;          // 0 = unlimited
  int min_samples_split = 2;
  int max_features = 0;       // 0 = all features
};

/// CART classification tree, Gini impurity. `samples` may contain repeats (bootstrap).
DecisionTree grow_classification_tree(const Eigen::MatrixXd& x, std::span<const int> labels,
                                      std::vector<std::size_t> samples, const TreeParams& params,
                                      std::mt19937_64& rng);

/// Least-squares regression tree on `targets`; leaf values come from leaf_value(samples).
DecisionTree grow_regression_tree(
    const Eigen::MatrixXd& x, std::span<const double> targets, std::vector<std::size_t> samples,
    const TreeParams& params, std::mt19937_64& rng,
    const std::function<double(std::span<const std::size_t>)>& leaf_value);

struct RandomForestParams {
  int n_trees = 100;
  TreeParams tree{0, 2, 15};
  bool bootstrap = true;
};

struct RandomForest {
  std::vector<DecisionTree> trees;

  /// n x 3 mean of per-tree leaf distributions.
  Eigen::MatrixXd predict_proba(const Eigen::MatrixXd& x) const;
};

RandomForest fit_random_forest(const Eigen::MatrixXd& x, std::span<const int> labels,
                               const RandomForestParams& params, std::uint64_t seed);

struct GradientBoostingParams {
  int n_rounds = 100;
  int max_depth = 3;
  double learning_rate = 0.1;
};

/// Multi-class gradient boosting on the softmax log-loss, one regression tree per class per
/// round with Newton leaf values.
struct GradientBoosting {
  double learning_rate = 0.1;
  std::vector<std::array<DecisionTree, kTreeClasses>> rounds;

  Eigen::MatrixXd decision_function(const Eigen::MatrixXd& x) const;
  Eigen::MatrixXd predict_proba(const Eigen::MatrixXd& x) const;
};

GradientBoosting fit_gradient_boosting(const Eigen::MatrixXd& x, std::span<const int> labels,
                                       const GradientBoostingParams& params, std::uint64_t seed);

void to_json(nlohmann::json& j, const DecisionTree& t);
void from_json(const nlohmann::json& j, DecisionTree& t);

}  // namespace eegstate
