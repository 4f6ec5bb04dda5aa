#include "eegstate/models/trees.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "eegstate/error.hpp"
#include "eegstate/seed.hpp"

namespace eegstate {

namespace {

constexpr double kMinGain = 1e-12;

struct GiniStats {
  std::array<double, kTreeClasses> counts{};
  double n = 0.0;

  void add(int label, double w) {
    counts[static_cast<std::size_t>(label)] += w;
    n += w;
  }
  // n * gini
  double impurity_sum() const {
    if (n <= 0.0) return 0.0;
    double sq = 0.0;
    for (double c : counts) sq += c * c;
    return n - sq / n;
  }
};

struct GiniCriterion {
  using Stats = GiniStats;
  std::span<const int> labels;
  void add(Stats& s, std::size_t i, double w) const { s.add(labels[i], w); }
};

struct SquaredStats {
  double sum = 0.0;
  double sumsq = 0.0;
  double n = 0.0;

  // n * variance
  double impurity_sum() const { return n > 0.0 ? std::max(0.0, sumsq - sum * sum / n) : 0.0; }
};

struct SquaredCriterion {
  using Stats = SquaredStats;
  std::span<const double> targets;
  void add(Stats& s, std::size_t i, double w) const {
    s.sum += w * targets[i];
    s.sumsq += w * targets[i] * targets[i];
    s.n += w;
  }
};

struct Entry {
  double value;
  std::size_t sample;
  double weight;
};

struct Split {
  int feature = -1;
  double threshold = 0.0;
  double gain = 0.0;
};

// Grows a tree breadth-first over an explicit work list. When `presorted` is non-empty it holds,
// per feature, all sample ids ordered by (value, id); otherwise each node sorts its own samples.
template <typename Criterion>
class TreeGrower {
 public:
  TreeGrower(const Eigen::MatrixXd& x, Criterion crit, const TreeParams& params,
             std::mt19937_64& rng, const std::vector<std::vector<std::size_t>>& presorted)
      : x_(x), crit_(crit), params_(params), rng_(rng), presorted_(presorted),
        multiplicity_(static_cast<std::size_t>(x.rows()), 0.0) {}

  template <typename LeafFn>
  DecisionTree grow(std::vector<std::size_t> samples, LeafFn&& make_leaf) {
    DecisionTree tree;
    struct Task {
      int node;
      std::vector<std::size_t> samples;
      int depth;
    };
    std::vector<Task> queue;
    tree.nodes.emplace_back();
    queue.push_back({0, std::move(samples), 0});
    for (std::size_t q = 0; q < queue.size(); ++q) {
      Task task = std::move(queue[q]);
      auto& node = tree.nodes[static_cast<std::size_t>(task.node)];
      typename Criterion::Stats total;
      for (std::size_t i : task.samples) crit_.add(total, i, 1.0);

      const bool depth_capped = params_.max_depth > 0 && task.depth >= params_.max_depth;
      const bool too_small = static_cast<int>(task.samples.size()) < params_.min_samples_split;
      Split best;
      if (!depth_capped && !too_small && total.impurity_sum() > kMinGain) {
        best = find_split(task.samples, total);
      }
      if (best.feature < 0) {
        make_leaf(node, std::span<const std::size_t>(task.samples));
        continue;
      }
      node.feature = best.feature;
      node.threshold = best.threshold;
      std::vector<std::size_t> left;
      std::vector<std::size_t> right;
      for (std::size_t i : task.samples) {
        (x_(static_cast<Eigen::Index>(i), best.feature) <= best.threshold ? left : right).push_back(i);
      }
      const int left_id = static_cast<int>(tree.nodes.size());
      tree.nodes.emplace_back();
      tree.nodes.emplace_back();
      tree.nodes[static_cast<std::size_t>(task.node)].left = left_id;
      tree.nodes[static_cast<std::size_t>(task.node)].right = left_id + 1;
      queue.push_back({left_id, std::move(left), task.depth + 1});
      queue.push_back({left_id + 1, std::move(right), task.depth + 1});
    }
    return tree;
  }

 private:
  std::vector<int> candidate_features() {
    const int d = static_cast<int>(x_.cols());
    std::vector<int> features(static_cast<std::size_t>(d));
    std::iota(features.begin(), features.end(), 0);
    const int k = params_.max_features > 0 ? std::min(params_.max_features, d) : d;
    if (k < d) {
      // Partial Fisher-Yates: the first k entries become a uniform sample without replacement.
      for (int i = 0; i < k; ++i) {
        std::uniform_int_distribution<int> pick(i, d - 1);
        std::swap(features[static_cast<std::size_t>(i)], features[static_cast<std::size_t>(pick(rng_))]);
      }
      features.resize(static_cast<std::size_t>(k));
    }
    return features;
  }

  void sorted_entries(int feature, const std::vector<std::size_t>& samples, std::vector<Entry>& out) {
    out.clear();
    const auto n = static_cast<double>(samples.size());
    const bool use_presorted =
        !presorted_.empty() && n * std::log2(std::max(2.0, n)) >= static_cast<double>(x_.rows());
    if (use_presorted) {
      for (std::size_t i : samples) multiplicity_[i] += 1.0;
      for (std::size_t i : presorted_[static_cast<std::size_t>(feature)]) {
        if (multiplicity_[i] > 0.0) out.push_back({x_(static_cast<Eigen::Index>(i), feature), i, multiplicity_[i]});
      }
      for (std::size_t i : samples) multiplicity_[i] = 0.0;
      return;
    }
    for (std::size_t i : samples) out.push_back({x_(static_cast<Eigen::Index>(i), feature), i, 1.0});
    std::sort(out.begin(), out.end(), [](const Entry& a, const Entry& b) {
      return a.value < b.value || (a.value == b.value && a.sample < b.sample);
    });
  }

  Split find_split(const std::vector<std::size_t>& samples, const typename Criterion::Stats& total) {
    Split best;
    const double parent = total.impurity_sum();
    std::vector<Entry> entries;
    for (int feature : candidate_features()) {
      sorted_entries(feature, samples, entries);
      typename Criterion::Stats left;
      typename Criterion::Stats right = total;
      for (std::size_t p = 0; p + 1 < entries.size(); ++p) {
        crit_.add(left, entries[p].sample, entries[p].weight);
        crit_.add(right, entries[p].sample, -entries[p].weight);
        if (entries[p].value == entries[p + 1].value) continue;
        const double gain = parent - left.impurity_sum() - right.impurity_sum();
        if (gain > kMinGain * std::max(1.0, parent) && gain > best.gain) {
          best = {feature, entries[p].value, gain};
        }
      }
    }
    return best;
  }

  const Eigen::MatrixXd& x_;
  Criterion crit_;
  TreeParams params_;
  std::mt19937_64& rng_;
  const std::vector<std::vector<std::size_t>>& presorted_;
  std::vector<double> multiplicity_;
};

std::vector<std::vector<std::size_t>> presort(const Eigen::MatrixXd& x) {
  std::vector<std::vector<std::size_t>> out(static_cast<std::size_t>(x.cols()));
  for (Eigen::Index j = 0; j < x.cols(); ++j) {
    auto& order = out[static_cast<std::size_t>(j)];
    order.resize(static_cast<std::size_t>(x.rows()));
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
      const double va = x(static_cast<Eigen::Index>(a), j);
      const double vb = x(static_cast<Eigen::Index>(b), j);
      return va < vb || (va == vb && a < b);
    });
  }
  return out;
}

void check_fit_inputs(const Eigen::MatrixXd& x, std::span<const int> labels) {
  require(x.rows() > 0, ErrorCode::EmptyTrain, "no training rows");
  require(static_cast<std::size_t>(x.rows()) == labels.size(), ErrorCode::LengthMismatch,
          "feature rows and labels differ in count");
  for (int y : labels) {
    require(y >= 0 && y < kTreeClasses, ErrorCode::BadArgs, "label out of range");
  }
}

void softmax_rows(Eigen::MatrixXd& m) {
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    const double mx = m.row(i).maxCoeff();
    m.row(i) = (m.row(i).array() - mx).exp();
    m.row(i) /= m.row(i).sum();
  }
}

}  // namespace

int DecisionTree::depth() const {
  if (nodes.empty()) return 0;
  std::vector<int> d(nodes.size(), 0);
  int best = 0;
  for (std::size_t i = 0; i < nodes.size(); ++i) {
    best = std::max(best, d[i]);
    if (nodes[i].feature >= 0) {
      d[static_cast<std::size_t>(nodes[i].left)] = d[i] + 1;
      d[static_cast<std::size_t>(nodes[i].right)] = d[i] + 1;
    }
  }
  return best;
}

DecisionTree grow_classification_tree(const Eigen::MatrixXd& x, std::span<const int> labels,
                                      std::vector<std::size_t> samples, const TreeParams& params,
                                      std::mt19937_64& rng) {
  static const std::vector<std::vector<std::size_t>> none;
  TreeGrower<GiniCriterion> grower(x, GiniCriterion{labels}, params, rng, none);
  return grower.grow(std::move(samples), [&](DecisionTree::Node& node, std::span<const std::size_t> s) {
    node.value.fill(0.0);
    for (std::size_t i : s) node.value[static_cast<std::size_t>(labels[i])] += 1.0;
    for (double& v : node.value) v /= static_cast<double>(s.size());
  });
}

DecisionTree grow_regression_tree(
    const Eigen::MatrixXd& x, std::span<const double> targets, std::vector<std::size_t> samples,
    const TreeParams& params, std::mt19937_64& rng,
    const std::function<double(std::span<const std::size_t>)>& leaf_value) {
  const auto presorted = presort(x);
  TreeGrower<SquaredCriterion> grower(x, SquaredCriterion{targets}, params, rng, presorted);
  return grower.grow(std::move(samples), [&](DecisionTree::Node& node, std::span<const std::size_t> s) {
    node.value.fill(0.0);
    node.value[0] = leaf_value(s);
  });
}

Eigen::MatrixXd RandomForest::predict_proba(const Eigen::MatrixXd& x) const {
  require(!trees.empty(), ErrorCode::NotFitted, "random forest has no trees");
  Eigen::MatrixXd out = Eigen::MatrixXd::Zero(x.rows(), kTreeClasses);
  for (Eigen::Index i = 0; i < x.rows(); ++i) {
    const auto row = x.row(i);
    for (const auto& t : trees) {
      const auto& leaf = t.leaf(row);
      for (int c = 0; c < kTreeClasses; ++c) out(i, c) += leaf.value[static_cast<std::size_t>(c)];
    }
  }
  out /= static_cast<double>(trees.size());
  return out;
}

RandomForest fit_random_forest(const Eigen::MatrixXd& x, std::span<const int> labels,
                               const RandomForestParams& params, std::uint64_t seed) {
  check_fit_inputs(x, labels);
  require(params.n_trees >= 1, ErrorCode::BadArgs, "need at least one tree");
  RandomForest forest;
  forest.trees.reserve(static_cast<std::size_t>(params.n_trees));
  const auto n = static_cast<std::size_t>(x.rows());
  for (int t = 0; t < params.n_trees; ++t) {
    std::mt19937_64 rng(derive_seed({seed, static_cast<std::uint64_t>(t)}));
    std::vector<std::size_t> samples(n);
    if (params.bootstrap) {
      std::uniform_int_distribution<std::size_t> pick(0, n - 1);
      for (auto& s : samples) s = pick(rng);
    } else {
      std::iota(samples.begin(), samples.end(), std::size_t{0});
    }
    forest.trees.push_back(grow_classification_tree(x, labels, std::move(samples), params.tree, rng));
  }
  return forest;
}

Eigen::MatrixXd GradientBoosting::decision_function(const Eigen::MatrixXd& x) const {
  require(!rounds.empty(), ErrorCode::NotFitted, "boosting model has no rounds");
  Eigen::MatrixXd f = Eigen::MatrixXd::Zero(x.rows(), kTreeClasses);
  for (Eigen::Index i = 0; i < x.rows(); ++i) {
    const auto row = x.row(i);
    for (const auto& round : rounds) {
      for (int k = 0; k < kTreeClasses; ++k) {
        f(i, k) += learning_rate * round[static_cast<std::size_t>(k)].leaf(row).value[0];
      }
    }
  }
  return f;
}

Eigen::MatrixXd GradientBoosting::predict_proba(const Eigen::MatrixXd& x) const {
  Eigen::MatrixXd p = decision_function(x);
  softmax_rows(p);
  return p;
}

GradientBoosting fit_gradient_boosting(const Eigen::MatrixXd& x, std::span<const int> labels,
                                       const GradientBoostingParams& params, std::uint64_t seed) {
  check_fit_inputs(x, labels);
  require(params.n_rounds >= 1 && params.max_depth >= 1 && params.learning_rate > 0.0,
          ErrorCode::BadArgs, "boosting needs rounds >= 1, depth >= 1, learning rate > 0");
  const Eigen::Index n = x.rows();
  GradientBoosting model;
  model.learning_rate = params.learning_rate;
  std::mt19937_64 rng(seed);
  const TreeParams tree_params{params.max_depth, 2, 0};
  const auto presorted = presort(x);

  Eigen::MatrixXd f = Eigen::MatrixXd::Zero(n, kTreeClasses);
  std::vector<double> residual(static_cast<std::size_t>(n));
  std::vector<std::size_t> all(static_cast<std::size_t>(n));
  std::iota(all.begin(), all.end(), std::size_t{0});
  constexpr double kClassFactor = static_cast<double>(kTreeClasses - 1) / kTreeClasses;

  for (int r = 0; r < params.n_rounds; ++r) {
    Eigen::MatrixXd p = f;
    softmax_rows(p);
    std::array<DecisionTree, kTreeClasses> round;
    for (int k = 0; k < kTreeClasses; ++k) {
      for (Eigen::Index i = 0; i < n; ++i) {
        residual[static_cast<std::size_t>(i)] = (labels[static_cast<std::size_t>(i)] == k ? 1.0 : 0.0) - p(i, k);
      }
      const auto leaf_value = [&](std::span<const std::size_t> s) {
        double num = 0.0;
        double den = 0.0;
        for (std::size_t i : s) {
          const double ri = residual[i];
          num += ri;
          den += std::abs(ri) * (1.0 - std::abs(ri));
        }
        return kClassFactor * num / std::max(den, 1e-12);
      };
      TreeGrower<SquaredCriterion> grower(x, SquaredCriterion{residual}, tree_params, rng, presorted);
      round[static_cast<std::size_t>(k)] =
          grower.grow(all, [&](DecisionTree::Node& node, std::span<const std::size_t> s) {
            node.value.fill(0.0);
            node.value[0] = leaf_value(s);
          });
    }
    for (Eigen::Index i = 0; i < n; ++i) {
      const auto row = x.row(i);
      for (int k = 0; k < kTreeClasses; ++k) {
        f(i, k) += params.learning_rate * round[static_cast<std::size_t>(k)].leaf(row).value[0];
      }
    }
    model.rounds.push_back(std::move(round));
  }
  return model;
}

void to_json(nlohmann::json& j, const DecisionTree& t) {
  nlohmann::json feature = nlohmann::json::array();
  nlohmann::json threshold = nlohmann::json::array();
  nlohmann::json left = nlohmann::json::array();
  nlohmann::json right = nlohmann::json::array();
  nlohmann::json value = nlohmann::json::array();
  for (const auto& n : t.nodes) {
    feature.push_back(n.feature);
    threshold.push_back(n.threshold);
    left.push_back(n.left);
    right.push_back(n.right);
    value.push_back(n.value);
  }
  j = nlohmann::json{{"feature", feature}, {"threshold", threshold}, {"left", left},
                     {"right", right}, {"value", value}};
}

void from_json(const nlohmann::json& j, DecisionTree& t) {
  const auto feature = j.at("feature").get<std::vector<int>>();
  const auto threshold = j.at("threshold").get<std::vector<double>>();
  const auto left = j.at("left").get<std::vector<int>>();
  const auto right = j.at("right").get<std::vector<int>>();
  const auto value = j.at("value").get<std::vector<std::array<double, kTreeClasses>>>();
  require(threshold.size() == feature.size() && left.size() == feature.size() &&
              right.size() == feature.size() && value.size() == feature.size(),
          ErrorCode::BadFormat, "tree arrays differ in length");
  t.nodes.resize(feature.size());
  for (std::size_t i = 0; i < feature.size(); ++i) {
    t.nodes[i] = {feature[i], threshold[i], left[i], right[i], value[i]};
  }
}

}  // namespace eegstate
