#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include <Eigen/Core>
#include <json.hpp>

#include "eegstate/models/mlp.hpp"
#include "eegstate/models/svm.hpp"
#include "eegstate/models/trees.hpp"
#include "eegstate/training.hpp"

namespace eegstate {

enum class ModelKind { Dnn4Small, Dnn4Large, Dnn6, RandomForest, Svm, GradBoost };

inline constexpr std::array<ModelKind, 6> kAllModelKinds = {
    ModelKind::RandomForest, ModelKind::Svm,       ModelKind::GradBoost,
    ModelKind::Dnn4Small,    ModelKind::Dnn4Large, ModelKind::Dnn6};

/// CLI names: dnn4-small, dnn4-large (alias dnn4), dnn6, rf, svm, xgb.
std::string_view to_string(ModelKind k) noexcept;
ModelKind parse_model_kind(std::string_view name);
bool is_mlp(ModelKind k) noexcept;

/// Hidden-layer widths of the MLP kinds.
std::vector<Eigen::Index> hidden_widths(ModelKind k);

inline constexpr double kDnn6DropoutRate = 0.5;

struct ClassifierSpec {
  ModelKind kind = ModelKind::RandomForest;
  std::map<std::string, double> hyperparameters;
  std::uint64_t seed = 0;

  /// Complete default set for `kind`.
  static ClassifierSpec defaults(ModelKind kind, std::uint64_t seed = 0);

  /// Throws BadArgs on an unknown key or an out-of-range value.
  void validate() const;
  double get(const std::string& key) const;
  ClassifierSpec with(const std::string& key, double value) const;
};

void to_json(nlohmann::json& j, const ClassifierSpec& s);
void from_json(const nlohmann::json& j, ClassifierSpec& s);

/// Builds the untrained network for an MLP kind (252 -> hidden -> 3).
Mlp make_network(const ClassifierSpec& spec, Activation activation = Activation::Relu);

using FittedState = std::variant<std::monostate, Mlp, RandomForest, LinearSvm, GradientBoosting>;

struct TrainedModel {
  ClassifierSpec spec;
  FittedState state;
  History history;
  int best_epoch = 0;

  bool fitted() const noexcept { return !std::holds_alternative<std::monostate>(state); }
};

inline constexpr int kModelFormatVersion = 1;
void to_json(nlohmann::json& j, const TrainedModel& m);
void from_json(const nlohmann::json& j, TrainedModel& m);

/// MLP kinds train under the scheduler/early-stopping loop and need a validation set. Tree and
/// SVM kinds fit in one pass; validation only feeds the single history row.
TrainedModel fit(const ClassifierSpec& spec, const LabeledSet& train, const LabeledSet& validation,
                 const TrainConfig& config = {});

struct Prediction {
  std::vector<int> labels;
  Eigen::MatrixXd probabilities;  // n x 3
};

/// Index of the largest entry; ties go to the lower index.
template <typename Derived>
int argmax_label(const Eigen::DenseBase<Derived>& scores) {
  Eigen::Index best = 0;
  for (Eigen::Index c = 1; c < scores.size(); ++c) {
    if (scores[c] > scores[best]) best = c;
  }
  return static_cast<int>(best);
}

Prediction predict(const TrainedModel& model, const Eigen::MatrixXd& x);

double accuracy(const std::vector<int>& predictions, const std::vector<int>& truth);

}  // namespace eegstate
