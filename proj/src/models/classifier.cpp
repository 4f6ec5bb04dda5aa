#include "eegstate/models/classifier.hpp"

#include <cmath>
#include <limits>

#include "eegstate/features.hpp"
#include "eegstate/seed.hpp"

namespace eegstate {

namespace {

const std::map<std::string, double>& default_hyperparameters(ModelKind kind) {
  static const std::map<std::string, double> mlp{{"momentum", 0.9}, {"batch_size", 64}};
  static const std::map<std::string, double> forest{
      {"n_trees", 100}, {"max_depth", 0}, {"max_features", 15}, {"bootstrap", 1}, {"min_samples_split", 2}};
  static const std::map<std::string, double> svm{{"c", 1.0}, {"epochs", 20}};
  static const std::map<std::string, double> boost{{"n_rounds", 100}, {"max_depth", 3}, {"learning_rate", 0.1}};
  switch (kind) {
    case ModelKind::RandomForest: return forest;
    case ModelKind::Svm: return svm;
    case ModelKind::GradBoost: return boost;
    default: return mlp;
  }
}

bool is_whole(double v) { return std::isfinite(v) && std::floor(v) == v; }

nlohmann::json matrix_json(const Eigen::MatrixXd& m) {
  return {{"rows", m.rows()}, {"cols", m.cols()},
          {"data", std::vector<double>(m.data(), m.data() + m.size())}};
}

Eigen::MatrixXd matrix_from_json(const nlohmann::json& j) {
  const auto rows = j.at("rows").get<Eigen::Index>();
  const auto cols = j.at("cols").get<Eigen::Index>();
  const auto data = j.at("data").get<std::vector<double>>();
  require(static_cast<Eigen::Index>(data.size()) == rows * cols, ErrorCode::BadFormat,
          "matrix data size mismatch");
  return Eigen::Map<const Eigen::MatrixXd>(data.data(), rows, cols);
}

double log_loss(const Eigen::MatrixXd& probs, const std::vector<int>& y) {
  double loss = 0.0;
  for (std::size_t i = 0; i < y.size(); ++i) {
    loss -= std::log(std::max(probs(static_cast<Eigen::Index>(i), y[i]), 1e-300));
  }
  return loss / static_cast<double>(y.size());
}

}  // namespace

std::string_view to_string(ModelKind k) noexcept {
  switch (k) {
    case ModelKind::Dnn4Small: return "dnn4-small";
    case ModelKind::Dnn4Large: return "dnn4-large";
    case ModelKind::Dnn6: return "dnn6";
    case ModelKind::RandomForest: return "rf";
    case ModelKind::Svm: return "svm";
    case ModelKind::GradBoost: return "xgb";
  }
  return "?";
}

ModelKind parse_model_kind(std::string_view name) {
  if (name == "dnn4-small") return ModelKind::Dnn4Small;
  if (name == "dnn4-large" || name == "dnn4") return ModelKind::Dnn4Large;
  if (name == "dnn6") return ModelKind::Dnn6;
  if (name == "rf" || name == "random-forest") return ModelKind::RandomForest;
  if (name == "svm") return ModelKind::Svm;
  if (name == "xgb" || name == "gradboost") return ModelKind::GradBoost;
  throw Error(ErrorCode::BadArgs, "unknown model '" + std::string(name) +
                                      "' (valid: rf, svm, xgb, dnn4-small, dnn4-large|dnn4, dnn6)");
}

bool is_mlp(ModelKind k) noexcept {
  return k == ModelKind::Dnn4Small || k == ModelKind::Dnn4Large || k == ModelKind::Dnn6;
}

std::vector<Eigen::Index> hidden_widths(ModelKind k) {
  switch (k) {
    case ModelKind::Dnn4Small: return {64, 128, 64};
    case ModelKind::Dnn4Large: return {512, 1024, 512};
    case ModelKind::Dnn6: return {512, 512, 1024, 2048, 1024};
    default: break;
  }
  throw Error(ErrorCode::BadArgs, std::string(to_string(k)) + " is not a neural network");
}

ClassifierSpec ClassifierSpec::defaults(ModelKind kind, std::uint64_t seed) {
  return ClassifierSpec{kind, default_hyperparameters(kind), seed};
}

void ClassifierSpec::validate() const {
  const auto& allowed = default_hyperparameters(kind);
  for (const auto& [key, value] : hyperparameters) {
    require(allowed.count(key) > 0, ErrorCode::BadArgs,
            "unknown hyperparameter '" + key + "' for " + std::string(to_string(kind)));
    require(std::isfinite(value), ErrorCode::BadArgs, "hyperparameter '" + key + "' is not finite");
  }
  const auto positive_int = [&](const char* key) {
    const double v = get(key);
    require(is_whole(v) && v >= 1, ErrorCode::BadArgs, std::string(key) + " must be a positive integer");
  };
  const auto non_negative_int = [&](const char* key) {
    const double v = get(key);
    require(is_whole(v) && v >= 0, ErrorCode::BadArgs, std::string(key) + " must be a non-negative integer");
  };
  switch (kind) {
    case ModelKind::RandomForest:
      positive_int("n_trees");
      non_negative_int("max_depth");
      non_negative_int("max_features");
      positive_int("min_samples_split");
      break;
    case ModelKind::Svm:
      require(get("c") > 0.0, ErrorCode::BadArgs, "c must be positive");
      positive_int("epochs");
      break;
    case ModelKind::GradBoost:
      positive_int("n_rounds");
      positive_int("max_depth");
      require(get("learning_rate") > 0.0, ErrorCode::BadArgs, "learning_rate must be positive");
      break;
    default:
      require(get("momentum") >= 0.0 && get("momentum") < 1.0, ErrorCode::BadArgs,
              "momentum must be in [0, 1)");
      positive_int("batch_size");
      break;
  }
}

double ClassifierSpec::get(const std::string& key) const {
  if (const auto it = hyperparameters.find(key); it != hyperparameters.end()) return it->second;
  const auto& defaults = default_hyperparameters(kind);
  const auto it = defaults.find(key);
  require(it != defaults.end(), ErrorCode::BadArgs, "unknown hyperparameter '" + key + "'");
  return it->second;
}

ClassifierSpec ClassifierSpec::with(const std::string& key, double value) const {
  ClassifierSpec out = *this;
  out.hyperparameters[key] = value;
  out.validate();
  return out;
}

void to_json(nlohmann::json& j, const ClassifierSpec& s) {
  j = nlohmann::json{{"kind", to_string(s.kind)}, {"hyperparameters", s.hyperparameters}, {"seed", s.seed}};
}

void from_json(const nlohmann::json& j, ClassifierSpec& s) {
  s.kind = parse_model_kind(j.at("kind").get<std::string>());
  s.hyperparameters = j.at("hyperparameters").get<std::map<std::string, double>>();
  s.seed = j.at("seed").get<std::uint64_t>();
  s.validate();
}

Mlp make_network(const ClassifierSpec& spec, Activation activation) {
  std::vector<Eigen::Index> widths{kFeatureDim};
  for (Eigen::Index w : hidden_widths(spec.kind)) widths.push_back(w);
  widths.push_back(kNumStates);
  Mlp net = make_mlp<double>(widths, activation, spec.seed);
  if (spec.kind == ModelKind::Dnn6) {
    net.dropout_after = 3;  // the 2048-wide hidden layer
    net.dropout_rate = kDnn6DropoutRate;
  }
  net.validate();
  return net;
}

void to_json(nlohmann::json& j, const TrainedModel& m) {
  nlohmann::json state;
  std::visit(
      [&](const auto& s) {
        using T = std::decay_t<decltype(s)>;
        if constexpr (std::is_same_v<T, Mlp>) {
          nlohmann::json layers = nlohmann::json::array();
          for (const auto& l : s.layers) {
            layers.push_back({{"weights", matrix_json(l.weights)},
                              {"bias", std::vector<double>(l.bias.data(), l.bias.data() + l.bias.size())}});
          }
          state = {{"type", "mlp"},
                   {"activation", s.activation == Activation::Relu ? "relu" : "tanh"},
                   {"dropout_after", s.dropout_after ? nlohmann::json(*s.dropout_after) : nlohmann::json()},
                   {"dropout_rate", s.dropout_rate},
                   {"layers", layers}};
        } else if constexpr (std::is_same_v<T, RandomForest>) {
          state = {{"type", "random_forest"}, {"trees", s.trees}};
        } else if constexpr (std::is_same_v<T, LinearSvm>) {
          state = {{"type", "linear_svm"},
                   {"weights", matrix_json(s.weights)},
                   {"bias", std::vector<double>(s.bias.data(), s.bias.data() + s.bias.size())}};
        } else if constexpr (std::is_same_v<T, GradientBoosting>) {
          state = {{"type", "gradient_boosting"}, {"learning_rate", s.learning_rate}, {"rounds", s.rounds}};
        }
      },
      m.state);
  j = nlohmann::json{{"format_version", kModelFormatVersion},
                     {"spec", m.spec},
                     {"seed", m.spec.seed},
                     {"best_epoch", m.best_epoch},
                     {"history", m.history.epochs},
                     {"state", state}};
}

void from_json(const nlohmann::json& j, TrainedModel& m) {
  require(j.value("format_version", 0) == kModelFormatVersion, ErrorCode::BadFormat,
          "unsupported model bundle version");
  m.spec = j.at("spec").get<ClassifierSpec>();
  m.best_epoch = j.at("best_epoch").get<int>();
  m.history.epochs = j.at("history").get<std::vector<EpochRecord>>();
  m.history.best_epoch = m.best_epoch;
  const auto& s = j.at("state");
  if (s.is_null()) {
    m.state = std::monostate{};
    return;
  }
  const auto type = s.at("type").get<std::string>();
  if (type == "mlp") {
    Mlp net;
    net.activation = s.at("activation").get<std::string>() == "relu" ? Activation::Relu : Activation::Tanh;
    if (!s.at("dropout_after").is_null()) net.dropout_after = s.at("dropout_after").get<std::size_t>();
    net.dropout_rate = s.at("dropout_rate").get<double>();
    for (const auto& l : s.at("layers")) {
      const auto bias = l.at("bias").get<std::vector<double>>();
      net.layers.push_back({matrix_from_json(l.at("weights")),
                            Eigen::Map<const Eigen::VectorXd>(bias.data(), static_cast<Eigen::Index>(bias.size()))});
    }
    net.validate();
    m.state = std::move(net);
  } else if (type == "random_forest") {
    m.state = RandomForest{s.at("trees").get<std::vector<DecisionTree>>()};
  } else if (type == "linear_svm") {
    const auto bias = s.at("bias").get<std::vector<double>>();
    m.state = LinearSvm{matrix_from_json(s.at("weights")),
                        Eigen::Map<const Eigen::VectorXd>(bias.data(), static_cast<Eigen::Index>(bias.size()))};
  } else if (type == "gradient_boosting") {
    GradientBoosting gb;
    gb.learning_rate = s.at("learning_rate").get<double>();
    gb.rounds = s.at("rounds").get<std::vector<std::array<DecisionTree, kTreeClasses>>>();
    m.state = std::move(gb);
  } else {
    throw Error(ErrorCode::BadFormat, "unknown model state type '" + type + "'");
  }
}

TrainedModel fit(const ClassifierSpec& spec, const LabeledSet& train, const LabeledSet& validation,
                 const TrainConfig& config) {
  spec.validate();
  require(!train.empty(), ErrorCode::EmptyTrain, "training set is empty");
  require(static_cast<std::size_t>(train.size()) == train.y.size(), ErrorCode::LengthMismatch,
          "training rows and labels differ in count");

  TrainedModel model;
  model.spec = spec;
  if (is_mlp(spec.kind)) {
    require(!validation.empty(), ErrorCode::MissingValidation,
            std::string(to_string(spec.kind)) + " needs a validation set");
    const OptimizerConfig optimizer{spec.get("momentum"), static_cast<int>(spec.get("batch_size"))};
    auto result = train_loop(make_network(spec), train, validation, config, optimizer,
                             derive_seed({spec.seed, 0x7a11ULL}));
    model.state = std::move(result.model);
    model.history = std::move(result.history);
    model.best_epoch = model.history.best_epoch;
    return model;
  }

  switch (spec.kind) {
    case ModelKind::RandomForest: {
      RandomForestParams p;
      p.n_trees = static_cast<int>(spec.get("n_trees"));
      p.tree.max_depth = static_cast<int>(spec.get("max_depth"));
      p.tree.max_features = static_cast<int>(spec.get("max_features"));
      p.tree.min_samples_split = static_cast<int>(spec.get("min_samples_split"));
      p.bootstrap = spec.get("bootstrap") != 0.0;
      model.state = fit_random_forest(train.x, train.y, p, spec.seed);
      break;
    }
    case ModelKind::Svm: {
      LinearSvmParams p{spec.get("c"), static_cast<int>(spec.get("epochs"))};
      model.state = fit_linear_svm(train.x, train.y, kNumStates, p, spec.seed);
      break;
    }
    case ModelKind::GradBoost: {
      GradientBoostingParams p{static_cast<int>(spec.get("n_rounds")), static_cast<int>(spec.get("max_depth")),
                               spec.get("learning_rate")};
      model.state = fit_gradient_boosting(train.x, train.y, p, spec.seed);
      break;
    }
    default: break;
  }

  // Single-pass learners get one summary row so every fitted model carries a history.
  EpochRecord rec;
  rec.epoch = 1;
  rec.lr = 0.0;
  const auto train_pred = predict(model, train.x);
  rec.train_loss = log_loss(train_pred.probabilities, train.y);
  rec.train_accuracy = accuracy(train_pred.labels, train.y);
  rec.validation_loss = std::numeric_limits<double>::quiet_NaN();
  rec.validation_accuracy = std::numeric_limits<double>::quiet_NaN();
  if (!validation.empty()) {
    const auto val_pred = predict(model, validation.x);
    rec.validation_loss = log_loss(val_pred.probabilities, validation.y);
    rec.validation_accuracy = accuracy(val_pred.labels, validation.y);
  }
  rec.events = kImproved;
  model.history.epochs.push_back(rec);
  model.history.best_epoch = 1;
  model.best_epoch = 1;
  return model;
}

Prediction predict(const TrainedModel& model, const Eigen::MatrixXd& x) {
  require(model.fitted(), ErrorCode::NotFitted, "model has not been fitted");
  Prediction out;
  std::visit(
      [&](const auto& s) {
        using T = std::decay_t<decltype(s)>;
        if constexpr (std::is_same_v<T, Mlp>) {
          out.probabilities = mlp_forward_batch(s, x.transpose()).transpose();
        } else if constexpr (!std::is_same_v<T, std::monostate>) {
          out.probabilities = s.predict_proba(x);
        }
      },
      model.state);
  // SVM labels come from raw margins; the softmax view preserves their order.
  out.labels.reserve(static_cast<std::size_t>(x.rows()));
  for (Eigen::Index i = 0; i < out.probabilities.rows(); ++i) {
    out.labels.push_back(argmax_label(out.probabilities.row(i)));
  }
  return out;
}

double accuracy(const std::vector<int>& predictions, const std::vector<int>& truth) {
  require(predictions.size() == truth.size(), ErrorCode::LengthMismatch,
          "prediction and truth lengths differ");
  require(!truth.empty(), ErrorCode::Empty, "accuracy of an empty set");
  std::size_t hits = 0;
  for (std::size_t i = 0; i < truth.size(); ++i) hits += predictions[i] == truth[i];
  return static_cast<double>(hits) / static_cast<double>(truth.size());
}

}  // namespace eegstate
