#include "eegstate/training.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <numeric>
#include <random>

namespace eegstate {

LabeledSet gather(const Eigen::MatrixXd& features, const std::vector<int>& labels,
                  const std::vector<std::size_t>& rows) {
  LabeledSet out;
  out.x.resize(static_cast<Eigen::Index>(rows.size()), features.cols());
  out.y.reserve(rows.size());
  for (std::size_t k = 0; k < rows.size(); ++k) {
    out.x.row(static_cast<Eigen::Index>(k)) = features.row(static_cast<Eigen::Index>(rows[k]));
    out.y.push_back(labels.at(rows[k]));
  }
  return out;
}

void TrainConfig::validate() const {
  // A zero rate is accepted: it freezes the weights, which is useful for tracing the schedule.
  require(std::isfinite(initial_lr) && initial_lr >= 0.0, ErrorCode::BadArgs,
          "initial learning rate must be finite and >= 0");
  require(lr_halving_patience >= 1 && early_stop_patience >= 1, ErrorCode::BadArgs,
          "patience values must be >= 1");
  require(max_epochs >= 1, ErrorCode::BadArgs, "max_epochs must be >= 1");
  require(min_improvement_delta >= 0.0, ErrorCode::BadArgs, "improvement delta must be >= 0");
}

PlateauScheduler::PlateauScheduler(double initial_lr, int patience, double delta)
    : lr_(initial_lr), patience_(patience), delta_(delta) {
  require(patience >= 1, ErrorCode::BadArgs, "scheduler patience must be >= 1");
}

bool PlateauScheduler::step(double validation_accuracy) {
  if (validation_accuracy > best_ + delta_) {
    best_ = validation_accuracy;
    counter_ = 0;
    return false;
  }
  if (++counter_ < patience_) return false;
  lr_ /= 2.0;
  ++halvings_;
  counter_ = 0;
  return true;
}

EarlyStopping::EarlyStopping(int patience, double delta) : patience_(patience), delta_(delta) {
  require(patience >= 1, ErrorCode::BadArgs, "early-stopping patience must be >= 1");
}

StopDecision EarlyStopping::check(int epoch, double validation_accuracy) {
  StopDecision d;
  if (validation_accuracy > best_ + delta_) {
    best_ = validation_accuracy;
    best_epoch_ = epoch;
    counter_ = 0;
    d.improved = true;
  } else {
    ++counter_;
  }
  d.stop = counter_ >= patience_;
  d.best_epoch = best_epoch_;
  return d;
}

std::string EpochRecord::events_string() const {
  std::string s;
  const auto add = [&](std::string_view name) {
    if (!s.empty()) s += '|';
    s += name;
  };
  if (events & kImproved) add("Improved");
  if (events & kHalved) add("Halved");
  if (events & kStopped) add("Stopped");
  return s;
}

namespace {

nlohmann::json number_or_null(double v) { return std::isfinite(v) ? nlohmann::json(v) : nlohmann::json(); }
double number_or_nan(const nlohmann::json& j) {
  return j.is_null() ? std::numeric_limits<double>::quiet_NaN() : j.get<double>();
}

void append_number(std::string& s, double v) {
  std::array<char, 32> buf{};
  const auto [ptr, ec] = std::to_chars(buf.data(), buf.data() + buf.size(), v);
  s.append(buf.data(), ptr);
}

}  // namespace

void to_json(nlohmann::json& j, const EpochRecord& r) {
  j = nlohmann::json{{"epoch", r.epoch},
                     {"lr", r.lr},
                     {"train_loss", number_or_null(r.train_loss)},
                     {"train_acc", number_or_null(r.train_accuracy)},
                     {"val_loss", number_or_null(r.validation_loss)},
                     {"val_acc", number_or_null(r.validation_accuracy)},
                     {"events", r.events}};
}

void from_json(const nlohmann::json& j, EpochRecord& r) {
  r.epoch = j.at("epoch").get<int>();
  r.lr = j.at("lr").get<double>();
  r.train_loss = number_or_nan(j.at("train_loss"));
  r.train_accuracy = number_or_nan(j.at("train_acc"));
  r.validation_loss = number_or_nan(j.at("val_loss"));
  r.validation_accuracy = number_or_nan(j.at("val_acc"));
  r.events = j.at("events").get<unsigned>();
}

void write_history_csv(std::ostream& out, const History& history) {
  out << "epoch,lr,train_loss,train_acc,val_loss,val_acc,events\n";
  for (const auto& r : history.epochs) {
    std::string row = std::to_string(r.epoch);
    for (double v : {r.lr, r.train_loss, r.train_accuracy, r.validation_loss, r.validation_accuracy}) {
      row.push_back(',');
      append_number(row, v);
    }
    row += ',' + r.events_string() + '\n';
    out << row;
  }
}

void write_history_csv(const std::filesystem::path& path, const History& history) {
  std::ofstream out(path);
  require(out.good(), ErrorCode::IoError, "cannot write " + path.string());
  write_history_csv(out, history);
}

std::pair<double, double> evaluate(const Mlp& model, const LabeledSet& data) {
  require(!data.empty(), ErrorCode::Empty, "cannot evaluate on an empty set");
  const Eigen::MatrixXd probs = mlp_forward_batch(model, data.x.transpose());
  double loss = 0.0;
  std::size_t correct = 0;
  for (Eigen::Index i = 0; i < probs.cols(); ++i) {
    const int truth = data.y[static_cast<std::size_t>(i)];
    loss -= std::log(std::max(probs(truth, i), 1e-300));
    Eigen::Index best = 0;
    for (Eigen::Index c = 1; c < probs.rows(); ++c) {
      if (probs(c, i) > probs(best, i)) best = c;
    }
    correct += best == truth;
  }
  const auto n = static_cast<double>(probs.cols());
  return {loss / n, static_cast<double>(correct) / n};
}

MlpTrainResult train_loop(Mlp model, const LabeledSet& train, const LabeledSet& validation,
                          const TrainConfig& config, const OptimizerConfig& optimizer,
                          std::uint64_t seed) {
  config.validate();
  model.validate();
  require(!train.empty(), ErrorCode::EmptyTrain, "training set is empty");
  require(!validation.empty(), ErrorCode::MissingValidation,
          "the scheduler and early stopping need a validation set");
  require(optimizer.batch_size >= 1, ErrorCode::BadArgs, "batch size must be >= 1");

  std::mt19937_64 rng(seed);
  PlateauScheduler scheduler(config.initial_lr, config.lr_halving_patience,
                             config.min_improvement_delta);
  EarlyStopping stopper(config.early_stop_patience, config.min_improvement_delta);

  std::vector<DenseLayer<double>> velocity;
  for (const auto& l : model.layers) {
    velocity.push_back({Eigen::MatrixXd::Zero(l.weights.rows(), l.weights.cols()),
                        Eigen::VectorXd::Zero(l.bias.size())});
  }
  Mlp best = model;
  MlpTrainResult result;
  std::vector<std::size_t> order(static_cast<std::size_t>(train.size()));
  std::iota(order.begin(), order.end(), std::size_t{0});

  for (int epoch = 1; epoch <= config.max_epochs; ++epoch) {
    const double lr = scheduler.lr();
    std::shuffle(order.begin(), order.end(), rng);
    for (std::size_t start = 0; start < order.size(); start += static_cast<std::size_t>(optimizer.batch_size)) {
      const std::size_t end = std::min(order.size(), start + static_cast<std::size_t>(optimizer.batch_size));
      const std::vector<std::size_t> rows(order.begin() + static_cast<std::ptrdiff_t>(start),
                                          order.begin() + static_cast<std::ptrdiff_t>(end));
      const LabeledSet batch = gather(train.x, train.y, rows);
      const auto grads = mlp_backward(model, batch.x.transpose(), one_hot(batch.y, model.output_dim()), &rng);
      for (std::size_t l = 0; l < model.layers.size(); ++l) {
        velocity[l].weights = optimizer.momentum * velocity[l].weights - lr * grads.weights[l];
        velocity[l].bias = optimizer.momentum * velocity[l].bias - lr * grads.bias[l];
        model.layers[l].weights += velocity[l].weights;
        model.layers[l].bias += velocity[l].bias;
      }
    }

    EpochRecord rec;
    rec.epoch = epoch;
    rec.lr = lr;
    std::tie(rec.train_loss, rec.train_accuracy) = evaluate(model, train);
    std::tie(rec.validation_loss, rec.validation_accuracy) = evaluate(model, validation);
    if (scheduler.step(rec.validation_accuracy)) rec.events |= kHalved;
    const StopDecision decision = stopper.check(epoch, rec.validation_accuracy);
    if (decision.improved) {
      rec.events |= kImproved;
      best = model;
    }
    if (decision.stop) rec.events |= kStopped;
    result.history.epochs.push_back(rec);
    if (decision.stop) break;
  }
  result.history.best_epoch = stopper.best_epoch();
  result.model = std::move(best);
  return result;
}

}  // namespace eegstate
