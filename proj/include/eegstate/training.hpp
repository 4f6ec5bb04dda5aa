#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <limits>
#include <string>
#include <vector>

#include <Eigen/Core>
#include <json.hpp>

#include "eegstate/models/mlp.hpp"

namespace eegstate {

/// Row-per-sample design matrix with integer class labels.
struct LabeledSet {
  Eigen::MatrixXd x;
  std::vector<int> y;

  Eigen::Index size() const noexcept { return x.rows(); }
  bool empty() const noexcept { return x.rows() == 0; }
};

/// Rows of `features` selected by `rows`, with their labels.
LabeledSet gather(const Eigen::MatrixXd& features, const std::vector<int>& labels,
                  const std::vector<std::size_t>& rows);

struct TrainConfig {
  double initial_lr = 1e-3;
  int lr_halving_patience = 3;
  int early_stop_patience = 10;
  int max_epochs = 200;
  double min_improvement_delta = 0.0;

  void validate() const;
};

/// Halves the learning rate once `patience` consecutive epochs pass without validation accuracy
/// exceeding the best seen so far (by more than delta). The counter restarts after each halving.
class PlateauScheduler {
 public:
  PlateauScheduler(double initial_lr, int patience, double delta = 0.0);

  /// Feeds one epoch's validation accuracy; returns true if the rate was halved.
  bool step(double validation_accuracy);

  double lr() const noexcept { return lr_; }
  int halvings() const noexcept { return halvings_; }
  int stagnant_epochs() const noexcept { return counter_; }

 private:
  double lr_;
  int patience_;
  double delta_;
  double best_ = -std::numeric_limits<double>::infinity();
  int counter_ = 0;
  int halvings_ = 0;
};

struct StopDecision {
  bool stop = false;
  bool improved = false;
  int best_epoch = 0;
};

/// Signals a stop after `patience` consecutive epochs without improvement over the best
/// validation accuracy. Independent of the scheduler's counter.
class EarlyStopping {
 public:
  explicit EarlyStopping(int patience, double delta = 0.0);

  StopDecision check(int epoch, double validation_accuracy);

  int best_epoch() const noexcept { return best_epoch_; }
  double best_accuracy() const noexcept { return best_; }

 private:
  int patience_;
  double delta_;
  double best_ = -std::numeric_limits<double>::infinity();
  int best_epoch_ = 0;
  int counter_ = 0;
};

enum EpochEvent : unsigned { kHalved = 1u, kImproved = 2u, kStopped = 4u };

struct EpochRecord {
  int epoch = 0;
  double train_loss = 0.0;
  double train_accuracy = 0.0;
  double validation_loss = 0.0;
  double validation_accuracy = 0.0;
  double lr = 0.0;  // rate used during this epoch
  unsigned events = 0;

  std::string events_string() const;
};

struct History {
  std::vector<EpochRecord> epochs;
  int best_epoch = 0;
};

void to_json(nlohmann::json& j, const EpochRecord& r);
void from_json(const nlohmann::json& j, EpochRecord& r);

/// CSV columns: epoch,lr,train_loss,train_acc,val_loss,val_acc,events
void write_history_csv(std::ostream& out, const History& history);
void write_history_csv(const std::filesystem::path& path, const History& history);

struct OptimizerConfig {
  double momentum = 0.9;
  int batch_size = 64;
};

struct MlpTrainResult {
  Mlp model;
  History history;
};

/// Mean cross-entropy and accuracy of the model (inference mode) on a labelled set.
std::pair<double, double> evaluate(const Mlp& model, const LabeledSet& data);

/// Epoch loop: seeded shuffle, momentum SGD mini-batches, evaluation of both sets, then a
/// scheduler step and an early-stopping check. The returned model is the snapshot from the
/// best validation epoch.
MlpTrainResult train_loop(Mlp model, const LabeledSet& train, const LabeledSet& validation,
                          const TrainConfig& config, const OptimizerConfig& optimizer,
                          std::uint64_t seed);

}  // namespace eegstate
