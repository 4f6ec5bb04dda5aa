#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "eegstate/data.hpp"
#include "eegstate/features.hpp"
#include "eegstate/models/classifier.hpp"
#include "eegstate/splits.hpp"
#include "eegstate/standardize.hpp"
#include "eegstate/training.hpp"

namespace eegstate {

inline constexpr std::uint64_t kDefaultSeed = 2024;

/// Drops the habituation sessions and caps every remaining record at 40 minutes.
std::vector<RawRecord> prepare_records(const std::vector<RawRecord>& records);

struct EvaluationResult {
  Paradigm paradigm = Paradigm::LeaveOneOut;
  Scheme scheme = Scheme::GlobalTrain;
  double mean_accuracy = 0.0;
  /// Leave-one-out: keyed by test subject. Subject-specific: keyed by subject.
  /// Common-subject: a single entry keyed 0.
  std::map<int, double> per_subject;
  /// One report per fold when auditing was requested.
  std::vector<LeakageReport> audits;

  bool any_leaky() const noexcept;
};

void to_json(nlohmann::json& j, const EvaluationResult& r);

/// Leave-one-subject-out over every subject in `features`. Fold seeds are
/// derive_seed({spec.seed, subject}).
EvaluationResult run_loso(const FeatureSet& features, const ClassifierSpec& spec, Scheme scheme,
                          const TrainConfig& config = {}, bool audit = false);

/// Dispatches on paradigm. Common-subject and subject-specific use kDefaultTrainFraction and carve
/// a validation block for MLP kinds.
EvaluationResult run_paradigm(const FeatureSet& features, Paradigm paradigm,
                              const ClassifierSpec& spec, Scheme scheme,
                              const TrainConfig& config = {}, bool audit = false);

struct SweepGrid {
  std::vector<int> window_lengths_s{4, 8, 16, 24, 32, 40};
  std::vector<int> hop_lengths{8, 32, 64, 128, 192, 384};
  ClassifierSpec spec = ClassifierSpec::defaults(ModelKind::RandomForest);
  Scheme scheme = Scheme::GlobalTrain;
  Paradigm paradigm = Paradigm::LeaveOneOut;
  std::uint64_t master_seed = kDefaultSeed;

  /// Non-empty axes, no duplicates, values inside the spectrogram ranges.
  void validate() const;
};

/// Seed of one grid cell: derive_seed({master, window, hop, kind}).
std::uint64_t cell_seed(std::uint64_t master, int window_s, int hop, ModelKind kind) noexcept;

struct SweepCell {
  std::optional<double> accuracy;  // empty on failure
  std::map<int, double> per_subject;
  std::string error;
  std::uint64_t seed = 0;
};

struct BestCell {
  double accuracy = 0.0;
  int window_s = 0;
  int hop = 0;
};

struct SweepResult {
  ModelKind model = ModelKind::RandomForest;
  Scheme scheme = Scheme::GlobalTrain;
  Paradigm paradigm = Paradigm::LeaveOneOut;
  std::uint64_t seed = 0;
  std::vector<int> windows_s;  // ascending
  std::vector<int> hops;       // ascending
  std::vector<SweepCell> cells;  // row-major, window-major

  bool empty() const noexcept { return cells.empty(); }
  const SweepCell& cell(std::size_t w, std::size_t h) const { return cells.at(w * hops.size() + h); }
  SweepCell& cell(std::size_t w, std::size_t h) { return cells.at(w * hops.size() + h); }

  /// Argmax over successful cells; ties go to the smaller window, then the smaller hop.
  std::optional<BestCell> best() const;
};

/// Extracts features for every (window, hop) cell and evaluates it. `records` should already be
/// prepared. A failing cell records its error and leaves the others untouched. Cells run on up
/// to `jobs` threads; the result does not depend on `jobs`.
SweepResult run_sweep(const std::vector<RawRecord>& records, const SweepGrid& grid,
                      const TrainConfig& config = {}, int jobs = 1);

void to_json(nlohmann::json& j, const SweepResult& r);

struct TableRow {
  ModelKind model = ModelKind::RandomForest;
  double accuracy = 0.0;
  int window_s = 0;
  std::vector<int> hops;  // every hop in the best window that ties the best accuracy

  /// "128", "192 and 384", "8, 64 and 128".
  std::string hops_label() const;
};

/// One row per model in table order. Throws Empty when no model has a successful cell.
std::vector<TableRow> best_accuracy_table(const std::vector<SweepResult>& sweeps);
void write_best_accuracy_csv(std::ostream& out, const std::vector<TableRow>& rows);

/// First row: "window_s/hop" then the hop axis. First column: window axis. Cells: accuracy with
/// six decimals, or "ERR".
void emit_heatmap(std::ostream& out, const SweepResult& sweep);
void emit_heatmap(const std::filesystem::path& path, const SweepResult& sweep);

struct Heatmap {
  std::vector<int> windows_s;
  std::vector<int> hops;
  std::vector<std::vector<std::optional<double>>> values;  // [window][hop]
};

Heatmap parse_heatmap(std::istream& in);

}  // namespace eegstate
