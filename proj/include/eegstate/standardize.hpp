#pragma once

#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Core>
#include <json.hpp>

#include "eegstate/features.hpp"
#include "eegstate/splits.hpp"

namespace eegstate {

enum class Scheme { PerRecord, GlobalTrain };

std::string_view to_string(Scheme s) noexcept;
Scheme parse_scheme(std::string_view name);
/// "leaky-baseline" for PerRecord, "corrected" for GlobalTrain.
std::string_view scheme_label(Scheme s) noexcept;

inline constexpr double kSigmaFloor = 1e-12;

/// Which frames a standardizer was fitted on.
struct FitScope {
  enum class Kind { Unset, Record, Split };
  Kind kind = Kind::Unset;
  int subject_id = 0;        // Record
  int record_index = 0;      // Record
  std::string split_id;      // Split, DatasetSplit::identity()
  IndexSet frames;           // exact rows read by the fit, ascending

  bool complete() const noexcept { return kind != Kind::Unset && !frames.empty(); }
  friend bool operator==(const FitScope&, const FitScope&) = default;
};

struct StandardizerParams {
  Eigen::VectorXd mu;
  Eigen::VectorXd sigma;
  Scheme scheme = Scheme::GlobalTrain;
  FitScope fit_scope;

  /// Bit-exact comparison of mu and sigma.
  bool same_bits(const StandardizerParams& other) const noexcept;
};

void to_json(nlohmann::json& j, const StandardizerParams& p);
void from_json(const nlohmann::json& j, StandardizerParams& p);

/// Feature-wise mean and population deviation over the given rows; deviations below
/// kSigmaFloor are replaced by 1.
void column_moments(const FeatureSet& set, std::span<const std::size_t> rows,
                    Eigen::VectorXd& mu, Eigen::VectorXd& sigma);

/// Fit on the frames of one (subject, record). Needs at least two frames.
StandardizerParams fit_per_record(const FeatureSet& set, std::span<const std::size_t> frames);

/// Fit on split.train only; validation and test rows are never read.
StandardizerParams fit_global_train(const FeatureSet& set, const DatasetSplit& split);

/// (x - mu) / sigma
template <typename Derived>
Eigen::VectorXd apply(const StandardizerParams& params, const Eigen::MatrixBase<Derived>& x) {
  require(x.size() == params.mu.size(), ErrorCode::LengthMismatch,
          "vector of length " + std::to_string(x.size()) + " vs params of length " +
              std::to_string(params.mu.size()));
  if constexpr (Derived::ColsAtCompileTime == 1) {
    return ((x.array() - params.mu.array()) / params.sigma.array()).matrix();
  } else {
    return ((x.transpose().array() - params.mu.array()) / params.sigma.array()).matrix();
  }
}

/// Result of standardizing a split under one scheme.
struct StandardizationRun {
  Scheme scheme = Scheme::GlobalTrain;
  DatasetSplit split;
  std::vector<StandardizerParams> params;
  /// applied_to[p] lists the frames transformed with params[p].
  std::vector<IndexSet> applied_to;

  /// Standardized copy of every row covered by the split (other rows are left untouched).
  Eigen::MatrixXd transform(const FeatureSet& set) const;
};

void to_json(nlohmann::json& j, const StandardizationRun& run);
void from_json(const nlohmann::json& j, StandardizationRun& run);

/// PerRecord: every record touching the split is fitted on all of its own frames (the split is
/// ignored, which is the leak). GlobalTrain: one fit on split.train applied to every split frame.
StandardizationRun standardize(const FeatureSet& set, const DatasetSplit& split, Scheme scheme);

struct LeakageReport {
  bool leaky = false;
  bool probe_changed_params = false;
  std::vector<std::string> reasons;

  std::string_view verdict() const noexcept { return leaky ? "LEAKY" : "CLEAN"; }
};

void to_json(nlohmann::json& j, const LeakageReport& r);

/// Flags leakage when any fit scope reaches outside split.train, or when shifting every
/// validation/test feature by probe_delta and refitting changes any parameter bit.
LeakageReport audit_leakage(const FeatureSet& set, const StandardizationRun& run,
                            double probe_delta = 1.0);

}  // namespace eegstate
