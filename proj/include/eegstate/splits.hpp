#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "eegstate/data.hpp"
#include "eegstate/features.hpp"

namespace eegstate {

enum class Paradigm { CommonSubject, SubjectSpecific, LeaveOneOut };

std::string_view to_string(Paradigm p) noexcept;
/// Accepts the canonical names plus the short forms "common", "subject", "loso".
Paradigm parse_paradigm(std::string_view name);

using IndexSet = std::vector<std::size_t>;

/// Frame-index partition of one FeatureSet. Index sets are kept sorted ascending.
struct DatasetSplit {
  Paradigm paradigm = Paradigm::LeaveOneOut;
  IndexSet train;
  IndexSet validation;
  IndexSet test;
  std::optional<int> test_subject;  // leave-one-out only
  std::optional<int> subject;       // subject-specific only
  std::uint64_t rng_seed = 0;

  /// Short identity string used as a standardizer fit scope, e.g. "leave-one-out/test=3/seed=0".
  std::string identity() const;

  /// Disjointness, range and (for leave-one-out) subject-separation checks.
  void validate(const FeatureSet& features) const;

  friend bool operator==(const DatasetSplit&, const DatasetSplit&) = default;
};

void to_json(nlohmann::json& j, const DatasetSplit& split);
void from_json(const nlohmann::json& j, DatasetSplit& split);

/// Removes the two habituation sessions (record index 1 and 2) of every subject.
DatasetManifest drop_habituation(const DatasetManifest& manifest);
std::vector<RawRecord> drop_habituation(const std::vector<RawRecord>& records);

/// Truncates to the first 40 minutes.
RawRecord cap_40min(RawRecord record);

/// Test = every frame of test_subject; validation = the highest-index record of each other
/// subject; train = the rest.
DatasetSplit split_leave_one_out(const FeatureSet& features, int test_subject);

/// Uniform frame-level shuffle; the first floor(fraction * n) frames train, the rest test.
/// With carve_validation, the last floor(0.1 * |train|) of the shuffled train block become
/// validation.
DatasetSplit split_common_subject(const FeatureSet& features, double train_fraction,
                                  std::uint64_t seed, bool carve_validation = false);

DatasetSplit split_subject_specific(const FeatureSet& features, int subject,
                                    double train_fraction, std::uint64_t seed,
                                    bool carve_validation = false);

inline constexpr double kDefaultTrainFraction = 0.8;
inline constexpr double kValidationCarveFraction = 0.1;

}  // namespace eegstate
