#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Core>

namespace eegstate {

inline constexpr int kSampleRateHz = 128;
inline constexpr int kNumChannels = 7;
inline constexpr std::array<std::string_view, kNumChannels> kChannelNames = {
    "F3", "F4", "Fz", "C3", "C4", "Cz", "Pz"};

/// Session length retained for classification; 20 min non-drowsy + 20 min drowsy.
inline constexpr double kCapSeconds = 2400.0;
inline constexpr Eigen::Index kCapSamples = 2400 * kSampleRateHz;

enum class MentalState : int { Focused = 0, Unfocused = 1, Drowsed = 2 };
inline constexpr int kNumStates = 3;

std::string_view to_string(MentalState s) noexcept;

/// Samples are rows, channels are columns in kChannelNames order. Values in microvolts.
using ChannelMatrix = Eigen::Matrix<double, Eigen::Dynamic, kNumChannels>;

struct RawRecord {
  int subject_id = 1;
  int record_index = 1;
  int sample_rate_hz = kSampleRateHz;
  ChannelMatrix samples;

  Eigen::Index n_samples() const noexcept { return samples.rows(); }
  double duration_s() const noexcept {
    return static_cast<double>(samples.rows()) / sample_rate_hz;
  }
  auto channel(int c) const { return samples.col(c); }

  /// Throws on a violated invariant (ids, rate, non-finite samples).
  void validate() const;

  friend bool operator==(const RawRecord& a, const RawRecord& b);
};

struct ManifestEntry {
  int subject = 0;
  int record = 0;
  std::filesystem::path path;

  friend bool operator==(const ManifestEntry&, const ManifestEntry&) = default;
};

struct DatasetManifest {
  std::vector<ManifestEntry> entries;

  std::map<int, int> record_counts() const;
  std::vector<int> subjects() const;
  /// Throws DuplicateRecord if a (subject, record) pair appears twice.
  void validate() const;
};

// Record CSV: "# sample_rate_hz=128", then the channel header, then one row per sample.
RawRecord parse_record(std::istream& in, int subject_id, int record_index);
void format_record(std::ostream& out, const RawRecord& record);
RawRecord load_record(const std::filesystem::path& path, int subject_id, int record_index);
void write_record(const std::filesystem::path& path, const RawRecord& record);

/// Relative paths inside the manifest resolve against the manifest's directory.
DatasetManifest read_manifest(const std::filesystem::path& path);
void write_manifest(const std::filesystem::path& path, const DatasetManifest& manifest);
std::vector<RawRecord> load_manifest_records(const DatasetManifest& manifest);

/// Phase label for a point in a session of length horizon_s. The protocol is
/// first quarter focused, second quarter unfocused, second half drowsed, which
/// for the standard 2400 s horizon gives [0,600) / [600,1200) / [1200,2400).
MentalState label_at(double t_seconds, double horizon_s = kCapSeconds);

/// Labelling horizon for a record: its duration, capped at 40 minutes.
double protocol_horizon_s(const RawRecord& record) noexcept;

struct SyntheticConfig {
  int n_subjects = 2;
  int records_per_subject = 3;
  double duration_s = 240.0;
  std::uint64_t seed = 1;

  void validate() const;
};

struct SyntheticDataset {
  std::vector<RawRecord> records;
  DatasetManifest manifest;
};

/// One record of the synthetic cohort. Each record depends only on (config, subject, record),
/// so records may be generated independently and in any order.
RawRecord generate_synthetic_record(const SyntheticConfig& config, int subject_id,
                                    int record_index);
SyntheticDataset generate_synthetic(const SyntheticConfig& config);

/// Canonical file name used for synthetic records ("s01_r03.csv").
std::string synthetic_file_name(int subject_id, int record_index);

}  // namespace eegstate
