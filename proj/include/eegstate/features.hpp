#pragma once

#include <cmath>
#include <filesystem>
#include <iosfwd>
#include <numbers>
#include <vector>

#include <Eigen/Core>

#include "eegstate/data.hpp"
#include "eegstate/error.hpp"

namespace eegstate {

inline constexpr int kBinsPerChannel = 36;
inline constexpr int kFeatureDim = kNumChannels * kBinsPerChannel;  // 252
inline constexpr int kHalfHzGroups = 128;                            // 0-64 Hz in 0.5 Hz steps

struct SpectrogramConfig {
  int window_length_s = 4;
  int hop_samples = 128;
  double band_max_hz = 36.0;
  double raw_bin_width_hz = 0.5;
  double smoothing_s = 15.0;
  double db_floor_epsilon = 1e-12;

  static constexpr int kMinWindowS = 4;
  static constexpr int kMaxWindowS = 40;
  static constexpr int kMinHop = 8;
  static constexpr int kMaxHop = 396;

  Eigen::Index window_samples() const noexcept {
    return static_cast<Eigen::Index>(window_length_s) * kSampleRateHz;
  }
  /// Range checks only; record-length fit is checked at extraction.
  void validate() const;

  friend bool operator==(const SpectrogramConfig&, const SpectrogramConfig&) = default;
};

struct FrameInfo {
  int subject_id = 0;
  int record_index = 0;
  double t_center_s = 0.0;
  MentalState label = MentalState::Focused;

  friend bool operator==(const FrameInfo&, const FrameInfo&) = default;
};

/// Column-per-feature table of frames. Row i of `features` belongs to `frames[i]`.
struct FeatureSet {
  SpectrogramConfig config;
  Eigen::MatrixXd features;  // n_frames x 252
  std::vector<FrameInfo> frames;

  Eigen::Index size() const noexcept { return static_cast<Eigen::Index>(frames.size()); }
  bool empty() const noexcept { return frames.empty(); }
  std::vector<int> subjects() const;
  std::vector<int> labels() const;

  /// Shape, finiteness and (subject, record, t) ordering.
  void validate() const;
};

/// Concatenates per-record sets (same config) and sorts by (subject, record, t).
FeatureSet concat(std::vector<FeatureSet> parts);

/// Symmetric Blackman window, w[k] = 0.42 - 0.5 cos(2 pi k/(n-1)) + 0.08 cos(4 pi k/(n-1)).
template <typename Scalar = double>
Eigen::Matrix<Scalar, Eigen::Dynamic, 1> blackman_window(Eigen::Index n) {
  require(n >= 2, ErrorCode::BadArgs, "Blackman window needs n >= 2");
  Eigen::Matrix<Scalar, Eigen::Dynamic, 1> w(n);
  const Scalar denom = static_cast<Scalar>(n - 1);
  const Scalar two_pi = Scalar(2) * std::numbers::pi_v<Scalar>;
  for (Eigen::Index k = 0; k < n; ++k) {
    // Evaluate on the mirrored index so the window is exactly symmetric.
    const Eigen::Index m = std::min(k, n - 1 - k);
    const Scalar x = static_cast<Scalar>(m) / denom;
    w[k] = Scalar(0.42) - Scalar(0.5) * std::cos(two_pi * x) + Scalar(0.08) * std::cos(Scalar(2) * two_pi * x);
  }
  // Closed-form values; 0.42 - 0.5 + 0.08 does not round to zero.
  w[0] = Scalar(0);
  w[n - 1] = Scalar(0);
  if (n % 2 == 1) w[(n - 1) / 2] = Scalar(1);
  return w;
}

/// Power spectrogram: row f is |DFT(blackman * x[f*hop, f*hop + window))|^2 over bins 0..window/2.
Eigen::MatrixXd stft_power(const Eigen::Ref<const Eigen::VectorXd>& signal,
                           Eigen::Index window_samples, Eigen::Index hop_samples);

/// Index of the 0.5 Hz group holding raw DFT bin k of an n-point transform at 128 Hz
/// (half-open groups [g/2, (g+1)/2) Hz, so the DC bin lands in group 0).
constexpr Eigen::Index half_hz_group(Eigen::Index k, Eigen::Index window_samples) noexcept {
  return (2 * kSampleRateHz * k) / window_samples;
}

/// Averages raw bins into 0.5 Hz groups, then pairs of groups into 36 one-hertz bins (0-36 Hz).
Eigen::MatrixXd bin_and_band(const Eigen::Ref<const Eigen::MatrixXd>& power,
                             Eigen::Index window_samples);

/// Number of frames in the causal smoothing window.
inline Eigen::Index smoothing_frames(Eigen::Index hop_samples, double smoothing_s) {
  require(hop_samples >= 1, ErrorCode::BadArgs, "hop must be >= 1");
  require(smoothing_s > 0.0, ErrorCode::BadArgs, "smoothing window must be positive");
  const auto w = static_cast<Eigen::Index>(std::floor(smoothing_s * kSampleRateHz /
                                                      static_cast<double>(hop_samples)));
  return std::max<Eigen::Index>(1, w);
}

/// Causal moving average down the rows: out.row(f) = mean(in.rows(max(0, f-w+1) .. f)).
/// Window sums are assembled from block prefix/suffix sums, so every partial sum adds
/// non-negative terms only when the input is non-negative.
template <typename Derived>
Eigen::Matrix<typename Derived::Scalar, Eigen::Dynamic, Eigen::Dynamic> moving_average(
    const Eigen::MatrixBase<Derived>& in, Eigen::Index hop_samples, double smoothing_s) {
  using Scalar = typename Derived::Scalar;
  using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
  const Eigen::Index w = smoothing_frames(hop_samples, smoothing_s);
  const Eigen::Index rows = in.rows();
  const Eigen::Index cols = in.cols();
  Matrix prefix(rows, cols);  // running sum from the start of the row's block
  Matrix suffix(rows, cols);  // running sum to the end of the row's block
  for (Eigen::Index start = 0; start < rows; start += w) {
    const Eigen::Index end = std::min(rows, start + w);
    prefix.row(start) = in.row(start);
    for (Eigen::Index i = start + 1; i < end; ++i) prefix.row(i) = prefix.row(i - 1) + in.row(i);
    suffix.row(end - 1) = in.row(end - 1);
    for (Eigen::Index i = end - 2; i >= start; --i) suffix.row(i) = suffix.row(i + 1) + in.row(i);
  }
  Matrix out(rows, cols);
  for (Eigen::Index f = 0; f < rows; ++f) {
    const Eigen::Index first = f - w + 1;
    if (first <= 0) {
      out.row(f) = prefix.row(f) / static_cast<Scalar>(f + 1);
    } else if (first % w == 0) {
      out.row(f) = prefix.row(f) / static_cast<Scalar>(w);
    } else {
      out.row(f) = (suffix.row(first) + prefix.row(f)) / static_cast<Scalar>(w);
    }
  }
  return out;
}

template <typename Scalar>
Scalar to_db(Scalar power, Scalar floor_epsilon = Scalar(1e-12)) {
  require(power >= Scalar(0), ErrorCode::NegativePower, "power must be non-negative");
  return Scalar(10) * std::log10(power + floor_epsilon);
}

template <typename Derived>
Eigen::Matrix<typename Derived::Scalar, Eigen::Dynamic, Eigen::Dynamic> to_db(
    const Eigen::MatrixBase<Derived>& power,
    typename Derived::Scalar floor_epsilon = typename Derived::Scalar(1e-12)) {
  using Scalar = typename Derived::Scalar;
  require((power.array() >= Scalar(0)).all(), ErrorCode::NegativePower,
          "power must be non-negative");
  return (Scalar(10) * (power.array() + floor_epsilon).log10()).matrix();
}

/// Number of frames the STFT yields for a signal of `length` samples.
Eigen::Index stft_frame_count(Eigen::Index length, Eigen::Index window_samples,
                              Eigen::Index hop_samples);

/// Full per-record pipeline: per channel STFT power -> 36 bins -> causal smoothing -> dB,
/// channels concatenated in canonical order. Frames whose window runs past 40 minutes are
/// dropped; each frame is labelled at its window centre.
FeatureSet extract_features(const RawRecord& record, const SpectrogramConfig& config);
FeatureSet extract_features(const std::vector<RawRecord>& records, const SpectrogramConfig& config);

// Feature table CSV: subject,record,t_center_s,label,f000..f251
void write_feature_table(std::ostream& out, const FeatureSet& set);
void write_feature_table(const std::filesystem::path& path, const FeatureSet& set);
FeatureSet read_feature_table(std::istream& in, const SpectrogramConfig& config);

}  // namespace eegstate
