#include "eegstate/features.hpp"

#include <algorithm>
#include <charconv>
#include <complex>
#include <fstream>
#include <numeric>
#include <sstream>
#include <string>
#include <tuple>

#include <unsupported/Eigen/FFT>

namespace eegstate {

namespace {

// Windowed real FFT returning |X_k|^2 for k = 0..n/2.
class PowerSpectrum {
 public:
  explicit PowerSpectrum(Eigen::Index window_samples)
      : window_(blackman_window(window_samples)),
        frame_(static_cast<std::size_t>(window_samples)) {
    fft_.SetFlag(Eigen::FFT<double>::HalfSpectrum);
  }

  Eigen::Index bins() const noexcept { return window_.size() / 2 + 1; }

  template <typename Segment, typename Out>
  void compute(const Segment& samples, Out&& out) {
    for (Eigen::Index i = 0; i < window_.size(); ++i) frame_[static_cast<std::size_t>(i)] = samples[i] * window_[i];
    fft_.fwd(spectrum_, frame_);
    for (Eigen::Index k = 0; k < bins(); ++k) out[k] = std::norm(spectrum_[static_cast<std::size_t>(k)]);
  }

 private:
  Eigen::VectorXd window_;
  std::vector<double> frame_;
  std::vector<std::complex<double>> spectrum_;
  Eigen::FFT<double> fft_;
};

// Maps raw bins to 0.5 Hz groups and groups to 1 Hz output bins.
class BandBinner {
 public:
  explicit BandBinner(Eigen::Index window_samples) : window_samples_(window_samples) {
    counts_.setZero(2 * kBinsPerChannel);
    const Eigen::Index bins = window_samples / 2 + 1;
    for (Eigen::Index k = 0; k < bins; ++k) {
      const Eigen::Index g = half_hz_group(k, window_samples);
      if (g >= 2 * kBinsPerChannel) break;
      ++counts_[g];
      last_bin_ = k;
    }
    require((counts_.array() > 0).all(), ErrorCode::BadShape,
            "window too short to populate every 0.5 Hz group");
  }

  Eigen::Index required_bins() const noexcept { return last_bin_ + 1; }

  template <typename Row, typename Out>
  void apply(const Row& power, Out&& out) const {
    Eigen::Matrix<double, 2 * kBinsPerChannel, 1> groups = Eigen::Matrix<double, 2 * kBinsPerChannel, 1>::Zero();
    for (Eigen::Index k = 0; k <= last_bin_; ++k) groups[half_hz_group(k, window_samples_)] += power[k];
    groups.array() /= counts_.array();
    for (int b = 0; b < kBinsPerChannel; ++b) out[b] = 0.5 * (groups[2 * b] + groups[2 * b + 1]);
  }

 private:
  Eigen::Index window_samples_;
  Eigen::Index last_bin_ = 0;
  Eigen::Matrix<double, 2 * kBinsPerChannel, 1> counts_;
};

void write_number(std::string& row, double v) {
  std::array<char, 32> buf{};
  const auto [ptr, ec] = std::to_chars(buf.data(), buf.data() + buf.size(), v);
  row.append(buf.data(), ptr);
}

}  // namespace

void SpectrogramConfig::validate() const {
  require(window_length_s >= kMinWindowS && window_length_s <= kMaxWindowS, ErrorCode::BadArgs,
          "window length must be in [4, 40] s, got " + std::to_string(window_length_s));
  require(hop_samples >= kMinHop && hop_samples <= kMaxHop, ErrorCode::BadArgs,
          "hop must be in [8, 396] samples, got " + std::to_string(hop_samples));
  require(smoothing_s > 0.0, ErrorCode::BadArgs, "smoothing window must be positive");
}

std::vector<int> FeatureSet::subjects() const {
  std::vector<int> out;
  for (const auto& f : frames) out.push_back(f.subject_id);
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

std::vector<int> FeatureSet::labels() const {
  std::vector<int> out;
  out.reserve(frames.size());
  for (const auto& f : frames) out.push_back(static_cast<int>(f.label));
  return out;
}

void FeatureSet::validate() const {
  require(features.rows() == size() && (features.cols() == kFeatureDim || frames.empty()),
          ErrorCode::BadShape, "feature matrix must be n_frames x 252");
  require(features.allFinite(), ErrorCode::BadShape, "non-finite feature value");
  const auto key = [](const FrameInfo& f) { return std::tie(f.subject_id, f.record_index, f.t_center_s); };
  require(std::is_sorted(frames.begin(), frames.end(),
                         [&](const FrameInfo& a, const FrameInfo& b) { return key(a) < key(b); }),
          ErrorCode::BadShape, "frames must be sorted by (subject, record, t)");
}

FeatureSet concat(std::vector<FeatureSet> parts) {
  FeatureSet out;
  if (parts.empty()) return out;
  out.config = parts.front().config;
  std::sort(parts.begin(), parts.end(), [](const FeatureSet& a, const FeatureSet& b) {
    const auto ka = a.empty() ? std::pair{0, 0} : std::pair{a.frames[0].subject_id, a.frames[0].record_index};
    const auto kb = b.empty() ? std::pair{0, 0} : std::pair{b.frames[0].subject_id, b.frames[0].record_index};
    return ka < kb;
  });
  Eigen::Index total = 0;
  for (const auto& p : parts) {
    require(p.config == out.config, ErrorCode::BadArgs, "cannot concatenate mixed configs");
    total += p.size();
  }
  out.features.resize(total, kFeatureDim);
  out.frames.reserve(static_cast<std::size_t>(total));
  Eigen::Index row = 0;
  for (auto& p : parts) {
    if (p.empty()) continue;
    out.features.middleRows(row, p.size()) = p.features;
    row += p.size();
    out.frames.insert(out.frames.end(), p.frames.begin(), p.frames.end());
  }
  out.validate();
  return out;
}

Eigen::Index stft_frame_count(Eigen::Index length, Eigen::Index window_samples,
                              Eigen::Index hop_samples) {
  require(window_samples >= 2, ErrorCode::BadArgs, "window must have >= 2 samples");
  require(hop_samples >= 1, ErrorCode::BadArgs, "hop must be >= 1");
  require(window_samples <= length, ErrorCode::SignalTooShort,
          "signal of " + std::to_string(length) + " samples shorter than window of " +
              std::to_string(window_samples));
  return (length - window_samples) / hop_samples + 1;
}

Eigen::MatrixXd stft_power(const Eigen::Ref<const Eigen::VectorXd>& signal,
                           Eigen::Index window_samples, Eigen::Index hop_samples) {
  const Eigen::Index n_frames = stft_frame_count(signal.size(), window_samples, hop_samples);
  PowerSpectrum spectrum(window_samples);
  Eigen::MatrixXd out(n_frames, spectrum.bins());
  Eigen::VectorXd row(spectrum.bins());
  for (Eigen::Index f = 0; f < n_frames; ++f) {
    spectrum.compute(signal.segment(f * hop_samples, window_samples), row);
    out.row(f) = row.transpose();
  }
  return out;
}

Eigen::MatrixXd bin_and_band(const Eigen::Ref<const Eigen::MatrixXd>& power,
                             Eigen::Index window_samples) {
  require(window_samples >= 2, ErrorCode::BadShape, "window must have >= 2 samples");
  require(power.cols() == window_samples / 2 + 1, ErrorCode::BadShape,
          "power matrix must have window/2 + 1 columns");
  const BandBinner binner(window_samples);
  Eigen::MatrixXd out(power.rows(), kBinsPerChannel);
  Eigen::Matrix<double, kBinsPerChannel, 1> bins;
  for (Eigen::Index f = 0; f < power.rows(); ++f) {
    binner.apply(power.row(f), bins);
    out.row(f) = bins.transpose();
  }
  return out;
}

FeatureSet extract_features(const RawRecord& record, const SpectrogramConfig& config) {
  config.validate();
  record.validate();
  const Eigen::Index window = config.window_samples();
  const Eigen::Index hop = config.hop_samples;
  const Eigen::Index usable = std::min(record.n_samples(), kCapSamples);
  const Eigen::Index n_frames = stft_frame_count(usable, window, hop);
  const double horizon = protocol_horizon_s(record);

  PowerSpectrum spectrum(window);
  const BandBinner binner(window);
  Eigen::VectorXd power(spectrum.bins());
  Eigen::Matrix<double, kBinsPerChannel, 1> bins;

  FeatureSet out;
  out.config = config;
  out.features.resize(n_frames, kFeatureDim);
  for (int c = 0; c < kNumChannels; ++c) {
    Eigen::MatrixXd banded(n_frames, kBinsPerChannel);
    const auto channel = record.channel(c);
    for (Eigen::Index f = 0; f < n_frames; ++f) {
      spectrum.compute(channel.segment(f * hop, window), power);
      binner.apply(power, bins);
      banded.row(f) = bins.transpose();
    }
    out.features.middleCols(c * kBinsPerChannel, kBinsPerChannel) =
        to_db(moving_average(banded, hop, config.smoothing_s), config.db_floor_epsilon);
  }

  out.frames.resize(static_cast<std::size_t>(n_frames));
  for (Eigen::Index f = 0; f < n_frames; ++f) {
    auto& info = out.frames[static_cast<std::size_t>(f)];
    info.subject_id = record.subject_id;
    info.record_index = record.record_index;
    info.t_center_s = static_cast<double>(f * hop + window / 2) / kSampleRateHz;
    info.label = label_at(info.t_center_s, horizon);
  }
  return out;
}

FeatureSet extract_features(const std::vector<RawRecord>& records, const SpectrogramConfig& config) {
  std::vector<FeatureSet> parts;
  parts.reserve(records.size());
  for (const auto& r : records) parts.push_back(extract_features(r, config));
  return concat(std::move(parts));
}

void write_feature_table(std::ostream& out, const FeatureSet& set) {
  out << "subject,record,t_center_s,label";
  for (int j = 0; j < kFeatureDim; ++j) {
    out << ",f" << (j < 100 ? "0" : "") << (j < 10 ? "0" : "") << j;
  }
  out << '\n';
  std::string row;
  for (Eigen::Index i = 0; i < set.size(); ++i) {
    const auto& info = set.frames[static_cast<std::size_t>(i)];
    row = std::to_string(info.subject_id) + ',' + std::to_string(info.record_index) + ',';
    write_number(row, info.t_center_s);
    row += ',' + std::to_string(static_cast<int>(info.label));
    for (int j = 0; j < kFeatureDim; ++j) {
      row.push_back(',');
      write_number(row, set.features(i, j));
    }
    row.push_back('\n');
    out << row;
  }
}

void write_feature_table(const std::filesystem::path& path, const FeatureSet& set) {
  std::ofstream out(path);
  require(out.good(), ErrorCode::IoError, "cannot write " + path.string());
  write_feature_table(out, set);
}

FeatureSet read_feature_table(std::istream& in, const SpectrogramConfig& config) {
  std::string line;
  require(static_cast<bool>(std::getline(in, line)), ErrorCode::BadFormat, "empty feature table");
  FeatureSet out;
  out.config = config;
  std::vector<double> values;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::vector<double> fields;
    std::size_t start = 0;
    while (start <= line.size()) {
      auto pos = line.find(',', start);
      if (pos == std::string::npos) pos = line.size();
      double v = 0.0;
      const auto [ptr, ec] = std::from_chars(line.data() + start, line.data() + pos, v);
      require(ec == std::errc() && ptr == line.data() + pos, ErrorCode::BadFormat,
              "bad number in feature table");
      fields.push_back(v);
      start = pos + 1;
    }
    require(fields.size() == 4 + kFeatureDim, ErrorCode::BadFormat, "feature row must have 256 fields");
    FrameInfo info;
    info.subject_id = static_cast<int>(fields[0]);
    info.record_index = static_cast<int>(fields[1]);
    info.t_center_s = fields[2];
    const int label = static_cast<int>(fields[3]);
    require(label >= 0 && label < kNumStates, ErrorCode::BadFormat, "label must be 0, 1 or 2");
    info.label = static_cast<MentalState>(label);
    out.frames.push_back(info);
    values.insert(values.end(), fields.begin() + 4, fields.end());
  }
  out.features = Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>(
      values.data(), out.size(), kFeatureDim);
  out.validate();
  return out;
}

}  // namespace eegstate
