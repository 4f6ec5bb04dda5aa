#include "eegstate/data.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <complex>
#include <fstream>
#include <random>
#include <set>
#include <sstream>

#include <unsupported/Eigen/FFT>
#include <json.hpp>

#include "eegstate/error.hpp"
#include "eegstate/seed.hpp"

namespace eegstate {

namespace {

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

std::vector<std::string_view> split_commas(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    const auto pos = line.find(',', start);
    out.push_back(trim(line.substr(start, pos - start)));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return out;
}

double parse_double(std::string_view field, std::size_t line_no) {
  double v = 0.0;
  // from_chars rejects a leading '+'.
  if (!field.empty() && field.front() == '+') field.remove_prefix(1);
  const auto [ptr, ec] = std::from_chars(field.data(), field.data() + field.size(), v);
  if (ec != std::errc() || ptr != field.data() + field.size()) {
    throw Error(ErrorCode::BadFormat,
                "line " + std::to_string(line_no) + ": not a number: '" + std::string(field) + "'");
  }
  return v;
}

// Real-valued noise confined to [lo_hz, hi_hz], scaled to the requested RMS.
Eigen::VectorXd band_limited_noise(std::mt19937_64& rng, Eigen::Index n, double lo_hz,
                                   double hi_hz, double rms) {
  std::size_t len = 1;
  while (len < static_cast<std::size_t>(n)) len <<= 1;
  std::normal_distribution<double> gauss(0.0, 1.0);
  std::vector<double> white(len);
  for (double& x : white) x = gauss(rng);

  Eigen::FFT<double> fft;
  std::vector<std::complex<double>> spectrum;
  fft.fwd(spectrum, white);
  const double df = static_cast<double>(kSampleRateHz) / static_cast<double>(len);
  for (std::size_t k = 0; k < len; ++k) {
    const std::size_t mirrored = std::min(k, len - k);
    const double f = static_cast<double>(mirrored) * df;
    if (f < lo_hz || f > hi_hz) spectrum[k] = 0.0;
  }
  std::vector<double> filtered;
  fft.inv(filtered, spectrum);

  Eigen::VectorXd out = Eigen::Map<const Eigen::VectorXd>(filtered.data(), n);
  const double current = std::sqrt(out.squaredNorm() / static_cast<double>(n));
  if (current > 0.0) out *= rms / current;
  return out;
}

struct PhaseBand {
  double lo_hz;
  double hi_hz;
};

// Dominant bands per state: beta while focused, alpha while unfocused, delta/theta while drowsy.
constexpr std::array<PhaseBand, kNumStates> kPhaseBands = {
    PhaseBand{13.0, 30.0}, PhaseBand{8.0, 12.0}, PhaseBand{1.0, 7.0}};
constexpr double kDominantRmsUv = 20.0;
constexpr double kBroadbandRmsUv = 3.0;

}  // namespace

std::string_view to_string(MentalState s) noexcept {
  switch (s) {
    case MentalState::Focused: return "Focused";
    case MentalState::Unfocused: return "Unfocused";
    case MentalState::Drowsed: return "Drowsed";
  }
  return "?";
}

void RawRecord::validate() const {
  require(subject_id >= 1, ErrorCode::BadArgs, "subject_id must be >= 1");
  require(record_index >= 1, ErrorCode::BadArgs, "record_index must be >= 1");
  require(sample_rate_hz == kSampleRateHz, ErrorCode::BadSampleRate,
          "sample rate " + std::to_string(sample_rate_hz) + " != 128");
  require(samples.allFinite(), ErrorCode::BadFormat, "non-finite sample");
}

bool operator==(const RawRecord& a, const RawRecord& b) {
  return a.subject_id == b.subject_id && a.record_index == b.record_index &&
         a.sample_rate_hz == b.sample_rate_hz && a.samples.rows() == b.samples.rows() &&
         (a.samples.array() == b.samples.array()).all();
}

std::map<int, int> DatasetManifest::record_counts() const {
  std::map<int, int> counts;
  for (const auto& e : entries) ++counts[e.subject];
  return counts;
}

std::vector<int> DatasetManifest::subjects() const {
  std::vector<int> out;
  for (const auto& [s, n] : record_counts()) out.push_back(s);
  return out;
}

void DatasetManifest::validate() const {
  std::set<std::pair<int, int>> seen;
  for (const auto& e : entries) {
    require(e.subject >= 1 && e.record >= 1, ErrorCode::BadArgs, "subject/record ids must be >= 1");
    require(seen.emplace(e.subject, e.record).second, ErrorCode::DuplicateRecord,
            "subject " + std::to_string(e.subject) + " record " + std::to_string(e.record));
  }
}

RawRecord parse_record(std::istream& in, int subject_id, int record_index) {
  std::string line;
  std::size_t line_no = 1;
  require(static_cast<bool>(std::getline(in, line)), ErrorCode::BadFormat, "empty record file");
  {
    constexpr std::string_view key = "sample_rate_hz=";
    std::string_view meta = trim(line);
    require(!meta.empty() && meta.front() == '#', ErrorCode::BadFormat,
            "first line must be '# sample_rate_hz=128'");
    const auto pos = meta.find(key);
    require(pos != std::string_view::npos, ErrorCode::BadFormat, "missing sample_rate_hz metadata");
    const double rate = parse_double(trim(meta.substr(pos + key.size())), line_no);
    require(rate == kSampleRateHz, ErrorCode::BadSampleRate,
            "declared sample rate " + std::string(trim(meta.substr(pos + key.size()))) + " != 128");
  }

  ++line_no;
  require(static_cast<bool>(std::getline(in, line)), ErrorCode::BadFormat, "missing header line");
  const auto header = split_commas(line);
  // column_of[c] = CSV column holding canonical channel c
  std::array<std::size_t, kNumChannels> column_of{};
  for (int c = 0; c < kNumChannels; ++c) {
    const auto it = std::find(header.begin(), header.end(), kChannelNames[c]);
    require(it != header.end(), ErrorCode::MissingChannel,
            "header lacks channel " + std::string(kChannelNames[c]));
    column_of[c] = static_cast<std::size_t>(it - header.begin());
  }
  require(header.size() == kNumChannels, ErrorCode::BadFormat,
          "header must list exactly the 7 channels");

  std::vector<double> values;
  Eigen::Index rows = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    const auto fields = split_commas(line);
    require(fields.size() == kNumChannels, ErrorCode::RaggedChannels,
            "line " + std::to_string(line_no) + " has " + std::to_string(fields.size()) +
                " values, expected 7");
    for (int c = 0; c < kNumChannels; ++c) values.push_back(parse_double(fields[column_of[c]], line_no));
    ++rows;
  }

  RawRecord r;
  r.subject_id = subject_id;
  r.record_index = record_index;
  r.samples = Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, kNumChannels, Eigen::RowMajor>>(
      values.data(), rows, kNumChannels);
  r.validate();
  return r;
}

void format_record(std::ostream& out, const RawRecord& record) {
  record.validate();
  out << "# sample_rate_hz=" << record.sample_rate_hz << '\n';
  for (int c = 0; c < kNumChannels; ++c) out << (c ? "," : "") << kChannelNames[c];
  out << '\n';
  std::array<char, 32> buf{};
  std::string row;
  for (Eigen::Index i = 0; i < record.n_samples(); ++i) {
    row.clear();
    for (int c = 0; c < kNumChannels; ++c) {
      // Shortest representation that round-trips bit-exactly.
      const auto [ptr, ec] = std::to_chars(buf.data(), buf.data() + buf.size(), record.samples(i, c));
      if (c) row.push_back(',');
      row.append(buf.data(), ptr);
    }
    row.push_back('\n');
    out << row;
  }
}

RawRecord load_record(const std::filesystem::path& path, int subject_id, int record_index) {
  std::ifstream in(path);
  require(in.good(), ErrorCode::IoError, "cannot open " + path.string());
  return parse_record(in, subject_id, record_index);
}

void write_record(const std::filesystem::path& path, const RawRecord& record) {
  std::ofstream out(path);
  require(out.good(), ErrorCode::IoError, "cannot write " + path.string());
  format_record(out, record);
  require(out.good(), ErrorCode::IoError, "write failed: " + path.string());
}

DatasetManifest read_manifest(const std::filesystem::path& path) {
  std::ifstream in(path);
  require(in.good(), ErrorCode::IoError, "cannot open manifest " + path.string());
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::BadFormat, "manifest: " + std::string(e.what()));
  }
  require(j.is_array(), ErrorCode::BadFormat, "manifest must be a JSON array");
  DatasetManifest m;
  const auto base = path.parent_path();
  for (const auto& item : j) {
    require(item.contains("subject") && item.contains("record") && item.contains("path"),
            ErrorCode::BadFormat, "manifest entries need subject, record, path");
    ManifestEntry e;
    e.subject = item.at("subject").get<int>();
    e.record = item.at("record").get<int>();
    e.path = item.at("path").get<std::string>();
    if (e.path.is_relative()) e.path = base / e.path;
    m.entries.push_back(std::move(e));
  }
  m.validate();
  return m;
}

void write_manifest(const std::filesystem::path& path, const DatasetManifest& manifest) {
  manifest.validate();
  nlohmann::json j = nlohmann::json::array();
  for (const auto& e : manifest.entries) {
    j.push_back({{"subject", e.subject}, {"record", e.record}, {"path", e.path.generic_string()}});
  }
  std::ofstream out(path);
  require(out.good(), ErrorCode::IoError, "cannot write " + path.string());
  out << j.dump(2) << '\n';
}

std::vector<RawRecord> load_manifest_records(const DatasetManifest& manifest) {
  manifest.validate();
  std::vector<RawRecord> out;
  out.reserve(manifest.entries.size());
  for (const auto& e : manifest.entries) out.push_back(load_record(e.path, e.subject, e.record));
  return out;
}

MentalState label_at(double t_seconds, double horizon_s) {
  require(horizon_s > 0.0, ErrorCode::BadArgs, "horizon must be positive");
  require(t_seconds >= 0.0 && t_seconds < horizon_s, ErrorCode::OutOfHorizon,
          "t=" + std::to_string(t_seconds) + " outside [0, " + std::to_string(horizon_s) + ")");
  if (t_seconds < horizon_s / 4.0) return MentalState::Focused;
  if (t_seconds < horizon_s / 2.0) return MentalState::Unfocused;
  return MentalState::Drowsed;
}

double protocol_horizon_s(const RawRecord& record) noexcept {
  return std::min(record.duration_s(), kCapSeconds);
}

void SyntheticConfig::validate() const {
  require(n_subjects >= 2, ErrorCode::BadArgs, "need >= 2 subjects");
  require(records_per_subject >= 1, ErrorCode::BadArgs, "need >= 1 record per subject");
  require(std::isfinite(duration_s) && duration_s >= 60.0, ErrorCode::BadArgs,
          "duration must be >= 60 s");
}

RawRecord generate_synthetic_record(const SyntheticConfig& config, int subject_id,
                                    int record_index) {
  config.validate();
  require(subject_id >= 1 && subject_id <= config.n_subjects && record_index >= 1 &&
              record_index <= config.records_per_subject,
          ErrorCode::BadArgs, "subject/record outside the configured cohort");

  std::mt19937_64 subject_rng(derive_seed({config.seed, 0x5ab1ec7ULL, static_cast<std::uint64_t>(subject_id)}));
  std::uniform_real_distribution<double> gain_dist(0.8, 1.25);
  const double subject_gain = gain_dist(subject_rng);
  std::array<double, kNumChannels> channel_gain{};
  std::uniform_real_distribution<double> chan_dist(0.9, 1.1);
  for (double& g : channel_gain) g = chan_dist(subject_rng);

  std::mt19937_64 rng(derive_seed({config.seed, static_cast<std::uint64_t>(subject_id),
                                   static_cast<std::uint64_t>(record_index)}));
  const auto n = static_cast<Eigen::Index>(std::llround(config.duration_s * kSampleRateHz));
  const std::array<Eigen::Index, kNumStates + 1> bounds = {0, n / 4, n / 2, n};

  RawRecord r;
  r.subject_id = subject_id;
  r.record_index = record_index;
  r.samples.resize(n, kNumChannels);
  std::normal_distribution<double> gauss(0.0, kBroadbandRmsUv);
  for (int c = 0; c < kNumChannels; ++c) {
    for (int phase = 0; phase < kNumStates; ++phase) {
      const Eigen::Index len = bounds[phase + 1] - bounds[phase];
      if (len == 0) continue;
      const auto band = kPhaseBands[phase];
      r.samples.col(c).segment(bounds[phase], len) =
          band_limited_noise(rng, len, band.lo_hz, band.hi_hz, kDominantRmsUv);
    }
    for (Eigen::Index i = 0; i < n; ++i) r.samples(i, c) += gauss(rng);
    r.samples.col(c) *= subject_gain * channel_gain[c];
  }
  return r;
}

SyntheticDataset generate_synthetic(const SyntheticConfig& config) {
  config.validate();
  SyntheticDataset out;
  for (int s = 1; s <= config.n_subjects; ++s) {
    for (int rec = 1; rec <= config.records_per_subject; ++rec) {
      out.records.push_back(generate_synthetic_record(config, s, rec));
      out.manifest.entries.push_back({s, rec, synthetic_file_name(s, rec)});
    }
  }
  return out;
}

std::string synthetic_file_name(int subject_id, int record_index) {
  std::ostringstream os;
  os << 's' << (subject_id < 10 ? "0" : "") << subject_id << "_r" << (record_index < 10 ? "0" : "")
     << record_index << ".csv";
  return os.str();
}

}  // namespace eegstate
