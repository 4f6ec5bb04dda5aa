#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>

#include <gtest/gtest.h>

#include "eegstate/data.hpp"
#include "oracles.hpp"
#include "test_util.hpp"

using namespace eegstate;
using testutil::code_of;
using testutil::random_record;

namespace {

std::string csv_with_header(const std::string& rate_line, const std::string& header, int rows) {
  std::ostringstream s;
  s << rate_line << '\n' << header << '\n';
  const int cols = static_cast<int>(std::count(header.begin(), header.end(), ',')) + 1;
  for (int i = 0; i < rows; ++i) {
    for (int c = 0; c < cols; ++c) s << (c ? "," : "") << i + 0.5 * c;
    s << '\n';
  }
  return s.str();
}

const std::string kHeader = "F3,F4,Fz,C3,C4,Cz,Pz";

}  // namespace

TEST(Labels, PhaseBoundaries) {
  EXPECT_EQ(label_at(300), MentalState::Focused);
  EXPECT_EQ(label_at(900), MentalState::Unfocused);
  EXPECT_EQ(label_at(1800), MentalState::Drowsed);
  EXPECT_EQ(label_at(600), MentalState::Unfocused);
  EXPECT_EQ(label_at(1200), MentalState::Drowsed);
  EXPECT_EQ(label_at(0), MentalState::Focused);
  EXPECT_EQ(label_at(std::nextafter(600.0, 0.0)), MentalState::Focused);
}

TEST(Labels, OutOfHorizon) {
  EXPECT_EQ(code_of([] { label_at(2400); }), ErrorCode::OutOfHorizon);
  EXPECT_EQ(code_of([] { label_at(-0.5); }), ErrorCode::OutOfHorizon);
}

TEST(Labels, ScaledHorizonPartitionsTotally) {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(0.0, 240.0);
  for (int i = 0; i < 1000; ++i) {
    const double t = u(rng);
    const auto s = label_at(t, 240.0);
    const int expected = t < 60 ? 0 : (t < 120 ? 1 : 2);
    EXPECT_EQ(static_cast<int>(s), expected) << t;
  }
}

TEST(RecordCsv, RoundTripIsBitExact) {
  for (std::uint64_t seed : {1u, 2u, 3u}) {
    const RawRecord r = random_record(2, 5, 300, seed);
    std::stringstream s;
    format_record(s, r);
    const RawRecord back = parse_record(s, 2, 5);
    EXPECT_TRUE(back == r);
  }
}

TEST(RecordCsv, FileRoundTripAndSampleCount) {
  const auto dir = std::filesystem::temp_directory_path() / "eegstate_test_data";
  std::filesystem::create_directories(dir);
  const RawRecord r = random_record(1, 3, 307200, 11);
  write_record(dir / "r.csv", r);
  const RawRecord back = load_record(dir / "r.csv", 1, 3);
  EXPECT_EQ(back.n_samples(), 307200);
  EXPECT_TRUE(back == r);
}

TEST(RecordCsv, MissingChannel) {
  std::istringstream in(csv_with_header("# sample_rate_hz=128", "F3,F4,Fz,C3,C4,Cz", 4));
  EXPECT_EQ(code_of([&] { parse_record(in, 1, 1); }), ErrorCode::MissingChannel);
}

TEST(RecordCsv, BadSampleRate) {
  std::istringstream in(csv_with_header("# sample_rate_hz=256", kHeader, 4));
  EXPECT_EQ(code_of([&] { parse_record(in, 1, 1); }), ErrorCode::BadSampleRate);
}

TEST(RecordCsv, RaggedRow) {
  std::string text = csv_with_header("# sample_rate_hz=128", kHeader, 3);
  text += "1,2,3\n";
  std::istringstream in(text);
  EXPECT_EQ(code_of([&] { parse_record(in, 1, 1); }), ErrorCode::RaggedChannels);
}

TEST(RecordCsv, ReorderedHeaderMapsByName) {
  std::istringstream in("# sample_rate_hz=128\nPz,F3,F4,Fz,C3,C4,Cz\n7,1,2,3,4,5,6\n");
  const RawRecord r = parse_record(in, 1, 1);
  for (int c = 0; c < kNumChannels; ++c) EXPECT_EQ(r.samples(0, c), c + 1.0);
}

TEST(Manifest, RoundTripAndDuplicates) {
  const auto dir = std::filesystem::temp_directory_path() / "eegstate_test_manifest";
  std::filesystem::create_directories(dir);
  DatasetManifest m;
  m.entries = {{1, 3, "a.csv"}, {1, 4, "b.csv"}, {2, 3, "c.csv"}};
  write_manifest(dir / "m.json", m);
  const DatasetManifest back = read_manifest(dir / "m.json");
  ASSERT_EQ(back.entries.size(), 3u);
  EXPECT_EQ(back.entries[1].path, dir / "b.csv");
  EXPECT_EQ(back.record_counts().at(1), 2);

  m.entries.push_back({1, 3, "dup.csv"});
  EXPECT_EQ(code_of([&] { m.validate(); }), ErrorCode::DuplicateRecord);
}

TEST(Synthetic, Deterministic) {
  SyntheticConfig c{2, 3, 240.0, 1};
  const auto a = generate_synthetic(c);
  const auto b = generate_synthetic(c);
  ASSERT_EQ(a.records.size(), 6u);
  for (std::size_t i = 0; i < a.records.size(); ++i) {
    std::ostringstream sa, sb;
    format_record(sa, a.records[i]);
    format_record(sb, b.records[i]);
    EXPECT_EQ(sa.str(), sb.str());
  }
}

TEST(Synthetic, RecordsAreIndependentOfGenerationOrder) {
  SyntheticConfig c{3, 2, 60.0, 9};
  const auto all = generate_synthetic(c);
  const RawRecord single = generate_synthetic_record(c, 3, 2);
  EXPECT_TRUE(single == all.records.back());
}

TEST(Synthetic, FullScaleSizes) {
  SyntheticConfig c{5, 7, 2400.0, 7};
  EXPECT_NO_THROW(c.validate());
  const RawRecord r = generate_synthetic_record(c, 5, 7);
  EXPECT_EQ(r.n_samples(), 307200);
  EXPECT_EQ(c.n_subjects * c.records_per_subject, 35);
}

TEST(Synthetic, RejectsBadArgs) {
  EXPECT_EQ(code_of([] { SyntheticConfig{1, 3, 240.0, 1}.validate(); }), ErrorCode::BadArgs);
  EXPECT_EQ(code_of([] { SyntheticConfig{2, 3, 30.0, 1}.validate(); }), ErrorCode::BadArgs);
  EXPECT_EQ(code_of([] { SyntheticConfig{2, 0, 240.0, 1}.validate(); }), ErrorCode::BadArgs);
}

TEST(Synthetic, PhaseBandsDominateInPeriodogram) {
  SyntheticConfig c{2, 3, 240.0, 1};
  const RawRecord r = generate_synthetic_record(c, 1, 3);
  const Eigen::Index n = r.n_samples();
  const auto segment = [&](Eigen::Index from, Eigen::Index to, int ch) {
    std::vector<double> v;
    for (Eigen::Index i = from; i < to; ++i) v.push_back(r.samples(i, ch));
    return v;
  };
  for (int ch : {0, 6}) {
    const auto focused = segment(0, n / 4, ch);
    const auto unfocused = segment(n / 4, n / 2, ch);
    const auto drowsed = segment(n / 2, n, ch);
    EXPECT_GT(oracle::band_power(drowsed, 1, 7), oracle::band_power(drowsed, 13, 30));
    EXPECT_GT(oracle::band_power(focused, 13, 30), oracle::band_power(focused, 1, 7));
    EXPECT_GT(oracle::band_power(unfocused, 8, 12), oracle::band_power(unfocused, 13, 30));
  }
}

TEST(Protocol, HorizonIsCappedDuration) {
  RawRecord r = random_record(1, 3, 128 * 100, 1);
  EXPECT_DOUBLE_EQ(protocol_horizon_s(r), 100.0);
  r.samples.resize(kCapSamples + 128, kNumChannels);
  EXPECT_DOUBLE_EQ(protocol_horizon_s(r), 2400.0);
}
