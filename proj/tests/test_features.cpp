#include <numbers>
#include <random>
#include <sstream>

#include <gtest/gtest.h>

#include "eegstate/features.hpp"
#include "oracles.hpp"
#include "test_util.hpp"

using namespace eegstate;
using testutil::code_of;
using testutil::random_record;

namespace {

Eigen::VectorXd random_signal(Eigen::Index n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> g(0.0, 1.0);
  Eigen::VectorXd x(n);
  for (auto& v : x) v = g(rng);
  return x;
}

}  // namespace

TEST(Blackman, EndpointsAndCentreAreExact) {
  for (Eigen::Index n : {3, 5, 511, 513, 1025}) {
    const auto w = blackman_window(n);
    EXPECT_EQ(w[0], 0.0);
    EXPECT_EQ(w[n - 1], 0.0);
    EXPECT_EQ(w[(n - 1) / 2], 1.0);
  }
}

TEST(Blackman, SymmetricAndMatchesDirectFormula) {
  for (int n : {2, 16, 512, 777}) {
    const auto w = blackman_window(n);
    const auto ref = oracle::blackman(n);
    for (int k = 0; k < n; ++k) {
      EXPECT_EQ(w[k], w[n - 1 - k]);
      EXPECT_NEAR(w[k], ref[static_cast<std::size_t>(k)], 1e-15);
    }
  }
}

TEST(Blackman, SumMatchesIndependentSummation) {
  const auto ref = oracle::blackman(512);
  long double sum = 0.0L;
  for (double v : ref) sum += v;
  EXPECT_NEAR(blackman_window(512).sum(), static_cast<double>(sum), 1e-12 * static_cast<double>(sum));
}

TEST(Blackman, RejectsTinyWindow) {
  EXPECT_EQ(code_of([] { blackman_window(1); }), ErrorCode::BadArgs);
}

TEST(Stft, ZeroSignalGivesZeroPower) {
  const Eigen::MatrixXd p = stft_power(Eigen::VectorXd::Zero(2048), 512, 128);
  EXPECT_EQ(p.rows(), 13);
  EXPECT_EQ(p.cols(), 257);
  EXPECT_EQ(p.cwiseAbs().maxCoeff(), 0.0);
}

TEST(Stft, SinusoidPeaksAtItsBin) {
  const Eigen::Index n = 512;
  const int bin = 40;  // 10 Hz at 0.25 Hz spacing
  Eigen::VectorXd x(4096);
  for (Eigen::Index i = 0; i < x.size(); ++i) x[i] = std::sin(2 * std::numbers::pi * bin * static_cast<double>(i) / n);
  const Eigen::MatrixXd p = stft_power(x, n, 128);
  for (Eigen::Index f = 0; f < p.rows(); ++f) {
    Eigen::Index arg;
    p.row(f).maxCoeff(&arg);
    EXPECT_EQ(arg, bin);
  }
}

TEST(Stft, MatchesNaiveDftOracle) {
  std::mt19937_64 rng(42);
  std::uniform_int_distribution<int> len(64, 2048);
  std::uniform_int_distribution<int> hop_d(8, 200);
  for (int trial = 0; trial < 10; ++trial) {
    const int n = len(rng);
    const int window = std::max(8, (n / 3) & ~1);
    const int hop = hop_d(rng);
    const Eigen::VectorXd x = random_signal(n, 100 + trial);
    const Eigen::MatrixXd p = stft_power(x, window, hop);
    const auto ref = oracle::spectrogram(std::vector<double>(x.data(), x.data() + n), window, hop);
    ASSERT_EQ(static_cast<std::size_t>(p.rows()), ref.size());
    for (std::size_t f = 0; f < ref.size(); ++f) {
      const double peak = *std::max_element(ref[f].begin(), ref[f].end());
      for (std::size_t k = 0; k < ref[f].size(); ++k) {
        EXPECT_LE(std::abs(p(static_cast<Eigen::Index>(f), static_cast<Eigen::Index>(k)) - ref[f][k]), 1e-9 * peak);
      }
    }
  }
}

TEST(Stft, ParsevalOnEachFrame) {
  const Eigen::Index n = 256;
  const Eigen::VectorXd x = random_signal(1024, 5);
  const Eigen::MatrixXd p = stft_power(x, n, 96);
  const auto w = oracle::blackman(static_cast<int>(n));
  for (Eigen::Index f = 0; f < p.rows(); ++f) {
    double energy = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) {
      const double v = x[f * 96 + i] * w[static_cast<std::size_t>(i)];
      energy += v * v;
    }
    const double full = p(f, 0) + p(f, n / 2) + 2.0 * p.row(f).segment(1, n / 2 - 1).sum();
    EXPECT_NEAR(full / static_cast<double>(n), energy, 1e-9 * energy);
  }
}

TEST(Stft, FrameCount) {
  EXPECT_EQ(stft_frame_count(307200, 512, 128), 2397);
  EXPECT_EQ(stft_frame_count(512, 512, 8), 1);
  EXPECT_EQ(code_of([] { stft_power(Eigen::VectorXd::Zero(100), 512, 128); }), ErrorCode::SignalTooShort);
}

TEST(Bands, ConstantPowerIsPreserved) {
  for (Eigen::Index n : {512, 640, 1024, 5120}) {
    const Eigen::MatrixXd p = Eigen::MatrixXd::Constant(3, n / 2 + 1, 2.5);
    const Eigen::MatrixXd b = bin_and_band(p, n);
    EXPECT_EQ(b.cols(), kBinsPerChannel);
    EXPECT_NEAR((b.array() - 2.5).abs().maxCoeff(), 0.0, 1e-14);
  }
}

TEST(Bands, GroupMeansForQuarterHertzSpacing) {
  const Eigen::Index n = 512;
  Eigen::MatrixXd p(1, n / 2 + 1);
  for (Eigen::Index k = 0; k < p.cols(); ++k) p(0, k) = static_cast<double>(k * k % 17);
  const Eigen::MatrixXd b = bin_and_band(p, n);
  // 0.25 Hz spacing: 0.5 Hz group g holds raw bins 2g, 2g+1; 1 Hz bin j holds groups 2j, 2j+1.
  for (int j = 0; j < kBinsPerChannel; ++j) {
    const double g0 = (p(0, 4 * j) + p(0, 4 * j + 1)) / 2;
    const double g1 = (p(0, 4 * j + 2) + p(0, 4 * j + 3)) / 2;
    EXPECT_NEAR(b(0, j), (g0 + g1) / 2, 1e-12);
  }
}

TEST(Bands, RejectsWrongWidth) {
  EXPECT_EQ(code_of([] { bin_and_band(Eigen::MatrixXd::Ones(2, 100), 512); }), ErrorCode::BadShape);
}

TEST(Smoothing, ConstantAndIdentityCases) {
  const Eigen::MatrixXd c = Eigen::MatrixXd::Constant(50, 3, 4.0);
  EXPECT_NEAR((moving_average(c, 128, 15.0) - c).cwiseAbs().maxCoeff(), 0.0, 1e-13);
  const Eigen::MatrixXd r = Eigen::MatrixXd::Random(20, 4);
  EXPECT_EQ(smoothing_frames(396, 1.0), 1);
  EXPECT_TRUE(moving_average(r, 396, 1.0) == r);
}

TEST(Smoothing, ImpulseResponse) {
  Eigen::MatrixXd x = Eigen::MatrixXd::Zero(8, 1);
  x(0, 0) = 1.0;
  ASSERT_EQ(smoothing_frames(128, 4.0), 4);
  const Eigen::MatrixXd y = moving_average(x, 128, 4.0);
  const double expected[] = {1.0, 0.5, 1.0 / 3, 0.25, 0, 0, 0, 0};
  for (int i = 0; i < 8; ++i) EXPECT_NEAR(y(i, 0), expected[i], 1e-15);
}

TEST(Smoothing, MatchesDirectWindowMeans) {
  std::mt19937_64 rng(8);
  std::uniform_real_distribution<double> u(0.0, 1e6);
  Eigen::MatrixXd x(200, 3);
  for (Eigen::Index i = 0; i < x.size(); ++i) x.data()[i] = u(rng);
  const Eigen::Index w = smoothing_frames(64, 15.0);
  const Eigen::MatrixXd y = moving_average(x, 64, 15.0);
  for (Eigen::Index f = 0; f < x.rows(); ++f) {
    const Eigen::Index first = std::max<Eigen::Index>(0, f - w + 1);
    for (Eigen::Index c = 0; c < x.cols(); ++c) {
      long double s = 0.0L;
      for (Eigen::Index i = first; i <= f; ++i) s += x(i, c);
      const double ref = static_cast<double>(s / (f - first + 1));
      EXPECT_NEAR(y(f, c), ref, 1e-12 * ref);
    }
  }
}

TEST(Decibels, Values) {
  EXPECT_NEAR(to_db(1.0), 0.0, 1e-10);
  EXPECT_NEAR(to_db(100.0), 20.0, 1e-10);
  EXPECT_DOUBLE_EQ(to_db(0.0), -120.0);
  EXPECT_EQ(code_of([] { to_db(-1.0); }), ErrorCode::NegativePower);
}

TEST(Extract, EveryFrameHas252Features) {
  const RawRecord r = random_record(2, 3, 128 * 120, 4);
  SpectrogramConfig c;
  c.window_length_s = 8;
  c.hop_samples = 64;
  const FeatureSet s = extract_features(r, c);
  EXPECT_EQ(s.features.cols(), 252);
  EXPECT_EQ(s.size(), stft_frame_count(r.n_samples(), 1024, 64));
  EXPECT_TRUE(s.features.allFinite());
  EXPECT_NO_THROW(s.validate());
}

TEST(Extract, FortyMinuteFrameCountAndCentres) {
  const RawRecord r = random_record(1, 3, kCapSamples + 6400, 1);
  const FeatureSet s = extract_features(r, SpectrogramConfig{});
  ASSERT_EQ(s.size(), 2397);
  for (Eigen::Index f = 0; f < s.size(); ++f) {
    const auto& fr = s.frames[static_cast<std::size_t>(f)];
    EXPECT_DOUBLE_EQ(fr.t_center_s, (static_cast<double>(f) * 128 + 256) / 128.0);
    EXPECT_EQ(fr.label, label_at(fr.t_center_s));
  }
}

TEST(Extract, SilenceIsFinite) {
  RawRecord r;
  r.samples = ChannelMatrix::Zero(128 * 60, kNumChannels);
  const FeatureSet s = extract_features(r, SpectrogramConfig{});
  EXPECT_TRUE(s.features.allFinite());
  EXPECT_DOUBLE_EQ(s.features.maxCoeff(), -120.0);
}

TEST(Extract, ChannelBlocksFollowChannelOrder) {
  RawRecord r = random_record(1, 3, 128 * 60, 2);
  r.samples.col(3) *= 100.0;  // C3 is 40 dB louder
  const FeatureSet s = extract_features(r, SpectrogramConfig{});
  const Eigen::RowVectorXd row = s.features.row(s.size() / 2);
  for (int c = 0; c < kNumChannels; ++c) {
    if (c == 3) continue;
    EXPECT_NEAR(row.segment(3 * 36, 36).mean() - row.segment(c * 36, 36).mean(), 40.0, 3.0);
  }
}

TEST(Extract, TooShortAndBadConfig) {
  const RawRecord r = random_record(1, 3, 128 * 10, 2);
  SpectrogramConfig c;
  c.window_length_s = 16;
  EXPECT_EQ(code_of([&] { extract_features(r, c); }), ErrorCode::SignalTooShort);
  c.window_length_s = 3;
  EXPECT_EQ(code_of([&] { c.validate(); }), ErrorCode::BadArgs);
  c.window_length_s = 4;
  c.hop_samples = 8;
  EXPECT_NO_THROW(c.validate());
  c.hop_samples = 397;
  EXPECT_EQ(code_of([&] { c.validate(); }), ErrorCode::BadArgs);
}

TEST(Extract, RandomConfigsAlwaysGive252) {
  std::mt19937_64 rng(77);
  std::uniform_int_distribution<int> win(4, 40), hop(8, 396);
  const RawRecord r = random_record(1, 3, 128 * 60, 3);
  for (int i = 0; i < 20; ++i) {
    SpectrogramConfig c;
    c.window_length_s = win(rng);
    c.hop_samples = hop(rng);
    const FeatureSet s = extract_features(r, c);
    EXPECT_EQ(s.features.cols(), 252);
    EXPECT_EQ(s.size(), stft_frame_count(r.n_samples(), c.window_samples(), c.hop_samples));
  }
}

TEST(FeatureTable, RoundTrip) {
  const RawRecord r = random_record(4, 5, 128 * 30, 6);
  const FeatureSet s = extract_features(r, SpectrogramConfig{});
  std::stringstream io;
  write_feature_table(io, s);
  std::string header;
  std::getline(std::istringstream(io.str()), header);
  EXPECT_EQ(header.substr(0, 40), "subject,record,t_center_s,label,f000,f00");
  EXPECT_NE(header.find("f251"), std::string::npos);
  const FeatureSet back = read_feature_table(io, s.config);
  EXPECT_TRUE(back.features == s.features);
  EXPECT_TRUE(back.frames == s.frames);
}
