// Acceptance checks 1-9. Prints one [PASS]/[FAIL] line per check; exit status is the failure count.
#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <numeric>
#include <random>
#include <sstream>

#include "eegstate/experiment.hpp"
#include "eegstate/models/mlp.hpp"
#include "eegstate/training.hpp"
#include "gradcheck.hpp"
#include "oracles.hpp"

using namespace eegstate;

namespace {

constexpr double kStftTolerance = 1e-9;
constexpr double kMomentTolerance = 1e-9;
constexpr double kGradientTolerance = 1e-4;
constexpr double kForestFloor = 0.80;
constexpr double kOracleFloor = 0.95;
constexpr double kMajorityBaseline = 0.50;
constexpr double kMajorityTolerance = 0.01;
constexpr std::uint64_t kCohortSeed = 2024;

struct Outcome {
  bool pass;
  std::string detail;
};

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

std::string fmt(const char* f, double a, double b = 0.0, double c = 0.0) {
  char buf[160];
  std::snprintf(buf, sizeof buf, f, a, b, c);
  return buf;
}

IndexSet record_rows(const FeatureSet& set, int subject, int record) {
  IndexSet rows;
  for (std::size_t i = 0; i < set.frames.size(); ++i) {
    if (set.frames[i].subject_id == subject && set.frames[i].record_index == record) rows.push_back(i);
  }
  return rows;
}

const std::vector<RawRecord>& cohort() {
  static const std::vector<RawRecord> records =
      prepare_records(generate_synthetic(SyntheticConfig{4, 4, 240.0, kCohortSeed}).records);
  return records;
}

Outcome feature_dimension() {
  const auto t0 = std::chrono::steady_clock::now();
  std::mt19937_64 rng(11);
  std::uniform_int_distribution<int> window(SpectrogramConfig::kMinWindowS, SpectrogramConfig::kMaxWindowS);
  std::uniform_int_distribution<int> hop(SpectrogramConfig::kMinHop, SpectrogramConfig::kMaxHop);
  const RawRecord record = generate_synthetic_record(SyntheticConfig{2, 3, 120.0, 5}, 1, 3);
  int bad = 0;
  Eigen::Index frames = 0;
  for (int trial = 0; trial < 20; ++trial) {
    SpectrogramConfig c;
    c.window_length_s = window(rng);
    c.hop_samples = hop(rng);
    const FeatureSet set = extract_features(record, c);
    frames += set.size();
    const Eigen::Index expected = stft_frame_count(record.samples.rows(), c.window_length_s * kSampleRateHz,
                                                   c.hop_samples);
    if (set.features.cols() != 252 || set.size() != expected || set.size() == 0) ++bad;
  }
  const double elapsed = seconds_since(t0);
  return {bad == 0 && elapsed < 30.0,
          fmt("20 configs, %.0f frames, configs with a wrong shape: %.0f, %.2f s", static_cast<double>(frames), bad,
              elapsed)};
}

Outcome stft_oracle() {
  std::mt19937_64 rng(12);
  std::uniform_int_distribution<int> len(16, 2048);
  std::normal_distribution<double> g(0.0, 1.0);
  double worst = 0.0;
  for (int trial = 0; trial < 50; ++trial) {
    const int n = len(rng);
    std::uniform_int_distribution<int> win(2, n);
    std::uniform_int_distribution<int> hop(1, std::max(1, n / 2));
    const int w = win(rng), h = hop(rng);
    std::vector<double> x(static_cast<std::size_t>(n));
    for (auto& v : x) v = g(rng);
    const Eigen::MatrixXd p = stft_power(Eigen::Map<const Eigen::VectorXd>(x.data(), n), w, h);
    const auto ref = oracle::spectrogram(x, w, h);
    if (static_cast<std::size_t>(p.rows()) != ref.size()) return {false, "frame count differs from oracle"};
    for (std::size_t f = 0; f < ref.size(); ++f) {
      const double peak = std::max(*std::max_element(ref[f].begin(), ref[f].end()), 1e-300);
      for (std::size_t k = 0; k < ref[f].size(); ++k) {
        worst = std::max(worst, std::abs(p(static_cast<Eigen::Index>(f), static_cast<Eigen::Index>(k)) - ref[f][k]) / peak);
      }
    }
  }
  bool window_ok = true;
  for (Eigen::Index n : {3, 5, 129, 511, 5121}) {
    const Eigen::VectorXd w = blackman_window<double>(n);
    window_ok = window_ok && w[0] == 0.0 && w[n - 1] == 0.0 && w[(n - 1) / 2] == 1.0;
  }
  return {worst < kStftTolerance && window_ok,
          fmt("50 signals, worst relative error %.3g (limit %.0g); Blackman endpoints/centre exact: %.0f", worst,
              kStftTolerance, window_ok)};
}

Outcome standardization() {
  const FeatureSet set = extract_features(cohort(), SpectrogramConfig{});
  double worst_mean = 0.0, worst_sd = 0.0;
  for (int s : set.subjects()) {
    for (int r : {3, 4}) {
      const IndexSet rows = record_rows(set, s, r);
      const auto p = fit_per_record(set, rows);
      Eigen::MatrixXd z(static_cast<Eigen::Index>(rows.size()), set.features.cols());
      for (std::size_t i = 0; i < rows.size(); ++i) {
        z.row(static_cast<Eigen::Index>(i)) = apply(p, set.features.row(static_cast<Eigen::Index>(rows[i])).transpose()).transpose();
      }
      IndexSet all(rows.size());
      std::iota(all.begin(), all.end(), std::size_t{0});
      const auto m = oracle::column_moments(z, all);
      for (std::size_t j = 0; j < m.mean.size(); ++j) {
        worst_mean = std::max(worst_mean, std::abs(m.mean[j]));
        worst_sd = std::max(worst_sd, std::abs(m.stddev[j] - 1.0));
      }
    }
  }
  bool invariant = true;
  for (int s : set.subjects()) {
    const DatasetSplit split = split_leave_one_out(set, s);
    const auto base = fit_global_train(set, split);
    for (double delta : {1.0, -1e9, 1e-300}) {
      FeatureSet mutated = set;
      for (const auto* part : {&split.validation, &split.test}) {
        for (std::size_t i : *part) mutated.features.row(static_cast<Eigen::Index>(i)).array() += delta;
      }
      invariant = invariant && fit_global_train(mutated, split).same_bits(base);
    }
  }
  return {worst_mean < kMomentTolerance && worst_sd < kMomentTolerance && invariant,
          fmt("per-record max |mean| %.3g, max |sd-1| %.3g; global-train bit-invariant: %.0f", worst_mean, worst_sd,
              invariant)};
}

Outcome leakage_audit() {
  std::mt19937_64 rng(14);
  int audits = 0, wrong = 0;
  for (std::uint64_t seed = 1; seed <= 20; ++seed) {
    SyntheticConfig c;
    c.n_subjects = 2 + static_cast<int>(rng() % 3);
    c.records_per_subject = 4 + static_cast<int>(rng() % 2);
    c.duration_s = 60.0 + static_cast<double>(rng() % 4) * 20.0;
    c.seed = seed;
    const FeatureSet set = extract_features(prepare_records(generate_synthetic(c).records), SpectrogramConfig{});
    std::vector<DatasetSplit> splits;
    for (int s : set.subjects()) {
      splits.push_back(split_leave_one_out(set, s));
      splits.push_back(split_subject_specific(set, s, 0.8, seed, true));
    }
    splits.push_back(split_common_subject(set, 0.8, seed, true));
    for (const auto& split : splits) {
      if (split.test.empty()) continue;
      wrong += audit_leakage(set, standardize(set, split, Scheme::GlobalTrain)).leaky;
      wrong += !audit_leakage(set, standardize(set, split, Scheme::PerRecord)).leaky;
      audits += 2;
    }
  }
  return {wrong == 0 && audits > 0, fmt("20 seeds, %.0f audits, %.0f false verdicts", audits, wrong)};
}

Outcome gradient_check() {
  double worst = 0.0;
  for (std::uint64_t seed = 1; seed <= 10; ++seed) {
    const auto m = make_mlp<double>({252, 4, 3}, Activation::Tanh, seed);
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> g(0.0, 1.0);
    Eigen::MatrixXd x(252, 8);
    for (Eigen::Index i = 0; i < x.size(); ++i) x.data()[i] = g(rng);
    std::vector<int> labels;
    for (int i = 0; i < 8; ++i) labels.push_back(static_cast<int>(rng() % 3));
    worst = std::max(worst, oracle::max_gradient_relative_error(m, x, one_hot<double>(labels, 3)));
  }
  return {worst < kGradientTolerance, fmt("10 seeds, worst relative error %.3g (limit %.0g)", worst, kGradientTolerance)};
}

// Feeds a validation-accuracy trace through the scheduler and stopper as the training loop does.
struct Trace {
  std::vector<int> halved_at;
  int stopped_at = 0;
  bool lr_matches = true;
};

Trace replay(const std::vector<double>& accs, double lr0 = 1e-3) {
  PlateauScheduler scheduler(lr0, 3);
  EarlyStopping stopper(10);
  Trace t;
  int halvings = 0;
  for (std::size_t i = 0; i < accs.size(); ++i) {
    const int epoch = static_cast<int>(i) + 1;
    t.lr_matches = t.lr_matches && scheduler.lr() == lr0 / std::pow(2.0, halvings);
    if (scheduler.step(accs[i])) {
      t.halved_at.push_back(epoch);
      ++halvings;
    }
    t.lr_matches = t.lr_matches && scheduler.lr() == lr0 / std::pow(2.0, halvings);
    if (stopper.check(epoch, accs[i]).stop) {
      t.stopped_at = epoch;
      break;
    }
  }
  return t;
}

Outcome schedule_traces() {
  bool ok = true;
  const auto rising = replay({.5, .6, .7});
  ok = ok && rising.halved_at.empty() && rising.stopped_at == 0;
  const auto four = replay({.5, .5, .5, .5});
  ok = ok && four.halved_at == std::vector<int>{4};
  const auto seven = replay(std::vector<double>(8, .5));
  ok = ok && seven.halved_at == (std::vector<int>{4, 7});
  const auto ten = replay(std::vector<double>(20, .5));
  ok = ok && ten.stopped_at == 11 && ten.halved_at == (std::vector<int>{4, 7, 10});
  const auto late = replay({.5, .5, .5, .5, .9, .9, .9, .9});
  ok = ok && late.halved_at == (std::vector<int>{4, 8});
  ok = ok && rising.lr_matches && four.lr_matches && seven.lr_matches && ten.lr_matches && late.lr_matches;

  // The same schedule through the real training loop: frozen weights keep validation accuracy flat.
  LabeledSet train, val;
  train.x = Eigen::MatrixXd::Random(30, 252);
  val.x = Eigen::MatrixXd::Random(15, 252);
  for (int i = 0; i < 30; ++i) train.y.push_back(i % 3);
  for (int i = 0; i < 15; ++i) val.y.push_back(i % 3);
  TrainConfig config;
  config.initial_lr = 0.0;
  const auto run = train_loop(make_mlp<double>({252, 4, 3}, Activation::Relu, 1), train, val, config, {}, 1);
  std::vector<int> loop_halvings;
  for (const auto& e : run.history.epochs) {
    if (e.events & kHalved) loop_halvings.push_back(e.epoch);
  }
  const bool loop_ok = run.history.epochs.size() == 11 && loop_halvings == std::vector<int>{4, 7, 10};
  return {ok && loop_ok, fmt("constructed traces match: %.0f; training loop halves at 4,7,10 and stops at 11: %.0f", ok,
                             loop_ok)};
}

// Relative delta, alpha and beta power of each non-overlapping 4 s chunk, averaged over channels.
std::vector<oracle::BandPoint> band_points(const std::vector<RawRecord>& records) {
  std::vector<oracle::BandPoint> out;
  constexpr int chunk = 4 * kSampleRateHz;
  for (const auto& r : records) {
    const double horizon = protocol_horizon_s(r);
    for (Eigen::Index start = 0; start + chunk <= r.samples.rows(); start += chunk) {
      std::array<double, 3> power{};
      for (Eigen::Index c = 0; c < r.samples.cols(); ++c) {
        std::vector<double> x(chunk);
        for (int t = 0; t < chunk; ++t) x[static_cast<std::size_t>(t)] = r.samples(start + t, c);
        power[0] += oracle::band_power(x, 1, 7);
        power[1] += oracle::band_power(x, 8, 12);
        power[2] += oracle::band_power(x, 13, 30);
      }
      const double total = power[0] + power[1] + power[2];
      for (double& p : power) p /= total;
      const double centre = (static_cast<double>(start) + chunk / 2.0) / kSampleRateHz;
      out.push_back({r.subject_id, static_cast<int>(label_at(centre, horizon)), power});
    }
  }
  return out;
}

double majority_baseline(const FeatureSet& set) {
  double sum = 0.0;
  const auto subjects = set.subjects();
  for (int s : subjects) {
    std::array<int, 3> train{}, test{};
    for (const auto& f : set.frames) ++(f.subject_id == s ? test : train)[static_cast<int>(f.label)];
    const auto majority = std::max_element(train.begin(), train.end()) - train.begin();
    sum += static_cast<double>(test[static_cast<std::size_t>(majority)]) / (test[0] + test[1] + test[2]);
  }
  return sum / static_cast<double>(subjects.size());
}

Outcome synthetic_loso() {
  const auto t0 = std::chrono::steady_clock::now();
  const FeatureSet set = extract_features(cohort(), SpectrogramConfig{});
  const auto rf = run_loso(set, ClassifierSpec::defaults(ModelKind::RandomForest, kCohortSeed), Scheme::GlobalTrain);
  const double elapsed = seconds_since(t0);
  const double centroid = oracle::nearest_centroid_loso(band_points(cohort()));
  const double majority = majority_baseline(set);
  const bool ok = rf.mean_accuracy >= kForestFloor && centroid >= kOracleFloor &&
                  std::abs(majority - kMajorityBaseline) <= kMajorityTolerance && elapsed < 300.0;
  std::ostringstream s;
  s << "random forest " << rf.mean_accuracy << " (floor " << kForestFloor << "), band-power centroid " << centroid
    << " (floor " << kOracleFloor << "), majority " << majority << ", " << elapsed << " s";
  return {ok, s.str()};
}

Outcome leaky_vs_clean() {
  const FeatureSet set = extract_features(cohort(), SpectrogramConfig{});
  const auto spec = ClassifierSpec::defaults(ModelKind::RandomForest, kCohortSeed);
  const auto leaky = run_paradigm(set, Paradigm::CommonSubject, spec, Scheme::PerRecord);
  const auto clean = run_paradigm(set, Paradigm::CommonSubject, spec, Scheme::GlobalTrain);
  return {leaky.mean_accuracy >= clean.mean_accuracy,
          fmt("common-subject accuracy: per-record %.4f vs global-train %.4f", leaky.mean_accuracy,
              clean.mean_accuracy)};
}

Outcome sweep_determinism() {
  namespace fs = std::filesystem;
  const auto records = prepare_records(generate_synthetic(SyntheticConfig{3, 4, 90.0, 9}).records);
  SweepGrid grid;
  grid.window_lengths_s = {4, 8};
  grid.hop_lengths = {64, 128};
  grid.spec = ClassifierSpec::defaults(ModelKind::RandomForest, kCohortSeed).with("n_trees", 20);
  grid.master_seed = kCohortSeed;
  std::vector<std::string> heatmaps, reports;
  for (int run = 0; run < 2; ++run) {
    const fs::path dir = fs::temp_directory_path() / ("eegstate_acceptance_sweep_" + std::to_string(run));
    fs::create_directories(dir);
    const SweepResult r = run_sweep(records, grid);
    emit_heatmap(dir / "heatmap.csv", r);
    std::ofstream(dir / "summary.json") << nlohmann::json(r).dump(2);
    for (auto [name, sink] : {std::pair{"heatmap.csv", &heatmaps}, std::pair{"summary.json", &reports}}) {
      std::ifstream in(dir / name, std::ios::binary);
      std::ostringstream bytes;
      bytes << in.rdbuf();
      sink->push_back(bytes.str());
    }
  }
  const bool ok = heatmaps[0] == heatmaps[1] && reports[0] == reports[1] && !heatmaps[0].empty() &&
                  heatmaps[0].find("ERR") == std::string::npos;
  return {ok, fmt("2x2 grid, heatmap %.0f bytes, summary %.0f bytes, identical across runs: %.0f",
                  static_cast<double>(heatmaps[0].size()), static_cast<double>(reports[0].size()), ok)};
}

}  // namespace

int main() {
  const std::vector<std::pair<const char*, std::function<Outcome()>>> checks = {
      {"feature dimension", feature_dimension},
      {"STFT oracle", stft_oracle},
      {"standardization invariants", standardization},
      {"leakage audit", leakage_audit},
      {"gradient check", gradient_check},
      {"scheduler and early-stop traces", schedule_traces},
      {"synthetic LOSO", synthetic_loso},
      {"leaky vs clean ordering", leaky_vs_clean},
      {"sweep determinism", sweep_determinism},
  };
  int failures = 0;
  for (std::size_t i = 0; i < checks.size(); ++i) {
    Outcome o;
    try {
      o = checks[i].second();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    failures += !o.pass;
    std::printf("[%s] AC%zu %s: %s\n", o.pass ? "PASS" : "FAIL", i + 1, checks[i].first, o.detail.c_str());
    std::fflush(stdout);
  }
  return failures;
}
