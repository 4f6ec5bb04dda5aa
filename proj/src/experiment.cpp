#include "eegstate/experiment.hpp"

#include <algorithm>
#include <atomic>
#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>
#include <thread>

#include "eegstate/seed.hpp"

namespace eegstate {

std::vector<RawRecord> prepare_records(const std::vector<RawRecord>& records) {
  std::vector<RawRecord> out = drop_habituation(records);
  for (auto& r : out) r = cap_40min(std::move(r));
  return out;
}

bool EvaluationResult::any_leaky() const noexcept {
  return std::any_of(audits.begin(), audits.end(), [](const LeakageReport& r) { return r.leaky; });
}

void to_json(nlohmann::json& j, const EvaluationResult& r) {
  nlohmann::json per_subject = nlohmann::json::object();
  for (const auto& [s, acc] : r.per_subject) per_subject[std::to_string(s)] = acc;
  j = nlohmann::json{{"paradigm", to_string(r.paradigm)},
                     {"scheme", to_string(r.scheme)},
                     {"scheme_label", scheme_label(r.scheme)},
                     {"mean_accuracy", r.mean_accuracy},
                     {"per_subject", per_subject}};
  if (!r.audits.empty()) {
    j["audit_verdict"] = r.any_leaky() ? "LEAKY" : "CLEAN";
    j["audits"] = r.audits;
  }
}

namespace {

/// Standardizes, fits and scores one split. Returns test accuracy.
double evaluate_split(const FeatureSet& features, const DatasetSplit& split, const ClassifierSpec& spec,
                      Scheme scheme, const TrainConfig& config, std::vector<LeakageReport>* audits) {
  const StandardizationRun run = standardize(features, split, scheme);
  if (audits != nullptr) audits->push_back(audit_leakage(features, run));
  const Eigen::MatrixXd z = run.transform(features);
  const std::vector<int> labels = features.labels();
  const LabeledSet train = gather(z, labels, split.train);
  const LabeledSet validation = gather(z, labels, split.validation);
  const LabeledSet test = gather(z, labels, split.test);
  const TrainedModel model = fit(spec, train, validation, config);
  return accuracy(predict(model, test.x).labels, test.y);
}

double unweighted_mean(const std::map<int, double>& values) {
  double sum = 0.0;
  for (const auto& [k, v] : values) sum += v;
  return sum / static_cast<double>(values.size());
}

}  // namespace

EvaluationResult run_loso(const FeatureSet& features, const ClassifierSpec& spec, Scheme scheme,
                          const TrainConfig& config, bool audit) {
  const std::vector<int> subjects = features.subjects();
  require(subjects.size() >= 2, ErrorCode::TooFewSubjects, "leave-one-out needs at least 2 subjects");
  EvaluationResult result;
  result.paradigm = Paradigm::LeaveOneOut;
  result.scheme = scheme;
  for (int s : subjects) {
    ClassifierSpec fold = spec;
    fold.seed = derive_seed({spec.seed, static_cast<std::uint64_t>(s)});
    DatasetSplit split = split_leave_one_out(features, s);
    split.rng_seed = fold.seed;
    result.per_subject[s] =
        evaluate_split(features, split, fold, scheme, config, audit ? &result.audits : nullptr);
  }
  result.mean_accuracy = unweighted_mean(result.per_subject);
  return result;
}

EvaluationResult run_paradigm(const FeatureSet& features, Paradigm paradigm,
                              const ClassifierSpec& spec, Scheme scheme, const TrainConfig& config,
                              bool audit) {
  if (paradigm == Paradigm::LeaveOneOut) return run_loso(features, spec, scheme, config, audit);
  EvaluationResult result;
  result.paradigm = paradigm;
  result.scheme = scheme;
  const bool carve = is_mlp(spec.kind);
  std::vector<LeakageReport>* audits = audit ? &result.audits : nullptr;
  if (paradigm == Paradigm::CommonSubject) {
    const DatasetSplit split = split_common_subject(features, kDefaultTrainFraction, spec.seed, carve);
    result.per_subject[0] = evaluate_split(features, split, spec, scheme, config, audits);
  } else {
    for (int s : features.subjects()) {
      ClassifierSpec fold = spec;
      fold.seed = derive_seed({spec.seed, static_cast<std::uint64_t>(s)});
      const DatasetSplit split =
          split_subject_specific(features, s, kDefaultTrainFraction, fold.seed, carve);
      result.per_subject[s] = evaluate_split(features, split, fold, scheme, config, audits);
    }
  }
  result.mean_accuracy = unweighted_mean(result.per_subject);
  return result;
}

void SweepGrid::validate() const {
  require(!window_lengths_s.empty() && !hop_lengths.empty(), ErrorCode::BadArgs,
          "sweep axes must be non-empty");
  const auto check_axis = [](const std::vector<int>& axis, int lo, int hi, const char* name) {
    std::set<int> seen;
    for (int v : axis) {
      require(v >= lo && v <= hi, ErrorCode::BadArgs,
              std::string(name) + " " + std::to_string(v) + " outside [" + std::to_string(lo) + ", " +
                  std::to_string(hi) + "]");
      require(seen.insert(v).second, ErrorCode::BadArgs,
              std::string("duplicate ") + name + " " + std::to_string(v));
    }
  };
  check_axis(window_lengths_s, SpectrogramConfig::kMinWindowS, SpectrogramConfig::kMaxWindowS, "window");
  check_axis(hop_lengths, SpectrogramConfig::kMinHop, SpectrogramConfig::kMaxHop, "hop");
  spec.validate();
}

std::uint64_t cell_seed(std::uint64_t master, int window_s, int hop, ModelKind kind) noexcept {
  return derive_seed({master, static_cast<std::uint64_t>(window_s), static_cast<std::uint64_t>(hop),
                      static_cast<std::uint64_t>(kind)});
}

std::optional<BestCell> SweepResult::best() const {
  std::optional<BestCell> out;
  // Axes are ascending, so a strict > scan keeps the smaller window, then the smaller hop.
  for (std::size_t w = 0; w < windows_s.size(); ++w) {
    for (std::size_t h = 0; h < hops.size(); ++h) {
      const auto& acc = cell(w, h).accuracy;
      if (acc && (!out || *acc > out->accuracy)) out = BestCell{*acc, windows_s[w], hops[h]};
    }
  }
  return out;
}

SweepResult run_sweep(const std::vector<RawRecord>& records, const SweepGrid& grid,
                      const TrainConfig& config, int jobs) {
  grid.validate();
  require(jobs >= 1, ErrorCode::BadArgs, "jobs must be >= 1");
  SweepResult result;
  result.model = grid.spec.kind;
  result.scheme = grid.scheme;
  result.paradigm = grid.paradigm;
  result.seed = grid.master_seed;
  result.windows_s = grid.window_lengths_s;
  result.hops = grid.hop_lengths;
  std::sort(result.windows_s.begin(), result.windows_s.end());
  std::sort(result.hops.begin(), result.hops.end());
  result.cells.resize(result.windows_s.size() * result.hops.size());

  const auto run_cell = [&](std::size_t index) {
    const int window = result.windows_s[index / result.hops.size()];
    const int hop = result.hops[index % result.hops.size()];
    SweepCell& cell = result.cells[index];
    cell.seed = cell_seed(grid.master_seed, window, hop, grid.spec.kind);
    try {
      SpectrogramConfig sc;
      sc.window_length_s = window;
      sc.hop_samples = hop;
      const FeatureSet features = extract_features(records, sc);
      ClassifierSpec spec = grid.spec;
      spec.seed = cell.seed;
      const EvaluationResult eval = run_paradigm(features, grid.paradigm, spec, grid.scheme, config);
      cell.accuracy = eval.mean_accuracy;
      cell.per_subject = eval.per_subject;
    } catch (const std::exception& e) {
      cell.accuracy.reset();
      cell.per_subject.clear();
      cell.error = e.what();
    }
  };

  const std::size_t n_cells = result.cells.size();
  const std::size_t n_workers = std::min<std::size_t>(static_cast<std::size_t>(jobs), n_cells);
  if (n_workers <= 1) {
    for (std::size_t i = 0; i < n_cells; ++i) run_cell(i);
    return result;
  }
  std::atomic<std::size_t> next{0};
  std::vector<std::thread> workers;
  workers.reserve(n_workers);
  for (std::size_t t = 0; t < n_workers; ++t) {
    workers.emplace_back([&] {
      for (std::size_t i = next++; i < n_cells; i = next++) run_cell(i);
    });
  }
  for (auto& w : workers) w.join();
  return result;
}

void to_json(nlohmann::json& j, const SweepResult& r) {
  j = nlohmann::json{{"model", to_string(r.model)},
                     {"scheme", to_string(r.scheme)},
                     {"scheme_label", scheme_label(r.scheme)},
                     {"paradigm", to_string(r.paradigm)},
                     {"seed", r.seed}};
  if (const auto b = r.best()) {
    j["best"] = {{"acc", b->accuracy}, {"window", b->window_s}, {"hop", b->hop}};
  } else {
    j["best"] = nullptr;
  }
  nlohmann::json per_subject = nlohmann::json::object();
  nlohmann::json errors = nlohmann::json::object();
  for (std::size_t w = 0; w < r.windows_s.size(); ++w) {
    for (std::size_t h = 0; h < r.hops.size(); ++h) {
      const auto& c = r.cell(w, h);
      const std::string key = std::to_string(r.windows_s[w]) + "/" + std::to_string(r.hops[h]);
      if (c.accuracy) {
        nlohmann::json cell = nlohmann::json::object();
        for (const auto& [s, acc] : c.per_subject) cell[std::to_string(s)] = acc;
        per_subject[key] = cell;
      } else {
        errors[key] = c.error;
      }
    }
  }
  j["per_subject"] = per_subject;
  if (!errors.empty()) j["errors"] = errors;
}

std::string TableRow::hops_label() const {
  std::string out;
  for (std::size_t i = 0; i < hops.size(); ++i) {
    if (i > 0) out += i + 1 == hops.size() ? " and " : ", ";
    out += std::to_string(hops[i]);
  }
  return out;
}

std::vector<TableRow> best_accuracy_table(const std::vector<SweepResult>& sweeps) {
  std::vector<TableRow> rows;
  for (ModelKind kind : kAllModelKinds) {
    for (const auto& sweep : sweeps) {
      if (sweep.model != kind) continue;
      const auto best = sweep.best();
      if (!best) continue;
      TableRow row{kind, best->accuracy, best->window_s, {}};
      const auto w = static_cast<std::size_t>(
          std::find(sweep.windows_s.begin(), sweep.windows_s.end(), best->window_s) - sweep.windows_s.begin());
      for (std::size_t h = 0; h < sweep.hops.size(); ++h) {
        const auto& acc = sweep.cell(w, h).accuracy;
        if (acc && *acc == best->accuracy) row.hops.push_back(sweep.hops[h]);
      }
      rows.push_back(std::move(row));
      break;
    }
  }
  require(!rows.empty(), ErrorCode::Empty, "no sweep produced a successful cell");
  return rows;
}

namespace {

std::string fixed6(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.6f", v);
  return buf;
}

}  // namespace

void write_best_accuracy_csv(std::ostream& out, const std::vector<TableRow>& rows) {
  out << "model,accuracy,window_s,hop\n";
  for (const auto& r : rows) {
    out << to_string(r.model) << ',' << fixed6(r.accuracy) << ',' << r.window_s << ',' << r.hops_label()
        << '\n';
  }
}

void emit_heatmap(std::ostream& out, const SweepResult& sweep) {
  require(!sweep.empty(), ErrorCode::Empty, "empty sweep");
  out << "window_s/hop";
  for (int h : sweep.hops) out << ',' << h;
  out << '\n';
  for (std::size_t w = 0; w < sweep.windows_s.size(); ++w) {
    out << sweep.windows_s[w];
    for (std::size_t h = 0; h < sweep.hops.size(); ++h) {
      const auto& acc = sweep.cell(w, h).accuracy;
      out << ',' << (acc ? fixed6(*acc) : std::string("ERR"));
    }
    out << '\n';
  }
}

void emit_heatmap(const std::filesystem::path& path, const SweepResult& sweep) {
  require(!sweep.empty(), ErrorCode::Empty, "empty sweep");
  std::ofstream out(path);
  require(out.good(), ErrorCode::IoError, "cannot write " + path.string());
  emit_heatmap(out, sweep);
  require(out.good(), ErrorCode::IoError, "write failed for " + path.string());
}

namespace {

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::stringstream ss(line);
  std::string field;
  while (std::getline(ss, field, ',')) out.push_back(field);
  return out;
}

int parse_int_field(const std::string& s) {
  try {
    std::size_t used = 0;
    const int v = std::stoi(s, &used);
    require(used == s.size(), ErrorCode::BadFormat, "bad integer '" + s + "'");
    return v;
  } catch (const std::logic_error&) {
    throw Error(ErrorCode::BadFormat, "bad integer '" + s + "'");
  }
}

}  // namespace

Heatmap parse_heatmap(std::istream& in) {
  Heatmap map;
  std::string line;
  require(static_cast<bool>(std::getline(in, line)), ErrorCode::Empty, "empty heatmap");
  const auto header = split_csv_line(line);
  require(header.size() >= 2 && header[0] == "window_s/hop", ErrorCode::BadFormat, "bad heatmap header");
  for (std::size_t i = 1; i < header.size(); ++i) map.hops.push_back(parse_int_field(header[i]));
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto fields = split_csv_line(line);
    require(fields.size() == header.size(), ErrorCode::BadFormat, "ragged heatmap row");
    map.windows_s.push_back(parse_int_field(fields[0]));
    auto& row = map.values.emplace_back();
    for (std::size_t i = 1; i < fields.size(); ++i) {
      if (fields[i] == "ERR") {
        row.emplace_back();
      } else {
        try {
          row.emplace_back(std::stod(fields[i]));
        } catch (const std::logic_error&) {
          throw Error(ErrorCode::BadFormat, "bad heatmap cell '" + fields[i] + "'");
        }
      }
    }
  }
  return map;
}

}  // namespace eegstate
