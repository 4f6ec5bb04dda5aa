#include "eegstate/cli.hpp"

#include <cstdio>
#include <fstream>
#include <iostream>
#include <map>

#include <CLI11.hpp>
#include <json.hpp>

#include "eegstate/data.hpp"
#include "eegstate/experiment.hpp"
#include "eegstate/features.hpp"
#include "eegstate/models/classifier.hpp"
#include "eegstate/seed.hpp"
#include "eegstate/splits.hpp"
#include "eegstate/standardize.hpp"
#include "eegstate/training.hpp"

namespace eegstate {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct CommonOptions {
  std::string out = "eegstate_out";
  std::uint64_t seed = kDefaultSeed;
};

struct PipelineOptions {
  std::string manifest;
  std::string paradigm = "leave-one-out";
  std::string scheme = "global-train";
  int window_s = 4;
  int hop = 128;
};

struct TrainOptions {
  TrainConfig config;
  std::vector<std::string> params;  // key=value
};

void write_json(const fs::path& path, const json& j) {
  std::ofstream out(path);
  require(out.good(), ErrorCode::IoError, "cannot write " + path.string());
  out << j.dump(2) << '\n';
  require(out.good(), ErrorCode::IoError, "write failed for " + path.string());
}

fs::path ensure_out(const std::string& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  require(!ec, ErrorCode::IoError, "cannot create " + dir + ": " + ec.message());
  return fs::path(dir);
}

void add_common(CLI::App* cmd, CommonOptions& o) {
  cmd->add_option("--out", o.out, "Output directory")->envname("EEGSTATE_OUT")->capture_default_str();
  cmd->add_option("--seed", o.seed, "Master seed")->capture_default_str();
}

void add_pipeline(CLI::App* cmd, PipelineOptions& o) {
  cmd->add_option("--manifest", o.manifest, "Dataset manifest (JSON)")->required();
  cmd->add_option("--paradigm", o.paradigm, "leave-one-out|common-subject|subject-specific")
      ->capture_default_str();
  cmd->add_option("--scheme", o.scheme, "global-train|per-record")->capture_default_str();
  cmd->add_option("--window", o.window_s, "STFT window length in seconds")->capture_default_str();
  cmd->add_option("--hop", o.hop, "STFT hop in samples")->capture_default_str();
}

void add_training(CLI::App* cmd, TrainOptions& o) {
  cmd->add_option("--lr", o.config.initial_lr, "Initial learning rate")->capture_default_str();
  cmd->add_option("--max-epochs", o.config.max_epochs)->capture_default_str();
  cmd->add_option("--lr-patience", o.config.lr_halving_patience)->capture_default_str();
  cmd->add_option("--stop-patience", o.config.early_stop_patience)->capture_default_str();
  cmd->add_option("--param", o.params, "Model hyperparameter override key=value (repeatable)");
}

ClassifierSpec make_spec(const std::string& model, const std::vector<std::string>& params,
                         std::uint64_t seed) {
  ClassifierSpec spec = ClassifierSpec::defaults(parse_model_kind(model), seed);
  for (const auto& p : params) {
    const auto eq = p.find('=');
    require(eq != std::string::npos && eq > 0, ErrorCode::BadArgs, "--param expects key=value, got '" + p + "'");
    double value = 0.0;
    try {
      value = std::stod(p.substr(eq + 1));
    } catch (const std::logic_error&) {
      throw Error(ErrorCode::BadArgs, "non-numeric value in --param '" + p + "'");
    }
    spec.hyperparameters[p.substr(0, eq)] = value;
  }
  spec.validate();
  return spec;
}

json train_config_json(const TrainConfig& c) {
  return {{"initial_lr", c.initial_lr},
          {"lr_halving_patience", c.lr_halving_patience},
          {"early_stop_patience", c.early_stop_patience},
          {"max_epochs", c.max_epochs},
          {"min_improvement_delta", c.min_improvement_delta}};
}

SpectrogramConfig spectrogram(const PipelineOptions& o) {
  SpectrogramConfig sc;
  sc.window_length_s = o.window_s;
  sc.hop_samples = o.hop;
  sc.validate();
  return sc;
}

json pipeline_json(const PipelineOptions& o, Paradigm paradigm, Scheme scheme) {
  return {{"manifest", o.manifest},
          {"paradigm", to_string(paradigm)},
          {"scheme", to_string(scheme)},
          {"window_s", o.window_s},
          {"hop", o.hop}};
}

std::vector<RawRecord> load_prepared(const std::string& manifest) {
  return prepare_records(load_manifest_records(read_manifest(manifest)));
}

std::string feature_file_name(int subject, int record) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "s%02d_r%02d_features.csv", subject, record);
  return buf;
}

/// Every split the paradigm would evaluate, with the same seeds the experiment uses.
std::vector<DatasetSplit> paradigm_splits(const FeatureSet& features, Paradigm paradigm, std::uint64_t seed) {
  std::vector<DatasetSplit> out;
  switch (paradigm) {
    case Paradigm::LeaveOneOut:
      for (int s : features.subjects()) out.push_back(split_leave_one_out(features, s));
      break;
    case Paradigm::CommonSubject:
      out.push_back(split_common_subject(features, kDefaultTrainFraction, seed));
      break;
    case Paradigm::SubjectSpecific:
      for (int s : features.subjects()) {
        out.push_back(split_subject_specific(features, s, kDefaultTrainFraction,
                                             derive_seed({seed, static_cast<std::uint64_t>(s)})));
      }
      break;
  }
  return out;
}

int cmd_synth(const CommonOptions& common, const SyntheticConfig& config) {
  config.validate();
  const fs::path out = ensure_out(common.out);
  const SyntheticDataset data = generate_synthetic(config);
  for (std::size_t i = 0; i < data.records.size(); ++i) {
    write_record(out / data.manifest.entries[i].path, data.records[i]);
  }
  write_manifest(out / "manifest.json", data.manifest);
  write_json(out / "run_config.json", {{"command", "synth"},
                                       {"out", common.out},
                                       {"subjects", config.n_subjects},
                                       {"records", config.records_per_subject},
                                       {"duration_s", config.duration_s},
                                       {"seed", config.seed}});
  std::cout << "wrote " << data.records.size() << " records and manifest.json to " << out.string() << '\n';
  return kExitOk;
}

int cmd_extract(const CommonOptions& common, const PipelineOptions& p) {
  const SpectrogramConfig sc = spectrogram(p);
  const auto records = load_manifest_records(read_manifest(p.manifest));
  const fs::path out = ensure_out(common.out);
  for (const auto& r : records) {
    write_feature_table(out / feature_file_name(r.subject_id, r.record_index), extract_features(r, sc));
  }
  write_json(out / "run_config.json", {{"command", "extract"},
                                       {"out", common.out},
                                       {"manifest", p.manifest},
                                       {"window_s", p.window_s},
                                       {"hop", p.hop}});
  std::cout << "wrote " << records.size() << " feature tables to " << out.string() << '\n';
  return kExitOk;
}

int cmd_run(const CommonOptions& common, const PipelineOptions& p, const TrainOptions& t,
            const std::string& model) {
  const Paradigm paradigm = parse_paradigm(p.paradigm);
  const Scheme scheme = parse_scheme(p.scheme);
  const ClassifierSpec spec = make_spec(model, t.params, common.seed);
  t.config.validate();
  const SpectrogramConfig sc = spectrogram(p);
  const fs::path out = ensure_out(common.out);

  json config = pipeline_json(p, paradigm, scheme);
  config["command"] = "run";
  config["out"] = common.out;
  config["seed"] = common.seed;
  config["model"] = spec;
  config["train"] = train_config_json(t.config);
  write_json(out / "run_config.json", config);

  const FeatureSet features = extract_features(load_prepared(p.manifest), sc);
  const EvaluationResult result = run_paradigm(features, paradigm, spec, scheme, t.config, true);

  json report = result;
  report["model"] = to_string(spec.kind);
  report["seed"] = common.seed;
  report["window_s"] = p.window_s;
  report["hop"] = p.hop;
  report["leaky_baseline"] = scheme == Scheme::PerRecord;
  if (scheme == Scheme::PerRecord) {
    report["warning"] = "leaky-baseline: per-record standardization reads validation and test statistics";
  }
  write_json(out / "report.json", report);

  std::cout << to_string(spec.kind) << ' ' << to_string(paradigm) << ' ' << scheme_label(scheme)
            << " mean accuracy " << result.mean_accuracy << " (audit "
            << (result.any_leaky() ? "LEAKY" : "CLEAN") << ")\n";
  return kExitOk;
}

int cmd_sweep(const CommonOptions& common, const PipelineOptions& p, const TrainOptions& t,
              const std::vector<std::string>& models, const std::vector<int>& windows,
              const std::vector<int>& hops, int jobs) {
  const Paradigm paradigm = parse_paradigm(p.paradigm);
  const Scheme scheme = parse_scheme(p.scheme);
  t.config.validate();
  require(jobs >= 1, ErrorCode::BadArgs, "--jobs must be >= 1");
  std::vector<ClassifierSpec> specs;
  for (const auto& m : models) specs.push_back(make_spec(m, t.params, common.seed));
  require(!specs.empty(), ErrorCode::BadArgs, "--models is empty");

  std::vector<SweepGrid> grids;
  for (const auto& spec : specs) {
    SweepGrid grid;
    if (!windows.empty()) grid.window_lengths_s = windows;
    if (!hops.empty()) grid.hop_lengths = hops;
    grid.spec = spec;
    grid.scheme = scheme;
    grid.paradigm = paradigm;
    grid.master_seed = common.seed;
    grid.validate();
    grids.push_back(std::move(grid));
  }
  const fs::path out = ensure_out(common.out);

  json config = pipeline_json(p, paradigm, scheme);
  config.erase("window_s");
  config.erase("hop");
  config["command"] = "sweep";
  config["out"] = common.out;
  config["seed"] = common.seed;
  config["models"] = specs;
  config["windows_s"] = grids.front().window_lengths_s;
  config["hops"] = grids.front().hop_lengths;
  config["jobs"] = jobs;
  config["train"] = train_config_json(t.config);
  write_json(out / "run_config.json", config);

  const auto records = load_prepared(p.manifest);
  std::vector<SweepResult> results;
  for (const auto& grid : grids) {
    SweepResult r = run_sweep(records, grid, t.config, jobs);
    const std::string name(to_string(r.model));
    emit_heatmap(out / ("heatmap_" + name + ".csv"), r);
    write_json(out / ("summary_" + name + ".json"), r);
    results.push_back(std::move(r));
  }
  std::ofstream table(out / "best_accuracy.csv");
  require(table.good(), ErrorCode::IoError, "cannot write best_accuracy.csv");
  const auto rows = best_accuracy_table(results);
  write_best_accuracy_csv(table, rows);
  write_best_accuracy_csv(std::cout, rows);
  return kExitOk;
}

int cmd_audit(const CommonOptions& common, const PipelineOptions& p, const std::string& descriptor) {
  const Paradigm paradigm = parse_paradigm(p.paradigm);
  const Scheme scheme = parse_scheme(p.scheme);
  const SpectrogramConfig sc = spectrogram(p);
  const fs::path out = ensure_out(common.out);

  json config = pipeline_json(p, paradigm, scheme);
  config["command"] = "audit";
  config["out"] = common.out;
  config["seed"] = common.seed;
  config["descriptor"] = descriptor.empty() ? json() : json(descriptor);
  write_json(out / "run_config.json", config);

  const FeatureSet features = extract_features(load_prepared(p.manifest), sc);
  std::vector<StandardizationRun> runs;
  if (!descriptor.empty()) {
    std::ifstream in(descriptor);
    require(in.good(), ErrorCode::IoError, "cannot open " + descriptor);
    json j;
    try {
      in >> j;
      runs.push_back(j.get<StandardizationRun>());
    } catch (const json::exception& e) {
      throw Error(ErrorCode::IncompleteMetadata, "descriptor " + descriptor + ": " + e.what());
    }
  } else {
    for (const auto& split : paradigm_splits(features, paradigm, common.seed)) {
      runs.push_back(standardize(features, split, scheme));
    }
    write_json(out / "standardization.json", runs.front());
  }

  json reports = json::array();
  bool leaky = false;
  for (const auto& run : runs) {
    const LeakageReport report = audit_leakage(features, run);
    leaky = leaky || report.leaky;
    reports.push_back(report);
  }
  const char* verdict = leaky ? "LEAKY" : "CLEAN";
  write_json(out / "audit.json", {{"verdict", verdict}, {"scheme", to_string(scheme)},
                                  {"scheme_label", scheme_label(scheme)}, {"folds", reports}});
  std::cout << verdict << '\n';
  if (leaky) {
    for (const auto& r : reports) {
      for (const auto& reason : r.at("reasons")) std::cout << "  " << reason.get<std::string>() << '\n';
      break;
    }
  }
  return leaky ? kExitLeaky : kExitOk;
}

}  // namespace

int run_cli(int argc, const char* const* argv) {
  CLI::App app{"EEG mental-state classification pipeline"};
  app.require_subcommand(1);

  CommonOptions common;
  PipelineOptions pipeline;
  TrainOptions train;

  SyntheticConfig synth;
  synth.seed = kDefaultSeed;
  auto* c_synth = app.add_subcommand("synth", "Generate a synthetic dataset and manifest");
  c_synth->add_option("--out", common.out, "Output directory")->envname("EEGSTATE_OUT")->capture_default_str();
  c_synth->add_option("--subjects", synth.n_subjects)->capture_default_str();
  c_synth->add_option("--records", synth.records_per_subject)->capture_default_str();
  c_synth->add_option("--duration", synth.duration_s, "Record length in seconds")->capture_default_str();
  c_synth->add_option("--seed", synth.seed)->capture_default_str();

  auto* c_extract = app.add_subcommand("extract", "Write one feature table per record");
  add_common(c_extract, common);
  add_pipeline(c_extract, pipeline);

  std::string model = "rf";
  auto* c_run = app.add_subcommand("run", "Evaluate one model under one paradigm");
  add_common(c_run, common);
  add_pipeline(c_run, pipeline);
  add_training(c_run, train);
  c_run->add_option("--model", model, "rf|svm|xgb|dnn4-small|dnn4-large|dnn4|dnn6")->capture_default_str();

  std::vector<std::string> models{"rf"};
  std::vector<int> windows;
  std::vector<int> hops;
  int jobs = 1;
  auto* c_sweep = app.add_subcommand("sweep", "Window x hop grid per model");
  add_common(c_sweep, common);
  add_pipeline(c_sweep, pipeline);
  add_training(c_sweep, train);
  c_sweep->add_option("--models", models, "Comma-separated model kinds")->delimiter(',')->capture_default_str();
  c_sweep->add_option("--windows", windows, "Comma-separated window lengths (s)")->delimiter(',');
  c_sweep->add_option("--hops", hops, "Comma-separated hop lengths (samples)")->delimiter(',');
  c_sweep->add_option("--jobs", jobs, "Parallel grid cells")->capture_default_str();

  std::string descriptor;
  auto* c_audit = app.add_subcommand("audit", "Check a standardization for leakage");
  add_common(c_audit, common);
  add_pipeline(c_audit, pipeline);
  c_audit->add_option("--descriptor", descriptor, "Standardization run JSON to audit");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitUsage;
  }

  try {
    if (c_synth->parsed()) {
      common.seed = synth.seed;
      return cmd_synth(common, synth);
    }
    if (c_extract->parsed()) return cmd_extract(common, pipeline);
    if (c_run->parsed()) return cmd_run(common, pipeline, train, model);
    if (c_sweep->parsed()) return cmd_sweep(common, pipeline, train, models, windows, hops, jobs);
    if (c_audit->parsed()) return cmd_audit(common, pipeline, descriptor);
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitUsage;
  }
  return kExitUsage;
}

int run_cli(const std::vector<std::string>& args) {
  std::vector<const char*> argv{"eegstate"};
  for (const auto& a : args) argv.push_back(a.c_str());
  return run_cli(static_cast<int>(argv.size()), argv.data());
}

}  // namespace eegstate
