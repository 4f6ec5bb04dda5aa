#include "eegstate/standardize.hpp"

#include <algorithm>
#include <cstring>
#include <map>
#include <set>

namespace eegstate {

namespace {

bool bit_equal(const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
  return a.size() == b.size() &&
         std::memcmp(a.data(), b.data(), sizeof(double) * static_cast<std::size_t>(a.size())) == 0;
}

std::string_view kind_name(FitScope::Kind k) {
  switch (k) {
    case FitScope::Kind::Record: return "record";
    case FitScope::Kind::Split: return "split";
    case FitScope::Kind::Unset: break;
  }
  return "unset";
}

void add_reason(LeakageReport& report, std::string reason) {
  if (std::find(report.reasons.begin(), report.reasons.end(), reason) == report.reasons.end()) {
    report.reasons.push_back(std::move(reason));
  }
  report.leaky = true;
}

}  // namespace

std::string_view to_string(Scheme s) noexcept {
  return s == Scheme::PerRecord ? "per-record" : "global-train";
}

Scheme parse_scheme(std::string_view name) {
  if (name == "per-record") return Scheme::PerRecord;
  if (name == "global-train") return Scheme::GlobalTrain;
  throw Error(ErrorCode::BadArgs,
              "unknown scheme '" + std::string(name) + "' (expected per-record or global-train)");
}

std::string_view scheme_label(Scheme s) noexcept {
  return s == Scheme::PerRecord ? "leaky-baseline" : "corrected";
}

bool StandardizerParams::same_bits(const StandardizerParams& other) const noexcept {
  return bit_equal(mu, other.mu) && bit_equal(sigma, other.sigma);
}

void to_json(nlohmann::json& j, const StandardizerParams& p) {
  nlohmann::json scope{{"kind", kind_name(p.fit_scope.kind)}, {"frames", p.fit_scope.frames}};
  if (p.fit_scope.kind == FitScope::Kind::Record) {
    scope["subject"] = p.fit_scope.subject_id;
    scope["record"] = p.fit_scope.record_index;
  } else if (p.fit_scope.kind == FitScope::Kind::Split) {
    scope["split"] = p.fit_scope.split_id;
  }
  j = nlohmann::json{{"scheme", to_string(p.scheme)},
                     {"label", scheme_label(p.scheme)},
                     {"fit_scope", scope},
                     {"mu", std::vector<double>(p.mu.data(), p.mu.data() + p.mu.size())},
                     {"sigma", std::vector<double>(p.sigma.data(), p.sigma.data() + p.sigma.size())}};
}

void from_json(const nlohmann::json& j, StandardizerParams& p) {
  p.scheme = parse_scheme(j.at("scheme").get<std::string>());
  const auto mu = j.at("mu").get<std::vector<double>>();
  const auto sigma = j.at("sigma").get<std::vector<double>>();
  require(mu.size() == sigma.size(), ErrorCode::BadFormat, "mu/sigma length mismatch");
  p.mu = Eigen::Map<const Eigen::VectorXd>(mu.data(), static_cast<Eigen::Index>(mu.size()));
  p.sigma = Eigen::Map<const Eigen::VectorXd>(sigma.data(), static_cast<Eigen::Index>(sigma.size()));
  p.fit_scope = FitScope{};
  if (!j.contains("fit_scope") || j.at("fit_scope").is_null()) return;
  const auto& s = j.at("fit_scope");
  const auto kind = s.value("kind", std::string("unset"));
  if (kind == "record") {
    p.fit_scope.kind = FitScope::Kind::Record;
    p.fit_scope.subject_id = s.value("subject", 0);
    p.fit_scope.record_index = s.value("record", 0);
  } else if (kind == "split") {
    p.fit_scope.kind = FitScope::Kind::Split;
    p.fit_scope.split_id = s.value("split", std::string());
  }
  if (s.contains("frames")) p.fit_scope.frames = s.at("frames").get<IndexSet>();
}

void column_moments(const FeatureSet& set, std::span<const std::size_t> rows,
                    Eigen::VectorXd& mu, Eigen::VectorXd& sigma) {
  const Eigen::Index dim = set.features.cols();
  const auto n = static_cast<double>(rows.size());
  mu = Eigen::VectorXd::Zero(dim);
  for (std::size_t r : rows) mu += set.features.row(static_cast<Eigen::Index>(r)).transpose();
  mu /= n;
  Eigen::VectorXd var = Eigen::VectorXd::Zero(dim);
  for (std::size_t r : rows) {
    var += (set.features.row(static_cast<Eigen::Index>(r)).transpose() - mu).array().square().matrix();
  }
  sigma = (var / n).cwiseSqrt();
  for (Eigen::Index j = 0; j < dim; ++j) {
    if (!(sigma[j] >= kSigmaFloor)) sigma[j] = 1.0;
  }
}

StandardizerParams fit_per_record(const FeatureSet& set, std::span<const std::size_t> frames) {
  require(frames.size() >= 2, ErrorCode::TooFewFrames, "per-record fit needs >= 2 frames");
  const auto& first = set.frames.at(frames.front());
  for (std::size_t i : frames) {
    const auto& f = set.frames.at(i);
    require(f.subject_id == first.subject_id && f.record_index == first.record_index,
            ErrorCode::MixedRecords, "per-record fit given frames from more than one record");
  }
  StandardizerParams p;
  p.scheme = Scheme::PerRecord;
  column_moments(set, frames, p.mu, p.sigma);
  p.fit_scope.kind = FitScope::Kind::Record;
  p.fit_scope.subject_id = first.subject_id;
  p.fit_scope.record_index = first.record_index;
  p.fit_scope.frames.assign(frames.begin(), frames.end());
  std::sort(p.fit_scope.frames.begin(), p.fit_scope.frames.end());
  return p;
}

StandardizerParams fit_global_train(const FeatureSet& set, const DatasetSplit& split) {
  require(!split.train.empty(), ErrorCode::EmptyTrain, "split has no training frames");
  for (std::size_t i : split.train) {
    require(i < static_cast<std::size_t>(set.size()), ErrorCode::BadArgs, "train index out of range");
  }
  StandardizerParams p;
  p.scheme = Scheme::GlobalTrain;
  column_moments(set, split.train, p.mu, p.sigma);
  p.fit_scope.kind = FitScope::Kind::Split;
  p.fit_scope.split_id = split.identity();
  p.fit_scope.frames = split.train;
  return p;
}

Eigen::MatrixXd StandardizationRun::transform(const FeatureSet& set) const {
  require(params.size() == applied_to.size(), ErrorCode::IncompleteMetadata,
          "params and applied_to disagree");
  Eigen::MatrixXd out = set.features;
  for (std::size_t p = 0; p < params.size(); ++p) {
    const auto& prm = params[p];
    require(prm.mu.size() == set.features.cols(), ErrorCode::LengthMismatch,
            "standardizer dimension does not match features");
    for (std::size_t i : applied_to[p]) {
      const auto r = static_cast<Eigen::Index>(i);
      out.row(r) = ((set.features.row(r).transpose().array() - prm.mu.array()) / prm.sigma.array())
                       .matrix()
                       .transpose();
    }
  }
  return out;
}

void to_json(nlohmann::json& j, const StandardizationRun& run) {
  j = nlohmann::json{{"scheme", to_string(run.scheme)},
                     {"label", scheme_label(run.scheme)},
                     {"split", run.split},
                     {"params", run.params},
                     {"applied_to", run.applied_to}};
}

void from_json(const nlohmann::json& j, StandardizationRun& run) {
  require(j.contains("scheme") && j.contains("split") && j.contains("params") &&
              j.contains("applied_to"),
          ErrorCode::IncompleteMetadata, "run descriptor needs scheme, split, params, applied_to");
  run.scheme = parse_scheme(j.at("scheme").get<std::string>());
  run.split = j.at("split").get<DatasetSplit>();
  run.params = j.at("params").get<std::vector<StandardizerParams>>();
  run.applied_to = j.at("applied_to").get<std::vector<IndexSet>>();
}

StandardizationRun standardize(const FeatureSet& set, const DatasetSplit& split, Scheme scheme) {
  split.validate(set);
  StandardizationRun run;
  run.scheme = scheme;
  run.split = split;

  IndexSet covered;
  covered.reserve(split.train.size() + split.validation.size() + split.test.size());
  for (const IndexSet* s : {&split.train, &split.validation, &split.test}) {
    covered.insert(covered.end(), s->begin(), s->end());
  }
  std::sort(covered.begin(), covered.end());

  if (scheme == Scheme::GlobalTrain) {
    run.params.push_back(fit_global_train(set, split));
    run.applied_to.push_back(std::move(covered));
    return run;
  }

  // Each record touched by the split is standardized with statistics of the whole record.
  std::map<std::pair<int, int>, IndexSet> record_frames;
  std::set<std::pair<int, int>> touched;
  for (std::size_t i = 0; i < set.frames.size(); ++i) {
    record_frames[{set.frames[i].subject_id, set.frames[i].record_index}].push_back(i);
  }
  for (std::size_t i : covered) touched.insert({set.frames[i].subject_id, set.frames[i].record_index});
  const std::set<std::size_t> covered_set(covered.begin(), covered.end());
  for (const auto& key : touched) {
    const auto& frames = record_frames.at(key);
    run.params.push_back(fit_per_record(set, frames));
    IndexSet applied;
    for (std::size_t i : frames) {
      if (covered_set.count(i)) applied.push_back(i);
    }
    run.applied_to.push_back(std::move(applied));
  }
  return run;
}

void to_json(nlohmann::json& j, const LeakageReport& r) {
  j = nlohmann::json{{"verdict", r.verdict()},
                     {"probe_changed_params", r.probe_changed_params},
                     {"reasons", r.reasons}};
}

LeakageReport audit_leakage(const FeatureSet& set, const StandardizationRun& run,
                            double probe_delta) {
  require(!run.params.empty() && run.params.size() == run.applied_to.size(),
          ErrorCode::IncompleteMetadata, "run lacks fitted parameters or their application map");
  for (const auto& p : run.params) {
    require(p.fit_scope.complete(), ErrorCode::IncompleteMetadata, "standardizer lacks fit_scope");
  }
  run.split.validate(set);

  const auto n = static_cast<std::size_t>(set.size());
  enum : char { Outside = 0, Train, Validation, Test };
  std::vector<char> role(n, Outside);
  for (std::size_t i : run.split.train) role[i] = Train;
  for (std::size_t i : run.split.validation) role[i] = Validation;
  for (std::size_t i : run.split.test) role[i] = Test;

  LeakageReport report;
  for (std::size_t p = 0; p < run.params.size(); ++p) {
    bool reads_test = false;
    bool reads_validation = false;
    bool reads_outside = false;
    for (std::size_t i : run.params[p].fit_scope.frames) {
      require(i < n, ErrorCode::IncompleteMetadata, "fit scope frame out of range");
      reads_test |= role[i] == Test;
      reads_validation |= role[i] == Validation;
      reads_outside |= role[i] == Outside;
    }
    bool applied_to_train = false;
    for (std::size_t i : run.applied_to[p]) applied_to_train |= i < n && role[i] == Train;

    if (reads_test) add_reason(report, "fit scope contains test frames");
    if (reads_validation) add_reason(report, "fit scope contains validation frames");
    if (reads_outside) add_reason(report, "fit scope contains frames outside the split");
    if (applied_to_train && reads_test) add_reason(report, "train transform used test statistics");
    if (applied_to_train && reads_validation) {
      add_reason(report, "train transform used validation statistics");
    }
  }

  // Mutation probe: shift every held-out row and refit.
  FeatureSet probed = set;
  for (std::size_t i = 0; i < n; ++i) {
    if (role[i] == Validation || role[i] == Test) {
      probed.features.row(static_cast<Eigen::Index>(i)).array() += probe_delta;
    }
  }
  const StandardizationRun refit = standardize(probed, run.split, run.scheme);
  const StandardizationRun baseline = standardize(set, run.split, run.scheme);
  bool changed = refit.params.size() != baseline.params.size();
  for (std::size_t p = 0; !changed && p < baseline.params.size(); ++p) {
    changed = !baseline.params[p].same_bits(refit.params[p]);
  }
  if (changed) {
    report.probe_changed_params = true;
    add_reason(report, "mutation probe changed fitted parameters");
  }
  return report;
}

}  // namespace eegstate
