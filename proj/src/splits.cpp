#include "eegstate/splits.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <random>
#include <set>

namespace eegstate {

namespace {

DatasetSplit shuffle_split(IndexSet pool, Paradigm paradigm, double train_fraction,
                           std::uint64_t seed, bool carve_validation) {
  require(std::isfinite(train_fraction) && train_fraction > 0.0 && train_fraction < 1.0,
          ErrorCode::BadFraction, "train fraction must lie strictly between 0 and 1");
  std::mt19937_64 rng(seed);
  std::shuffle(pool.begin(), pool.end(), rng);
  const auto n_train =
      static_cast<std::size_t>(std::floor(train_fraction * static_cast<double>(pool.size())));
  const auto n_val = carve_validation
                         ? static_cast<std::size_t>(std::floor(kValidationCarveFraction *
                                                               static_cast<double>(n_train)))
                         : std::size_t{0};

  DatasetSplit split;
  split.paradigm = paradigm;
  split.rng_seed = seed;
  split.train.assign(pool.begin(), pool.begin() + static_cast<std::ptrdiff_t>(n_train - n_val));
  split.validation.assign(pool.begin() + static_cast<std::ptrdiff_t>(n_train - n_val),
                          pool.begin() + static_cast<std::ptrdiff_t>(n_train));
  split.test.assign(pool.begin() + static_cast<std::ptrdiff_t>(n_train), pool.end());
  std::sort(split.train.begin(), split.train.end());
  std::sort(split.validation.begin(), split.validation.end());
  std::sort(split.test.begin(), split.test.end());
  return split;
}

bool has_subject(const FeatureSet& features, int subject) {
  return std::any_of(features.frames.begin(), features.frames.end(),
                     [&](const FrameInfo& f) { return f.subject_id == subject; });
}

}  // namespace

std::string_view to_string(Paradigm p) noexcept {
  switch (p) {
    case Paradigm::CommonSubject: return "common-subject";
    case Paradigm::SubjectSpecific: return "subject-specific";
    case Paradigm::LeaveOneOut: return "leave-one-out";
  }
  return "?";
}

Paradigm parse_paradigm(std::string_view name) {
  if (name == "common-subject" || name == "common") return Paradigm::CommonSubject;
  if (name == "subject-specific" || name == "subject") return Paradigm::SubjectSpecific;
  if (name == "leave-one-out" || name == "loso") return Paradigm::LeaveOneOut;
  throw Error(ErrorCode::BadArgs, "unknown paradigm '" + std::string(name) +
                                      "' (expected common-subject, subject-specific, leave-one-out)");
}

std::string DatasetSplit::identity() const {
  std::string id(to_string(paradigm));
  if (test_subject) id += "/test=" + std::to_string(*test_subject);
  if (subject) id += "/subject=" + std::to_string(*subject);
  id += "/seed=" + std::to_string(rng_seed);
  return id;
}

void DatasetSplit::validate(const FeatureSet& features) const {
  const auto n = static_cast<std::size_t>(features.size());
  std::vector<char> seen(n, 0);
  for (const IndexSet* set : {&train, &validation, &test}) {
    for (std::size_t i : *set) {
      require(i < n, ErrorCode::BadArgs, "split index out of range");
      require(!seen[i], ErrorCode::BadArgs, "split sets overlap at frame " + std::to_string(i));
      seen[i] = 1;
    }
  }
  if (paradigm == Paradigm::LeaveOneOut) {
    require(test_subject.has_value(), ErrorCode::BadArgs, "leave-one-out split lacks a test subject");
    for (std::size_t i : test) {
      require(features.frames[i].subject_id == *test_subject, ErrorCode::BadArgs,
              "test frame from a non-test subject");
    }
    for (const IndexSet* set : {&train, &validation}) {
      for (std::size_t i : *set) {
        require(features.frames[i].subject_id != *test_subject, ErrorCode::BadArgs,
                "test subject frame outside the test set");
      }
    }
  }
}

void to_json(nlohmann::json& j, const DatasetSplit& split) {
  j = nlohmann::json{{"paradigm", to_string(split.paradigm)},
                     {"test_subject", split.test_subject ? nlohmann::json(*split.test_subject) : nlohmann::json()},
                     {"seed", split.rng_seed},
                     {"train", split.train},
                     {"validation", split.validation},
                     {"test", split.test}};
  if (split.subject) j["subject"] = *split.subject;
}

void from_json(const nlohmann::json& j, DatasetSplit& split) {
  split.paradigm = parse_paradigm(j.at("paradigm").get<std::string>());
  split.test_subject.reset();
  if (j.contains("test_subject") && !j.at("test_subject").is_null()) {
    split.test_subject = j.at("test_subject").get<int>();
  }
  split.subject.reset();
  if (j.contains("subject") && !j.at("subject").is_null()) split.subject = j.at("subject").get<int>();
  split.rng_seed = j.at("seed").get<std::uint64_t>();
  split.train = j.at("train").get<IndexSet>();
  split.validation = j.at("validation").get<IndexSet>();
  split.test = j.at("test").get<IndexSet>();
}

DatasetManifest drop_habituation(const DatasetManifest& manifest) {
  DatasetManifest out;
  for (const auto& e : manifest.entries) {
    if (e.record > 2) out.entries.push_back(e);
  }
  const auto before = manifest.record_counts();
  const auto after = out.record_counts();
  for (const auto& [subject, n] : before) {
    require(after.count(subject) > 0, ErrorCode::EmptyAfterDrop,
            "subject " + std::to_string(subject) + " has no records after dropping habituation");
  }
  return out;
}

std::vector<RawRecord> drop_habituation(const std::vector<RawRecord>& records) {
  std::set<int> subjects;
  std::set<int> kept_subjects;
  std::vector<RawRecord> out;
  for (const auto& r : records) {
    subjects.insert(r.subject_id);
    if (r.record_index > 2) {
      kept_subjects.insert(r.subject_id);
      out.push_back(r);
    }
  }
  for (int s : subjects) {
    require(kept_subjects.count(s) > 0, ErrorCode::EmptyAfterDrop,
            "subject " + std::to_string(s) + " has no records after dropping habituation");
  }
  return out;
}

RawRecord cap_40min(RawRecord record) {
  if (record.samples.rows() > kCapSamples) {
    record.samples.conservativeResize(kCapSamples, Eigen::NoChange);
  }
  return record;
}

DatasetSplit split_leave_one_out(const FeatureSet& features, int test_subject) {
  require(has_subject(features, test_subject), ErrorCode::UnknownSubject,
          "subject " + std::to_string(test_subject) + " not in feature set");
  const auto subjects = features.subjects();
  require(subjects.size() >= 2, ErrorCode::TooFewSubjects,
          "leave-one-out needs at least one subject besides the test subject");

  std::map<int, int> last_record;
  for (const auto& f : features.frames) {
    if (f.subject_id == test_subject) continue;
    auto& last = last_record[f.subject_id];
    last = std::max(last, f.record_index);
  }

  DatasetSplit split;
  split.paradigm = Paradigm::LeaveOneOut;
  split.test_subject = test_subject;
  for (std::size_t i = 0; i < features.frames.size(); ++i) {
    const auto& f = features.frames[i];
    if (f.subject_id == test_subject) {
      split.test.push_back(i);
    } else if (f.record_index == last_record.at(f.subject_id)) {
      split.validation.push_back(i);
    } else {
      split.train.push_back(i);
    }
  }
  return split;
}

DatasetSplit split_common_subject(const FeatureSet& features, double train_fraction,
                                  std::uint64_t seed, bool carve_validation) {
  IndexSet pool(features.frames.size());
  std::iota(pool.begin(), pool.end(), std::size_t{0});
  return shuffle_split(std::move(pool), Paradigm::CommonSubject, train_fraction, seed,
                       carve_validation);
}

DatasetSplit split_subject_specific(const FeatureSet& features, int subject,
                                    double train_fraction, std::uint64_t seed,
                                    bool carve_validation) {
  require(has_subject(features, subject), ErrorCode::UnknownSubject,
          "subject " + std::to_string(subject) + " not in feature set");
  IndexSet pool;
  for (std::size_t i = 0; i < features.frames.size(); ++i) {
    if (features.frames[i].subject_id == subject) pool.push_back(i);
  }
  auto split = shuffle_split(std::move(pool), Paradigm::SubjectSpecific, train_fraction, seed,
                             carve_validation);
  split.subject = subject;
  return split;
}

}  // namespace eegstate
