#pragma once

#include <functional>
#include <random>

#include <gtest/gtest.h>

#include "eegstate/data.hpp"
#include "eegstate/features.hpp"
#include "eegstate/error.hpp"

namespace testutil {

/// Code of the eegstate::Error thrown by f; records a failure when nothing is thrown.
inline eegstate::ErrorCode code_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const eegstate::Error& e) {
    return e.code();
  }
  ADD_FAILURE() << "no eegstate::Error thrown";
  return eegstate::ErrorCode::Empty;
}

inline eegstate::RawRecord random_record(int subject, int record, Eigen::Index n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> g(0.0, 25.0);
  eegstate::RawRecord r;
  r.subject_id = subject;
  r.record_index = record;
  r.samples.resize(n, eegstate::kNumChannels);
  for (Eigen::Index i = 0; i < r.samples.size(); ++i) r.samples.data()[i] = g(rng);
  return r;
}

struct RecordShape {
  int subject;
  int record;
  int frames;
};

/// FeatureSet with random feature values and the given record layout. Labels follow the
/// quarter/quarter/half protocol within each record.
inline eegstate::FeatureSet make_feature_set(const std::vector<RecordShape>& shapes, std::uint64_t seed,
                                             Eigen::Index dim = eegstate::kFeatureDim) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> g(-40.0, 6.0);
  eegstate::FeatureSet set;
  int total = 0;
  for (const auto& s : shapes) total += s.frames;
  set.features.resize(total, dim);
  int row = 0;
  for (const auto& s : shapes) {
    for (int f = 0; f < s.frames; ++f, ++row) {
      const double t = f + 0.5;
      set.frames.push_back({s.subject, s.record, t,
                            eegstate::label_at(t, static_cast<double>(s.frames))});
      for (Eigen::Index j = 0; j < dim; ++j) set.features(row, j) = g(rng) + 0.1 * s.record;
    }
  }
  return set;
}

}  // namespace testutil
