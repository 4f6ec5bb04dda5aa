#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace eegstate {

enum class ErrorCode {
  BadArgs,
  BadFormat,
  IoError,
  MissingChannel,
  RaggedChannels,
  BadSampleRate,
  DuplicateRecord,
  OutOfHorizon,
  SignalTooShort,
  BadShape,
  NegativePower,
  EmptyAfterDrop,
  UnknownSubject,
  TooFewSubjects,
  BadFraction,
  TooFewFrames,
  MixedRecords,
  EmptyTrain,
  LengthMismatch,
  IncompleteMetadata,
  ShapeMismatch,
  MissingValidation,
  NotFitted,
  Empty,
};

std::string_view to_string(ErrorCode code) noexcept;

/// Every failure raised by the library carries one of the codes above so
/// callers (and the CLI exit-code mapping) can branch without string matching.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

inline void require(bool cond, ErrorCode code, const std::string& what) {
  if (!cond) throw Error(code, what);
}

}  // namespace eegstate
