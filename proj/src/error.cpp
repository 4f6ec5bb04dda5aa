#include "eegstate/error.hpp"

namespace eegstate {

std::string_view to_string(ErrorCode code) noexcept {
  switch (code) {
    case ErrorCode::BadArgs: return "BadArgs";
    case ErrorCode::BadFormat: return "BadFormat";
    case ErrorCode::IoError: return "IoError";
    case ErrorCode::MissingChannel: return "MissingChannel";
    case ErrorCode::RaggedChannels: return "RaggedChannels";
    case ErrorCode::BadSampleRate: return "BadSampleRate";
    case ErrorCode::DuplicateRecord: return "DuplicateRecord";
    case ErrorCode::OutOfHorizon: return "OutOfHorizon";
    case ErrorCode::SignalTooShort: return "SignalTooShort";
    case ErrorCode::BadShape: return "BadShape";
    case ErrorCode::NegativePower: return "NegativePower";
    case ErrorCode::EmptyAfterDrop: return "EmptyAfterDrop";
    case ErrorCode::UnknownSubject: return "UnknownSubject";
    case ErrorCode::TooFewSubjects: return "TooFewSubjects";
    case ErrorCode::BadFraction: return "BadFraction";
    case ErrorCode::TooFewFrames: return "TooFewFrames";
    case ErrorCode::MixedRecords: return "MixedRecords";
    case ErrorCode::EmptyTrain: return "EmptyTrain";
    case ErrorCode::LengthMismatch: return "LengthMismatch";
    case ErrorCode::IncompleteMetadata: return "IncompleteMetadata";
    case ErrorCode::ShapeMismatch: return "ShapeMismatch";
    case ErrorCode::MissingValidation: return "MissingValidation";
    case ErrorCode::NotFitted: return "NotFitted";
    case ErrorCode::Empty: return "Empty";
  }
  return "Unknown";
}

}  // namespace eegstate
