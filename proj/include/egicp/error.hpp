#pragma once

#include <stdexcept>
#include <string>

namespace egicp {

enum class ErrorCode {
  // data errors
  EmptyCloud,
  TooFewPoints,
  EmptySource,
  InvalidResolution,
  LengthMismatch,
  InvalidArgument,
  Io,
  // numerical failures
  AngleAtBoundary,
  SingularInformationMatrix,
  NoValidCorrespondences,
  NumericalDegeneracy,
  SingularSystem,
  SingularMatrix,
};

inline const char* to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::EmptyCloud: return "EmptyCloud";
    case ErrorCode::TooFewPoints: return "TooFewPoints";
    case ErrorCode::EmptySource: return "EmptySource";
    case ErrorCode::InvalidResolution: return "InvalidResolution";
    case ErrorCode::LengthMismatch: return "LengthMismatch";
    case ErrorCode::InvalidArgument: return "InvalidArgument";
    case ErrorCode::Io: return "Io";
    case ErrorCode::AngleAtBoundary: return "AngleAtBoundary";
    case ErrorCode::SingularInformationMatrix: return "SingularInformationMatrix";
    case ErrorCode::NoValidCorrespondences: return "NoValidCorrespondences";
    case ErrorCode::NumericalDegeneracy: return "NumericalDegeneracy";
    case ErrorCode::SingularSystem: return "SingularSystem";
    case ErrorCode::SingularMatrix: return "SingularMatrix";
  }
  return "Unknown";
}

/// True for errors caused by the numerics rather than by the input data.
inline bool is_numerical(ErrorCode code) {
  switch (code) {
    case ErrorCode::AngleAtBoundary:
    case ErrorCode::SingularInformationMatrix:
    case ErrorCode::NoValidCorrespondences:
    case ErrorCode::NumericalDegeneracy:
    case ErrorCode::SingularSystem:
    case ErrorCode::SingularMatrix:
      return true;
    default:
      return false;
  }
}

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace egicp
