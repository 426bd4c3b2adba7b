#pragma once

#include <stdexcept>
#include <string>

namespace mcurv {

enum class ErrorCode {
  Domain,
  Malformed,
  StepSizeUnderflow,
  BracketLost,
  DegenerateSolution,
  BoundViolation,
  BracketFailure,
  SeedFailure,
  NodalJump,
  MissingSolution,
  WeightVanishes,
  Parse,
  Io,
};

inline const char* to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::Domain: return "Domain";
    case ErrorCode::Malformed: return "Malformed";
    case ErrorCode::StepSizeUnderflow: return "StepSizeUnderflow";
    case ErrorCode::BracketLost: return "BracketLost";
    case ErrorCode::DegenerateSolution: return "DegenerateSolution";
    case ErrorCode::BoundViolation: return "BoundViolation";
    case ErrorCode::BracketFailure: return "BracketFailure";
    case ErrorCode::SeedFailure: return "SeedFailure";
    case ErrorCode::NodalJump: return "NodalJump";
    case ErrorCode::MissingSolution: return "MissingSolution";
    case ErrorCode::WeightVanishes: return "WeightVanishes";
    case ErrorCode::Parse: return "Parse";
    case ErrorCode::Io: return "Io";
  }
  return "Unknown";
}

/// Every failure raised by the library carries a machine-readable code.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

  /// Input-side failures (exit code 1 in the CLI) vs numeric ones (exit code 2).
  bool is_usage() const noexcept {
    return code_ == ErrorCode::Malformed || code_ == ErrorCode::Parse || code_ == ErrorCode::Io;
  }

 private:
  ErrorCode code_;
};

}  // namespace mcurv
