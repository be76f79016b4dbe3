#pragma once

#include <stdexcept>
#include <string>

namespace mixwass {

enum class ErrorCode {
  // validation
  InvalidParam,
  DimError,
  InvalidCost,
  InvalidSimplex,
  ParseError,
  InfeasibleRow,
  // numerical
  InvalidMatrix,
  Unbounded,
  Infeasible,
  IterationLimit,
  DegenerateSupport,
  SingularInformation,
  SingularDesign,
};

inline const char* to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::InvalidParam: return "InvalidParam";
    case ErrorCode::DimError: return "DimError";
    case ErrorCode::InvalidCost: return "InvalidCost";
    case ErrorCode::InvalidSimplex: return "InvalidSimplex";
    case ErrorCode::ParseError: return "ParseError";
    case ErrorCode::InfeasibleRow: return "InfeasibleRow";
    case ErrorCode::InvalidMatrix: return "InvalidMatrix";
    case ErrorCode::Unbounded: return "Unbounded";
    case ErrorCode::Infeasible: return "Infeasible";
    case ErrorCode::IterationLimit: return "IterationLimit";
    case ErrorCode::DegenerateSupport: return "DegenerateSupport";
    case ErrorCode::SingularInformation: return "SingularInformation";
    case ErrorCode::SingularDesign: return "SingularDesign";
  }
  return "Unknown";
}

/// Every failure raised by the library carries a code; the CLI maps
/// validation codes to exit status 2 and numerical codes to 3.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

  bool is_validation() const noexcept {
    switch (code_) {
      case ErrorCode::InvalidParam:
      case ErrorCode::DimError:
      case ErrorCode::InvalidCost:
      case ErrorCode::InvalidSimplex:
      case ErrorCode::ParseError:
      case ErrorCode::InfeasibleRow:
        return true;
      default:
        return false;
    }
  }

 private:
  ErrorCode code_;
};

[[noreturn]] inline void fail(ErrorCode code, const std::string& what) { throw Error(code, what); }

inline void require(bool cond, ErrorCode code, const std::string& what) {
  if (!cond) fail(code, what);
}

}  // namespace mixwass
