#pragma once

#include <atomic>
#include <iostream>
#include <stdexcept>
#include <string>
#include <string_view>

namespace pobs_sl {

enum class ErrorCode {
  EmptyData,
  AllCensored,
  TauOutOfRange,
  DegenerateJackknife,
  DimensionMismatch,
  NonFinite,
  SingularDesign,
  BadFoldCount,
  DegenerateKMFold,
  ZeroCensorWeight,
  ClampRequired,
  UnknownLearner,
  BadHyperparameter,
  Parse,
  Schema,
  IO,
};

constexpr std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::EmptyData: return "EmptyData";
    case ErrorCode::AllCensored: return "AllCensored";
    case ErrorCode::TauOutOfRange: return "TauOutOfRange";
    case ErrorCode::DegenerateJackknife: return "DegenerateJackknife";
    case ErrorCode::DimensionMismatch: return "DimensionMismatch";
    case ErrorCode::NonFinite: return "NonFinite";
    case ErrorCode::SingularDesign: return "SingularDesign";
    case ErrorCode::BadFoldCount: return "BadFoldCount";
    case ErrorCode::DegenerateKMFold: return "DegenerateKMFold";
    case ErrorCode::ZeroCensorWeight: return "ZeroCensorWeight";
    case ErrorCode::ClampRequired: return "ClampRequired";
    case ErrorCode::UnknownLearner: return "UnknownLearner";
    case ErrorCode::BadHyperparameter: return "BadHyperparameter";
    case ErrorCode::Parse: return "Parse";
    case ErrorCode::Schema: return "Schema";
    case ErrorCode::IO: return "IO";
  }
  return "Unknown";
}

// Process exit status for a failure of the given kind: 2 validation, 3 data, 4 numeric.
constexpr int exit_status(ErrorCode code) {
  switch (code) {
    case ErrorCode::BadFoldCount:
    case ErrorCode::ClampRequired:
    case ErrorCode::UnknownLearner:
    case ErrorCode::BadHyperparameter:
    case ErrorCode::Schema:
      return 2;
    case ErrorCode::EmptyData:
    case ErrorCode::AllCensored:
    case ErrorCode::TauOutOfRange:
    case ErrorCode::DimensionMismatch:
    case ErrorCode::DegenerateKMFold:
    case ErrorCode::Parse:
    case ErrorCode::IO:
      return 3;
    case ErrorCode::DegenerateJackknife:
    case ErrorCode::NonFinite:
    case ErrorCode::SingularDesign:
    case ErrorCode::ZeroCensorWeight:
      return 4;
  }
  return 1;
}

/// Library-wide exception. Carries a stable code and the module that raised it,
/// so callers can print `module.Code: message`.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, std::string_view module, const std::string& message)
      : std::runtime_error(message), code_(code), module_(module) {}

  ErrorCode code() const noexcept { return code_; }
  const std::string& module() const noexcept { return module_; }
  std::string qualified_code() const { return module_ + "." + std::string(to_string(code_)); }

 private:
  ErrorCode code_;
  std::string module_;
};

namespace log {

inline std::atomic<bool>& warnings_enabled() {
  static std::atomic<bool> enabled{true};
  return enabled;
}

inline void warn(std::string_view module, std::string_view message) {
  if (warnings_enabled().load(std::memory_order_relaxed)) {
    std::clog << "warning [" << module << "]: " << message << '\n';
  }
}

}  // namespace log

}  // namespace pobs_sl
