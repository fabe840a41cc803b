#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace specfda {

enum class ErrorCode {
  NonSymmetric,
  NonFinite,
  NotPsd,
  BadSize,
  ShapeMismatch,
  OutOfDomain,
  TruncationTooLarge,
  BadLambda,
  OutOfSpectralRange,
  BadExponent,
  NoPairs,
  PairCapExceeded,
  BadRule,
  BadVariances,
  BadScheme,
  DegenerateCells,
  BadConfig,
  Io,
};

constexpr std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::NonSymmetric: return "NonSymmetric";
    case ErrorCode::NonFinite: return "NonFinite";
    case ErrorCode::NotPsd: return "NotPsd";
    case ErrorCode::BadSize: return "BadSize";
    case ErrorCode::ShapeMismatch: return "ShapeMismatch";
    case ErrorCode::OutOfDomain: return "OutOfDomain";
    case ErrorCode::TruncationTooLarge: return "TruncationTooLarge";
    case ErrorCode::BadLambda: return "BadLambda";
    case ErrorCode::OutOfSpectralRange: return "OutOfSpectralRange";
    case ErrorCode::BadExponent: return "BadExponent";
    case ErrorCode::NoPairs: return "NoPairs";
    case ErrorCode::PairCapExceeded: return "PairCapExceeded";
    case ErrorCode::BadRule: return "BadRule";
    case ErrorCode::BadVariances: return "BadVariances";
    case ErrorCode::BadScheme: return "BadScheme";
    case ErrorCode::DegenerateCells: return "DegenerateCells";
    case ErrorCode::BadConfig: return "BadConfig";
    case ErrorCode::Io: return "Io";
  }
  return "Unknown";
}

/// Every failure raised by the library carries one of the codes above.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace specfda
