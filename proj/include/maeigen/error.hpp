#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace maeigen {

enum class ErrorCode {
  NonConvexInput,
  TooFewVertices,
  DegenerateArea,
  PointOutsideDomain,
  MeshTooCoarse,
  InvalidSpacing,
  NotConvexified,
  IndexOutOfRange,
  NegativeMass,
  NonFiniteMass,
  DidNotConverge,
  ZeroDenominator,
  MeshMismatch,
  DegenerateInitialData,
  ZeroInitialData,
  ZeroRayleigh,
  MaxIterationsExceeded,
  ShootingBracketFailure,
  TraceTooShort,
  DegenerateDirection,
  ParseError,
  ValidationError,
};

constexpr std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::NonConvexInput: return "NonConvexInput";
    case ErrorCode::TooFewVertices: return "TooFewVertices";
    case ErrorCode::DegenerateArea: return "DegenerateArea";
    case ErrorCode::PointOutsideDomain: return "PointOutsideDomain";
    case ErrorCode::MeshTooCoarse: return "MeshTooCoarse";
    case ErrorCode::InvalidSpacing: return "InvalidSpacing";
    case ErrorCode::NotConvexified: return "NotConvexified";
    case ErrorCode::IndexOutOfRange: return "IndexOutOfRange";
    case ErrorCode::NegativeMass: return "NegativeMass";
    case ErrorCode::NonFiniteMass: return "NonFiniteMass";
    case ErrorCode::DidNotConverge: return "DidNotConverge";
    case ErrorCode::ZeroDenominator: return "ZeroDenominator";
    case ErrorCode::MeshMismatch: return "MeshMismatch";
    case ErrorCode::DegenerateInitialData: return "DegenerateInitialData";
    case ErrorCode::ZeroInitialData: return "ZeroInitialData";
    case ErrorCode::ZeroRayleigh: return "ZeroRayleigh";
    case ErrorCode::MaxIterationsExceeded: return "MaxIterationsExceeded";
    case ErrorCode::ShootingBracketFailure: return "ShootingBracketFailure";
    case ErrorCode::TraceTooShort: return "TraceTooShort";
    case ErrorCode::DegenerateDirection: return "DegenerateDirection";
    case ErrorCode::ParseError: return "ParseError";
    case ErrorCode::ValidationError: return "ValidationError";
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

}  // namespace maeigen
