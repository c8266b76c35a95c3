#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace condvar {

enum class ErrorCode {
  // validation
  DimensionMismatch,
  IndexOutOfRange,
  InvalidArgument,
  InsufficientData,
  InconsistentSystem,
  OverlappingConstraints,
  DimensionGuard,
  MissingColumn,
  MissingValue,
  NonPositiveForLog,
  UnknownVariable,
  DateOutsideHorizon,
  OverlapEqualityInequality,
  ParseError,
  // numerical
  NotPositiveDefinite,
  SingularDiagonal,
  SingularA0,
  RankDeficientR,
  RankDeficientW,
  RankDeficientStack,
  IndefiniteShockCov,
  TiltingDiverged,
  RegionTooImprobable,
  BudgetExhausted,
  ExplosiveDraw,
};

constexpr std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::DimensionMismatch: return "DimensionMismatch";
    case ErrorCode::IndexOutOfRange: return "IndexOutOfRange";
    case ErrorCode::InvalidArgument: return "InvalidArgument";
    case ErrorCode::InsufficientData: return "InsufficientData";
    case ErrorCode::InconsistentSystem: return "InconsistentSystem";
    case ErrorCode::OverlappingConstraints: return "OverlappingConstraints";
    case ErrorCode::DimensionGuard: return "DimensionGuard";
    case ErrorCode::MissingColumn: return "MissingColumn";
    case ErrorCode::MissingValue: return "MissingValue";
    case ErrorCode::NonPositiveForLog: return "NonPositiveForLog";
    case ErrorCode::UnknownVariable: return "UnknownVariable";
    case ErrorCode::DateOutsideHorizon: return "DateOutsideHorizon";
    case ErrorCode::OverlapEqualityInequality: return "OverlapEqualityInequality";
    case ErrorCode::ParseError: return "ParseError";
    case ErrorCode::NotPositiveDefinite: return "NotPositiveDefinite";
    case ErrorCode::SingularDiagonal: return "SingularDiagonal";
    case ErrorCode::SingularA0: return "SingularA0";
    case ErrorCode::RankDeficientR: return "RankDeficientR";
    case ErrorCode::RankDeficientW: return "RankDeficientW";
    case ErrorCode::RankDeficientStack: return "RankDeficientStack";
    case ErrorCode::IndefiniteShockCov: return "IndefiniteShockCov";
    case ErrorCode::TiltingDiverged: return "TiltingDiverged";
    case ErrorCode::RegionTooImprobable: return "RegionTooImprobable";
    case ErrorCode::BudgetExhausted: return "BudgetExhausted";
    case ErrorCode::ExplosiveDraw: return "ExplosiveDraw";
  }
  return "Unknown";
}

/// True for failures caused by bad input rather than by the numerics.
constexpr bool is_validation_error(ErrorCode code) {
  return code < ErrorCode::NotPositiveDefinite;
}

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code), detail_(what) {}

  [[nodiscard]] ErrorCode code() const noexcept { return code_; }
  /// The message without the code prefix.
  [[nodiscard]] const std::string& detail() const noexcept { return detail_; }

 private:
  ErrorCode code_;
  std::string detail_;
};

inline void require(bool cond, ErrorCode code, const std::string& what) {
  if (!cond) throw Error(code, what);
}

}  // namespace condvar
