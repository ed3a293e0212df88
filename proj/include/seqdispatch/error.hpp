#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace seqdispatch {

enum class ErrorCode {
  // timeseries
  MissingColumn,
  NonMonotonicTimestamps,
  InconsistentPeriod,
  IncompatiblePeriod,
  ParseError,
  EmptyPartition,
  ChannelMismatch,
  FrameTooShort,
  // metrics
  LengthMismatch,
  Empty,
  DegenerateRange,
  ZeroDenominator,
  // neural
  DimensionMismatch,
  EmptySequence,
  NonScalarLoss,
  NonFiniteLoss,
  ShapeMismatch,
  EmptyDataset,
  DivergedLoss,
  // varma
  SingularDesign,
  InsufficientData,
  ShortHistory,
  // dispatch
  UnknownDevice,
  InfeasibleAction,
  NoFeasibleAction,
  StateSpaceTooLarge,
  LatticeMismatch,
  // pipeline
  ValidationError,
  MissingStageOutput,
  IoError,
};

std::string_view to_string(ErrorCode code) noexcept;

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(std::string(to_string(code)) + ": " + message), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace seqdispatch
