#include "seqdispatch/matrix.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "seqdispatch/error.hpp"

namespace seqdispatch {

std::string_view to_string(ErrorCode code) noexcept {
  switch (code) {
    case ErrorCode::MissingColumn: return "MissingColumn";
    case ErrorCode::NonMonotonicTimestamps: return "NonMonotonicTimestamps";
    case ErrorCode::InconsistentPeriod: return "InconsistentPeriod";
    case ErrorCode::IncompatiblePeriod: return "IncompatiblePeriod";
    case ErrorCode::ParseError: return "ParseError";
    case ErrorCode::EmptyPartition: return "EmptyPartition";
    case ErrorCode::ChannelMismatch: return "ChannelMismatch";
    case ErrorCode::FrameTooShort: return "FrameTooShort";
    case ErrorCode::LengthMismatch: return "LengthMismatch";
    case ErrorCode::Empty: return "Empty";
    case ErrorCode::DegenerateRange: return "DegenerateRange";
    case ErrorCode::ZeroDenominator: return "ZeroDenominator";
    case ErrorCode::DimensionMismatch: return "DimensionMismatch";
    case ErrorCode::EmptySequence: return "EmptySequence";
    case ErrorCode::NonScalarLoss: return "NonScalarLoss";
    case ErrorCode::NonFiniteLoss: return "NonFiniteLoss";
    case ErrorCode::ShapeMismatch: return "ShapeMismatch";
    case ErrorCode::EmptyDataset: return "EmptyDataset";
    case ErrorCode::DivergedLoss: return "DivergedLoss";
    case ErrorCode::SingularDesign: return "SingularDesign";
    case ErrorCode::InsufficientData: return "InsufficientData";
    case ErrorCode::ShortHistory: return "ShortHistory";
    case ErrorCode::UnknownDevice: return "UnknownDevice";
    case ErrorCode::InfeasibleAction: return "InfeasibleAction";
    case ErrorCode::NoFeasibleAction: return "NoFeasibleAction";
    case ErrorCode::StateSpaceTooLarge: return "StateSpaceTooLarge";
    case ErrorCode::LatticeMismatch: return "LatticeMismatch";
    case ErrorCode::ValidationError: return "ValidationError";
    case ErrorCode::MissingStageOutput: return "MissingStageOutput";
    case ErrorCode::IoError: return "IoError";
  }
  return "Unknown";
}

Matrix::Matrix(std::size_t rows, std::size_t cols, std::vector<double> data)
    : rows_(rows), cols_(cols), data_(std::move(data)) {
  if (data_.size() != rows_ * cols_) {
    throw Error(ErrorCode::ShapeMismatch,
                "matrix data length " + std::to_string(data_.size()) + " != " +
                    std::to_string(rows_) + "x" + std::to_string(cols_));
  }
}

Matrix Matrix::column(std::span<const double> values) {
  return Matrix(values.size(), 1, std::vector<double>(values.begin(), values.end()));
}

void Matrix::reset(std::size_t rows, std::size_t cols) {
  rows_ = rows;
  cols_ = cols;
  data_.assign(rows * cols, 0.0);
}

void Matrix::fill(double v) { std::fill(data_.begin(), data_.end(), v); }

bool Matrix::all_finite() const noexcept {
  return std::all_of(data_.begin(), data_.end(), [](double v) { return std::isfinite(v); });
}

}  // namespace seqdispatch
