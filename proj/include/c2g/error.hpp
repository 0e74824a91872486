#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

namespace c2g {

enum class ErrorCode {
  // ingestion / container
  MissingColumn,
  OutOfBounds,
  NonFinite,
  EmptyFile,
  BadMagic,
  DimensionMismatch,
  TruncatedFile,
  BadChannelIndex,
  InvalidImage,
  IoError,
  // compression
  EmptyBatch,
  NonPositiveDensity,
  MixedChannelCounts,
  // augmentation
  WindowLargerThanImage,
  // network
  ShapeUnderflow,
  ShapeMismatch,
  // training
  ClassWithTooFewSamples,
  SplitDegenerate,
  EmptyDataset,
  ArchitectureMismatch,
  // synthesis
  DegenerateSpec,
  // cli
  UsageError,
};

const char* error_code_name(ErrorCode code);

/// Every failure in the library is reported as an Error carrying a code that
/// callers can branch on. `row` is the 1-based file line for loader errors,
/// -1 otherwise.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, std::string message, long row = -1)
      : std::runtime_error(std::string(error_code_name(code)) + ": " + message),
        code_(code),
        row_(row) {}

  ErrorCode code() const noexcept { return code_; }
  long row() const noexcept { return row_; }

 private:
  ErrorCode code_;
  long row_;
};

}  // namespace c2g
