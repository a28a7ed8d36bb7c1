// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace codegraph {

enum class ErrorCode {
  kBadMagic,
  kVersionMismatch,
  kDimensionError,
  kNonFiniteValue,
  kIoError,
  kInvalidArgument,
  kInvalidReceptiveField,
  kDimensionMismatch,
  kEmptyRow,
  kInvalidEta,
  kZeroDistance,
  kZeroReference,
  kSingletonCommunity,
  kNoEdges,
  kBaseTooSmall,
  kEmptyBase,
  kDegenerateTail,
  kOutOfRangeSample,
  kSingleClass,
  kNoPositives,
  kNoAnomalousRegion,
  kConfigInfeasible,
  kConfigError,
  kInvariantViolation,
};

std::string_view to_string(ErrorCode code) noexcept;

// Every recoverable failure in the library is reported through this type;
// the code lets callers (and the CLI exit-code mapping) branch without
// parsing messages.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message);

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

[[noreturn]] void fail(ErrorCode code, const std::string& message);

}  // namespace codegraph
