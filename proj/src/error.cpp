// SPDX-License-Identifier: Apache-2.0
#include "codegraph/error.hpp"

namespace codegraph {

std::string_view to_string(ErrorCode code) noexcept {
  switch (code) {
    case ErrorCode::kBadMagic: return "BadMagic";
    case ErrorCode::kVersionMismatch: return "VersionMismatch";
    case ErrorCode::kDimensionError: return "DimensionError";
    case ErrorCode::kNonFiniteValue: return "NonFiniteValue";
    case ErrorCode::kIoError: return "IoError";
    case ErrorCode::kInvalidArgument: return "InvalidArgument";
    case ErrorCode::kInvalidReceptiveField: return "InvalidReceptiveField";
    case ErrorCode::kDimensionMismatch: return "DimensionMismatch";
    case ErrorCode::kEmptyRow: return "EmptyRow";
    case ErrorCode::kInvalidEta: return "InvalidEta";
    case ErrorCode::kZeroDistance: return "ZeroDistance";
    case ErrorCode::kZeroReference: return "ZeroReference";
    case ErrorCode::kSingletonCommunity: return "SingletonCommunity";
    case ErrorCode::kNoEdges: return "NoEdges";
    case ErrorCode::kBaseTooSmall: return "BaseTooSmall";
    case ErrorCode::kEmptyBase: return "EmptyBase";
    case ErrorCode::kDegenerateTail: return "DegenerateTail";
    case ErrorCode::kOutOfRangeSample: return "OutOfRangeSample";
    case ErrorCode::kSingleClass: return "SingleClass";
    case ErrorCode::kNoPositives: return "NoPositives";
    case ErrorCode::kNoAnomalousRegion: return "NoAnomalousRegion";
    case ErrorCode::kConfigInfeasible: return "ConfigInfeasible";
    case ErrorCode::kConfigError: return "ConfigError";
    case ErrorCode::kInvariantViolation: return "InvariantViolation";
  }
  return "Unknown";
}

Error::Error(ErrorCode code, const std::string& message)
    : std::runtime_error(std::string(to_string(code)) + ": " + message), code_(code) {}

void fail(ErrorCode code, const std::string& message) { throw Error(code, message); }

}  // namespace codegraph
