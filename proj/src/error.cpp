#include "storm/error.hpp"

namespace storm {

const char* to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::kZeroMass: return "ZeroMass";
    case ErrorCode::kBadKernel: return "BadKernel";
    case ErrorCode::kBadRelation: return "BadRelation";
    case ErrorCode::kShapeMismatch: return "ShapeMismatch";
    case ErrorCode::kNotConverged: return "NotConverged";
    case ErrorCode::kNonFinite: return "NonFinite";
    case ErrorCode::kTooLarge: return "TooLarge";
    case ErrorCode::kEmptyPairs: return "EmptyPairs";
    case ErrorCode::kOutOfWindow: return "OutOfWindow";
    case ErrorCode::kBadWindow: return "BadWindow";
    case ErrorCode::kBadGroupSize: return "BadGroupSize";
    case ErrorCode::kBadConfig: return "BadConfig";
    case ErrorCode::kParse: return "Parse";
  }
  return "Unknown";
}

}  // namespace storm
