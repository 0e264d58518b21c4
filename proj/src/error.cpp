#include "mail/error.hpp"

namespace mail {

std::string_view to_string(ErrorCode code) noexcept {
  switch (code) {
    case ErrorCode::kShapeMismatch: return "SHAPE_MISMATCH";
    case ErrorCode::kNonFiniteLoss: return "NON_FINITE_LOSS";
    case ErrorCode::kMissingEmbedding: return "MISSING_EMBEDDING";
    case ErrorCode::kMediumMissing: return "MEDIUM_MISSING";
    case ErrorCode::kDimensionMismatch: return "DIMENSION_MISMATCH";
    case ErrorCode::kGoldNotCandidate: return "GOLD_NOT_CANDIDATE";
    case ErrorCode::kLengthMismatch: return "LENGTH_MISMATCH";
    case ErrorCode::kServiceUnavailable: return "SERVICE_UNAVAILABLE";
    case ErrorCode::kEmptyResponse: return "EMPTY_RESPONSE";
    case ErrorCode::kAllLinesRejected: return "ALL_LINES_REJECTED";
    case ErrorCode::kCacheMiss: return "CACHE_MISS";
    case ErrorCode::kParseError: return "PARSE_ERROR";
    case ErrorCode::kInfeasibleSpec: return "INFEASIBLE_SPEC";
    case ErrorCode::kInvalidConfig: return "INVALID_CONFIG";
    case ErrorCode::kIoError: return "IO_ERROR";
  }
  return "UNKNOWN";
}

}  // namespace mail
