#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace mail {

enum class ErrorCode {
  kShapeMismatch,
  kNonFiniteLoss,
  kMissingEmbedding,
  kMediumMissing,
  kDimensionMismatch,
  kGoldNotCandidate,
  kLengthMismatch,
  kServiceUnavailable,
  kEmptyResponse,
  kAllLinesRejected,
  kCacheMiss,
  kParseError,
  kInfeasibleSpec,
  kInvalidConfig,
  kIoError,
};

std::string_view to_string(ErrorCode code) noexcept;

// Every fault raised by the library carries one of the codes above so callers
// (and the CLI exit path) can branch on it without parsing messages.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(std::string(to_string(code)) + ": " + message), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace mail
