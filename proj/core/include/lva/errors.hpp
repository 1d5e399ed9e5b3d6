#pragma once

#include <stdexcept>
#include <string>

namespace lva {

enum class ErrorCode {
    DuplicateClipId,
    MissingDuration,
    DanglingGoldClip,
    UnknownClip,
    UnknownQuestion,
    AuthError,
    RateLimited,
    Timeout,
    MalformedResponse,
    GroundingParseError,
    LengthMismatch,
    IoError,
    ConfigError,
    UsageError,
    StrictAbort,
};

const char* to_string(ErrorCode code);

class Error : public std::runtime_error {
  public:
    Error(ErrorCode code, const std::string& message)
        : std::runtime_error(std::string(to_string(code)) + ": " + message), code_(code) {}

    ErrorCode code() const { return code_; }

  private:
    ErrorCode code_;
};

}  // namespace lva
