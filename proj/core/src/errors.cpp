#include "lva/errors.hpp"

namespace lva {

const char* to_string(ErrorCode code) {
    switch (code) {
        case ErrorCode::DuplicateClipId: return "duplicate_clip_id";
        case ErrorCode::MissingDuration: return "missing_duration";
        case ErrorCode::DanglingGoldClip: return "dangling_gold_clip";
        case ErrorCode::UnknownClip: return "unknown_clip";
        case ErrorCode::UnknownQuestion: return "unknown_question";
        case ErrorCode::AuthError: return "auth_error";
        case ErrorCode::RateLimited: return "rate_limited";
        case ErrorCode::Timeout: return "timeout";
        case ErrorCode::MalformedResponse: return "malformed_response";
        case ErrorCode::GroundingParseError: return "grounding_parse_error";
        case ErrorCode::LengthMismatch: return "length_mismatch";
        case ErrorCode::IoError: return "io_error";
        case ErrorCode::ConfigError: return "config_error";
        case ErrorCode::UsageError: return "usage_error";
        case ErrorCode::StrictAbort: return "strict_abort";
    }
    return "error";
}

}  // namespace lva
