#pragma once

#include <string>
#include <vector>

#include "lva/backends.hpp"

namespace lva {

struct EndpointConfig {
    std::string base_url;  // scheme://host[:port]
    std::string path = "/v1/chat/completions";
    std::string model;
    std::string api_key_env;  // environment variable holding the bearer token
    double temperature = 0.0;
    int max_tokens = 1024;
    int attempts = 3;
    int backoff_base_ms = 500;
    int timeout_s = 60;
    int frames_per_call = 8;  // vision calls: evenly sampled frame attachments

    bool operator==(const EndpointConfig&) const = default;
};

// One chat-completion round trip with retry: timeouts, 5xx, and 429 back off
// exponentially (jittered) up to the attempt budget; 401/403 fail fast.
// Throws Error(AuthError | RateLimited | Timeout | MalformedResponse).
std::string remote_generate(const EndpointConfig& config, const ChatTranscript& messages,
                            const std::vector<std::string>& stop_markers);

class RemoteMasterBackend : public MasterBackend {
  public:
    explicit RemoteMasterBackend(EndpointConfig config) : config_(std::move(config)) {}
    std::string generate(const std::string& question_id, const ChatTranscript& transcript,
                         const std::vector<std::string>& stop_markers) override;

  private:
    EndpointConfig config_;
};

// Sends the question plus full episode subtitles and expects a single clip
// tag back, parsed by exact-tag match (clip ids verbatim or the <clip_N>
// index alias) with one retry on parse failure.
class RemoteGroundingBackend : public GroundingBackend {
  public:
    explicit RemoteGroundingBackend(EndpointConfig config) : config_(std::move(config)) {}
    std::string ground(const GroundingRequest& request) override;

  private:
    EndpointConfig config_;
};

// Sends the visual query with up to frames_per_call evenly spaced frame
// references from the localized window attached as image parts.
class RemoteVisionBackend : public VisionBackend {
  public:
    explicit RemoteVisionBackend(EndpointConfig config) : config_(std::move(config)) {}
    std::string describe(const VisionRequest& request) override;

  private:
    EndpointConfig config_;
};

// Exposed for tests: the first clip tag in `text` that resolves in `episode`.
std::optional<std::string> extract_clip_tag(const std::string& text, const Episode& episode);

// Evenly spaced selection of up to `limit` frame refs across the window run.
std::vector<std::string> sample_frames(const std::vector<const Clip*>& window_clips, int limit);

}  // namespace lva
