#include "lva/remote_backends.hpp"

#include <chrono>
#include <cstdlib>
#include <random>
#include <thread>

#include <httplib.h>
#include <json.hpp>

#include "lva/errors.hpp"

namespace lva {

namespace {

using nlohmann::json;

json message_to_json(const ChatMessage& message) {
    json m;
    m["role"] = message.role;
    if (message.image_refs.empty()) {
        m["content"] = message.content;
    } else {
        json parts = json::array();
        parts.push_back({{"type", "text"}, {"text", message.content}});
        for (const std::string& ref : message.image_refs) {
            parts.push_back({{"type", "image_url"}, {"image_url", {{"url", ref}}}});
        }
        m["content"] = std::move(parts);
    }
    return m;
}

int backoff_ms(int base_ms, int attempt) {
    static thread_local std::mt19937 jitter_rng{std::random_device{}()};
    int delay = base_ms * (1 << attempt);
    if (delay <= 0) return 0;
    return delay / 2 + static_cast<int>(jitter_rng() % static_cast<unsigned>(delay / 2 + 1));
}

std::string bearer_token(const EndpointConfig& config) {
    if (config.api_key_env.empty()) return "";
    const char* value = std::getenv(config.api_key_env.c_str());
    return value ? value : "";
}

}  // namespace

std::string remote_generate(const EndpointConfig& config, const ChatTranscript& messages,
                            const std::vector<std::string>& stop_markers) {
    if (config.base_url.empty()) {
        throw Error(ErrorCode::ConfigError, "remote backend has no base_url");
    }
    if (messages.empty()) {
        throw Error(ErrorCode::ConfigError, "empty transcript");
    }

    json body;
    body["model"] = config.model;
    body["messages"] = json::array();
    for (const ChatMessage& message : messages) {
        body["messages"].push_back(message_to_json(message));
    }
    body["temperature"] = config.temperature;
    body["stop"] = stop_markers;
    body["max_tokens"] = config.max_tokens;
    const std::string payload = body.dump();

    httplib::Headers headers;
    std::string token = bearer_token(config);
    if (!token.empty()) headers.emplace("Authorization", "Bearer " + token);

    const int attempts = std::max(1, config.attempts);
    ErrorCode last_code = ErrorCode::Timeout;
    std::string last_detail;

    for (int attempt = 0; attempt < attempts; ++attempt) {
        if (attempt > 0) {
            std::this_thread::sleep_for(
                std::chrono::milliseconds(backoff_ms(config.backoff_base_ms, attempt - 1)));
        }
        httplib::Client client(config.base_url);
        client.set_connection_timeout(config.timeout_s, 0);
        client.set_read_timeout(config.timeout_s, 0);
        client.set_write_timeout(config.timeout_s, 0);

        auto res = client.Post(config.path, headers, payload, "application/json");
        if (!res) {
            last_code = ErrorCode::Timeout;
            last_detail = httplib::to_string(res.error());
            continue;
        }
        if (res->status == 401 || res->status == 403) {
            throw Error(ErrorCode::AuthError,
                        "status " + std::to_string(res->status) + " from " + config.base_url);
        }
        if (res->status == 429) {
            last_code = ErrorCode::RateLimited;
            last_detail = "status 429";
            continue;
        }
        if (res->status >= 500) {
            last_code = ErrorCode::MalformedResponse;
            last_detail = "status " + std::to_string(res->status);
            continue;
        }
        if (res->status != 200) {
            throw Error(ErrorCode::MalformedResponse,
                        "status " + std::to_string(res->status) + ": " + res->body);
        }
        json parsed = json::parse(res->body, nullptr, false);
        if (parsed.is_discarded() || !parsed.contains("choices") || parsed["choices"].empty()) {
            throw Error(ErrorCode::MalformedResponse, "unparseable completion body");
        }
        const json& message = parsed["choices"][0].contains("message")
            ? parsed["choices"][0]["message"]
            : parsed["choices"][0];
        if (!message.contains("content") || !message["content"].is_string()) {
            throw Error(ErrorCode::MalformedResponse, "completion has no text content");
        }
        return message["content"].get<std::string>();
    }
    throw Error(last_code,
                last_detail + " after " + std::to_string(attempts) + " attempts to " +
                    config.base_url + config.path);
}

std::string RemoteMasterBackend::generate(const std::string& question_id,
                                          const ChatTranscript& transcript,
                                          const std::vector<std::string>& stop_markers) {
    (void)question_id;
    return remote_generate(config_, transcript, stop_markers);
}

std::optional<std::string> extract_clip_tag(const std::string& text, const Episode& episode) {
    // Angle-bracketed tokens first, then the whole trimmed reply.
    std::size_t pos = 0;
    while (true) {
        std::size_t open = text.find('<', pos);
        if (open == std::string::npos) break;
        std::size_t close = text.find('>', open + 1);
        if (close == std::string::npos) break;
        std::string candidate = text.substr(open, close - open + 1);
        if (auto idx = episode.resolve_clip_tag(candidate)) {
            return episode.clips[*idx].clip_id;
        }
        pos = open + 1;
    }
    std::size_t b = text.find_first_not_of(" \t\r\n");
    if (b == std::string::npos) return std::nullopt;
    std::size_t e = text.find_last_not_of(" \t\r\n");
    if (auto idx = episode.resolve_clip_tag(text.substr(b, e - b + 1))) {
        return episode.clips[*idx].clip_id;
    }
    return std::nullopt;
}

std::string RemoteGroundingBackend::ground(const GroundingRequest& request) {
    ChatTranscript messages;
    messages.push_back(
        {"system",
         "You locate the single video clip most relevant to a question. Reply with exactly one "
         "clip tag in angle brackets, e.g. <clip_7> or the clip's id such as "
         "<s05e06_seg02_clip_15>. Reply with the tag only.",
         {}});
    std::string user = "Question: " + request.question + "\n\nSubtitles:\n" + request.subtitles;
    messages.push_back({"user", std::move(user), {}});

    std::string reply = remote_generate(config_, messages, {});
    if (request.episode != nullptr) {
        if (auto tag = extract_clip_tag(reply, *request.episode)) return *tag;
        // one retry on parse failure
        messages.push_back({"assistant", reply, {}});
        messages.push_back({"user", "Reply with exactly one clip tag and nothing else.", {}});
        reply = remote_generate(config_, messages, {});
        if (auto tag = extract_clip_tag(reply, *request.episode)) return *tag;
        throw Error(ErrorCode::GroundingParseError, "no clip tag in grounding reply");
    }
    return reply;
}

std::vector<std::string> sample_frames(const std::vector<const Clip*>& window_clips, int limit) {
    std::vector<std::string> all;
    for (const Clip* clip : window_clips) {
        if (clip == nullptr) continue;
        all.insert(all.end(), clip->frame_refs.begin(), clip->frame_refs.end());
    }
    if (limit <= 0 || all.size() <= static_cast<std::size_t>(limit)) return all;
    std::vector<std::string> sampled;
    sampled.reserve(static_cast<std::size_t>(limit));
    const std::size_t n = all.size();
    for (int i = 0; i < limit; ++i) {
        std::size_t idx = (limit == 1)
            ? 0
            : static_cast<std::size_t>(i) * (n - 1) / static_cast<std::size_t>(limit - 1);
        sampled.push_back(all[idx]);
    }
    return sampled;
}

std::string RemoteVisionBackend::describe(const VisionRequest& request) {
    ChatTranscript messages;
    messages.push_back(
        {"system",
         "You describe video frames. Answer the query with concrete visual facts from the "
         "attached frames (objects, attributes, actions, on-screen text, scene cues). Text "
         "only.",
         {}});
    ChatMessage user;
    user.role = "user";
    user.content = request.query;
    user.image_refs = sample_frames(request.window_clips, config_.frames_per_call);
    messages.push_back(std::move(user));
    return remote_generate(config_, messages, {});
}

}  // namespace lva
