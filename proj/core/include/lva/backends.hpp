#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include "lva/episode.hpp"

namespace lva {

struct ChatMessage {
    std::string role;  // system | user | assistant
    std::string content;
    // Frame references attached as image parts (vision calls only). No image
    // data ever flows toward the master; these stay opaque strings.
    std::vector<std::string> image_refs;

    bool operator==(const ChatMessage&) const = default;
};

using ChatTranscript = std::vector<ChatMessage>;

// Text generation for the master agent. Returned text is expected to end at
// or before the first stop marker; callers re-truncate defensively.
class MasterBackend {
  public:
    virtual ~MasterBackend() = default;
    virtual std::string generate(const std::string& question_id,
                                 const ChatTranscript& transcript,
                                 const std::vector<std::string>& stop_markers) = 0;
};

struct GroundingRequest {
    std::string question_id;
    std::string question;
    std::string subtitles;  // full episode subtitles
    const Episode* episode = nullptr;
};

// Temporal localization: maps (question, subtitles) to a clip id of the
// episode under evaluation.
class GroundingBackend {
  public:
    virtual ~GroundingBackend() = default;
    virtual std::string ground(const GroundingRequest& request) = 0;
};

struct VisionRequest {
    std::string question_id;
    std::string query;
    const Clip* clip = nullptr;                // localized clip
    std::vector<const Clip*> window_clips;     // window run containing clip
    const Episode* episode = nullptr;
};

// Frame description: converts frames of a localized clip into a textual
// observation. Only text crosses back toward the master.
class VisionBackend {
  public:
    virtual ~VisionBackend() = default;
    virtual std::string describe(const VisionRequest& request) = 0;
};

struct Backends {
    MasterBackend* master = nullptr;
    GroundingBackend* grounding = nullptr;
    VisionBackend* vision = nullptr;
};

// ---------------------------------------------------------------------------
// Scripted fixtures: deterministic desk-scale stand-ins for the three agents.

struct VisionFact {
    std::string trigger;   // case-insensitive substring matched against the query
    std::string response;
};

struct QuestionFixture {
    std::string gold_clip_id;
    std::vector<VisionFact> vision_facts;
    std::vector<std::string> master_script;  // when present, ends with an <answer> turn
};

struct ScriptedFixture {
    double grounding_error_rate = 0.0;  // p in [0,1]
    std::uint64_t rng_seed = 0;
    std::map<std::string, QuestionFixture> questions;

    const QuestionFixture& require(const std::string& question_id) const;
};

constexpr const char* kNoVisualDetailSentinel = "no relevant visual detail";

std::string fixture_to_json(const ScriptedFixture& fixture);
ScriptedFixture fixture_from_json(const std::string& json_text);
ScriptedFixture load_fixture(const std::filesystem::path& path);
void save_fixture(const ScriptedFixture& fixture, const std::filesystem::path& path);

// Stable 64-bit mix used to derive per-question RNG streams, so draws do not
// depend on how concurrent questions interleave.
std::uint64_t mix_seed(std::uint64_t seed, std::string_view key, std::uint64_t counter);

// Replays the fixture's master_script verbatim, inferring the turn index from
// the number of assistant messages already in the transcript. Past the end of
// the script it repeats a bare <answer> of the script's final answer.
class ScriptedMasterBackend : public MasterBackend {
  public:
    explicit ScriptedMasterBackend(std::shared_ptr<const ScriptedFixture> fixture);
    std::string generate(const std::string& question_id,
                         const ChatTranscript& transcript,
                         const std::vector<std::string>& stop_markers) override;

  private:
    std::shared_ptr<const ScriptedFixture> fixture_;
};

// Returns the gold clip with probability 1-p, otherwise a uniformly random
// non-gold clip. Draws are a pure function of (rng_seed, seed_salt,
// question_id, call index), identical across runs and platforms.
class ScriptedGroundingBackend : public GroundingBackend {
  public:
    explicit ScriptedGroundingBackend(std::shared_ptr<const ScriptedFixture> fixture,
                                      std::uint64_t seed_salt = 0);
    std::string ground(const GroundingRequest& request) override;
    void reset();

  private:
    std::shared_ptr<const ScriptedFixture> fixture_;
    std::uint64_t seed_salt_;
    std::mutex mutex_;
    std::map<std::string, std::uint64_t> call_counts_;
};

// Walks the ordered vision_facts: each call scans forward from the cursor for
// the first entry whose trigger occurs in the query, consuming it, which
// reproduces progressive-refinement dialogues.
class ScriptedVisionBackend : public VisionBackend {
  public:
    explicit ScriptedVisionBackend(std::shared_ptr<const ScriptedFixture> fixture);
    std::string describe(const VisionRequest& request) override;
    void reset();

  private:
    std::shared_ptr<const ScriptedFixture> fixture_;
    std::mutex mutex_;
    std::map<std::string, std::size_t> cursors_;
};

}  // namespace lva
