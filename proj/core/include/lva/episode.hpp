#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace lva {

struct SubtitleLine {
    double start_s = 0.0;  // episode timeline
    double end_s = 0.0;
    std::optional<std::string> speaker;
    std::string text;

    bool operator==(const SubtitleLine&) const = default;
};

struct SubtitleRange {
    std::size_t begin = 0;  // half-open [begin, end) into Episode::subtitles
    std::size_t end = 0;

    bool empty() const { return begin == end; }
    bool operator==(const SubtitleRange&) const = default;
};

struct Clip {
    std::string clip_id;
    std::size_t index = 0;
    double local_duration_s = 0.0;
    double episode_offset_s = 0.0;
    SubtitleRange subtitle_range;
    std::vector<std::string> frame_refs;  // opaque paths/indices, never decoded

    bool operator==(const Clip&) const = default;
};

struct BoxAnnotation {
    std::string clip_id;
    int frame_index = 0;
    std::string entity;
    double x = 0.0, y = 0.0, w = 0.0, h = 0.0;  // pixels

    bool operator==(const BoxAnnotation&) const = default;
};

struct Question {
    std::string question_id;
    std::string episode_id;
    std::string text;
    std::vector<std::string> choices;  // exactly 5, labeled a0..a4 in order
    int gold_index = 0;
    std::string gold_clip_id;

    bool operator==(const Question&) const = default;
};

struct Episode {
    std::string episode_id;
    std::vector<Clip> clips;
    std::vector<SubtitleLine> subtitles;  // sorted by start time
    std::vector<Question> questions;
    std::vector<BoxAnnotation> boxes;

    const Clip* find_clip(std::string_view clip_id) const;
    std::optional<std::size_t> clip_index(std::string_view clip_id) const;
    const Question* find_question(std::string_view question_id) const;
    double total_duration_s() const;

    // Resolves a clip tag: "<id>" or bare id verbatim, with "<clip_N>"/"clip_N"
    // (N = clip index) accepted as an alias.
    std::optional<std::size_t> resolve_clip_tag(std::string_view tag) const;

    bool operator==(const Episode&) const = default;
};

// Builder inputs: clip-level records with clip-local subtitle timings.
struct ClipRecord {
    std::string clip_id;
    std::string episode_id;
    double duration_s = -1.0;  // negative means missing
    std::vector<SubtitleLine> subtitles;  // clip-local times
    std::vector<std::string> frame_refs;
};

struct QaRecord {
    std::string question_id;
    std::string episode_id;
    std::string text;
    std::vector<std::string> choices;
    int gold_index = 0;
    std::string gold_clip_id;
};

// Aggregates clip-level records into one episode-level timeline: clip offsets
// are cumulative durations, subtitle timestamps are shifted into episode time,
// and gold/box clip references are checked against the clip set. Clips are
// ordered by the segment/clip numbering embedded in their ids.
Episode build_episode(const std::vector<ClipRecord>& clip_records,
                      const std::vector<QaRecord>& qa_records,
                      const std::vector<BoxAnnotation>& box_records);

// Inclusive clip-index run of `window` consecutive clips centered on `center`,
// clamped to [0, n_clips). Even windows take the extra clip later in time.
struct ClipRun {
    std::size_t lo = 0;
    std::size_t hi = 0;

    bool contains(std::size_t idx) const { return idx >= lo && idx <= hi; }
};
ClipRun window_run(std::size_t n_clips, std::size_t center, int window);

// One subtitle line as injected into master context: "[start–end] Speaker: text".
std::string format_subtitle_line(const SubtitleLine& line);

// All episode subtitles, one formatted line each.
std::string format_all_subtitles(const Episode& episode);

// Concatenated subtitle text for the window run around clip_id.
// Throws Error(UnknownClip) when clip_id does not resolve.
std::string subtitles_for(const Episode& episode, std::string_view clip_id, int window);

enum class EpisodeViolationCode {
    DuplicateClipId,
    NonCumulativeOffset,
    UnsortedSubtitles,
    BadSubtitleTiming,
    DanglingGoldClip,
    DuplicateQuestionId,
    BadChoices,
    BadGoldIndex,
    DanglingBoxClip,
    BoxFrameOutOfRange,
};

const char* to_string(EpisodeViolationCode code);

struct EpisodeViolation {
    EpisodeViolationCode code;
    std::string message;
};

// All invariant violations; empty means the episode is well-formed.
std::vector<EpisodeViolation> validate_episode(const Episode& episode);

// Natural ordering used for clip ids: digit runs compare numerically, so
// "seg02_clip_2" sorts before "seg02_clip_15".
bool natural_less(std::string_view a, std::string_view b);

// Recomputes per-clip subtitle ranges from the (sorted) subtitle times.
// Load paths and the builder share this so manifests round-trip exactly.
void recompute_subtitle_ranges(Episode& episode);

}  // namespace lva
