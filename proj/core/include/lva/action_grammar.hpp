#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace lva {

// The action-token vocabulary the master agent may emit. Exactly these three
// kinds are representable; anything else is a protocol violation.
enum class ActionKind {
    VisualQuery,
    RequestGrounding,
    Answer,
};

const char* to_string(ActionKind kind);
const char* opening_tag(ActionKind kind);
const char* closing_tag(ActionKind kind);

constexpr std::string_view kThinkOpen = "<think>";
constexpr std::string_view kThinkClose = "</think>";
constexpr std::string_view kDefaultEosMarker = "<eos>";

struct ParsedAction {
    ActionKind kind = ActionKind::Answer;
    // Query string for VisualQuery, answer string for Answer, empty for
    // RequestGrounding. Kept verbatim; normalization happens downstream.
    std::string payload;
    // [begin, end) character offsets of opening tag through matching close
    // (for the bare <request_grounding> form, just the opening tag).
    std::size_t span_begin = 0;
    std::size_t span_end = 0;
    std::optional<std::string> preceding_think;
};

enum class Violation {
    NoTag,
    MultipleTags,
    UnclosedTag,
    ExtraneousText,
    EmptyPayload,
};

const char* to_string(Violation violation);

struct StructuralVerdict {
    bool valid = false;
    std::optional<Violation> violation;

    static StructuralVerdict ok() { return {true, std::nullopt}; }
    static StructuralVerdict fail(Violation v) { return {false, v}; }
};

struct StopMatch {
    std::size_t end_pos = 0;    // position just past the marker
    std::size_t marker_index = 0;  // 0..2 closing tags, 3 eos marker
};

// Markers generation stops at: the three closing tags plus the end-of-sequence
// marker. Different backends emit different terminators, hence the parameter.
std::vector<std::string> stop_markers(std::string_view eos_marker = kDefaultEosMarker);

// End position of the earliest stop marker in `generated_text`, or nullopt if
// none is present. Used both to configure streaming stop sequences and to
// re-truncate backend output defensively.
std::optional<std::size_t> scan_stop(std::string_view generated_text,
                                     std::string_view eos_marker = kDefaultEosMarker);

// Like scan_stop but also reports which marker matched, so callers can tell a
// closing tag (kept in the turn text) from the eos terminator (stripped).
std::optional<StopMatch> scan_stop_match(std::string_view generated_text,
                                         std::string_view eos_marker = kDefaultEosMarker);

// First well-formed action tag in one turn of master output, or nullopt. A
// leading <think>...</think> block is captured into preceding_think.
// <request_grounding> is accepted bare or paired; paired content is ignored.
std::optional<ParsedAction> parse_action(std::string_view turn_text);

// Structural-validity predicate behind the per-step format reward: valid iff,
// after stripping at most one leading <think> block and whitespace, the turn
// is exactly one complete action tag with matching closure and a non-empty
// payload where one is required.
StructuralVerdict structural_validity(std::string_view turn_text);

struct NormalizedAnswer {
    std::string text;
    // Bare choice label ("a3") when the text begins with one, e.g. "a3: ...".
    std::optional<std::string> label;
};

// Lowercases, trims surrounding whitespace/punctuation, and collapses internal
// whitespace. Idempotent on the text field.
NormalizedAnswer normalize_answer(std::string_view raw);

}  // namespace lva
