#include "lva/action_grammar.hpp"

#include <algorithm>
#include <array>
#include <cctype>

namespace lva {

namespace {

constexpr std::array<ActionKind, 3> kAllKinds = {
    ActionKind::VisualQuery,
    ActionKind::RequestGrounding,
    ActionKind::Answer,
};

bool is_space(char c) { return std::isspace(static_cast<unsigned char>(c)) != 0; }
bool is_punct(char c) { return std::ispunct(static_cast<unsigned char>(c)) != 0; }

bool all_space(std::string_view s) {
    return std::all_of(s.begin(), s.end(), is_space);
}

// Consumes one leading <think>...</think> block (plus surrounding whitespace).
// Returns the offset where the remainder starts and the captured think text.
std::size_t strip_leading_think(std::string_view text, std::optional<std::string>* think) {
    std::size_t pos = 0;
    while (pos < text.size() && is_space(text[pos])) ++pos;
    if (text.substr(pos).rfind(kThinkOpen, 0) != 0) return pos;
    std::size_t body = pos + kThinkOpen.size();
    std::size_t close = text.find(kThinkClose, body);
    if (close == std::string_view::npos) return pos;  // unclosed think: plain text
    if (think != nullptr) {
        *think = std::string(text.substr(body, close - body));
    }
    pos = close + kThinkClose.size();
    while (pos < text.size() && is_space(text[pos])) ++pos;
    return pos;
}

struct TagMatch {
    ActionKind kind;
    std::size_t begin = 0;      // opening tag start
    std::size_t end = 0;        // one past closing tag (or opening tag for bare form)
    std::size_t payload_begin = 0;
    std::size_t payload_end = 0;
    bool closed = false;        // true also for the bare <request_grounding> form
};

// Earliest opening tag at or after `from`, regardless of closure.
std::optional<TagMatch> find_opening(std::string_view text, std::size_t from) {
    std::optional<TagMatch> best;
    for (ActionKind kind : kAllKinds) {
        std::size_t at = text.find(opening_tag(kind), from);
        if (at == std::string_view::npos) continue;
        if (!best || at < best->begin) {
            TagMatch m;
            m.kind = kind;
            m.begin = at;
            best = m;
        }
    }
    return best;
}

// Completes the tag opened at `m.begin`, filling span/payload. A
// <request_grounding> without a closing tag is the accepted bare form.
void complete_tag(std::string_view text, TagMatch* m) {
    std::string_view open = opening_tag(m->kind);
    std::string_view close = closing_tag(m->kind);
    std::size_t body = m->begin + open.size();
    std::size_t close_at = text.find(close, body);
    if (close_at == std::string_view::npos) {
        if (m->kind == ActionKind::RequestGrounding) {
            m->end = body;
            m->payload_begin = m->payload_end = body;
            m->closed = true;
        } else {
            m->closed = false;
        }
        return;
    }
    m->end = close_at + close.size();
    m->payload_begin = body;
    m->payload_end = close_at;
    m->closed = true;
}

std::optional<TagMatch> first_wellformed_tag(std::string_view text, std::size_t from) {
    std::size_t pos = from;
    while (true) {
        auto m = find_opening(text, pos);
        if (!m) return std::nullopt;
        complete_tag(text, &*m);
        if (m->closed) return m;
        pos = m->begin + 1;
    }
}

}  // namespace

const char* to_string(ActionKind kind) {
    switch (kind) {
        case ActionKind::VisualQuery: return "visual_query";
        case ActionKind::RequestGrounding: return "request_grounding";
        case ActionKind::Answer: return "answer";
    }
    return "unknown";
}

const char* opening_tag(ActionKind kind) {
    switch (kind) {
        case ActionKind::VisualQuery: return "<visual_query>";
        case ActionKind::RequestGrounding: return "<request_grounding>";
        case ActionKind::Answer: return "<answer>";
    }
    return "";
}

const char* closing_tag(ActionKind kind) {
    switch (kind) {
        case ActionKind::VisualQuery: return "</visual_query>";
        case ActionKind::RequestGrounding: return "</request_grounding>";
        case ActionKind::Answer: return "</answer>";
    }
    return "";
}

const char* to_string(Violation violation) {
    switch (violation) {
        case Violation::NoTag: return "no_tag";
        case Violation::MultipleTags: return "multiple_tags";
        case Violation::UnclosedTag: return "unclosed_tag";
        case Violation::ExtraneousText: return "extraneous_text";
        case Violation::EmptyPayload: return "empty_payload";
    }
    return "unknown";
}

std::vector<std::string> stop_markers(std::string_view eos_marker) {
    std::vector<std::string> markers;
    for (ActionKind kind : kAllKinds) markers.emplace_back(closing_tag(kind));
    if (!eos_marker.empty()) markers.emplace_back(eos_marker);
    return markers;
}

std::optional<StopMatch> scan_stop_match(std::string_view generated_text,
                                         std::string_view eos_marker) {
    const auto markers = stop_markers(eos_marker);
    std::optional<StopMatch> best;
    std::size_t best_start = 0;
    for (std::size_t i = 0; i < markers.size(); ++i) {
        std::size_t at = generated_text.find(markers[i]);
        if (at == std::string_view::npos) continue;
        std::size_t end = at + markers[i].size();
        // Earliest start wins; on a tie (one marker prefixing another) the
        // shorter marker ends first.
        if (!best || at < best_start || (at == best_start && end < best->end_pos)) {
            best = StopMatch{end, i};
            best_start = at;
        }
    }
    return best;
}

std::optional<std::size_t> scan_stop(std::string_view generated_text,
                                     std::string_view eos_marker) {
    auto m = scan_stop_match(generated_text, eos_marker);
    if (!m) return std::nullopt;
    return m->end_pos;
}

std::optional<ParsedAction> parse_action(std::string_view turn_text) {
    std::optional<std::string> think;
    std::size_t from = strip_leading_think(turn_text, &think);
    auto m = first_wellformed_tag(turn_text, from);
    if (!m) return std::nullopt;
    ParsedAction action;
    action.kind = m->kind;
    action.payload = std::string(turn_text.substr(m->payload_begin, m->payload_end - m->payload_begin));
    if (m->kind == ActionKind::RequestGrounding) action.payload.clear();
    action.span_begin = m->begin;
    action.span_end = m->end;
    action.preceding_think = std::move(think);
    return action;
}

StructuralVerdict structural_validity(std::string_view turn_text) {
    std::size_t from = strip_leading_think(turn_text, nullptr);
    std::string_view rest = turn_text.substr(from);

    auto opening = find_opening(rest, 0);
    if (!opening) return StructuralVerdict::fail(Violation::NoTag);
    if (!all_space(rest.substr(0, opening->begin))) {
        return StructuralVerdict::fail(Violation::ExtraneousText);
    }
    complete_tag(rest, &*opening);
    if (!opening->closed) return StructuralVerdict::fail(Violation::UnclosedTag);
    if (opening->kind != ActionKind::RequestGrounding &&
        all_space(rest.substr(opening->payload_begin,
                              opening->payload_end - opening->payload_begin))) {
        return StructuralVerdict::fail(Violation::EmptyPayload);
    }
    std::string_view tail = rest.substr(opening->end);
    if (find_opening(tail, 0)) return StructuralVerdict::fail(Violation::MultipleTags);
    if (!all_space(tail)) return StructuralVerdict::fail(Violation::ExtraneousText);
    return StructuralVerdict::ok();
}

NormalizedAnswer normalize_answer(std::string_view raw) {
    std::size_t b = 0;
    std::size_t e = raw.size();
    while (b < e && (is_space(raw[b]) || is_punct(raw[b]))) ++b;
    while (e > b && (is_space(raw[e - 1]) || is_punct(raw[e - 1]))) --e;

    std::string text;
    text.reserve(e - b);
    bool pending_space = false;
    for (std::size_t i = b; i < e; ++i) {
        char c = raw[i];
        if (is_space(c)) {
            pending_space = true;
            continue;
        }
        if (pending_space) {
            text.push_back(' ');
            pending_space = false;
        }
        text.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
    }

    NormalizedAnswer out;
    out.text = std::move(text);
    const std::string& t = out.text;
    if (t.size() >= 2 && t[0] == 'a' && std::isdigit(static_cast<unsigned char>(t[1])) &&
        (t.size() == 2 || t[2] == ':' || t[2] == ' ')) {
        out.label = t.substr(0, 2);
    }
    return out;
}

}  // namespace lva
