#include "lva/episode.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <unordered_set>

#include "lva/errors.hpp"

namespace lva {

namespace {

constexpr double kOffsetTolerance = 1e-6;

bool is_digit(char c) { return std::isdigit(static_cast<unsigned char>(c)) != 0; }

}  // namespace

// Assigns each subtitle to the clip whose time span contains its start.
// Subtitles must already be sorted by start; ranges come out contiguous.
void recompute_subtitle_ranges(Episode& episode) {
    const std::size_t n = episode.clips.size();
    std::size_t sub = 0;
    for (std::size_t i = 0; i < n; ++i) {
        const bool last = (i + 1 == n);
        const double next_offset = last ? 0.0 : episode.clips[i + 1].episode_offset_s;
        episode.clips[i].subtitle_range.begin = sub;
        while (sub < episode.subtitles.size() &&
               (last || episode.subtitles[sub].start_s < next_offset)) {
            ++sub;
        }
        episode.clips[i].subtitle_range.end = sub;
    }
}

bool natural_less(std::string_view a, std::string_view b) {
    std::size_t i = 0, j = 0;
    while (i < a.size() && j < b.size()) {
        if (is_digit(a[i]) && is_digit(b[j])) {
            std::size_t i2 = i, j2 = j;
            while (i2 < a.size() && is_digit(a[i2])) ++i2;
            while (j2 < b.size() && is_digit(b[j2])) ++j2;
            std::string_view da = a.substr(i, i2 - i);
            std::string_view db = b.substr(j, j2 - j);
            std::string_view ta = da.substr(std::min(da.find_first_not_of('0'), da.size()));
            std::string_view tb = db.substr(std::min(db.find_first_not_of('0'), db.size()));
            if (ta.size() != tb.size()) return ta.size() < tb.size();
            if (ta != tb) return ta < tb;
            i = i2;
            j = j2;
        } else {
            if (a[i] != b[j]) return a[i] < b[j];
            ++i;
            ++j;
        }
    }
    return a.size() - i < b.size() - j;
}

const Clip* Episode::find_clip(std::string_view clip_id) const {
    for (const Clip& c : clips) {
        if (c.clip_id == clip_id) return &c;
    }
    return nullptr;
}

std::optional<std::size_t> Episode::clip_index(std::string_view clip_id) const {
    for (std::size_t i = 0; i < clips.size(); ++i) {
        if (clips[i].clip_id == clip_id) return i;
    }
    return std::nullopt;
}

const Question* Episode::find_question(std::string_view question_id) const {
    for (const Question& q : questions) {
        if (q.question_id == question_id) return &q;
    }
    return nullptr;
}

double Episode::total_duration_s() const {
    double total = 0.0;
    for (const Clip& c : clips) total += c.local_duration_s;
    return total;
}

std::optional<std::size_t> Episode::resolve_clip_tag(std::string_view tag) const {
    if (tag.size() >= 2 && tag.front() == '<' && tag.back() == '>') {
        tag = tag.substr(1, tag.size() - 2);
    }
    if (auto idx = clip_index(tag)) return idx;
    // <clip_N> alias with N = clip index
    std::string_view rest;
    if (tag.rfind("clip_", 0) == 0) {
        rest = tag.substr(5);
    } else if (tag.rfind("clip", 0) == 0) {
        rest = tag.substr(4);
    } else {
        return std::nullopt;
    }
    if (rest.empty() || !std::all_of(rest.begin(), rest.end(), is_digit)) return std::nullopt;
    std::size_t idx = 0;
    for (char c : rest) idx = idx * 10 + static_cast<std::size_t>(c - '0');
    if (idx >= clips.size()) return std::nullopt;
    return idx;
}

Episode build_episode(const std::vector<ClipRecord>& clip_records,
                      const std::vector<QaRecord>& qa_records,
                      const std::vector<BoxAnnotation>& box_records) {
    Episode episode;
    if (!clip_records.empty()) {
        episode.episode_id = clip_records.front().episode_id;
    } else if (!qa_records.empty()) {
        episode.episode_id = qa_records.front().episode_id;
    }

    std::vector<const ClipRecord*> ordered;
    ordered.reserve(clip_records.size());
    for (const ClipRecord& r : clip_records) {
        if (!r.episode_id.empty() && r.episode_id != episode.episode_id) {
            throw Error(ErrorCode::ConfigError,
                        "clip '" + r.clip_id + "' belongs to episode '" + r.episode_id +
                            "', expected '" + episode.episode_id + "'");
        }
        ordered.push_back(&r);
    }
    std::sort(ordered.begin(), ordered.end(), [](const ClipRecord* a, const ClipRecord* b) {
        return natural_less(a->clip_id, b->clip_id);
    });

    std::unordered_set<std::string> seen_ids;
    double offset = 0.0;
    for (const ClipRecord* r : ordered) {
        if (!seen_ids.insert(r->clip_id).second) {
            throw Error(ErrorCode::DuplicateClipId, r->clip_id);
        }
        if (!(r->duration_s >= 0.0)) {
            throw Error(ErrorCode::MissingDuration, r->clip_id);
        }
        Clip clip;
        clip.clip_id = r->clip_id;
        clip.index = episode.clips.size();
        clip.local_duration_s = r->duration_s;
        clip.episode_offset_s = offset;
        clip.frame_refs = r->frame_refs;
        for (const SubtitleLine& local : r->subtitles) {
            SubtitleLine line = local;
            line.start_s = local.start_s + offset;
            line.end_s = local.end_s + offset;
            episode.subtitles.push_back(std::move(line));
        }
        offset += r->duration_s;
        episode.clips.push_back(std::move(clip));
    }

    std::stable_sort(episode.subtitles.begin(), episode.subtitles.end(),
                     [](const SubtitleLine& a, const SubtitleLine& b) {
                         return a.start_s < b.start_s;
                     });
    recompute_subtitle_ranges(episode);

    for (const QaRecord& qa : qa_records) {
        if (!qa.episode_id.empty() && qa.episode_id != episode.episode_id) {
            throw Error(ErrorCode::ConfigError,
                        "question '" + qa.question_id + "' belongs to a different episode");
        }
        if (!episode.find_clip(qa.gold_clip_id)) {
            throw Error(ErrorCode::DanglingGoldClip,
                        qa.question_id + " -> " + qa.gold_clip_id);
        }
        Question q;
        q.question_id = qa.question_id;
        q.episode_id = episode.episode_id;
        q.text = qa.text;
        q.choices = qa.choices;
        q.gold_index = qa.gold_index;
        q.gold_clip_id = qa.gold_clip_id;
        episode.questions.push_back(std::move(q));
    }

    episode.boxes = box_records;
    return episode;
}

ClipRun window_run(std::size_t n_clips, std::size_t center, int window) {
    ClipRun run;
    if (n_clips == 0) return run;
    if (window < 1) window = 1;
    std::size_t before = static_cast<std::size_t>((window - 1) / 2);
    std::size_t after = static_cast<std::size_t>(window / 2);
    run.lo = center > before ? center - before : 0;
    run.hi = std::min(center + after, n_clips - 1);
    return run;
}

std::string format_subtitle_line(const SubtitleLine& line) {
    char stamp[64];
    std::snprintf(stamp, sizeof(stamp), "[%.2f–%.2f] ", line.start_s, line.end_s);
    std::string out(stamp);
    if (line.speaker && !line.speaker->empty()) {
        out += *line.speaker;
        out += ": ";
    }
    out += line.text;
    return out;
}

std::string format_all_subtitles(const Episode& episode) {
    std::string out;
    for (const SubtitleLine& line : episode.subtitles) {
        out += format_subtitle_line(line);
        out += '\n';
    }
    if (!out.empty()) out.pop_back();
    return out;
}

std::string subtitles_for(const Episode& episode, std::string_view clip_id, int window) {
    auto center = episode.clip_index(clip_id);
    if (!center) throw Error(ErrorCode::UnknownClip, std::string(clip_id));
    ClipRun run = window_run(episode.clips.size(), *center, window);
    std::string out;
    for (std::size_t i = run.lo; i <= run.hi; ++i) {
        const SubtitleRange& range = episode.clips[i].subtitle_range;
        for (std::size_t s = range.begin; s < range.end; ++s) {
            out += format_subtitle_line(episode.subtitles[s]);
            out += '\n';
        }
    }
    if (!out.empty()) out.pop_back();
    return out;
}

const char* to_string(EpisodeViolationCode code) {
    switch (code) {
        case EpisodeViolationCode::DuplicateClipId: return "duplicate_clip_id";
        case EpisodeViolationCode::NonCumulativeOffset: return "non_cumulative_offset";
        case EpisodeViolationCode::UnsortedSubtitles: return "unsorted_subtitles";
        case EpisodeViolationCode::BadSubtitleTiming: return "bad_subtitle_timing";
        case EpisodeViolationCode::DanglingGoldClip: return "dangling_gold_clip";
        case EpisodeViolationCode::DuplicateQuestionId: return "duplicate_question_id";
        case EpisodeViolationCode::BadChoices: return "bad_choices";
        case EpisodeViolationCode::BadGoldIndex: return "bad_gold_index";
        case EpisodeViolationCode::DanglingBoxClip: return "dangling_box_clip";
        case EpisodeViolationCode::BoxFrameOutOfRange: return "box_frame_out_of_range";
    }
    return "unknown";
}

std::vector<EpisodeViolation> validate_episode(const Episode& episode) {
    std::vector<EpisodeViolation> out;
    auto flag = [&out](EpisodeViolationCode code, std::string message) {
        out.push_back({code, std::move(message)});
    };

    std::unordered_set<std::string> clip_ids;
    double expected_offset = 0.0;
    for (const Clip& clip : episode.clips) {
        if (!clip_ids.insert(clip.clip_id).second) {
            flag(EpisodeViolationCode::DuplicateClipId, clip.clip_id);
        }
        if (std::fabs(clip.episode_offset_s - expected_offset) > kOffsetTolerance) {
            flag(EpisodeViolationCode::NonCumulativeOffset,
                 clip.clip_id + ": offset " + std::to_string(clip.episode_offset_s) +
                     ", expected " + std::to_string(expected_offset));
        }
        expected_offset += clip.local_duration_s;
    }

    for (std::size_t i = 0; i < episode.subtitles.size(); ++i) {
        const SubtitleLine& line = episode.subtitles[i];
        if (!(line.start_s >= 0.0) || !(line.start_s < line.end_s)) {
            flag(EpisodeViolationCode::BadSubtitleTiming,
                 "subtitle " + std::to_string(i));
        }
        if (i > 0 && line.start_s < episode.subtitles[i - 1].start_s) {
            flag(EpisodeViolationCode::UnsortedSubtitles, "subtitle " + std::to_string(i));
        }
    }

    std::unordered_set<std::string> question_ids;
    for (const Question& q : episode.questions) {
        if (!question_ids.insert(q.question_id).second) {
            flag(EpisodeViolationCode::DuplicateQuestionId, q.question_id);
        }
        if (q.choices.size() != 5) {
            flag(EpisodeViolationCode::BadChoices, q.question_id);
        }
        if (q.gold_index < 0 || q.gold_index > 4) {
            flag(EpisodeViolationCode::BadGoldIndex, q.question_id);
        }
        if (!episode.find_clip(q.gold_clip_id)) {
            flag(EpisodeViolationCode::DanglingGoldClip,
                 q.question_id + " -> " + q.gold_clip_id);
        }
    }

    for (const BoxAnnotation& box : episode.boxes) {
        const Clip* clip = episode.find_clip(box.clip_id);
        if (clip == nullptr) {
            flag(EpisodeViolationCode::DanglingBoxClip, box.clip_id);
            continue;
        }
        if (box.frame_index < 0 ||
            static_cast<std::size_t>(box.frame_index) >= clip->frame_refs.size()) {
            flag(EpisodeViolationCode::BoxFrameOutOfRange,
                 box.clip_id + "#" + std::to_string(box.frame_index));
        }
    }
    return out;
}

}  // namespace lva
