#include "lva/orchestrator.hpp"

#include <algorithm>

namespace lva {

const char* const kDefaultSystemPrompt =
    "You are an agent that answers questions about a long video episode. You may use two "
    "tools: a grounding agent to localize relevant segments and a vision agent to extract "
    "visual facts from the localized segment. Produce concise, direct answers.\n"
    "\n"
    "Context you may receive. All subtitles and the user question q. When a segment has "
    "been localized, you will also have a tag <clipX> (e.g., <clip2>). When the vision "
    "agent has been called, you will see its textual response.\n"
    "\n"
    "Available actions (choose exactly one per turn).\n"
    "A - Visual query: If current visual information is insufficient, or you need visual "
    "details conditioned on the subtitles for the current <clipX>, call the vision engine "
    "with <visual_query> query </visual_query>.\n"
    "B - (Re)Grounding: If the current text/visual evidence conflicts with the question, "
    "or the current location cannot support a confident answer, call the grounding agent "
    "with <request_grounding>.\n"
    "C - Answer: If evidence is sufficient, return the final answer with "
    "<answer> ... </answer>. The answer must be concise and direct.\n"
    "\n"
    "Guidelines. (1) Be conservative with tool calls; answer when sufficient. (2) Do not "
    "hallucinate visual details; only use the vision agent for facts not inferable from "
    "subtitles. (3) Each turn targets the current <clipX> (if any); if none exists, "
    "prefer (re)grounding before visual query.";

const char* const kDefaultRethinkMessage =
    "The action is not correct. Only <visual_query>, <request_grounding>, or <answer>.";

const char* const kDefaultAnswerPrefix = "The answer is: ";

const char* const kNoClipNotice =
    "No segment grounded yet; request grounding first.";

const char* const kForceAnswerMessage =
    "You must answer now with <answer>...</answer>.";

const char* const kVisionInjectionPrefix = "Visual description: ";

namespace {

// Cuts backend output at the earliest stop marker. Closing tags stay part of
// the turn; the eos marker is a terminator and is stripped.
std::string truncate_at_stop(std::string raw, const RunConfig& config) {
    auto match = scan_stop_match(raw, config.eos_marker);
    if (!match) return raw;
    raw.resize(match->end_pos);
    if (match->marker_index == 3) {
        raw.resize(raw.size() - config.eos_marker.size());
    }
    return raw;
}

std::string clip_tag(const std::string& clip_id) { return "<" + clip_id + ">"; }

std::vector<const Clip*> window_clips(const Episode& episode, std::size_t center, int window) {
    ClipRun run = window_run(episode.clips.size(), center, window);
    std::vector<const Clip*> clips;
    for (std::size_t i = run.lo; i <= run.hi; ++i) clips.push_back(&episode.clips[i]);
    return clips;
}

}  // namespace

const std::string& RunConfig::effective_system_prompt() const {
    static const std::string kDefault(kDefaultSystemPrompt);
    return system_prompt.empty() ? kDefault : system_prompt;
}

const char* to_string(TerminatedBy t) {
    switch (t) {
        case TerminatedBy::Answer: return "answer";
        case TerminatedBy::StepLimit: return "step_limit";
    }
    return "unknown";
}

const char* to_string(BackendKind kind) {
    switch (kind) {
        case BackendKind::Master: return "master";
        case BackendKind::Grounding: return "grounding";
        case BackendKind::Vision: return "vision";
    }
    return "unknown";
}

std::optional<std::string> Trajectory::current_clip() const {
    for (auto it = turns.rbegin(); it != turns.rend(); ++it) {
        if (it->current_clip) return it->current_clip;
    }
    return std::nullopt;
}

int Trajectory::vision_calls() const {
    int n = 0;
    for (const TurnRecord& turn : turns) {
        if (turn.action && turn.action->kind == ActionKind::VisualQuery && turn.injected &&
            turn.injected->rfind(kVisionInjectionPrefix, 0) == 0) {
            ++n;
        }
    }
    return n;
}

int Trajectory::grounding_calls() const { return static_cast<int>(grounded_clips.size()); }

ChatTranscript assemble_context(const Episode& episode, const Question& question,
                                std::span<const TurnRecord> prior_turns,
                                const RunConfig& config) {
    ChatTranscript transcript;
    transcript.push_back({"system", config.effective_system_prompt(), {}});

    std::string opening = "Subtitles:\n";
    opening += format_all_subtitles(episode);
    opening += "\n\nQuestion: ";
    opening += question.text;
    opening += "\nChoices:";
    for (std::size_t i = 0; i < question.choices.size(); ++i) {
        opening += "\na" + std::to_string(i) + ": " + question.choices[i];
    }
    transcript.push_back({"user", std::move(opening), {}});

    for (const TurnRecord& turn : prior_turns) {
        transcript.push_back({"assistant", turn.master_text, {}});
        if (turn.injected) {
            transcript.push_back({"user", *turn.injected, {}});
        }
    }
    return transcript;
}

Trajectory run_trajectory(const Episode& episode, const Question& question,
                          const Backends& backends, const RunConfig& config) {
    Trajectory trajectory;
    trajectory.question_id = question.question_id;
    trajectory.episode_id = episode.episode_id;
    trajectory.config = config;

    const std::vector<std::string> markers = stop_markers(config.eos_marker);
    const std::string all_subtitles = format_all_subtitles(episode);
    std::optional<std::size_t> current_clip;

    int t = 0;
    while (t < config.max_steps) {
        ChatTranscript transcript = assemble_context(episode, question, trajectory.turns, config);

        std::string raw;
        try {
            raw = backends.master->generate(question.question_id, transcript, markers);
        } catch (const std::exception& e) {
            throw BackendFailure(BackendKind::Master, t, e.what(), trajectory.turns);
        }

        TurnRecord turn;
        turn.step_index = t;
        turn.master_text = truncate_at_stop(std::move(raw), config);
        turn.action = parse_action(turn.master_text);
        turn.verdict = structural_validity(turn.master_text);

        if (turn.action && turn.action->kind == ActionKind::Answer) {
            NormalizedAnswer normalized = normalize_answer(turn.action->payload);
            trajectory.final_answer_raw = turn.action->payload;
            trajectory.final_answer = normalized.text;
            trajectory.final_label = normalized.label;
            trajectory.terminated_by = TerminatedBy::Answer;
            turn.current_clip = current_clip ? std::optional<std::string>(
                                                   episode.clips[*current_clip].clip_id)
                                             : std::nullopt;
            trajectory.turns.push_back(std::move(turn));
            return trajectory;
        }

        if (turn.action && turn.action->kind == ActionKind::VisualQuery) {
            if (!current_clip) {
                turn.injected = kNoClipNotice;
            } else {
                VisionRequest request;
                request.question_id = question.question_id;
                request.query = turn.action->payload;
                request.clip = &episode.clips[*current_clip];
                request.window_clips = window_clips(episode, *current_clip, config.window);
                request.episode = &episode;
                try {
                    turn.injected = kVisionInjectionPrefix + backends.vision->describe(request);
                } catch (const std::exception& e) {
                    throw BackendFailure(BackendKind::Vision, t, e.what(), trajectory.turns);
                }
            }
        } else if (turn.action && turn.action->kind == ActionKind::RequestGrounding) {
            GroundingRequest request;
            request.question_id = question.question_id;
            request.question = question.text;
            request.subtitles = all_subtitles;
            request.episode = &episode;
            std::string returned;
            try {
                returned = backends.grounding->ground(request);
            } catch (const std::exception& e) {
                throw BackendFailure(BackendKind::Grounding, t, e.what(), trajectory.turns);
            }
            auto resolved = episode.resolve_clip_tag(returned);
            if (!resolved) {
                throw BackendFailure(BackendKind::Grounding, t,
                                     "returned unresolvable clip tag '" + returned + "'",
                                     trajectory.turns);
            }
            current_clip = resolved;
            const std::string& clip_id = episode.clips[*resolved].clip_id;
            trajectory.grounded_clips.push_back(clip_id);
            std::string injected = clip_tag(clip_id);
            std::string subs = subtitles_for(episode, clip_id, config.window);
            if (!subs.empty()) {
                injected += '\n';
                injected += subs;
            }
            turn.injected = std::move(injected);
        } else {
            turn.injected = config.rethink_message;
        }

        turn.current_clip = current_clip
            ? std::optional<std::string>(episode.clips[*current_clip].clip_id)
            : std::nullopt;
        trajectory.turns.push_back(std::move(turn));
        ++t;
    }

    trajectory.terminated_by = TerminatedBy::StepLimit;
    return trajectory;
}

std::optional<std::string> force_answer(Trajectory& trajectory, const Episode& episode,
                                        const Question& question, const Backends& backends) {
    if (!trajectory.config.force_answer || trajectory.terminated_by != TerminatedBy::StepLimit) {
        return std::nullopt;
    }
    ChatTranscript transcript =
        assemble_context(episode, question, trajectory.turns, trajectory.config);
    transcript.push_back({"user", kForceAnswerMessage, {}});

    std::string raw;
    try {
        raw = backends.master->generate(question.question_id, transcript,
                                        stop_markers(trajectory.config.eos_marker));
    } catch (const std::exception& e) {
        throw BackendFailure(BackendKind::Master, static_cast<int>(trajectory.turns.size()),
                             e.what(), trajectory.turns);
    }
    std::string text = truncate_at_stop(std::move(raw), trajectory.config);
    auto action = parse_action(text);
    if (!action || action->kind != ActionKind::Answer) return std::nullopt;
    NormalizedAnswer normalized = normalize_answer(action->payload);
    trajectory.forced_answer = normalized.text;
    trajectory.forced_label = normalized.label;
    return normalized.text;
}

}  // namespace lva
