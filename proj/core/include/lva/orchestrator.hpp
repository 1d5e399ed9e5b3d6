#pragma once

#include <optional>
#include <span>
#include <string>
#include <vector>

#include "lva/action_grammar.hpp"
#include "lva/backends.hpp"
#include "lva/episode.hpp"
#include "lva/errors.hpp"

namespace lva {

extern const char* const kDefaultSystemPrompt;
extern const char* const kDefaultRethinkMessage;
extern const char* const kDefaultAnswerPrefix;
extern const char* const kNoClipNotice;
extern const char* const kForceAnswerMessage;
extern const char* const kVisionInjectionPrefix;

struct RunConfig {
    int max_steps = 5;  // step budget K
    int window = 1;     // consecutive-clip context size
    std::string eos_marker = std::string(kDefaultEosMarker);
    std::string system_prompt;  // empty means kDefaultSystemPrompt
    std::string answer_prefix = kDefaultAnswerPrefix;
    std::string rethink_message = kDefaultRethinkMessage;
    bool force_answer = false;

    const std::string& effective_system_prompt() const;
    bool operator==(const RunConfig&) const = default;
};

struct TurnRecord {
    int step_index = 0;
    std::string master_text;
    std::optional<ParsedAction> action;
    StructuralVerdict verdict;
    // Text injected back into the context: grounding tag + subtitles, vision
    // observation, or the rethink message. Absent iff the turn is the
    // terminating answer.
    std::optional<std::string> injected;
    std::optional<std::string> current_clip;  // clip in effect after this turn
};

enum class TerminatedBy { Answer, StepLimit };
const char* to_string(TerminatedBy t);

struct Trajectory {
    std::string question_id;
    std::string episode_id;
    RunConfig config;
    std::vector<TurnRecord> turns;
    std::optional<std::string> final_answer;      // normalized
    std::optional<std::string> final_answer_raw;  // verbatim <answer> payload
    std::optional<std::string> final_label;       // "a3" style label, when present
    std::optional<std::string> forced_answer;     // from the force_answer fallback
    std::optional<std::string> forced_label;
    TerminatedBy terminated_by = TerminatedBy::StepLimit;
    std::vector<std::string> grounded_clips;  // every grounding result, in call order

    std::optional<std::string> current_clip() const;
    int vision_calls() const;
    int grounding_calls() const;
};

enum class BackendKind { Master, Grounding, Vision };
const char* to_string(BackendKind kind);

class BackendFailure : public Error {
  public:
    BackendFailure(BackendKind kind, int step_index, const std::string& message,
                   std::vector<TurnRecord> partial_turns)
        : Error(ErrorCode::MalformedResponse,
                std::string(to_string(kind)) + " backend failed at step " +
                    std::to_string(step_index) + ": " + message),
          kind_(kind),
          step_index_(step_index),
          partial_turns_(std::move(partial_turns)) {}

    BackendKind kind() const { return kind_; }
    int step_index() const { return step_index_; }
    const std::vector<TurnRecord>& partial_turns() const { return partial_turns_; }

  private:
    BackendKind kind_;
    int step_index_;
    std::vector<TurnRecord> partial_turns_;
};

// Chat transcript for the next master call: system prompt, then one user
// message holding all subtitles + question + choices, then per prior turn the
// master text as assistant content and any injected text as user content.
ChatTranscript assemble_context(const Episode& episode, const Question& question,
                                std::span<const TurnRecord> prior_turns,
                                const RunConfig& config);

// The bounded multi-turn loop: generate, parse, dispatch to grounding/vision,
// inject observations, and terminate on <answer> or step exhaustion.
Trajectory run_trajectory(const Episode& episode, const Question& question,
                          const Backends& backends, const RunConfig& config);

// Optional evaluation fallback for StepLimit trajectories: one extra master
// call demanding an answer. Off by default; step-exhausted runs score zero.
std::optional<std::string> force_answer(Trajectory& trajectory, const Episode& episode,
                                        const Question& question, const Backends& backends);

}  // namespace lva
