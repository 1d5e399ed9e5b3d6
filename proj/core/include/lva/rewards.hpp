#pragma once

#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "lva/backends.hpp"
#include "lva/episode.hpp"
#include "lva/orchestrator.hpp"

namespace lva {

// Rule-based trajectory reward: R = alpha * sum(per-step format reward) + answer reward.
struct RewardBreakdown {
    std::vector<int> per_step_fmt;  // 0/1 per turn, rethink turns included
    int answer_reward = 0;          // 0/1, exact match on the multiple-choice answer
    double alpha = 0.5;
    double total = 0.0;

    bool operator==(const RewardBreakdown&) const = default;
};

// Per-step structural reward: 1 iff the turn text is exactly one well-closed
// action tag (recomputed from the text, not read from the stored verdict).
int score_format(const TurnRecord& turn);

// Exact-match answer correctness: the predicted label equals a{gold_index},
// or the normalized answer text equals the normalized gold choice.
bool answer_matches(const NormalizedAnswer& answer, const Question& question);
int score_answer(const Trajectory& trajectory, const Question& question);

RewardBreakdown trajectory_return(std::vector<int> per_step_fmt, int answer_reward,
                                  double alpha);

// Scores a trajectory end to end: per-turn format rewards plus the terminal
// answer reward, combined at the given alpha.
RewardBreakdown score_trajectory(const Trajectory& trajectory, const Question& question,
                                 double alpha);

enum class BaselineMode { GroupMean, None };
const char* to_string(BaselineMode mode);

struct GrpoConfig {
    double clip_epsilon = 0.2;
    double kl_coeff = 1e-3;
    double entropy_coeff = 0.0;
    double std_floor = 1e-6;
    BaselineMode baseline = BaselineMode::GroupMean;
};

// Group-relative advantages: (R_i - mean) / max(population std, std_floor).
// With BaselineMode::None the returns pass through unchanged.
std::vector<double> group_advantages(std::span<const double> returns, double std_floor);
std::vector<double> group_advantages(std::span<const double> returns, const GrpoConfig& config);

struct SurrogateTerms {
    std::vector<double> per_token;
    double mean = 0.0;
};

// Per-token clipped policy-gradient loss with optional KL penalty against a
// reference policy (non-negative k3 estimator) and optional entropy bonus.
// Throws Error(LengthMismatch) when sequences are not aligned.
SurrogateTerms clipped_surrogate(std::span<const double> logp_new,
                                 std::span<const double> logp_old, double advantage,
                                 const GrpoConfig& config,
                                 std::span<const double> logp_ref = {},
                                 std::span<const double> entropy = {});

// One rollout of a group, scored and ready for export.
struct ScoredRollout {
    Trajectory trajectory;
    RewardBreakdown reward;
    double advantage = 0.0;
    std::optional<std::vector<double>> logp_new;
    std::optional<std::vector<double>> logp_old;
    std::optional<std::vector<double>> logp_ref;
};

struct RolloutGroup {
    std::string context_id;  // episode_id + "/" + question_id
    std::vector<ScoredRollout> rollouts;
};

// Scores each rollout and fills group-relative advantages in place.
void score_group(RolloutGroup& group, const Question& question, double alpha,
                 const GrpoConfig& config);

// Optimizer hyperparameters recorded alongside exported batches.
struct GrpoMeta {
    double lr = 5e-6;
    int max_steps_opt = 2000;
    double kl_coeff = 1e-3;
    int batch_size = 4;
    int n_rollouts = 4;
    double temperature = 1.0;

    bool operator==(const GrpoMeta&) const = default;
};

// Flat training-batch record handed to an external trainer.
struct RolloutRecord {
    std::string context_id;
    std::string question_id;
    int rollout_index = 0;
    ChatTranscript transcript;
    std::vector<std::string> turn_texts;
    std::vector<int> per_step_fmt;
    int answer_reward = 0;
    double total_return = 0.0;
    double advantage = 0.0;
    RunConfig config;
    std::optional<std::vector<double>> logp_new;
    std::optional<std::vector<double>> logp_old;
    std::optional<std::vector<double>> logp_ref;

    bool operator==(const RolloutRecord&) const = default;
};

struct TrainingBatch {
    GrpoMeta meta;
    std::vector<RolloutRecord> rollouts;

    bool operator==(const TrainingBatch&) const = default;
};

// Builds the flat batch from scored groups; transcripts are re-assembled from
// each rollout's episode context.
TrainingBatch make_training_batch(const std::vector<RolloutGroup>& groups,
                                  const std::vector<Episode>& episodes,
                                  const GrpoMeta& meta);

// JSONL: one metadata record followed by one record per rollout.
void export_batch(const TrainingBatch& batch, const std::filesystem::path& path);
TrainingBatch load_batch(const std::filesystem::path& path);

}  // namespace lva
