#include "lva/rewards.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "lva/errors.hpp"

namespace lva {

namespace {

using nlohmann::json;

json opt_vec(const std::optional<std::vector<double>>& v) {
    return v ? json(*v) : json(nullptr);
}

std::optional<std::vector<double>> opt_vec_from(const json& j, const char* key) {
    if (!j.contains(key) || j.at(key).is_null()) return std::nullopt;
    return j.at(key).get<std::vector<double>>();
}

}  // namespace

int score_format(const TurnRecord& turn) {
    return structural_validity(turn.master_text).valid ? 1 : 0;
}

bool answer_matches(const NormalizedAnswer& answer, const Question& question) {
    if (question.gold_index < 0 ||
        static_cast<std::size_t>(question.gold_index) >= question.choices.size()) {
        return false;
    }
    std::string gold_label = "a" + std::to_string(question.gold_index);
    if (answer.label && *answer.label == gold_label) return true;
    NormalizedAnswer gold = normalize_answer(question.choices[question.gold_index]);
    return !answer.text.empty() && answer.text == gold.text;
}

int score_answer(const Trajectory& trajectory, const Question& question) {
    if (!trajectory.final_answer) return 0;
    NormalizedAnswer answer;
    answer.text = *trajectory.final_answer;
    answer.label = trajectory.final_label;
    return answer_matches(answer, question) ? 1 : 0;
}

RewardBreakdown trajectory_return(std::vector<int> per_step_fmt, int answer_reward,
                                  double alpha) {
    RewardBreakdown breakdown;
    breakdown.per_step_fmt = std::move(per_step_fmt);
    breakdown.answer_reward = answer_reward;
    breakdown.alpha = alpha;
    int fmt_sum = 0;
    for (int f : breakdown.per_step_fmt) fmt_sum += f;
    breakdown.total = alpha * fmt_sum + answer_reward;
    return breakdown;
}

RewardBreakdown score_trajectory(const Trajectory& trajectory, const Question& question,
                                 double alpha) {
    std::vector<int> fmt;
    fmt.reserve(trajectory.turns.size());
    for (const TurnRecord& turn : trajectory.turns) fmt.push_back(score_format(turn));
    return trajectory_return(std::move(fmt), score_answer(trajectory, question), alpha);
}

const char* to_string(BaselineMode mode) {
    switch (mode) {
        case BaselineMode::GroupMean: return "group_mean";
        case BaselineMode::None: return "none";
    }
    return "unknown";
}

std::vector<double> group_advantages(std::span<const double> returns, double std_floor) {
    const std::size_t n = returns.size();
    std::vector<double> advantages(n, 0.0);
    if (n == 0) return advantages;
    // degenerate group: identical returns carry no ranking signal
    if (std::all_of(returns.begin(), returns.end(),
                    [&](double r) { return r == returns[0]; })) {
        return advantages;
    }
    double mean = 0.0;
    for (double r : returns) mean += r;
    mean /= static_cast<double>(n);
    double variance = 0.0;
    for (double r : returns) variance += (r - mean) * (r - mean);
    variance /= static_cast<double>(n);  // population std
    double denom = std::max(std::sqrt(variance), std_floor);
    for (std::size_t i = 0; i < n; ++i) advantages[i] = (returns[i] - mean) / denom;
    return advantages;
}

std::vector<double> group_advantages(std::span<const double> returns,
                                     const GrpoConfig& config) {
    if (config.baseline == BaselineMode::None) {
        return std::vector<double>(returns.begin(), returns.end());
    }
    return group_advantages(returns, config.std_floor);
}

SurrogateTerms clipped_surrogate(std::span<const double> logp_new,
                                 std::span<const double> logp_old, double advantage,
                                 const GrpoConfig& config, std::span<const double> logp_ref,
                                 std::span<const double> entropy) {
    if (logp_new.size() != logp_old.size()) {
        throw Error(ErrorCode::LengthMismatch,
                    "logp_new has " + std::to_string(logp_new.size()) + " tokens, logp_old has " +
                        std::to_string(logp_old.size()));
    }
    if (!logp_ref.empty() && logp_ref.size() != logp_new.size()) {
        throw Error(ErrorCode::LengthMismatch, "logp_ref misaligned");
    }
    if (!entropy.empty() && entropy.size() != logp_new.size()) {
        throw Error(ErrorCode::LengthMismatch, "entropy misaligned");
    }

    SurrogateTerms terms;
    terms.per_token.reserve(logp_new.size());
    const double lo = 1.0 - config.clip_epsilon;
    const double hi = 1.0 + config.clip_epsilon;
    for (std::size_t i = 0; i < logp_new.size(); ++i) {
        double ratio = std::exp(logp_new[i] - logp_old[i]);
        double unclipped = ratio * advantage;
        double clipped = std::clamp(ratio, lo, hi) * advantage;
        double term = -std::min(unclipped, clipped);
        if (!logp_ref.empty()) {
            double delta = logp_ref[i] - logp_new[i];
            term += config.kl_coeff * (std::exp(delta) - delta - 1.0);
        }
        if (!entropy.empty()) {
            term -= config.entropy_coeff * entropy[i];
        }
        terms.per_token.push_back(term);
    }
    if (!terms.per_token.empty()) {
        double sum = 0.0;
        for (double t : terms.per_token) sum += t;
        terms.mean = sum / static_cast<double>(terms.per_token.size());
    }
    return terms;
}

void score_group(RolloutGroup& group, const Question& question, double alpha,
                 const GrpoConfig& config) {
    std::vector<double> returns;
    returns.reserve(group.rollouts.size());
    for (ScoredRollout& rollout : group.rollouts) {
        rollout.reward = score_trajectory(rollout.trajectory, question, alpha);
        returns.push_back(rollout.reward.total);
    }
    std::vector<double> advantages = group_advantages(returns, config);
    for (std::size_t i = 0; i < group.rollouts.size(); ++i) {
        group.rollouts[i].advantage = advantages[i];
    }
}

TrainingBatch make_training_batch(const std::vector<RolloutGroup>& groups,
                                  const std::vector<Episode>& episodes,
                                  const GrpoMeta& meta) {
    TrainingBatch batch;
    batch.meta = meta;
    for (const RolloutGroup& group : groups) {
        for (std::size_t i = 0; i < group.rollouts.size(); ++i) {
            const ScoredRollout& rollout = group.rollouts[i];
            const Trajectory& trajectory = rollout.trajectory;
            RolloutRecord record;
            record.context_id = group.context_id;
            record.question_id = trajectory.question_id;
            record.rollout_index = static_cast<int>(i);
            for (const Episode& episode : episodes) {
                if (episode.episode_id != trajectory.episode_id) continue;
                const Question* question = episode.find_question(trajectory.question_id);
                if (question != nullptr) {
                    record.transcript = assemble_context(episode, *question, trajectory.turns,
                                                         trajectory.config);
                }
                break;
            }
            for (const TurnRecord& turn : trajectory.turns) {
                record.turn_texts.push_back(turn.master_text);
            }
            record.per_step_fmt = rollout.reward.per_step_fmt;
            record.answer_reward = rollout.reward.answer_reward;
            record.total_return = rollout.reward.total;
            record.advantage = rollout.advantage;
            record.config = trajectory.config;
            record.logp_new = rollout.logp_new;
            record.logp_old = rollout.logp_old;
            record.logp_ref = rollout.logp_ref;
            batch.rollouts.push_back(std::move(record));
        }
    }
    return batch;
}

void export_batch(const TrainingBatch& batch, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error(ErrorCode::IoError, "cannot write " + path.string());

    json meta;
    meta["type"] = "metadata";
    meta["lr"] = batch.meta.lr;
    meta["max_steps_opt"] = batch.meta.max_steps_opt;
    meta["kl_coeff"] = batch.meta.kl_coeff;
    meta["batch_size"] = batch.meta.batch_size;
    meta["n_rollouts"] = batch.meta.n_rollouts;
    meta["temperature"] = batch.meta.temperature;
    out << meta.dump() << '\n';

    for (const RolloutRecord& record : batch.rollouts) {
        json j;
        j["type"] = "rollout";
        j["context_id"] = record.context_id;
        j["question_id"] = record.question_id;
        j["rollout_index"] = record.rollout_index;
        json transcript = json::array();
        for (const ChatMessage& message : record.transcript) {
            json m;
            m["role"] = message.role;
            m["content"] = message.content;
            if (!message.image_refs.empty()) m["image_refs"] = message.image_refs;
            transcript.push_back(std::move(m));
        }
        j["transcript"] = std::move(transcript);
        j["turn_texts"] = record.turn_texts;
        j["per_step_fmt"] = record.per_step_fmt;
        j["answer_reward"] = record.answer_reward;
        j["total_return"] = record.total_return;
        j["advantage"] = record.advantage;
        json cfg;
        cfg["max_steps"] = record.config.max_steps;
        cfg["window"] = record.config.window;
        cfg["eos_marker"] = record.config.eos_marker;
        cfg["system_prompt"] = record.config.system_prompt;
        cfg["answer_prefix"] = record.config.answer_prefix;
        cfg["rethink_message"] = record.config.rethink_message;
        cfg["force_answer"] = record.config.force_answer;
        j["config"] = std::move(cfg);
        j["logp_new"] = opt_vec(record.logp_new);
        j["logp_old"] = opt_vec(record.logp_old);
        j["logp_ref"] = opt_vec(record.logp_ref);
        out << j.dump() << '\n';
    }
}

TrainingBatch load_batch(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(ErrorCode::IoError, "cannot open " + path.string());
    TrainingBatch batch;
    std::string line;
    bool saw_meta = false;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        json j = json::parse(line, nullptr, false);
        if (j.is_discarded()) {
            throw Error(ErrorCode::IoError,
                        path.string() + ":" + std::to_string(lineno) + ": invalid JSON");
        }
        std::string type = j.value("type", "");
        if (type == "metadata") {
            batch.meta.lr = j.value("lr", batch.meta.lr);
            batch.meta.max_steps_opt = j.value("max_steps_opt", batch.meta.max_steps_opt);
            batch.meta.kl_coeff = j.value("kl_coeff", batch.meta.kl_coeff);
            batch.meta.batch_size = j.value("batch_size", batch.meta.batch_size);
            batch.meta.n_rollouts = j.value("n_rollouts", batch.meta.n_rollouts);
            batch.meta.temperature = j.value("temperature", batch.meta.temperature);
            saw_meta = true;
            continue;
        }
        if (type != "rollout") {
            throw Error(ErrorCode::IoError, "unknown record type '" + type + "'");
        }
        RolloutRecord record;
        record.context_id = j.at("context_id").get<std::string>();
        record.question_id = j.at("question_id").get<std::string>();
        record.rollout_index = j.at("rollout_index").get<int>();
        for (const auto& m : j.at("transcript")) {
            ChatMessage message;
            message.role = m.at("role").get<std::string>();
            message.content = m.at("content").get<std::string>();
            if (m.contains("image_refs")) {
                message.image_refs = m.at("image_refs").get<std::vector<std::string>>();
            }
            record.transcript.push_back(std::move(message));
        }
        record.turn_texts = j.at("turn_texts").get<std::vector<std::string>>();
        record.per_step_fmt = j.at("per_step_fmt").get<std::vector<int>>();
        record.answer_reward = j.at("answer_reward").get<int>();
        record.total_return = j.at("total_return").get<double>();
        record.advantage = j.at("advantage").get<double>();
        const auto& cfg = j.at("config");
        record.config.max_steps = cfg.value("max_steps", 5);
        record.config.window = cfg.value("window", 1);
        record.config.eos_marker = cfg.value("eos_marker", record.config.eos_marker);
        record.config.system_prompt = cfg.value("system_prompt", "");
        record.config.answer_prefix = cfg.value("answer_prefix", record.config.answer_prefix);
        record.config.rethink_message =
            cfg.value("rethink_message", record.config.rethink_message);
        record.config.force_answer = cfg.value("force_answer", false);
        record.logp_new = opt_vec_from(j, "logp_new");
        record.logp_old = opt_vec_from(j, "logp_old");
        record.logp_ref = opt_vec_from(j, "logp_ref");
        batch.rollouts.push_back(std::move(record));
    }
    if (!saw_meta) {
        throw Error(ErrorCode::IoError, "batch file missing metadata record");
    }
    return batch;
}

}  // namespace lva
