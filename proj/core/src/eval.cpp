#include "lva/eval.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cstdio>
#include <exception>
#include <fstream>
#include <mutex>
#include <thread>

#include <json.hpp>

#include "lva/errors.hpp"
#include "lva/rewards.hpp"
#include "lva/trajectory_io.hpp"

namespace lva {

namespace {

using nlohmann::json;

struct Task {
    const Episode* episode = nullptr;
    const Question* question = nullptr;
};

struct TaskOutcome {
    QuestionResult result;
    std::optional<Trajectory> trajectory;
};

// The label the answer selects: an explicit "aN" label wins; otherwise the
// first choice whose normalized text equals the answer text.
std::optional<std::string> resolve_predicted_label(const NormalizedAnswer& answer,
                                                   const Question& question) {
    if (answer.label) return answer.label;
    if (answer.text.empty()) return std::nullopt;
    for (std::size_t i = 0; i < question.choices.size(); ++i) {
        if (normalize_answer(question.choices[i]).text == answer.text) {
            return "a" + std::to_string(i);
        }
    }
    return std::nullopt;
}

TaskOutcome run_one(const Task& task, const Backends& backends, const EvalConfig& config) {
    TaskOutcome outcome;
    QuestionResult& result = outcome.result;
    result.question_id = task.question->question_id;
    result.episode_id = task.episode->episode_id;
    try {
        Trajectory trajectory =
            run_trajectory(*task.episode, *task.question, backends, config.run);
        if (config.run.force_answer && trajectory.terminated_by == TerminatedBy::StepLimit) {
            force_answer(trajectory, *task.episode, *task.question, backends);
        }

        NormalizedAnswer answer;
        if (trajectory.final_answer) {
            answer.text = *trajectory.final_answer;
            answer.label = trajectory.final_label;
        } else if (trajectory.forced_answer) {
            answer.text = *trajectory.forced_answer;
            answer.label = trajectory.forced_label;
            result.forced = true;
        }
        result.predicted_label = resolve_predicted_label(answer, *task.question);
        result.correct = !answer.text.empty() && answer_matches(answer, *task.question);
        result.grounding_correct = grounding_correct(trajectory, *task.question, *task.episode,
                                                     config.run.window,
                                                     config.grounding_metric);
        result.n_turns = static_cast<int>(trajectory.turns.size());
        result.n_vision_calls = trajectory.vision_calls();
        result.n_grounding_calls = trajectory.grounding_calls();
        result.terminated_by = trajectory.terminated_by;
        outcome.trajectory = std::move(trajectory);
    } catch (const BackendFailure& failure) {
        result.errored = true;
        result.error = failure.what();
        Trajectory partial;
        partial.question_id = task.question->question_id;
        partial.episode_id = task.episode->episode_id;
        partial.config = config.run;
        partial.turns = failure.partial_turns();
        outcome.trajectory = std::move(partial);
    }
    return outcome;
}

std::string format_percent(double value) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.2f", value);
    return buf;
}

}  // namespace

const char* to_string(GroundingMetric metric) {
    switch (metric) {
        case GroundingMetric::Last: return "last";
        case GroundingMetric::Any: return "any";
    }
    return "unknown";
}

const char* to_string(SweepAxis axis) {
    switch (axis) {
        case SweepAxis::MaxSteps: return "max-steps";
        case SweepAxis::Window: return "window";
    }
    return "unknown";
}

bool grounding_correct(const Trajectory& trajectory, const Question& question,
                       const Episode& episode, int window, GroundingMetric metric) {
    if (trajectory.grounded_clips.empty()) return false;
    auto gold = episode.clip_index(question.gold_clip_id);
    if (!gold) return false;
    auto hits = [&](const std::string& clip_id) {
        auto predicted = episode.clip_index(clip_id);
        if (!predicted) return false;
        return window_run(episode.clips.size(), *predicted, window).contains(*gold);
    };
    if (metric == GroundingMetric::Any) {
        return std::any_of(trajectory.grounded_clips.begin(), trajectory.grounded_clips.end(),
                           hits);
    }
    return hits(trajectory.grounded_clips.back());
}

EvalReport run_eval(const std::vector<Episode>& dataset, const Backends& backends,
                    const EvalConfig& config,
                    const std::optional<std::filesystem::path>& out_dir) {
    const auto started = std::chrono::steady_clock::now();

    std::vector<Task> tasks;
    for (const Episode& episode : dataset) {
        for (const Question& question : episode.questions) {
            tasks.push_back({&episode, &question});
        }
    }

    std::vector<TaskOutcome> outcomes(tasks.size());
    std::atomic<std::size_t> next{0};
    std::atomic<bool> aborted{false};
    std::exception_ptr strict_failure;
    std::mutex failure_mutex;

    auto worker = [&]() {
        while (!aborted.load(std::memory_order_relaxed)) {
            std::size_t i = next.fetch_add(1);
            if (i >= tasks.size()) return;
            outcomes[i] = run_one(tasks[i], backends, config);
            if (config.strict && outcomes[i].result.errored) {
                std::lock_guard<std::mutex> lock(failure_mutex);
                if (!strict_failure) {
                    strict_failure = std::make_exception_ptr(
                        Error(ErrorCode::StrictAbort, outcomes[i].result.error));
                }
                aborted.store(true, std::memory_order_relaxed);
            }
        }
    };

    int n_workers = std::max(1, std::min<int>(config.parallelism,
                                              static_cast<int>(tasks.size())));
    if (n_workers <= 1) {
        worker();
    } else {
        std::vector<std::thread> pool;
        pool.reserve(static_cast<std::size_t>(n_workers));
        for (int i = 0; i < n_workers; ++i) pool.emplace_back(worker);
        for (std::thread& t : pool) t.join();
    }
    if (strict_failure) std::rethrow_exception(strict_failure);

    EvalReport report;
    report.dataset_id = config.dataset_id;
    report.config = config;
    report.n_questions = static_cast<int>(tasks.size());

    std::sort(outcomes.begin(), outcomes.end(), [](const TaskOutcome& a, const TaskOutcome& b) {
        return a.result.question_id < b.result.question_id;
    });

    int n_correct = 0;
    int n_grounded = 0;
    long total_turns = 0;
    std::vector<const Trajectory*> to_persist;
    for (TaskOutcome& outcome : outcomes) {
        if (outcome.result.errored) {
            ++report.n_errored;
        } else {
            ++report.n_scored;
            n_correct += outcome.result.correct ? 1 : 0;
            n_grounded += outcome.result.grounding_correct ? 1 : 0;
            total_turns += outcome.result.n_turns;
        }
        report.results.push_back(outcome.result);
    }
    if (report.n_scored > 0) {
        report.answer_accuracy = 100.0 * n_correct / report.n_scored;
        report.grounding_accuracy = 100.0 * n_grounded / report.n_scored;
        report.mean_turns = static_cast<double>(total_turns) / report.n_scored;
    } else {
        report.warnings.push_back("empty_result_set: accuracies reported as 0");
    }

    report.wall_time_s =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();

    if (out_dir) {
        std::filesystem::create_directories(*out_dir / "trajectories");
        std::ofstream index(*out_dir / "trajectories.jsonl", std::ios::binary);
        for (const TaskOutcome& outcome : outcomes) {
            if (!outcome.trajectory) continue;
            const Trajectory& trajectory = *outcome.trajectory;
            std::filesystem::path path =
                *out_dir / "trajectories" / (trajectory.question_id + ".json");
            if (outcome.result.errored) {
                json j = json::parse(trajectory_to_json(trajectory));
                j["error"] = outcome.result.error;
                std::ofstream out(path, std::ios::binary);
                out << j.dump(2) << '\n';
            } else {
                save_trajectory(trajectory, path);
                index << trajectory_index_line(trajectory) << '\n';
            }
        }
        save_report(report, *out_dir);
    }
    return report;
}

BackendBundle make_scripted_bundle(std::shared_ptr<const ScriptedFixture> fixture,
                                   std::uint64_t seed_salt) {
    BackendBundle bundle;
    bundle.master = std::make_shared<ScriptedMasterBackend>(fixture);
    bundle.grounding = std::make_shared<ScriptedGroundingBackend>(fixture, seed_salt);
    bundle.vision = std::make_shared<ScriptedVisionBackend>(fixture);
    return bundle;
}

std::vector<EvalReport> sweep(const std::vector<Episode>& dataset,
                              const BackendFactory& make_backends, SweepAxis axis,
                              const std::vector<int>& values, const EvalConfig& base_config,
                              const std::optional<std::filesystem::path>& out_dir) {
    std::vector<EvalReport> reports;
    std::vector<std::string> labels;
    for (int value : values) {
        if (value < 1) throw Error(ErrorCode::UsageError, "sweep axis values must be >= 1");
        EvalConfig config = base_config;
        if (axis == SweepAxis::MaxSteps) {
            config.run.max_steps = value;
        } else {
            config.run.window = value;
        }
        std::string label = std::string(to_string(axis)) + "=" + std::to_string(value);
        labels.push_back(label);
        BackendBundle bundle = make_backends();
        std::optional<std::filesystem::path> point_dir;
        if (out_dir) point_dir = *out_dir / label;
        reports.push_back(run_eval(dataset, bundle.view(), config, point_dir));
    }
    if (out_dir) {
        std::ofstream out(*out_dir / "comparison.txt", std::ios::binary);
        out << summary_table(reports, labels);
    }
    return reports;
}

std::string report_to_json(const EvalReport& report) {
    json j;
    j["dataset_id"] = report.dataset_id;
    json cfg;
    cfg["max_steps"] = report.config.run.max_steps;
    cfg["window"] = report.config.run.window;
    cfg["eos_marker"] = report.config.run.eos_marker;
    cfg["system_prompt"] = report.config.run.system_prompt;
    cfg["answer_prefix"] = report.config.run.answer_prefix;
    cfg["rethink_message"] = report.config.run.rethink_message;
    cfg["force_answer"] = report.config.run.force_answer;
    cfg["grounding_metric"] = to_string(report.config.grounding_metric);
    cfg["seed"] = report.config.seed;
    cfg["strict"] = report.config.strict;
    j["config"] = std::move(cfg);
    j["n_questions"] = report.n_questions;
    j["n_scored"] = report.n_scored;
    j["n_errored"] = report.n_errored;
    j["answer_accuracy"] = report.answer_accuracy;
    j["grounding_accuracy"] = report.grounding_accuracy;
    j["mean_turns"] = report.mean_turns;
    j["warnings"] = report.warnings;
    json results = json::array();
    for (const QuestionResult& r : report.results) {
        results.push_back(json::parse(question_result_to_jsonl(r)));
    }
    j["results"] = std::move(results);
    return j.dump(2) + "\n";
}

std::string question_result_to_jsonl(const QuestionResult& result) {
    json j;
    j["question_id"] = result.question_id;
    j["episode_id"] = result.episode_id;
    j["predicted_label"] =
        result.predicted_label ? json(*result.predicted_label) : json(nullptr);
    j["correct"] = result.correct;
    j["grounding_correct"] = result.grounding_correct;
    j["n_turns"] = result.n_turns;
    j["n_vision_calls"] = result.n_vision_calls;
    j["n_grounding_calls"] = result.n_grounding_calls;
    j["terminated_by"] = to_string(result.terminated_by);
    j["forced"] = result.forced;
    j["errored"] = result.errored;
    if (result.errored) j["error"] = result.error;
    return j.dump();
}

std::string summary_table(const std::vector<EvalReport>& reports,
                          const std::vector<std::string>& row_labels) {
    std::string out;
    out += "Setting                      Grounding Accuracy (%)   Accuracy (%)\n";
    for (std::size_t i = 0; i < reports.size(); ++i) {
        std::string label = i < row_labels.size() ? row_labels[i] : "run";
        char line[160];
        std::snprintf(line, sizeof(line), "%-28s %22s %14s\n", label.c_str(),
                      format_percent(reports[i].grounding_accuracy).c_str(),
                      format_percent(reports[i].answer_accuracy).c_str());
        out += line;
    }
    return out;
}

void save_report(const EvalReport& report, const std::filesystem::path& out_dir) {
    std::filesystem::create_directories(out_dir);
    {
        std::ofstream out(out_dir / "report.json", std::ios::binary);
        if (!out) throw Error(ErrorCode::IoError, "cannot write report.json");
        out << report_to_json(report);
    }
    {
        std::ofstream out(out_dir / "results.jsonl", std::ios::binary);
        for (const QuestionResult& r : report.results) {
            out << question_result_to_jsonl(r) << '\n';
        }
    }
    {
        std::ofstream out(out_dir / "summary.txt", std::ios::binary);
        std::string label = "K=" + std::to_string(report.config.run.max_steps) +
                            " window=" + std::to_string(report.config.run.window);
        out << summary_table({report}, {label});
    }
}

}  // namespace lva
