#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "lva/backends.hpp"
#include "lva/episode.hpp"
#include "lva/orchestrator.hpp"

namespace lva {

enum class GroundingMetric { Last, Any };
const char* to_string(GroundingMetric metric);

struct QuestionResult {
    std::string question_id;
    std::string episode_id;
    std::optional<std::string> predicted_label;
    bool correct = false;
    bool grounding_correct = false;
    int n_turns = 0;
    int n_vision_calls = 0;
    int n_grounding_calls = 0;
    TerminatedBy terminated_by = TerminatedBy::StepLimit;
    bool forced = false;   // answer came from the force-answer fallback
    bool errored = false;  // excluded from accuracy denominators
    std::string error;
};

struct EvalConfig {
    RunConfig run;
    GroundingMetric grounding_metric = GroundingMetric::Last;
    int parallelism = 4;
    bool strict = false;  // abort on the first backend failure
    std::uint64_t seed = 0;
    std::string dataset_id;
};

struct EvalReport {
    std::string dataset_id;
    EvalConfig config;
    std::vector<QuestionResult> results;  // sorted by question_id
    int n_questions = 0;
    int n_scored = 0;
    int n_errored = 0;
    double answer_accuracy = 0.0;     // percent over scored questions
    double grounding_accuracy = 0.0;  // percent over scored questions
    double mean_turns = 0.0;
    std::vector<std::string> warnings;
    double wall_time_s = 0.0;  // in-memory only; artifacts stay byte-stable
};

// True iff the gold clip lies in the window run centered on the last grounded
// clip (re-grounding supersedes earlier attempts); GroundingMetric::Any
// accepts a hit from any grounding call instead.
bool grounding_correct(const Trajectory& trajectory, const Question& question,
                       const Episode& episode, int window,
                       GroundingMetric metric = GroundingMetric::Last);

// Runs one trajectory per question, scores answers and grounding, and
// aggregates the report. Backend failures mark the question errored (with
// --strict they abort by rethrowing). When out_dir is set, trajectories, the
// report, per-question results, and a summary table are persisted there.
EvalReport run_eval(const std::vector<Episode>& dataset, const Backends& backends,
                    const EvalConfig& config,
                    const std::optional<std::filesystem::path>& out_dir = std::nullopt);

// Owning backend bundle so sweeps can rebuild fresh (scripted) backends per
// axis point, keeping seeds and fixture cursors identical across points.
struct BackendBundle {
    std::shared_ptr<MasterBackend> master;
    std::shared_ptr<GroundingBackend> grounding;
    std::shared_ptr<VisionBackend> vision;

    Backends view() const { return {master.get(), grounding.get(), vision.get()}; }
};

using BackendFactory = std::function<BackendBundle()>;

BackendBundle make_scripted_bundle(std::shared_ptr<const ScriptedFixture> fixture,
                                   std::uint64_t seed_salt = 0);

enum class SweepAxis { MaxSteps, Window };
const char* to_string(SweepAxis axis);

// One eval per axis value with identical seeds and fixtures, so differences
// isolate the axis. Writes per-point artifacts plus a comparison table when
// out_dir is given.
std::vector<EvalReport> sweep(const std::vector<Episode>& dataset,
                              const BackendFactory& make_backends, SweepAxis axis,
                              const std::vector<int>& values, const EvalConfig& base_config,
                              const std::optional<std::filesystem::path>& out_dir = std::nullopt);

std::string report_to_json(const EvalReport& report);
std::string question_result_to_jsonl(const QuestionResult& result);

// Plain-text table, one row per report: setting, grounding accuracy, accuracy.
std::string summary_table(const std::vector<EvalReport>& reports,
                          const std::vector<std::string>& row_labels);

void save_report(const EvalReport& report, const std::filesystem::path& out_dir);

}  // namespace lva
