#include <chrono>
#include <cstdlib>
#include <ctime>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "lva/config.hpp"
#include "lva/episode_io.hpp"
#include "lva/errors.hpp"
#include "lva/eval.hpp"
#include "lva/remote_backends.hpp"
#include "lva/rewards.hpp"
#include "lva/trajectory_io.hpp"

namespace {

using namespace lva;

constexpr int kExitOk = 0;
constexpr int kExitUsage = 1;
constexpr int kExitRuntime = 2;
constexpr int kExitStrictAbort = 3;

struct CliOptions {
    std::string config_path;
    std::string out_dir;
    std::string dataset_path;
    std::string episode_path;
    std::string question_id;
    std::string fixtures_path;
    std::string backend = "scripted";
    std::string grounding_metric;
    std::string axis;
    std::string in_path;
    std::optional<int> max_steps;
    std::optional<int> window;
    std::optional<double> alpha;
    std::optional<std::uint64_t> seed;
    std::optional<int> parallelism;
    int rollouts = 4;
    bool strict = false;
    bool force_answer = false;
};

AppConfig resolve_config(const CliOptions& opts) {
    AppConfig config;
    std::string path = opts.config_path;
    if (path.empty()) {
        if (const char* env = std::getenv("LVA_CONFIG")) path = env;
    }
    if (!path.empty()) config = load_app_config(path);

    if (opts.max_steps) config.run.max_steps = *opts.max_steps;
    if (opts.window) config.run.window = *opts.window;
    if (opts.alpha) config.alpha = *opts.alpha;
    if (opts.seed) config.seed = *opts.seed;
    if (opts.parallelism) config.parallelism = *opts.parallelism;
    if (opts.strict) config.strict = true;
    if (opts.force_answer) config.run.force_answer = true;
    if (!opts.grounding_metric.empty()) {
        if (opts.grounding_metric == "last") {
            config.grounding_metric = GroundingMetric::Last;
        } else if (opts.grounding_metric == "any") {
            config.grounding_metric = GroundingMetric::Any;
        } else {
            throw Error(ErrorCode::UsageError, "--grounding-metric must be last|any");
        }
    }
    if (config.run.max_steps < 1) throw Error(ErrorCode::ConfigError, "max_steps must be >= 1");
    if (config.run.window < 1) throw Error(ErrorCode::ConfigError, "window must be >= 1");
    return config;
}

std::shared_ptr<const ScriptedFixture> load_fixture_for(const CliOptions& opts,
                                                        const AppConfig& config) {
    if (opts.fixtures_path.empty()) {
        throw Error(ErrorCode::UsageError, "--fixtures is required with --backend scripted");
    }
    ScriptedFixture fixture = load_fixture(opts.fixtures_path);
    if (opts.seed) fixture.rng_seed = config.seed;
    return std::make_shared<const ScriptedFixture>(std::move(fixture));
}

BackendBundle make_bundle(const CliOptions& opts, const AppConfig& config,
                          std::uint64_t seed_salt = 0) {
    if (opts.backend == "scripted") {
        return make_scripted_bundle(load_fixture_for(opts, config), seed_salt);
    }
    if (opts.backend != "remote") {
        throw Error(ErrorCode::UsageError, "--backend must be scripted|remote");
    }
    if (config.master_endpoint.base_url.empty()) {
        throw Error(ErrorCode::ConfigError, "backends.master.url is not configured");
    }
    BackendBundle bundle;
    bundle.master = std::make_shared<RemoteMasterBackend>(config.master_endpoint);
    bundle.grounding = std::make_shared<RemoteGroundingBackend>(config.grounding_endpoint);
    bundle.vision = std::make_shared<RemoteVisionBackend>(config.vision_endpoint);
    return bundle;
}

std::vector<Episode> load_dataset_arg(const CliOptions& opts) {
    if (opts.dataset_path.empty()) {
        throw Error(ErrorCode::UsageError, "--dataset is required");
    }
    std::vector<Episode> dataset = load_dataset(opts.dataset_path);
    if (dataset.empty()) {
        std::cerr << "warning: dataset at " << opts.dataset_path << " holds no episodes\n";
    }
    return dataset;
}

void append_run_log(const CliOptions& opts, const std::string& command, double wall_time_s) {
    if (opts.out_dir.empty()) return;
    std::filesystem::create_directories(opts.out_dir);
    std::ofstream log(std::filesystem::path(opts.out_dir) / "run_log.txt", std::ios::app);
    std::time_t now = std::time(nullptr);
    char stamp[32];
    std::strftime(stamp, sizeof(stamp), "%Y-%m-%dT%H:%M:%SZ", std::gmtime(&now));
    log << stamp << " " << command << " wall_time_s=" << wall_time_s << "\n";
}

EvalConfig eval_config_from(const AppConfig& config, const std::string& dataset_id) {
    EvalConfig ec;
    ec.run = config.run;
    ec.grounding_metric = config.grounding_metric;
    ec.parallelism = config.parallelism;
    ec.strict = config.strict;
    ec.seed = config.seed;
    ec.dataset_id = dataset_id;
    return ec;
}

int cmd_run(const CliOptions& opts) {
    AppConfig config = resolve_config(opts);
    if (opts.episode_path.empty()) throw Error(ErrorCode::UsageError, "--episode is required");
    Episode episode = load_manifest(opts.episode_path);
    const Question* question = nullptr;
    if (!opts.question_id.empty()) {
        question = episode.find_question(opts.question_id);
        if (question == nullptr) {
            throw Error(ErrorCode::UnknownQuestion, opts.question_id);
        }
    } else if (!episode.questions.empty()) {
        question = &episode.questions.front();
    } else {
        throw Error(ErrorCode::UsageError, "episode has no questions");
    }

    BackendBundle bundle = make_bundle(opts, config);
    const auto started = std::chrono::steady_clock::now();
    Trajectory trajectory = run_trajectory(episode, *question, bundle.view(), config.run);
    if (config.run.force_answer && trajectory.terminated_by == TerminatedBy::StepLimit) {
        force_answer(trajectory, episode, *question, bundle.view());
    }
    RewardBreakdown reward = score_trajectory(trajectory, *question, config.alpha);
    double wall = std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();

    if (!opts.out_dir.empty()) {
        std::filesystem::path dir = std::filesystem::path(opts.out_dir) / "trajectories";
        std::filesystem::create_directories(dir);
        save_trajectory(trajectory, dir / (trajectory.question_id + ".json"));
    }

    std::cout << "question: " << question->question_id << "\n";
    std::cout << "terminated_by: " << to_string(trajectory.terminated_by) << "\n";
    std::cout << "turns: " << trajectory.turns.size() << "\n";
    if (trajectory.final_answer) {
        std::cout << config.run.answer_prefix << *trajectory.final_answer << "\n";
    } else if (trajectory.forced_answer) {
        std::cout << config.run.answer_prefix << *trajectory.forced_answer << " (forced)\n";
    } else {
        std::cout << "no answer produced\n";
    }
    std::cout << "reward: r_fmt = [";
    for (std::size_t i = 0; i < reward.per_step_fmt.size(); ++i) {
        std::cout << (i ? "," : "") << reward.per_step_fmt[i];
    }
    std::cout << "], r_ans = " << reward.answer_reward << ", alpha = " << reward.alpha
              << ", R = " << reward.total << "\n";
    append_run_log(opts, "run", wall);
    return kExitOk;
}

int cmd_eval(const CliOptions& opts) {
    AppConfig config = resolve_config(opts);
    std::vector<Episode> dataset = load_dataset_arg(opts);
    BackendBundle bundle = make_bundle(opts, config);
    EvalConfig ec = eval_config_from(config, opts.dataset_path);
    std::optional<std::filesystem::path> out;
    if (!opts.out_dir.empty()) out = opts.out_dir;
    EvalReport report = run_eval(dataset, bundle.view(), ec, out);
    std::cout << summary_table({report}, {"K=" + std::to_string(ec.run.max_steps) +
                                          " window=" + std::to_string(ec.run.window)});
    std::cout << "scored " << report.n_scored << "/" << report.n_questions << " questions";
    if (report.n_errored > 0) std::cout << " (" << report.n_errored << " errored)";
    std::cout << "\n";
    append_run_log(opts, "eval", report.wall_time_s);
    return kExitOk;
}

int cmd_sweep(const CliOptions& opts) {
    AppConfig config = resolve_config(opts);
    if (opts.axis.empty()) throw Error(ErrorCode::UsageError, "--axis is required");
    std::size_t eq = opts.axis.find('=');
    if (eq == std::string::npos) {
        throw Error(ErrorCode::UsageError, "--axis must look like max-steps=2,5,10");
    }
    std::string name = opts.axis.substr(0, eq);
    SweepAxis axis;
    if (name == "max-steps" || name == "K") {
        axis = SweepAxis::MaxSteps;
    } else if (name == "window") {
        axis = SweepAxis::Window;
    } else {
        throw Error(ErrorCode::UsageError, "unknown sweep axis '" + name + "'");
    }
    std::vector<int> values;
    std::string rest = opts.axis.substr(eq + 1);
    std::size_t pos = 0;
    while (pos <= rest.size()) {
        std::size_t comma = rest.find(',', pos);
        std::string item = rest.substr(pos, comma == std::string::npos ? std::string::npos
                                                                       : comma - pos);
        if (!item.empty()) values.push_back(std::stoi(item));
        if (comma == std::string::npos) break;
        pos = comma + 1;
    }
    if (values.empty()) throw Error(ErrorCode::UsageError, "--axis lists no values");

    std::vector<Episode> dataset = load_dataset_arg(opts);
    EvalConfig base = eval_config_from(config, opts.dataset_path);
    BackendFactory factory = [&]() { return make_bundle(opts, config); };
    std::optional<std::filesystem::path> out;
    if (!opts.out_dir.empty()) out = opts.out_dir;

    const auto started = std::chrono::steady_clock::now();
    std::vector<EvalReport> reports = sweep(dataset, factory, axis, values, base, out);
    double wall = std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();

    std::vector<std::string> labels;
    for (int v : values) labels.push_back(std::string(to_string(axis)) + "=" + std::to_string(v));
    std::cout << summary_table(reports, labels);
    append_run_log(opts, "sweep", wall);
    return kExitOk;
}

int cmd_build_dataset(const CliOptions& opts) {
    if (opts.in_path.empty()) throw Error(ErrorCode::UsageError, "--in is required");
    if (opts.out_dir.empty()) throw Error(ErrorCode::UsageError, "--out is required");
    auto written = build_dataset(opts.in_path, opts.out_dir);
    int violations = 0;
    for (const auto& path : written) {
        Episode episode = load_manifest(path);
        auto found = validate_episode(episode);
        violations += static_cast<int>(found.size());
        std::cout << path.string() << ": " << episode.clips.size() << " clips, "
                  << episode.questions.size() << " questions";
        if (!found.empty()) std::cout << ", " << found.size() << " violations";
        std::cout << "\n";
        for (const auto& v : found) {
            std::cout << "  " << to_string(v.code) << ": " << v.message << "\n";
        }
    }
    return violations == 0 ? kExitOk : kExitRuntime;
}

int cmd_validate(const CliOptions& opts) {
    std::vector<Episode> dataset = load_dataset_arg(opts);
    int total = 0;
    for (const Episode& episode : dataset) {
        auto found = validate_episode(episode);
        total += static_cast<int>(found.size());
        std::cout << episode.episode_id << ": "
                  << (found.empty() ? "ok" : std::to_string(found.size()) + " violations")
                  << "\n";
        for (const auto& v : found) {
            std::cout << "  " << to_string(v.code) << ": " << v.message << "\n";
        }
    }
    return total == 0 ? kExitOk : kExitRuntime;
}

int cmd_simulate(const CliOptions& opts) {
    AppConfig config = resolve_config(opts);
    if (opts.out_dir.empty()) throw Error(ErrorCode::UsageError, "--out is required");
    if (opts.backend != "scripted") {
        throw Error(ErrorCode::UsageError, "simulate runs scripted backends only");
    }
    std::vector<Episode> dataset = load_dataset_arg(opts);
    const int n_rollouts = std::max(1, opts.rollouts);

    std::filesystem::path dir = std::filesystem::path(opts.out_dir) / "rollouts";
    std::filesystem::create_directories(dir);
    std::ofstream index(std::filesystem::path(opts.out_dir) / "rollouts.jsonl",
                        std::ios::binary);

    const auto started = std::chrono::steady_clock::now();
    int written = 0;
    for (int k = 0; k < n_rollouts; ++k) {
        BackendBundle bundle = make_bundle(opts, config, static_cast<std::uint64_t>(k));
        for (const Episode& episode : dataset) {
            for (const Question& question : episode.questions) {
                Trajectory trajectory =
                    run_trajectory(episode, question, bundle.view(), config.run);
                std::string name = question.question_id + "_r" + std::to_string(k) + ".json";
                save_trajectory(trajectory, dir / name);
                index << trajectory_index_line(trajectory) << '\n';
                ++written;
            }
        }
    }
    double wall = std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
    std::cout << "wrote " << written << " rollouts (" << n_rollouts
              << " per question) under " << dir.string() << "\n";
    append_run_log(opts, "simulate", wall);
    return kExitOk;
}

int cmd_score_rollouts(const CliOptions& opts) {
    AppConfig config = resolve_config(opts);
    if (opts.in_path.empty()) throw Error(ErrorCode::UsageError, "--in is required");
    if (opts.out_dir.empty()) throw Error(ErrorCode::UsageError, "--out is required");
    std::vector<Episode> dataset = load_dataset_arg(opts);

    std::vector<Trajectory> trajectories = load_trajectories(opts.in_path);
    std::map<std::string, RolloutGroup> groups;
    for (Trajectory& trajectory : trajectories) {
        std::string context_id = trajectory.episode_id + "/" + trajectory.question_id;
        RolloutGroup& group = groups[context_id];
        group.context_id = context_id;
        ScoredRollout rollout;
        rollout.trajectory = std::move(trajectory);
        group.rollouts.push_back(std::move(rollout));
    }

    std::vector<RolloutGroup> ordered;
    int singleton_groups = 0;
    for (auto& [context_id, group] : groups) {
        const Question* question = nullptr;
        for (const Episode& episode : dataset) {
            question = episode.find_question(group.rollouts.front().trajectory.question_id);
            if (question != nullptr) break;
        }
        if (question == nullptr) {
            throw Error(ErrorCode::UnknownQuestion,
                        "no dataset question for rollout group " + context_id);
        }
        if (group.rollouts.size() < 2) ++singleton_groups;
        score_group(group, *question, config.alpha, config.grpo);
        ordered.push_back(std::move(group));
    }
    if (singleton_groups > 0) {
        std::cerr << "warning: " << singleton_groups
                  << " group(s) hold a single rollout; their advantages are 0\n";
    }

    GrpoMeta meta = config.grpo_meta;
    TrainingBatch batch = make_training_batch(ordered, dataset, meta);
    std::filesystem::create_directories(opts.out_dir);
    std::filesystem::path path = std::filesystem::path(opts.out_dir) / "train_batch.jsonl";
    export_batch(batch, path);
    std::cout << "exported " << batch.rollouts.size() << " rollout records ("
              << ordered.size() << " groups) to " << path.string() << "\n";
    return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Multi-agent long-video QA orchestration: master/grounding/vision agents, "
                 "rule-based rewards, GRPO rollout math, and an evaluation harness"};
    app.require_subcommand(1);

    CliOptions opts;

    auto add_common = [&opts](CLI::App* cmd) {
        cmd->add_option("--config", opts.config_path, "config file (.json or .toml)");
        cmd->add_option("--out", opts.out_dir, "output directory");
        cmd->add_option("--max-steps", opts.max_steps, "step budget K");
        cmd->add_option("--window", opts.window, "consecutive-clip context size");
        cmd->add_option("--alpha", opts.alpha, "format-reward weight");
        cmd->add_option("--seed", opts.seed, "rng seed override");
        cmd->add_option("--parallelism", opts.parallelism, "worker count for eval/sweep");
        cmd->add_flag("--strict", opts.strict, "abort on the first backend failure");
        cmd->add_option("--grounding-metric", opts.grounding_metric,
                        "grounding accuracy metric: last|any");
        cmd->add_flag("--force-answer", opts.force_answer,
                      "one extra master call demanding an answer after step exhaustion");
        cmd->add_option("--backend", opts.backend, "backend family: scripted|remote");
        cmd->add_option("--fixtures", opts.fixtures_path, "scripted fixture file");
    };

    CLI::App* run = app.add_subcommand("run", "run one question end to end");
    add_common(run);
    run->add_option("--episode", opts.episode_path, "episode manifest")->required();
    run->add_option("--question", opts.question_id, "question id (default: first)");

    CLI::App* eval_cmd = app.add_subcommand("eval", "batch evaluation over a dataset");
    add_common(eval_cmd);
    eval_cmd->add_option("--dataset", opts.dataset_path, "manifest directory or file")
        ->required();

    CLI::App* sweep_cmd = app.add_subcommand("sweep", "ablation sweep over K or window");
    add_common(sweep_cmd);
    sweep_cmd->add_option("--dataset", opts.dataset_path, "manifest directory or file")
        ->required();
    sweep_cmd->add_option("--axis", opts.axis, "axis spec, e.g. max-steps=2,5,10 or window=1,2,3")
        ->required();

    CLI::App* build = app.add_subcommand("build-dataset",
                                         "aggregate clip-level inputs into episode manifests");
    build->add_option("--in", opts.in_path, "clip-level input directory")->required();
    build->add_option("--out", opts.out_dir, "manifest output directory")->required();

    CLI::App* validate = app.add_subcommand("validate", "check episode manifests");
    validate->add_option("--dataset", opts.dataset_path, "manifest directory or file")
        ->required();

    CLI::App* simulate = app.add_subcommand("simulate",
                                            "fixture-driven rollouts (N per question)");
    add_common(simulate);
    simulate->add_option("--dataset", opts.dataset_path, "manifest directory or file")
        ->required();
    simulate->add_option("--rollouts", opts.rollouts, "rollouts per question (default 4)");

    CLI::App* score = app.add_subcommand("score-rollouts",
                                         "score recorded rollouts and export a training batch");
    score->add_option("--in", opts.in_path, "trajectory directory or file")->required();
    score->add_option("--dataset", opts.dataset_path, "manifest directory or file")->required();
    score->add_option("--out", opts.out_dir, "output directory")->required();
    score->add_option("--config", opts.config_path, "config file (.json or .toml)");
    score->add_option("--alpha", opts.alpha, "format-reward weight");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        int code = app.exit(e);
        return code == 0 ? kExitOk : kExitUsage;
    }

    try {
        if (run->parsed()) return cmd_run(opts);
        if (eval_cmd->parsed()) return cmd_eval(opts);
        if (sweep_cmd->parsed()) return cmd_sweep(opts);
        if (build->parsed()) return cmd_build_dataset(opts);
        if (validate->parsed()) return cmd_validate(opts);
        if (simulate->parsed()) return cmd_simulate(opts);
        if (score->parsed()) return cmd_score_rollouts(opts);
    } catch (const Error& e) {
        if (e.code() == ErrorCode::UsageError) {
            std::cerr << "usage error: " << e.what() << "\n";
            return kExitUsage;
        }
        std::cerr << "error: " << e.what() << "\n";
        return e.code() == ErrorCode::StrictAbort ? kExitStrictAbort : kExitRuntime;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitRuntime;
    }
    return kExitUsage;
}
