// Acceptance suite: runs every release criterion end to end and prints one
// pass/fail line per criterion. Exits non-zero when any criterion fails.
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <iostream>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "lva/action_grammar.hpp"
#include "lva/episode.hpp"
#include "lva/episode_io.hpp"
#include "lva/eval.hpp"
#include "lva/orchestrator.hpp"
#include "lva/remote_backends.hpp"
#include "lva/rewards.hpp"
#include "lva/trajectory_io.hpp"
#include "support/oracles.hpp"
#include "support/stub_server.hpp"
#include "support/synthetic.hpp"

using namespace lva;
using namespace lva::testing;

namespace {

const std::filesystem::path kAssets = LVA_ASSETS_DIR;

struct Criterion {
    int number;
    std::string name;
    std::function<std::string()> run;  // returns a detail string; throws on failure
};

struct CheckFailure : std::runtime_error {
    using std::runtime_error::runtime_error;
};

void require(bool condition, const std::string& what) {
    if (!condition) throw CheckFailure(what);
}

template <typename T>
void require_eq(const T& actual, const T& expected, const std::string& what) {
    if (!(actual == expected)) {
        std::ostringstream msg;
        msg << what << " (actual " << actual << ", expected " << expected << ")";
        throw CheckFailure(msg.str());
    }
}

void require_near(double actual, double expected, double tolerance, const std::string& what) {
    if (std::fabs(actual - expected) > tolerance) {
        std::ostringstream msg;
        msg << what << " (actual " << actual << ", expected " << expected << " +/- "
            << tolerance << ")";
        throw CheckFailure(msg.str());
    }
}

double seconds_since(std::chrono::steady_clock::time_point start) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
}

std::string fmt_seconds(double s) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.2fs", s);
    return buf;
}

// ---------------------------------------------------------------------------

std::string criterion_grammar_oracle() {
    const auto start = std::chrono::steady_clock::now();
    std::mt19937_64 rng(0xACCE55);
    const int n_cases = 10000;
    int disagreements = 0;
    for (int i = 0; i < n_cases; ++i) {
        std::string text = random_turn_text(rng);
        if (structural_validity(text).valid != oracle_structurally_valid(text)) {
            ++disagreements;
        }
    }
    double elapsed = seconds_since(start);
    require(disagreements == 0,
            std::to_string(disagreements) + " oracle disagreements");
    require(elapsed < 5.0, "runtime " + fmt_seconds(elapsed) + " exceeds 5s");
    return std::to_string(n_cases) + " randomized strings, 0 disagreements, " +
           fmt_seconds(elapsed);
}

std::string criterion_case_traces() {
    auto fixture = std::make_shared<const ScriptedFixture>(
        load_fixture(kAssets / "fixtures" / "cases.json"));

    struct CaseSpec {
        std::string manifest;
        std::string question_id;
        std::vector<ActionKind> actions;
        std::string label;
        double expected_return;
    };
    const std::vector<CaseSpec> cases = {
        {"s05e06.json",
         "q_s05e06_busstop",
         {ActionKind::RequestGrounding, ActionKind::VisualQuery, ActionKind::Answer},
         "a3",
         2.5},
        {"s10e04.json",
         "q_s10e04_bedside",
         {ActionKind::RequestGrounding, ActionKind::VisualQuery, ActionKind::VisualQuery,
          ActionKind::Answer},
         "a0",
         3.0},
    };

    for (const CaseSpec& spec : cases) {
        Episode episode = load_manifest(kAssets / "cases" / spec.manifest);
        const Question* question = episode.find_question(spec.question_id);
        require(question != nullptr, "missing question " + spec.question_id);
        BackendBundle bundle = make_scripted_bundle(fixture);
        Trajectory trajectory =
            run_trajectory(episode, *question, bundle.view(), RunConfig{});

        require_eq(trajectory.turns.size(), spec.actions.size(),
                   spec.question_id + ": turn count");
        for (std::size_t i = 0; i < spec.actions.size(); ++i) {
            require(trajectory.turns[i].action.has_value(),
                    spec.question_id + ": turn " + std::to_string(i) + " parsed no action");
            require(trajectory.turns[i].action->kind == spec.actions[i],
                    spec.question_id + ": action order differs at turn " + std::to_string(i));
        }
        require(trajectory.terminated_by == TerminatedBy::Answer,
                spec.question_id + ": did not terminate by answer");
        require(trajectory.final_label.has_value() && *trajectory.final_label == spec.label,
                spec.question_id + ": wrong answer label");

        RewardBreakdown reward = score_trajectory(trajectory, *question, 0.5);
        for (int fmt : reward.per_step_fmt) {
            require(fmt == 1, spec.question_id + ": a turn scored r_fmt=0");
        }
        require_eq(reward.answer_reward, 1, spec.question_id + ": r_ans");
        require_eq(reward.total, spec.expected_return, spec.question_id + ": R(tau)");
    }
    return "bus-stop 3 turns R=2.5, bedside 4 turns R=3.0, action order exact";
}

std::string criterion_reward_oracle() {
    int cases = 0;
    // per-turn format vectors, T in {0..3}, x {correct, wrong, absent}, alpha 0.5
    for (int t = 0; t <= 3; ++t) {
        for (int mask = 0; mask < (1 << t); ++mask) {
            std::vector<int> fmt;
            for (int k = 0; k < t; ++k) fmt.push_back((mask >> k) & 1);
            for (int answer_state = 0; answer_state < 3; ++answer_state) {
                int r_ans = answer_state == 0 ? 1 : 0;
                double expected = oracle_return(fmt, r_ans, 0.5);
                require(trajectory_return(fmt, r_ans, 0.5).total == expected,
                        "formula mismatch in per-turn enumeration");
                ++cases;
            }
        }
    }
    // alpha-swept uniform-format enumeration: T x {valid,invalid} x answers x alpha
    for (int t = 1; t <= 3; ++t) {
        for (int uniform = 0; uniform <= 1; ++uniform) {
            std::vector<int> fmt(t, uniform);
            for (int answer_state = 0; answer_state < 3; ++answer_state) {
                int r_ans = answer_state == 0 ? 1 : 0;
                for (double alpha : {0.1, 0.5, 1.0}) {
                    double expected = oracle_return(fmt, r_ans, alpha);
                    require(trajectory_return(fmt, r_ans, alpha).total == expected,
                            "formula mismatch in alpha sweep");
                    ++cases;
                }
            }
        }
    }
    require(cases == 99, "enumeration size drifted");
    return "99 enumerated T<=3 trajectories (45 per-turn + 54 alpha-swept), exact equality";
}

std::string criterion_grpo_math() {
    // centering over random groups
    std::mt19937_64 rng(0x6780);
    const std::vector<std::size_t> sizes = {2, 4, 8};
    for (int trial = 0; trial < 1000; ++trial) {
        std::size_t n = sizes[trial % sizes.size()];
        std::vector<double> returns;
        for (std::size_t i = 0; i < n; ++i) {
            returns.push_back(static_cast<double>(rng() % 700) / 100.0);
        }
        std::vector<double> advantages = group_advantages(returns, 1e-6);
        double sum = 0.0;
        for (double a : advantages) sum += a;
        require(std::fabs(sum) <= 1e-9, "advantage sum exceeded 1e-9");
    }

    std::vector<double> alternating = {1.0, 0.0, 1.0, 0.0};
    require(group_advantages(alternating, 1e-6) ==
                std::vector<double>({1.0, -1.0, 1.0, -1.0}),
            "[1,0,1,0] advantages not exactly [1,-1,1,-1]");

    // clipped surrogate against the hand-computed 9-point grid
    GrpoConfig config;
    const double ratios[3] = {0.5, 1.0, 1.5};
    const double advantages[3] = {-1.0, 0.5, 2.0};
    const double expected[3][3] = {
        {0.8, -0.25, -1.0},
        {1.0, -0.5, -2.0},
        {1.5, -0.6, -2.4},
    };
    for (int i = 0; i < 3; ++i) {
        for (int j = 0; j < 3; ++j) {
            std::vector<double> old_lp = {-2.0};
            std::vector<double> new_lp = {-2.0 + std::log(ratios[i])};
            double term = clipped_surrogate(new_lp, old_lp, advantages[j], config)
                              .per_token[0];
            require_near(term, expected[i][j], 1e-12, "surrogate grid point");
        }
    }
    return "1000 groups centered within 1e-9; alternating case exact; 9-point grid at 1e-12";
}

std::string criterion_dataset_builder() {
    std::vector<ClipRecord> clips;
    const double durations[3] = {60.0, 75.0, 90.0};
    for (int i = 0; i < 3; ++i) {
        ClipRecord clip;
        clip.clip_id = "acc_seg01_clip_0" + std::to_string(i);
        clip.episode_id = "acc";
        clip.duration_s = durations[i];
        clip.frame_refs = {"f0", "f1", "f2"};
        SubtitleLine line;
        line.start_s = 10.0;
        line.end_s = 12.0;
        line.speaker = "Speaker";
        line.text = "clip " + std::to_string(i);
        clip.subtitles = {line};
        clips.push_back(std::move(clip));
    }
    QaRecord qa;
    qa.question_id = "acc_q0";
    qa.episode_id = "acc";
    qa.text = "?";
    qa.choices = {"c0", "c1", "c2", "c3", "c4"};
    qa.gold_index = 1;
    qa.gold_clip_id = "acc_seg01_clip_01";
    std::vector<BoxAnnotation> boxes = {
        {"acc_seg01_clip_00", 0, "laptop", 1.0, 2.0, 3.0, 4.0},
        {"acc_seg01_clip_01", 2, "mug", 5.0, 6.0, 7.0, 8.0},
        {"acc_seg01_clip_02", 1, "window", 9.0, 10.0, 11.0, 12.0},
    };

    Episode episode = build_episode(clips, {qa}, boxes);
    require_eq(episode.clips[0].episode_offset_s, 0.0, "offset[0]");
    require_eq(episode.clips[1].episode_offset_s, 60.0, "offset[1]");
    require_eq(episode.clips[2].episode_offset_s, 135.0, "offset[2]");
    require_eq(episode.total_duration_s(), 225.0, "total duration");
    require_eq(episode.subtitles[0].start_s, 10.0, "subtitle 0 re-index");
    require_eq(episode.subtitles[1].start_s, 70.0, "subtitle 1 re-index");
    require_eq(episode.subtitles[2].start_s, 145.0, "subtitle 2 re-index");
    require(validate_episode(episode).empty(), "builder output failed validation");

    std::string once = manifest_to_json(episode);
    Episode loaded = episode_from_manifest(once);
    require(loaded == episode, "manifest round-trip changed fields");
    require(manifest_to_json(loaded) == once, "manifest round-trip changed bytes");

    require_eq(loaded.boxes.size(), boxes.size(), "box count conserved");
    for (std::size_t i = 0; i < boxes.size(); ++i) {
        require(loaded.boxes[i].clip_id == boxes[i].clip_id &&
                    loaded.boxes[i].frame_index == boxes[i].frame_index,
                "box (clip_id, frame_index) changed");
    }
    return "offsets [0,60,135], span 225s, byte-identical round-trip, 3/3 boxes kept";
}

std::string criterion_oracle_eval() {
    const auto start = std::chrono::steady_clock::now();
    auto episodes = make_synthetic_dataset(4, 8, 50);  // 200 questions
    auto fixture = std::make_shared<const ScriptedFixture>(make_oracle_fixture(episodes, 3));
    BackendBundle bundle = make_scripted_bundle(fixture);

    EvalConfig config;
    config.dataset_id = "oracle-200";
    config.parallelism = 4;
    EvalReport report = run_eval(episodes, bundle.view(), config);
    double elapsed = seconds_since(start);

    require_eq(report.n_questions, 200, "question count");
    require_eq(report.n_scored, 200, "scored count");
    require_eq(report.answer_accuracy, 100.0, "answer accuracy");
    require_eq(report.grounding_accuracy, 100.0, "grounding accuracy");
    require(elapsed < 10.0, "runtime " + fmt_seconds(elapsed) + " exceeds 10s");
    return "200 questions, 100.0/100.0 accuracies in " + fmt_seconds(elapsed);
}

std::string criterion_noise_calibration() {
    auto episodes = make_synthetic_dataset(10, 8, 100);  // 1000 questions
    auto fixture = std::make_shared<const ScriptedFixture>(
        make_oracle_fixture(episodes, 2, 0.3, 90210));

    // master answers gold iff the grounding injection carried the gold tag
    GroundingEchoMaster master(episodes);
    ScriptedGroundingBackend grounding(fixture);
    ScriptedVisionBackend vision(fixture);
    Backends backends{&master, &grounding, &vision};

    EvalConfig config;
    config.dataset_id = "noise-0.3";
    config.parallelism = 4;
    EvalReport report = run_eval(episodes, backends, config);
    require_eq(report.n_scored, 1000, "scored count");

    // 99% binomial interval around 70%: 2.5758 * sqrt(0.7*0.3/1000)
    const double margin = 100.0 * 2.5758 * std::sqrt(0.7 * 0.3 / 1000.0);
    require_near(report.grounding_accuracy, 70.0, margin, "grounding accuracy vs 99% CI");
    require_near(report.answer_accuracy, 70.0, margin, "answer accuracy vs 99% CI");

    // window sweep under +/-1-clip noise: non-decreasing, strictly better by 3
    auto clean_fixture =
        std::make_shared<const ScriptedFixture>(make_oracle_fixture(episodes, 2, 0.0, 7));
    BackendFactory factory = [&]() {
        BackendBundle bundle = make_scripted_bundle(clean_fixture);
        bundle.grounding = std::make_shared<AdjacentNoiseGrounding>(clean_fixture, 0.5, 313);
        return bundle;
    };
    EvalConfig sweep_config;
    sweep_config.dataset_id = "noise-window";
    sweep_config.parallelism = 4;
    std::vector<EvalReport> reports =
        sweep(episodes, factory, SweepAxis::Window, {1, 2, 3}, sweep_config);
    require(reports[0].grounding_accuracy <= reports[1].grounding_accuracy,
            "window 1 -> 2 decreased grounding accuracy");
    require(reports[1].grounding_accuracy <= reports[2].grounding_accuracy,
            "window 2 -> 3 decreased grounding accuracy");
    require(reports[0].grounding_accuracy < reports[2].grounding_accuracy,
            "window sweep shows no gain at all");

    char detail[160];
    std::snprintf(detail, sizeof(detail),
                  "p=0.3 grounding acc %.2f%% in [%.2f, %.2f]; window sweep %.2f -> %.2f -> %.2f",
                  report.grounding_accuracy, 70.0 - margin, 70.0 + margin,
                  reports[0].grounding_accuracy, reports[1].grounding_accuracy,
                  reports[2].grounding_accuracy);
    return detail;
}

std::string criterion_k_saturation() {
    auto episodes = make_synthetic_dataset(2, 6, 50);  // 100 questions
    // every script needs exactly 4 turns: ground, two vision reads, answer
    auto fixture = std::make_shared<const ScriptedFixture>(make_oracle_fixture(episodes, 4));
    BackendFactory factory = [&fixture]() { return make_scripted_bundle(fixture); };

    EvalConfig config;
    config.dataset_id = "k-saturation";
    config.parallelism = 4;
    std::vector<EvalReport> reports =
        sweep(episodes, factory, SweepAxis::MaxSteps, {2, 5, 10}, config);

    require(reports[0].answer_accuracy < reports[1].answer_accuracy,
            "accuracy(K=2) not below accuracy(K=5)");
    require(reports[1].answer_accuracy == reports[2].answer_accuracy,
            "accuracy(K=5) differs from accuracy(K=10)");
    char detail[128];
    std::snprintf(detail, sizeof(detail), "accuracy %.2f < %.2f = %.2f over K in {2,5,10}",
                  reports[0].answer_accuracy, reports[1].answer_accuracy,
                  reports[2].answer_accuracy);
    return detail;
}

std::string criterion_safety_invariants() {
    auto episodes = make_synthetic_dataset(2, 6, 5);
    auto fixture =
        std::make_shared<const ScriptedFixture>(make_oracle_fixture(episodes, 3, 0.25, 4711));

    std::mt19937_64 rng(0xBEEF);
    const int n_runs = 10000;
    for (int trial = 0; trial < n_runs; ++trial) {
        const Episode& episode = episodes[rng() % episodes.size()];
        const Question& question = episode.questions[rng() % episode.questions.size()];
        RunConfig config;
        config.max_steps = 1 + static_cast<int>(rng() % 6);
        config.window = 1 + static_cast<int>(rng() % 3);
        std::uint64_t master_seed = rng();

        RandomProtocolMaster master(master_seed);
        ScriptedGroundingBackend grounding(fixture);
        ScriptedVisionBackend vision(fixture);
        Backends backends{&master, &grounding, &vision};
        Trajectory trajectory = run_trajectory(episode, question, backends, config);

        require(trajectory.turns.size() <= static_cast<std::size_t>(config.max_steps),
                "step bound violated");
        bool grounded = false;
        for (const TurnRecord& turn : trajectory.turns) {
            if (turn.action && turn.action->kind == ActionKind::RequestGrounding) {
                grounded = true;
            }
            if (turn.injected && turn.injected->rfind(kVisionInjectionPrefix, 0) == 0) {
                require(grounded, "vision call before grounding");
            }
        }

        if (trial % 20 == 0) {  // replay determinism spot checks
            RandomProtocolMaster master2(master_seed);
            ScriptedGroundingBackend grounding2(fixture);
            ScriptedVisionBackend vision2(fixture);
            Backends backends2{&master2, &grounding2, &vision2};
            Trajectory replay = run_trajectory(episode, question, backends2, config);
            require(trajectory_to_json(replay) == trajectory_to_json(trajectory),
                    "replay determinism violated");
        }
    }
    return std::to_string(n_runs) +
           " randomized runs: step bound held, no vision before grounding, replays exact";
}

std::string criterion_remote_contract() {
    // retry/backoff against a local stub
    {
        StubChatServer server;
        server.fail_first(2, 429);
        server.set_replies({"recovered"});
        EndpointConfig endpoint;
        endpoint.base_url = server.base_url();
        endpoint.model = "stub";
        endpoint.attempts = 3;
        endpoint.backoff_base_ms = 1;
        std::string reply =
            remote_generate(endpoint, {{"system", "s", {}}, {"user", "u", {}}}, {});
        require(reply == "recovered", "did not recover after two 429s");
        require(server.calls() == 3, "expected exactly 3 attempts");
    }
    {
        StubChatServer server;
        server.fail_first(2, 429);
        EndpointConfig endpoint;
        endpoint.base_url = server.base_url();
        endpoint.model = "stub";
        endpoint.attempts = 2;
        endpoint.backoff_base_ms = 1;
        bool threw = false;
        try {
            remote_generate(endpoint, {{"system", "s", {}}, {"user", "u", {}}}, {});
        } catch (const Error& e) {
            threw = e.code() == ErrorCode::RateLimited;
        }
        require(threw, "budget 2 did not surface RateLimited");
        require(server.calls() == 2, "budget 2 made a third attempt");
    }

    // recorded transcript replayed through the scripted backend, byte-identical
    Episode episode = make_synthetic_episode("acc01", 5, 1);
    const Question& question = episode.questions[0];
    auto fixture = std::make_shared<const ScriptedFixture>(make_oracle_fixture({episode}, 3));
    const auto& script = fixture->questions.at(question.question_id).master_script;

    StubChatServer server;
    server.set_replies({script[0], script[1], script[2]});
    EndpointConfig endpoint;
    endpoint.base_url = server.base_url();
    endpoint.model = "stub";
    endpoint.attempts = 3;
    endpoint.backoff_base_ms = 1;

    RemoteMasterBackend remote_master(endpoint);
    ScriptedGroundingBackend grounding(fixture);
    ScriptedVisionBackend vision(fixture);
    Backends remote_backends{&remote_master, &grounding, &vision};
    Trajectory remote_run = run_trajectory(episode, question, remote_backends, RunConfig{});

    ScriptedFixture recorded;
    QuestionFixture qf = fixture->questions.at(question.question_id);
    qf.master_script.clear();
    for (const TurnRecord& turn : remote_run.turns) qf.master_script.push_back(turn.master_text);
    recorded.questions.emplace(question.question_id, std::move(qf));
    BackendBundle replay =
        make_scripted_bundle(std::make_shared<const ScriptedFixture>(std::move(recorded)));
    Trajectory scripted_run = run_trajectory(episode, question, replay.view(), RunConfig{});

    require(trajectory_to_json(scripted_run) == trajectory_to_json(remote_run),
            "scripted replay diverged from the remote run");
    return "retry 2x429->200 at budget 3; RateLimited at budget 2; replay byte-identical";
}

}  // namespace

int main() {
    const std::vector<Criterion> criteria = {
        {1, "grammar oracle suite", criterion_grammar_oracle},
        {2, "case-trace replay", criterion_case_traces},
        {3, "reward exhaustive oracle", criterion_reward_oracle},
        {4, "grpo math", criterion_grpo_math},
        {5, "dataset builder", criterion_dataset_builder},
        {6, "oracle end-to-end eval", criterion_oracle_eval},
        {7, "noise calibration", criterion_noise_calibration},
        {8, "k-saturation shape", criterion_k_saturation},
        {9, "step-bound and safety invariants", criterion_safety_invariants},
        {10, "remote-backend contract", criterion_remote_contract},
    };

    int failures = 0;
    for (const Criterion& criterion : criteria) {
        try {
            std::string detail = criterion.run();
            std::printf("PASS  %2d. %s: %s\n", criterion.number, criterion.name.c_str(),
                        detail.c_str());
        } catch (const std::exception& e) {
            ++failures;
            std::printf("FAIL  %2d. %s: %s\n", criterion.number, criterion.name.c_str(),
                        e.what());
        }
        std::fflush(stdout);
    }
    if (failures > 0) {
        std::printf("%d of %zu criteria failed\n", failures, criteria.size());
        return 1;
    }
    std::printf("all %zu criteria passed\n", criteria.size());
    return 0;
}
