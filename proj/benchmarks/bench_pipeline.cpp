#include <benchmark/benchmark.h>

#include <memory>
#include <random>
#include <vector>

#include "lva/eval.hpp"
#include "lva/orchestrator.hpp"
#include "lva/rewards.hpp"

namespace {

using namespace lva;

Episode bench_episode(int n_clips, int n_questions) {
    std::vector<ClipRecord> clips;
    for (int i = 0; i < n_clips; ++i) {
        ClipRecord clip;
        clip.clip_id = "bench_seg01_clip_" + std::to_string(100 + i);
        clip.episode_id = "bench";
        clip.duration_s = 75.0;
        for (int s = 0; s < 3; ++s) {
            SubtitleLine line;
            line.start_s = 5.0 + 20.0 * s;
            line.end_s = line.start_s + 4.0;
            line.speaker = "Speaker";
            line.text = "subtitle " + std::to_string(s) + " of clip " + std::to_string(i);
            clip.subtitles.push_back(std::move(line));
        }
        clips.push_back(std::move(clip));
    }
    std::vector<QaRecord> qas;
    for (int q = 0; q < n_questions; ++q) {
        QaRecord qa;
        qa.question_id = "bench_q" + std::to_string(q);
        qa.episode_id = "bench";
        qa.text = "what happened?";
        qa.choices = {"c0", "c1", "c2", "c3", "c4"};
        qa.gold_index = q % 5;
        qa.gold_clip_id = clips[static_cast<std::size_t>(q) % clips.size()].clip_id;
        qas.push_back(std::move(qa));
    }
    return build_episode(clips, qas, {});
}

std::shared_ptr<const ScriptedFixture> bench_fixture(const Episode& episode) {
    ScriptedFixture fixture;
    for (const Question& question : episode.questions) {
        QuestionFixture qf;
        qf.gold_clip_id = question.gold_clip_id;
        qf.vision_facts = {{"scene", "a bench and a waste container are visible"}};
        qf.master_script = {
            "<think>localize first</think><request_grounding>",
            "<visual_query>describe the scene</visual_query>",
            "<answer>a" + std::to_string(question.gold_index) + ": " +
                question.choices[static_cast<std::size_t>(question.gold_index)] + "</answer>",
        };
        fixture.questions.emplace(question.question_id, std::move(qf));
    }
    return std::make_shared<const ScriptedFixture>(std::move(fixture));
}

void BM_RunTrajectory(benchmark::State& state) {
    Episode episode = bench_episode(static_cast<int>(state.range(0)), 1);
    auto fixture = bench_fixture(episode);
    const Question& question = episode.questions.front();
    for (auto _ : state) {
        BackendBundle bundle = make_scripted_bundle(fixture);
        benchmark::DoNotOptimize(
            run_trajectory(episode, question, bundle.view(), RunConfig{}));
    }
}
BENCHMARK(BM_RunTrajectory)->Arg(8)->Arg(32)->Arg(128);

void BM_RunEval(benchmark::State& state) {
    Episode episode = bench_episode(16, static_cast<int>(state.range(0)));
    auto fixture = bench_fixture(episode);
    std::vector<Episode> dataset = {episode};
    EvalConfig config;
    config.parallelism = 4;
    for (auto _ : state) {
        BackendBundle bundle = make_scripted_bundle(fixture);
        benchmark::DoNotOptimize(run_eval(dataset, bundle.view(), config));
    }
}
BENCHMARK(BM_RunEval)->Arg(16)->Arg(64);

void BM_GroupAdvantages(benchmark::State& state) {
    std::mt19937_64 rng(7);
    std::vector<double> returns;
    for (int i = 0; i < state.range(0); ++i) {
        returns.push_back(static_cast<double>(rng() % 600) / 100.0);
    }
    for (auto _ : state) {
        benchmark::DoNotOptimize(group_advantages(returns, 1e-6));
    }
}
BENCHMARK(BM_GroupAdvantages)->Arg(4)->Arg(64)->Arg(1024);

}  // namespace
