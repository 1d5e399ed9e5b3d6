#include <benchmark/benchmark.h>

#include <string>

#include "lva/action_grammar.hpp"

namespace {

const std::string kThinkTurn =
    "<think>Subtitles alone do not specify the location; I will localize first and then "
    "request a visual read of the grounded clip.</think>\n"
    "<visual_query>visual description of the scene where Sheldon is with a man"
    "</visual_query>";

const std::string kInvalidTurn =
    "<answer>a3: A Bus Stop</answer> but wait, let me reconsider the park option "
    "<answer>a2: A Park</answer>";

void BM_StructuralValidityValid(benchmark::State& state) {
    for (auto _ : state) {
        benchmark::DoNotOptimize(lva::structural_validity(kThinkTurn));
    }
}
BENCHMARK(BM_StructuralValidityValid);

void BM_StructuralValidityInvalid(benchmark::State& state) {
    for (auto _ : state) {
        benchmark::DoNotOptimize(lva::structural_validity(kInvalidTurn));
    }
}
BENCHMARK(BM_StructuralValidityInvalid);

void BM_ParseAction(benchmark::State& state) {
    for (auto _ : state) {
        benchmark::DoNotOptimize(lva::parse_action(kThinkTurn));
    }
}
BENCHMARK(BM_ParseAction);

void BM_ScanStop(benchmark::State& state) {
    std::string text(static_cast<std::size_t>(state.range(0)), 'x');
    text += "</answer>";
    for (auto _ : state) {
        benchmark::DoNotOptimize(lva::scan_stop(text));
    }
}
BENCHMARK(BM_ScanStop)->Arg(64)->Arg(1024)->Arg(16384);

void BM_NormalizeAnswer(benchmark::State& state) {
    for (auto _ : state) {
        benchmark::DoNotOptimize(lva::normalize_answer("  a3:  A   Bus   Stop!!  "));
    }
}
BENCHMARK(BM_NormalizeAnswer);

}  // namespace

BENCHMARK_MAIN();
