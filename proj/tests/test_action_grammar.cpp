#include "lva/action_grammar.hpp"

#include <doctest.h>

#include <random>

#include "support/oracles.hpp"

using namespace lva;
using namespace lva::testing;

TEST_CASE("scan_stop finds the earliest marker end") {
    CHECK(scan_stop("abc</answer>xyz") == 12);
    CHECK(scan_stop("no markers here") == std::nullopt);
    CHECK(scan_stop("</visual_query>...</answer>") == 15);
    CHECK(scan_stop("x<eos>") == 6);
    CHECK(scan_stop("</request_grounding>") == 20);
}

TEST_CASE("scan_stop matches an exhaustive scan on random strings") {
    std::mt19937_64 rng(101);
    const std::vector<std::string> markers = stop_markers();
    for (int i = 0; i < 2000; ++i) {
        std::string text = random_turn_text(rng);
        std::optional<std::size_t> expected;
        for (std::size_t pos = 0; pos < text.size() && !expected; ++pos) {
            for (const std::string& marker : markers) {
                if (text.compare(pos, marker.size(), marker) == 0) {
                    expected = pos + marker.size();
                    break;
                }
            }
        }
        CHECK(scan_stop(text) == expected);
    }
}

TEST_CASE("parse_action extracts the first well-formed tag") {
    auto action = parse_action(
        "<think>need visuals</think><visual_query>what color is the car</visual_query>");
    REQUIRE(action.has_value());
    CHECK(action->kind == ActionKind::VisualQuery);
    CHECK(action->payload == "what color is the car");
    CHECK(action->preceding_think == "need visuals");

    auto answer = parse_action("<answer> a3: A Bus Stop </answer>");
    REQUIRE(answer.has_value());
    CHECK(answer->kind == ActionKind::Answer);
    CHECK(answer->payload == " a3: A Bus Stop ");  // normalization happens downstream
    CHECK_FALSE(answer->preceding_think.has_value());

    CHECK_FALSE(parse_action("I think the answer is obvious.").has_value());
}

TEST_CASE("parse_action accepts both request_grounding forms") {
    auto bare = parse_action("<request_grounding>");
    REQUIRE(bare.has_value());
    CHECK(bare->kind == ActionKind::RequestGrounding);
    CHECK(bare->payload.empty());
    CHECK(bare->span_begin == 0);
    CHECK(bare->span_end == 19);

    auto paired = parse_action("<request_grounding> localize it </request_grounding>");
    REQUIRE(paired.has_value());
    CHECK(paired->kind == ActionKind::RequestGrounding);
    CHECK(paired->payload.empty());
    CHECK(paired->span_end == 52);
}

TEST_CASE("parse_action returns the first completable tag amid malformed ones") {
    auto action = parse_action("<visual_query>abc <answer>x</answer>");
    REQUIRE(action.has_value());
    CHECK(action->kind == ActionKind::Answer);
    CHECK(action->payload == "x");
}

TEST_CASE("structural_validity on the protocol examples") {
    CHECK(structural_validity("<request_grounding>").valid);

    auto multiple = structural_validity("<answer>a0</answer> also maybe <answer>a1</answer>");
    CHECK_FALSE(multiple.valid);
    CHECK(multiple.violation == Violation::MultipleTags);

    auto unclosed = structural_validity("<visual_query>where is the window");
    CHECK_FALSE(unclosed.valid);
    CHECK(unclosed.violation == Violation::UnclosedTag);

    auto none = structural_validity("I think the answer is obvious.");
    CHECK_FALSE(none.valid);
    CHECK(none.violation == Violation::NoTag);

    auto empty = structural_validity("<answer>   </answer>");
    CHECK_FALSE(empty.valid);
    CHECK(empty.violation == Violation::EmptyPayload);

    auto trailing = structural_validity("<answer>a0</answer> trailing chatter");
    CHECK_FALSE(trailing.valid);
    CHECK(trailing.violation == Violation::ExtraneousText);
}

TEST_CASE("one leading think block is exempt from extraneous text") {
    CHECK(structural_validity("<think>plan</think><request_grounding>").valid);
    CHECK(structural_validity("  <think>plan</think>\n<answer>a0: x</answer>  ").valid);
    CHECK(structural_validity(
              "<think>plan</think>\n<visual_query>window side</visual_query>")
              .valid);

    // a second think block is not exempt
    auto second = structural_validity("<think>a</think><think>b</think><answer>a0: x</answer>");
    CHECK_FALSE(second.valid);
    CHECK(second.violation == Violation::ExtraneousText);

    // trailing think is extraneous too
    CHECK_FALSE(structural_validity("<request_grounding><think>post</think>").valid);
}

TEST_CASE("paired request_grounding may carry ignored content") {
    CHECK(structural_validity("<request_grounding> localize the referenced segment "
                              "</request_grounding>")
              .valid);
    CHECK(structural_validity("<request_grounding></request_grounding>").valid);
}

TEST_CASE("structural_validity agrees with the brute-force oracle") {
    std::mt19937_64 rng(2024);
    int disagreements = 0;
    for (int i = 0; i < 10000; ++i) {
        std::string text = random_turn_text(rng);
        bool expected = oracle_structurally_valid(text);
        bool actual = structural_validity(text).valid;
        if (expected != actual) {
            ++disagreements;
            CAPTURE(text);
            CHECK(expected == actual);
        }
    }
    CHECK(disagreements == 0);
}

TEST_CASE("valid turns parse to a span covering the non-think remainder") {
    std::mt19937_64 rng(77);
    for (int i = 0; i < 10000; ++i) {
        std::string text = random_turn_text(rng);
        if (!structural_validity(text).valid) continue;
        auto action = parse_action(text);
        REQUIRE(action.has_value());
        // nothing but whitespace/think before the span, nothing after it
        std::string_view before = std::string_view(text).substr(0, action->span_begin);
        std::size_t think_end = 0;
        if (action->preceding_think) {
            think_end = text.find("</think>") + std::string("</think>").size();
        }
        for (std::size_t k = think_end; k < before.size(); ++k) {
            CHECK(oracle_is_space(before[k]));
        }
        std::string_view after = std::string_view(text).substr(action->span_end);
        for (char c : after) CHECK(oracle_is_space(c));
    }
}

TEST_CASE("normalize_answer examples") {
    auto busstop = normalize_answer(" a3: A Bus Stop ");
    CHECK(busstop.text == "a3: a bus stop");
    CHECK(busstop.label == "a3");

    CHECK(normalize_answer("").text.empty());
    CHECK_FALSE(normalize_answer("").label.has_value());

    auto shouted = normalize_answer("The   Left  Side!!");
    CHECK(shouted.text == "the left side");
    CHECK_FALSE(shouted.label.has_value());

    CHECK(normalize_answer("a3").label == "a3");
    CHECK(normalize_answer("a3:").text == "a3");
    CHECK(normalize_answer("a3 the bus stop").label == "a3");
    CHECK_FALSE(normalize_answer("a33: whatever").label.has_value());
    CHECK_FALSE(normalize_answer("apple pie").label.has_value());
}

TEST_CASE("normalize_answer is idempotent and matches the reference") {
    std::mt19937_64 rng(5150);
    const std::string alphabet = "aA3bB!?.:,  \t<>xyZ-'";
    for (int i = 0; i < 5000; ++i) {
        std::string raw;
        std::size_t len = rng() % 24;
        for (std::size_t k = 0; k < len; ++k) raw += alphabet[rng() % alphabet.size()];

        NormalizedAnswer once = normalize_answer(raw);
        NormalizedAnswer twice = normalize_answer(once.text);
        CHECK(once.text == twice.text);

        RefNormalized expected = ref_normalize(raw);
        CHECK(once.text == expected.text);
        CHECK((once.label ? *once.label : std::string()) == expected.label);
    }
}
