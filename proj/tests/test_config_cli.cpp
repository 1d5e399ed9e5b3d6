#include "lva/config.hpp"

#include <doctest.h>

#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "lva/errors.hpp"

using namespace lva;

namespace {

const std::filesystem::path kAssets = LVA_ASSETS_DIR;
const std::string kCli = LVA_CLI_PATH;

struct CommandResult {
    int exit_code = -1;
    std::string stdout_text;
};

CommandResult run_cli(const std::string& args) {
    auto out_path = std::filesystem::temp_directory_path() / "lva_cli_stdout.txt";
    std::string command = kCli + " " + args + " > " + out_path.string() + " 2>&1";
    int status = std::system(command.c_str());
    CommandResult result;
    result.exit_code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
    std::ifstream in(out_path);
    std::ostringstream buf;
    buf << in.rdbuf();
    result.stdout_text = buf.str();
    return result;
}

std::filesystem::path fresh_dir(const std::string& name) {
    auto dir = std::filesystem::temp_directory_path() / ("lva_cli_" + name);
    std::filesystem::remove_all(dir);
    std::filesystem::create_directories(dir);
    return dir;
}

std::string slurp(const std::filesystem::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

}  // namespace

TEST_CASE("toml subset converts sections and scalars") {
    std::string toml = R"(
# comment
[run]
max_steps = 7
window = 2
answer_prefix = "The answer is: "

[backends.master]
url = "http://localhost:9999"   # trailing comment
temperature = 0.5
stream = false
)";
    nlohmann::json j = nlohmann::json::parse(toml_subset_to_json_text(toml));
    CHECK(j["run"]["max_steps"] == 7);
    CHECK(j["run"]["window"] == 2);
    CHECK(j["run"]["answer_prefix"] == "The answer is: ");
    CHECK(j["backends"]["master"]["url"] == "http://localhost:9999");
    CHECK(j["backends"]["master"]["temperature"] == 0.5);
    CHECK(j["backends"]["master"]["stream"] == false);

    CHECK_THROWS_AS(toml_subset_to_json_text("[unterminated\n"), Error);
    CHECK_THROWS_AS(toml_subset_to_json_text("key_without_value\n"), Error);
}

TEST_CASE("app config loads from JSON and TOML with identical results") {
    std::string body = R"({
      "run": {"max_steps": 8, "window": 2, "force_answer": true},
      "eval": {"parallelism": 2, "grounding_metric": "any", "seed": 42},
      "grpo": {"alpha": 0.25, "clip_epsilon": 0.3, "kl_coeff": 0.002},
      "backends": {"master": {"url": "http://h:1", "model": "m", "attempts": 5}}
    })";
    AppConfig from_json = app_config_from_json(body);
    CHECK(from_json.run.max_steps == 8);
    CHECK(from_json.run.window == 2);
    CHECK(from_json.run.force_answer);
    CHECK(from_json.parallelism == 2);
    CHECK(from_json.grounding_metric == GroundingMetric::Any);
    CHECK(from_json.seed == 42);
    CHECK(from_json.alpha == 0.25);
    CHECK(from_json.grpo.clip_epsilon == 0.3);
    CHECK(from_json.grpo.kl_coeff == 0.002);
    CHECK(from_json.grpo_meta.kl_coeff == 0.002);
    CHECK(from_json.master_endpoint.base_url == "http://h:1");
    CHECK(from_json.master_endpoint.attempts == 5);

    auto toml_path = std::filesystem::temp_directory_path() / "lva_cfg.toml";
    {
        std::ofstream out(toml_path);
        out << "[run]\nmax_steps = 8\nwindow = 2\nforce_answer = true\n"
            << "[eval]\nparallelism = 2\ngrounding_metric = \"any\"\nseed = 42\n"
            << "[grpo]\nalpha = 0.25\nclip_epsilon = 0.3\nkl_coeff = 0.002\n"
            << "[backends.master]\nurl = \"http://h:1\"\nmodel = \"m\"\nattempts = 5\n";
    }
    AppConfig from_toml = load_app_config(toml_path);
    CHECK(from_toml.run.max_steps == from_json.run.max_steps);
    CHECK(from_toml.master_endpoint == from_json.master_endpoint);
    CHECK(from_toml.alpha == from_json.alpha);
}

TEST_CASE("config validation names the offending key") {
    CHECK_THROWS_WITH_AS(app_config_from_json(R"({"run": {"max_steps": 0}})"),
                         doctest::Contains("max_steps"), Error);
    CHECK_THROWS_WITH_AS(app_config_from_json(R"({"grpo": {"clip_epsilon": 0.0}})"),
                         doctest::Contains("clip_epsilon"), Error);
    CHECK_THROWS_WITH_AS(app_config_from_json(R"({"eval": {"grounding_metric": "best"}})"),
                         doctest::Contains("grounding_metric"), Error);
}

TEST_CASE("secrets come from the environment only") {
    AppConfig config;
    CHECK(config.master_endpoint.api_key_env == "LVA_MASTER_API_KEY");
    CHECK(config.grounding_endpoint.api_key_env == "LVA_GROUNDING_API_KEY");
    CHECK(config.vision_endpoint.api_key_env == "LVA_VISION_API_KEY");
}

TEST_CASE("cli validate accepts the shipped case dataset") {
    CommandResult result = run_cli("validate --dataset " + (kAssets / "cases").string());
    CHECK(result.exit_code == 0);
    CHECK(result.stdout_text.find("s05e06: ok") != std::string::npos);
    CHECK(result.stdout_text.find("s10e04: ok") != std::string::npos);
}

TEST_CASE("cli run replays the bus-stop case and prints the reward") {
    auto out = fresh_dir("run");
    CommandResult result = run_cli(
        "run --episode " + (kAssets / "cases" / "s05e06.json").string() +
        " --question q_s05e06_busstop --fixtures " +
        (kAssets / "fixtures" / "cases.json").string() + " --backend scripted --out " +
        out.string());
    CHECK(result.exit_code == 0);
    CHECK(result.stdout_text.find("The answer is: a3: a bus stop") != std::string::npos);
    CHECK(result.stdout_text.find("R = 2.5") != std::string::npos);
    CHECK(std::filesystem::exists(out / "trajectories" / "q_s05e06_busstop.json"));
}

TEST_CASE("cli eval writes byte-identical artifacts on re-run") {
    auto out = fresh_dir("eval");
    std::string args = "eval --dataset " + (kAssets / "cases").string() + " --fixtures " +
                       (kAssets / "fixtures" / "cases.json").string() +
                       " --backend scripted --out " + out.string();
    CommandResult first = run_cli(args);
    CHECK(first.exit_code == 0);
    CHECK(first.stdout_text.find("100.00") != std::string::npos);
    std::string report = slurp(out / "report.json");
    std::string results = slurp(out / "results.jsonl");
    std::string trajectory = slurp(out / "trajectories" / "q_s05e06_busstop.json");
    CHECK(report.find("wall_time") == std::string::npos);

    CommandResult second = run_cli(args);
    CHECK(second.exit_code == 0);
    CHECK(slurp(out / "report.json") == report);
    CHECK(slurp(out / "results.jsonl") == results);
    CHECK(slurp(out / "trajectories" / "q_s05e06_busstop.json") == trajectory);
}

TEST_CASE("cli sweep prints one row per axis value") {
    auto out = fresh_dir("sweep");
    CommandResult result = run_cli(
        "sweep --dataset " + (kAssets / "cases").string() + " --fixtures " +
        (kAssets / "fixtures" / "cases.json").string() +
        " --backend scripted --axis max-steps=2,5,10 --out " + out.string());
    CHECK(result.exit_code == 0);
    CHECK(result.stdout_text.find("max-steps=2") != std::string::npos);
    CHECK(result.stdout_text.find("max-steps=5") != std::string::npos);
    CHECK(result.stdout_text.find("max-steps=10") != std::string::npos);
    CHECK(std::filesystem::exists(out / "comparison.txt"));
    CHECK(std::filesystem::exists(out / "max-steps=5" / "report.json"));
}

TEST_CASE("cli simulate then score-rollouts exports a training batch") {
    auto out = fresh_dir("rollouts");
    CommandResult sim = run_cli(
        "simulate --dataset " + (kAssets / "cases").string() + " --fixtures " +
        (kAssets / "fixtures" / "cases.json").string() + " --rollouts 4 --out " +
        out.string());
    CHECK(sim.exit_code == 0);
    CHECK(sim.stdout_text.find("wrote 8 rollouts") != std::string::npos);

    auto scored = fresh_dir("scored");
    CommandResult score = run_cli(
        "score-rollouts --in " + (out / "rollouts").string() + " --dataset " +
        (kAssets / "cases").string() + " --out " + scored.string());
    CHECK(score.exit_code == 0);
    CHECK(score.stdout_text.find("8 rollout records") != std::string::npos);
    std::string batch = slurp(scored / "train_batch.jsonl");
    CHECK(batch.find("\"type\":\"metadata\"") != std::string::npos);
    CHECK(batch.find("\"lr\":5e-06") != std::string::npos);
}

TEST_CASE("cli exit codes distinguish usage from runtime failures") {
    CHECK(run_cli("no-such-subcommand").exit_code == 1);
    CHECK(run_cli("eval --dataset /nonexistent --fixtures nope.json").exit_code == 2);
    CHECK(run_cli("run --episode missing.json --unknown-flag 1").exit_code == 1);
    CommandResult strict = run_cli(
        "eval --dataset " + (kAssets / "cases").string() +
        " --fixtures /nonexistent_fixture.json --backend scripted --strict");
    CHECK(strict.exit_code == 2);  // fixture load fails before evaluation starts
}

TEST_CASE("cli strict aborts with exit 3 when a question cannot be served") {
    // fixture covering only one of the two case questions
    auto partial_path = std::filesystem::temp_directory_path() / "lva_partial_fixture.json";
    {
        nlohmann::json full =
            nlohmann::json::parse(slurp(kAssets / "fixtures" / "cases.json"));
        full["questions"].erase("q_s10e04_bedside");
        std::ofstream out(partial_path);
        out << full.dump(2);
    }
    std::string args = "eval --dataset " + (kAssets / "cases").string() + " --fixtures " +
                       partial_path.string() + " --backend scripted";
    CommandResult lenient = run_cli(args);
    CHECK(lenient.exit_code == 0);  // errored question excluded, run continues
    CommandResult strict = run_cli(args + " --strict");
    CHECK(strict.exit_code == 3);
}

TEST_CASE("cli build-dataset ingests a clip directory") {
    auto in = fresh_dir("ingest_in");
    {
        std::ofstream clip(in / "demo_seg01_clip_00.json");
        clip << R"({"clip_id": "demo_seg01_clip_00", "duration_s": 60.0,
                    "frame_refs": ["f0"], "subtitles": []})";
        std::ofstream qa(in / "qa.jsonl");
        qa << R"({"question_id": "dq", "text": "?", "a0": "x", "a1": "y", "a2": "z",)"
           << R"( "a3": "w", "a4": "v", "answer_idx": 1, "vid_name": "demo_seg01_clip_00"})"
           << "\n";
    }
    auto out = fresh_dir("ingest_built");
    CommandResult result =
        run_cli("build-dataset --in " + in.string() + " --out " + out.string());
    CHECK(result.exit_code == 0);
    CHECK(std::filesystem::exists(out / "demo.json"));
    CommandResult check = run_cli("validate --dataset " + out.string());
    CHECK(check.exit_code == 0);
}
