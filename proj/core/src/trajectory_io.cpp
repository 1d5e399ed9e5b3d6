#include "lva/trajectory_io.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "lva/errors.hpp"

namespace lva {

namespace {

using nlohmann::json;

json config_to_json(const RunConfig& config) {
    json j;
    j["max_steps"] = config.max_steps;
    j["window"] = config.window;
    j["eos_marker"] = config.eos_marker;
    j["system_prompt"] = config.system_prompt;
    j["answer_prefix"] = config.answer_prefix;
    j["rethink_message"] = config.rethink_message;
    j["force_answer"] = config.force_answer;
    return j;
}

RunConfig config_from_json(const json& j) {
    RunConfig config;
    config.max_steps = j.value("max_steps", config.max_steps);
    config.window = j.value("window", config.window);
    config.eos_marker = j.value("eos_marker", config.eos_marker);
    config.system_prompt = j.value("system_prompt", config.system_prompt);
    config.answer_prefix = j.value("answer_prefix", config.answer_prefix);
    config.rethink_message = j.value("rethink_message", config.rethink_message);
    config.force_answer = j.value("force_answer", config.force_answer);
    return config;
}

json opt_str(const std::optional<std::string>& value) {
    return value ? json(*value) : json(nullptr);
}

std::optional<std::string> opt_str_from(const json& j, const char* key) {
    if (!j.contains(key) || j.at(key).is_null()) return std::nullopt;
    return j.at(key).get<std::string>();
}

ActionKind kind_from_string(const std::string& s) {
    if (s == "visual_query") return ActionKind::VisualQuery;
    if (s == "request_grounding") return ActionKind::RequestGrounding;
    if (s == "answer") return ActionKind::Answer;
    throw Error(ErrorCode::IoError, "unknown action kind '" + s + "'");
}

Violation violation_from_string(const std::string& s) {
    if (s == "no_tag") return Violation::NoTag;
    if (s == "multiple_tags") return Violation::MultipleTags;
    if (s == "unclosed_tag") return Violation::UnclosedTag;
    if (s == "extraneous_text") return Violation::ExtraneousText;
    if (s == "empty_payload") return Violation::EmptyPayload;
    throw Error(ErrorCode::IoError, "unknown violation '" + s + "'");
}

}  // namespace

std::string trajectory_to_json(const Trajectory& trajectory) {
    json j;
    j["question_id"] = trajectory.question_id;
    j["episode_id"] = trajectory.episode_id;
    j["config"] = config_to_json(trajectory.config);
    j["turns"] = json::array();
    for (const TurnRecord& turn : trajectory.turns) {
        json t;
        t["step_index"] = turn.step_index;
        t["master_text"] = turn.master_text;
        if (turn.action) {
            json a;
            a["kind"] = to_string(turn.action->kind);
            a["payload"] = turn.action->payload;
            a["span"] = {turn.action->span_begin, turn.action->span_end};
            a["preceding_think"] = opt_str(turn.action->preceding_think);
            t["action"] = std::move(a);
        } else {
            t["action"] = nullptr;
        }
        json v;
        v["valid"] = turn.verdict.valid;
        v["violation"] = turn.verdict.violation ? json(to_string(*turn.verdict.violation))
                                                : json(nullptr);
        t["verdict"] = std::move(v);
        t["injected"] = opt_str(turn.injected);
        t["current_clip"] = opt_str(turn.current_clip);
        j["turns"].push_back(std::move(t));
    }
    j["final_answer"] = opt_str(trajectory.final_answer);
    j["final_answer_raw"] = opt_str(trajectory.final_answer_raw);
    j["final_label"] = opt_str(trajectory.final_label);
    j["final_record"] = trajectory.final_answer
        ? json(trajectory.config.answer_prefix + *trajectory.final_answer)
        : json(nullptr);
    j["forced_answer"] = opt_str(trajectory.forced_answer);
    j["forced_label"] = opt_str(trajectory.forced_label);
    j["terminated_by"] = to_string(trajectory.terminated_by);
    j["grounded_clips"] = trajectory.grounded_clips;
    return j.dump(2) + "\n";
}

Trajectory trajectory_from_json(const std::string& json_text) {
    json j = json::parse(json_text, nullptr, false);
    if (j.is_discarded()) throw Error(ErrorCode::IoError, "invalid trajectory JSON");
    Trajectory trajectory;
    trajectory.question_id = j.at("question_id").get<std::string>();
    trajectory.episode_id = j.at("episode_id").get<std::string>();
    trajectory.config = config_from_json(j.at("config"));
    for (const auto& t : j.at("turns")) {
        TurnRecord turn;
        turn.step_index = t.at("step_index").get<int>();
        turn.master_text = t.at("master_text").get<std::string>();
        if (!t.at("action").is_null()) {
            const auto& a = t.at("action");
            ParsedAction action;
            action.kind = kind_from_string(a.at("kind").get<std::string>());
            action.payload = a.at("payload").get<std::string>();
            action.span_begin = a.at("span").at(0).get<std::size_t>();
            action.span_end = a.at("span").at(1).get<std::size_t>();
            action.preceding_think = opt_str_from(a, "preceding_think");
            turn.action = std::move(action);
        }
        const auto& v = t.at("verdict");
        turn.verdict.valid = v.at("valid").get<bool>();
        if (!v.at("violation").is_null()) {
            turn.verdict.violation = violation_from_string(v.at("violation").get<std::string>());
        }
        turn.injected = opt_str_from(t, "injected");
        turn.current_clip = opt_str_from(t, "current_clip");
        trajectory.turns.push_back(std::move(turn));
    }
    trajectory.final_answer = opt_str_from(j, "final_answer");
    trajectory.final_answer_raw = opt_str_from(j, "final_answer_raw");
    trajectory.final_label = opt_str_from(j, "final_label");
    trajectory.forced_answer = opt_str_from(j, "forced_answer");
    trajectory.forced_label = opt_str_from(j, "forced_label");
    std::string term = j.at("terminated_by").get<std::string>();
    trajectory.terminated_by = term == "answer" ? TerminatedBy::Answer : TerminatedBy::StepLimit;
    for (const auto& c : j.at("grounded_clips")) {
        trajectory.grounded_clips.push_back(c.get<std::string>());
    }
    return trajectory;
}

void save_trajectory(const Trajectory& trajectory, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error(ErrorCode::IoError, "cannot write " + path.string());
    out << trajectory_to_json(trajectory);
}

Trajectory load_trajectory(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(ErrorCode::IoError, "cannot open " + path.string());
    std::ostringstream buf;
    buf << in.rdbuf();
    return trajectory_from_json(buf.str());
}

std::vector<Trajectory> load_trajectories(const std::filesystem::path& path) {
    std::vector<std::filesystem::path> files;
    if (std::filesystem::is_directory(path)) {
        for (const auto& entry : std::filesystem::recursive_directory_iterator(path)) {
            if (entry.is_regular_file() && entry.path().extension() == ".json") {
                files.push_back(entry.path());
            }
        }
        std::sort(files.begin(), files.end());
    } else {
        files.push_back(path);
    }
    std::vector<Trajectory> out;
    out.reserve(files.size());
    for (const auto& f : files) out.push_back(load_trajectory(f));
    std::stable_sort(out.begin(), out.end(), [](const Trajectory& a, const Trajectory& b) {
        return a.question_id < b.question_id;
    });
    return out;
}

std::string trajectory_index_line(const Trajectory& trajectory) {
    json j;
    j["question_id"] = trajectory.question_id;
    j["final_answer"] = opt_str(trajectory.final_answer);
    j["terminated_by"] = to_string(trajectory.terminated_by);
    j["n_turns"] = trajectory.turns.size();
    j["grounded_clips"] = trajectory.grounded_clips;
    return j.dump();
}

}  // namespace lva
