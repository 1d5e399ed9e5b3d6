#include "lva/backends.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <random>
#include <sstream>

#include <json.hpp>

#include "lva/action_grammar.hpp"
#include "lva/errors.hpp"

namespace lva {

namespace {

using nlohmann::json;

std::string to_lower(std::string_view s) {
    std::string out(s);
    std::transform(out.begin(), out.end(), out.begin(), [](unsigned char c) {
        return static_cast<char>(std::tolower(c));
    });
    return out;
}

// Raw engine output mapped to [0,1) without std::uniform_real_distribution,
// whose results are not pinned across standard libraries.
double to_unit_double(std::uint64_t x) {
    return static_cast<double>(x >> 11) * 0x1.0p-53;
}

std::string final_answer_turn(const QuestionFixture& fixture) {
    auto action = parse_action(fixture.master_script.back());
    std::string payload = action && action->kind == ActionKind::Answer ? action->payload : "";
    return std::string(opening_tag(ActionKind::Answer)) + payload +
           closing_tag(ActionKind::Answer);
}

}  // namespace

const QuestionFixture& ScriptedFixture::require(const std::string& question_id) const {
    auto it = questions.find(question_id);
    if (it == questions.end()) throw Error(ErrorCode::UnknownQuestion, question_id);
    return it->second;
}

std::uint64_t mix_seed(std::uint64_t seed, std::string_view key, std::uint64_t counter) {
    std::uint64_t h = 1469598103934665603ULL;  // FNV-1a
    auto mix = [&h](std::uint64_t v) {
        for (int i = 0; i < 8; ++i) {
            h ^= (v >> (i * 8)) & 0xFF;
            h *= 1099511628211ULL;
        }
    };
    mix(seed);
    for (char c : key) {
        h ^= static_cast<unsigned char>(c);
        h *= 1099511628211ULL;
    }
    mix(counter);
    return h;
}

std::string fixture_to_json(const ScriptedFixture& fixture) {
    json j;
    j["schema_version"] = 1;
    j["grounding_error_rate"] = fixture.grounding_error_rate;
    j["rng_seed"] = fixture.rng_seed;
    json qs = json::object();
    for (const auto& [question_id, qf] : fixture.questions) {
        json q;
        q["gold_clip_id"] = qf.gold_clip_id;
        q["vision_facts"] = json::array();
        for (const VisionFact& fact : qf.vision_facts) {
            q["vision_facts"].push_back({{"trigger", fact.trigger}, {"response", fact.response}});
        }
        q["master_script"] = qf.master_script;
        qs[question_id] = std::move(q);
    }
    j["questions"] = std::move(qs);
    return j.dump(2) + "\n";
}

ScriptedFixture fixture_from_json(const std::string& json_text) {
    json j = json::parse(json_text, nullptr, false);
    if (j.is_discarded()) throw Error(ErrorCode::IoError, "invalid fixture JSON");
    ScriptedFixture fixture;
    fixture.grounding_error_rate = j.value("grounding_error_rate", 0.0);
    if (fixture.grounding_error_rate < 0.0 || fixture.grounding_error_rate > 1.0) {
        throw Error(ErrorCode::ConfigError, "grounding_error_rate outside [0,1]");
    }
    fixture.rng_seed = j.value("rng_seed", 0ULL);
    const json questions = j.value("questions", json::object());
    for (const auto& [question_id, q] : questions.items()) {
        QuestionFixture qf;
        qf.gold_clip_id = q.value("gold_clip_id", "");
        for (const auto& fact : q.value("vision_facts", json::array())) {
            qf.vision_facts.push_back(
                {fact.at("trigger").get<std::string>(), fact.at("response").get<std::string>()});
        }
        for (const auto& turn : q.value("master_script", json::array())) {
            qf.master_script.push_back(turn.get<std::string>());
        }
        if (!qf.master_script.empty()) {
            auto last = parse_action(qf.master_script.back());
            if (!last || last->kind != ActionKind::Answer) {
                throw Error(ErrorCode::ConfigError,
                            "master_script for '" + question_id +
                                "' does not end with an <answer> turn");
            }
        }
        fixture.questions.emplace(question_id, std::move(qf));
    }
    return fixture;
}

ScriptedFixture load_fixture(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(ErrorCode::IoError, "cannot open " + path.string());
    std::ostringstream buf;
    buf << in.rdbuf();
    return fixture_from_json(buf.str());
}

void save_fixture(const ScriptedFixture& fixture, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error(ErrorCode::IoError, "cannot write " + path.string());
    out << fixture_to_json(fixture);
}

ScriptedMasterBackend::ScriptedMasterBackend(std::shared_ptr<const ScriptedFixture> fixture)
    : fixture_(std::move(fixture)) {}

std::string ScriptedMasterBackend::generate(const std::string& question_id,
                                            const ChatTranscript& transcript,
                                            const std::vector<std::string>& stop_markers) {
    (void)stop_markers;  // scripted turns already end at an action boundary
    const QuestionFixture& qf = fixture_->require(question_id);
    if (qf.master_script.empty()) {
        throw Error(ErrorCode::UnknownQuestion,
                    "no master_script for '" + question_id + "'");
    }
    std::size_t turn_index = 0;
    for (const ChatMessage& message : transcript) {
        if (message.role == "assistant") ++turn_index;
    }
    if (turn_index < qf.master_script.size()) return qf.master_script[turn_index];
    return final_answer_turn(qf);
}

ScriptedGroundingBackend::ScriptedGroundingBackend(
    std::shared_ptr<const ScriptedFixture> fixture, std::uint64_t seed_salt)
    : fixture_(std::move(fixture)), seed_salt_(seed_salt) {}

std::string ScriptedGroundingBackend::ground(const GroundingRequest& request) {
    const QuestionFixture& qf = fixture_->require(request.question_id);
    std::uint64_t call_index;
    {
        std::lock_guard<std::mutex> lock(mutex_);
        call_index = call_counts_[request.question_id]++;
    }
    const double p = fixture_->grounding_error_rate;
    if (p <= 0.0) return qf.gold_clip_id;

    std::mt19937_64 rng(mix_seed(fixture_->rng_seed + seed_salt_, request.question_id, call_index));
    if (to_unit_double(rng()) >= p) return qf.gold_clip_id;

    const Episode* episode = request.episode;
    if (episode == nullptr || episode->clips.size() < 2) return qf.gold_clip_id;
    std::vector<const std::string*> others;
    others.reserve(episode->clips.size());
    for (const Clip& clip : episode->clips) {
        if (clip.clip_id != qf.gold_clip_id) others.push_back(&clip.clip_id);
    }
    return *others[static_cast<std::size_t>(rng() % others.size())];
}

void ScriptedGroundingBackend::reset() {
    std::lock_guard<std::mutex> lock(mutex_);
    call_counts_.clear();
}

ScriptedVisionBackend::ScriptedVisionBackend(std::shared_ptr<const ScriptedFixture> fixture)
    : fixture_(std::move(fixture)) {}

std::string ScriptedVisionBackend::describe(const VisionRequest& request) {
    const QuestionFixture& qf = fixture_->require(request.question_id);
    const std::string query = to_lower(request.query);
    std::lock_guard<std::mutex> lock(mutex_);
    std::size_t& cursor = cursors_[request.question_id];
    for (std::size_t i = cursor; i < qf.vision_facts.size(); ++i) {
        if (query.find(to_lower(qf.vision_facts[i].trigger)) != std::string::npos) {
            cursor = i + 1;
            return qf.vision_facts[i].response;
        }
    }
    return kNoVisualDetailSentinel;
}

void ScriptedVisionBackend::reset() {
    std::lock_guard<std::mutex> lock(mutex_);
    cursors_.clear();
}

}  // namespace lva
