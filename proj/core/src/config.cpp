#include "lva/config.hpp"

#include <cctype>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "lva/errors.hpp"

namespace lva {

namespace {

using nlohmann::json;

std::string trim(const std::string& s) {
    std::size_t b = s.find_first_not_of(" \t\r\n");
    if (b == std::string::npos) return "";
    std::size_t e = s.find_last_not_of(" \t\r\n");
    return s.substr(b, e - b + 1);
}

json parse_toml_scalar(const std::string& raw, int lineno) {
    std::string v = trim(raw);
    if (v.empty()) throw Error(ErrorCode::ConfigError, "line " + std::to_string(lineno) + ": empty value");
    if (v.front() == '"' || v.front() == '\'') {
        char quote = v.front();
        if (v.size() < 2 || v.back() != quote) {
            throw Error(ErrorCode::ConfigError,
                        "line " + std::to_string(lineno) + ": unterminated string");
        }
        std::string inner = v.substr(1, v.size() - 2);
        if (quote == '"') {
            std::string unescaped;
            for (std::size_t i = 0; i < inner.size(); ++i) {
                if (inner[i] == '\\' && i + 1 < inner.size()) {
                    ++i;
                    switch (inner[i]) {
                        case 'n': unescaped += '\n'; break;
                        case 't': unescaped += '\t'; break;
                        case '"': unescaped += '"'; break;
                        case '\\': unescaped += '\\'; break;
                        default: unescaped += inner[i]; break;
                    }
                } else {
                    unescaped += inner[i];
                }
            }
            inner = unescaped;
        }
        return json(inner);
    }
    if (v == "true") return json(true);
    if (v == "false") return json(false);
    json number = json::parse(v, nullptr, false);
    if (!number.is_discarded() && number.is_number()) return number;
    throw Error(ErrorCode::ConfigError,
                "line " + std::to_string(lineno) + ": unsupported value '" + v + "'");
}

}  // namespace

std::string toml_subset_to_json_text(const std::string& toml_text) {
    json root = json::object();
    json* section = &root;
    std::istringstream in(toml_text);
    std::string raw;
    int lineno = 0;
    while (std::getline(in, raw)) {
        ++lineno;
        std::string line = trim(raw);
        if (line.empty() || line.front() == '#') continue;
        if (line.front() == '[') {
            if (line.back() != ']') {
                throw Error(ErrorCode::ConfigError,
                            "line " + std::to_string(lineno) + ": malformed section header");
            }
            std::string name = trim(line.substr(1, line.size() - 2));
            section = &root;
            std::size_t pos = 0;
            while (pos != std::string::npos) {
                std::size_t dot = name.find('.', pos);
                std::string part = dot == std::string::npos ? name.substr(pos)
                                                            : name.substr(pos, dot - pos);
                section = &(*section)[trim(part)];
                pos = dot == std::string::npos ? std::string::npos : dot + 1;
            }
            continue;
        }
        std::size_t eq = line.find('=');
        if (eq == std::string::npos) {
            throw Error(ErrorCode::ConfigError,
                        "line " + std::to_string(lineno) + ": expected key = value");
        }
        std::string key = trim(line.substr(0, eq));
        std::string value = line.substr(eq + 1);
        // strip a trailing comment outside quotes
        bool in_quote = false;
        char quote = 0;
        for (std::size_t i = 0; i < value.size(); ++i) {
            char c = value[i];
            if (in_quote) {
                if (c == quote && (quote != '"' || value[i - 1] != '\\')) in_quote = false;
            } else if (c == '"' || c == '\'') {
                in_quote = true;
                quote = c;
            } else if (c == '#') {
                value = value.substr(0, i);
                break;
            }
        }
        (*section)[key] = parse_toml_scalar(value, lineno);
    }
    return root.dump();
}

AppConfig::AppConfig() {
    master_endpoint.api_key_env = "LVA_MASTER_API_KEY";
    master_endpoint.temperature = 1.0;  // rollout-collection default
    grounding_endpoint.api_key_env = "LVA_GROUNDING_API_KEY";
    grounding_endpoint.temperature = 0.0;
    vision_endpoint.api_key_env = "LVA_VISION_API_KEY";
    vision_endpoint.temperature = 0.0;
}

namespace {

void endpoint_from_json(const json& j, EndpointConfig* endpoint) {
    endpoint->base_url = j.value("url", endpoint->base_url);
    endpoint->path = j.value("path", endpoint->path);
    endpoint->model = j.value("model", endpoint->model);
    endpoint->api_key_env = j.value("api_key_env", endpoint->api_key_env);
    endpoint->temperature = j.value("temperature", endpoint->temperature);
    endpoint->max_tokens = j.value("max_tokens", endpoint->max_tokens);
    endpoint->attempts = j.value("attempts", endpoint->attempts);
    endpoint->backoff_base_ms = j.value("backoff_base_ms", endpoint->backoff_base_ms);
    endpoint->timeout_s = j.value("timeout_s", endpoint->timeout_s);
    endpoint->frames_per_call = j.value("frames_per_call", endpoint->frames_per_call);
}

}  // namespace

AppConfig app_config_from_json(const std::string& json_text) {
    json j = json::parse(json_text, nullptr, false);
    if (j.is_discarded()) throw Error(ErrorCode::ConfigError, "invalid config JSON");
    AppConfig config;

    if (j.contains("run")) {
        const json& run = j["run"];
        config.run.max_steps = run.value("max_steps", config.run.max_steps);
        config.run.window = run.value("window", config.run.window);
        config.run.eos_marker = run.value("eos_marker", config.run.eos_marker);
        config.run.system_prompt = run.value("system_prompt", config.run.system_prompt);
        config.run.answer_prefix = run.value("answer_prefix", config.run.answer_prefix);
        config.run.rethink_message = run.value("rethink_message", config.run.rethink_message);
        config.run.force_answer = run.value("force_answer", config.run.force_answer);
        if (config.run.max_steps < 1) throw Error(ErrorCode::ConfigError, "run.max_steps must be >= 1");
        if (config.run.window < 1) throw Error(ErrorCode::ConfigError, "run.window must be >= 1");
    }
    if (j.contains("eval")) {
        const json& ev = j["eval"];
        config.parallelism = ev.value("parallelism", config.parallelism);
        config.strict = ev.value("strict", config.strict);
        config.seed = ev.value("seed", config.seed);
        std::string metric = ev.value("grounding_metric", "last");
        if (metric == "last") {
            config.grounding_metric = GroundingMetric::Last;
        } else if (metric == "any") {
            config.grounding_metric = GroundingMetric::Any;
        } else {
            throw Error(ErrorCode::ConfigError, "eval.grounding_metric must be last|any");
        }
    }
    if (j.contains("grpo")) {
        const json& g = j["grpo"];
        config.alpha = g.value("alpha", config.alpha);
        config.grpo.clip_epsilon = g.value("clip_epsilon", config.grpo.clip_epsilon);
        config.grpo.kl_coeff = g.value("kl_coeff", config.grpo.kl_coeff);
        config.grpo.entropy_coeff = g.value("entropy_coeff", config.grpo.entropy_coeff);
        config.grpo.std_floor = g.value("std_floor", config.grpo.std_floor);
        std::string baseline = g.value("baseline", "group_mean");
        if (baseline == "group_mean") {
            config.grpo.baseline = BaselineMode::GroupMean;
        } else if (baseline == "none") {
            config.grpo.baseline = BaselineMode::None;
        } else {
            throw Error(ErrorCode::ConfigError, "grpo.baseline must be group_mean|none");
        }
        if (config.alpha < 0.0) throw Error(ErrorCode::ConfigError, "grpo.alpha must be >= 0");
        if (config.grpo.clip_epsilon <= 0.0) {
            throw Error(ErrorCode::ConfigError, "grpo.clip_epsilon must be > 0");
        }
        if (config.grpo.kl_coeff < 0.0) {
            throw Error(ErrorCode::ConfigError, "grpo.kl_coeff must be >= 0");
        }
        config.grpo_meta.kl_coeff = config.grpo.kl_coeff;
        config.grpo_meta.lr = g.value("lr", config.grpo_meta.lr);
        config.grpo_meta.max_steps_opt = g.value("max_steps_opt", config.grpo_meta.max_steps_opt);
        config.grpo_meta.batch_size = g.value("batch_size", config.grpo_meta.batch_size);
        config.grpo_meta.n_rollouts = g.value("n_rollouts", config.grpo_meta.n_rollouts);
        config.grpo_meta.temperature = g.value("temperature", config.grpo_meta.temperature);
    }
    if (j.contains("backends")) {
        const json& b = j["backends"];
        if (b.contains("master")) endpoint_from_json(b["master"], &config.master_endpoint);
        if (b.contains("grounding")) endpoint_from_json(b["grounding"], &config.grounding_endpoint);
        if (b.contains("vision")) endpoint_from_json(b["vision"], &config.vision_endpoint);
    }
    return config;
}

AppConfig load_app_config(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(ErrorCode::ConfigError, "cannot open config " + path.string());
    std::ostringstream buf;
    buf << in.rdbuf();
    std::string text = buf.str();
    if (path.extension() == ".toml") {
        return app_config_from_json(toml_subset_to_json_text(text));
    }
    return app_config_from_json(text);
}

}  // namespace lva
