#pragma once

#include <cstdint>
#include <filesystem>
#include <string>

#include "lva/eval.hpp"
#include "lva/orchestrator.hpp"
#include "lva/remote_backends.hpp"
#include "lva/rewards.hpp"

namespace lva {

// Full file-level configuration. Precedence is handled by the CLI:
// flags > environment > config file > defaults.
struct AppConfig {
    RunConfig run;
    double alpha = 0.5;
    GrpoConfig grpo;
    GrpoMeta grpo_meta;
    int parallelism = 4;
    bool strict = false;
    GroundingMetric grounding_metric = GroundingMetric::Last;
    std::uint64_t seed = 0;
    EndpointConfig master_endpoint;
    EndpointConfig grounding_endpoint;
    EndpointConfig vision_endpoint;

    AppConfig();
};

// Accepts .json, or .toml restricted to flat [section] tables with string,
// number, and boolean values (the shape this config needs).
AppConfig load_app_config(const std::filesystem::path& path);

AppConfig app_config_from_json(const std::string& json_text);

// The TOML-subset reader, exposed for tests: returns the equivalent JSON text.
std::string toml_subset_to_json_text(const std::string& toml_text);

}  // namespace lva
