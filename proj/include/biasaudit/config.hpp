#pragma once

#include <filesystem>
#include <map>
#include <string>

#include "biasaudit/backends.hpp"

namespace biasaudit {

// Run configuration: one JSON document holding backend blocks and pipeline
// parameters. String values support ${VAR} environment interpolation so
// endpoints and credentials stay out of the file.
struct PipelineParams {
    std::size_t n_captions = 100;
    std::size_t n_images = 10;
    int step_interval = 1;
    double overlap = 0.75;
    std::size_t min_support = 30;
    std::uint64_t master_seed = 0;
    int concurrency = 1;
    // Differentiable generations are memory-heavy; capped separately.
    int gradient_concurrency = 1;
};

struct RunConfig {
    std::map<std::string, BackendConfig> backends;
    PipelineParams pipeline;
    std::map<std::string, std::string> paths;
    std::string config_hash;  // hash of the resolved document

    static RunConfig load(const std::filesystem::path& path);
    static RunConfig from_json(nlohmann::json doc);

    const BackendConfig& backend(const std::string& name) const;
};

// Replaces ${VAR} with the environment value in every string of the document.
// Unset variables raise ConfigError.
nlohmann::json interpolate_env(const nlohmann::json& doc);

}  // namespace biasaudit
