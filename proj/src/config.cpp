#include "biasaudit/config.hpp"

#include <cstdlib>
#include <sstream>

#include "biasaudit/jsonl.hpp"

namespace biasaudit {

namespace {

std::string interpolate_string(const std::string& value) {
    std::string out;
    std::size_t i = 0;
    while (i < value.size()) {
        if (value[i] == '$' && i + 1 < value.size() && value[i + 1] == '{') {
            std::size_t close = value.find('}', i + 2);
            if (close == std::string::npos) throw ConfigError("unterminated ${ in: " + value);
            std::string var = value.substr(i + 2, close - i - 2);
            const char* env = std::getenv(var.c_str());
            if (!env) throw ConfigError("environment variable not set: " + var);
            out += env;
            i = close + 1;
        } else {
            out += value[i++];
        }
    }
    return out;
}

}  // namespace

nlohmann::json interpolate_env(const nlohmann::json& doc) {
    if (doc.is_string()) return interpolate_string(doc.get<std::string>());
    if (doc.is_object()) {
        nlohmann::json out = nlohmann::json::object();
        for (auto& [key, value] : doc.items()) out[key] = interpolate_env(value);
        return out;
    }
    if (doc.is_array()) {
        nlohmann::json out = nlohmann::json::array();
        for (const auto& value : doc) out.push_back(interpolate_env(value));
        return out;
    }
    return doc;
}

RunConfig RunConfig::load(const std::filesystem::path& path) {
    nlohmann::json doc;
    try {
        doc = read_json(path);
    } catch (const DataError& e) {
        throw ConfigError(e.what());
    }
    return from_json(std::move(doc));
}

RunConfig RunConfig::from_json(nlohmann::json doc) {
    doc = interpolate_env(doc);
    RunConfig cfg;
    std::ostringstream hash;
    hash << std::hex << fnv1a64(doc.dump());
    cfg.config_hash = hash.str();

    if (doc.contains("backends")) {
        if (!doc["backends"].is_object()) throw ConfigError("'backends' must be an object");
        for (auto& [name, block] : doc["backends"].items()) {
            cfg.backends.emplace(name, BackendConfig::from_json(name, block));
        }
    }
    if (doc.contains("pipeline")) {
        const auto& p = doc["pipeline"];
        try {
            cfg.pipeline.n_captions = p.value("n_captions", cfg.pipeline.n_captions);
            cfg.pipeline.n_images = p.value("n_images", cfg.pipeline.n_images);
            cfg.pipeline.step_interval = p.value("step_interval", cfg.pipeline.step_interval);
            cfg.pipeline.overlap = p.value("overlap", cfg.pipeline.overlap);
            cfg.pipeline.min_support = p.value("min_support", cfg.pipeline.min_support);
            cfg.pipeline.master_seed = p.value("master_seed", cfg.pipeline.master_seed);
            cfg.pipeline.concurrency = p.value("concurrency", cfg.pipeline.concurrency);
            cfg.pipeline.gradient_concurrency =
                p.value("gradient_concurrency", cfg.pipeline.gradient_concurrency);
        } catch (const nlohmann::json::exception& e) {
            throw ConfigError(std::string("malformed pipeline block: ") + e.what());
        }
    }
    if (doc.contains("paths")) {
        for (auto& [key, value] : doc["paths"].items()) {
            if (!value.is_string()) throw ConfigError("paths entries must be strings");
            cfg.paths[key] = value.get<std::string>();
        }
    }
    if (cfg.pipeline.n_captions < 1 || cfg.pipeline.n_images < 1) {
        throw ConfigError("pipeline n_captions and n_images must be >= 1");
    }
    if (cfg.pipeline.step_interval < 1) throw ConfigError("step_interval must be >= 1");
    if (cfg.pipeline.overlap <= 0.0 || cfg.pipeline.overlap > 1.0) {
        throw ConfigError("overlap must be in (0, 1]");
    }
    if (cfg.pipeline.min_support < 1) throw ConfigError("min_support must be >= 1");
    return cfg;
}

const BackendConfig& RunConfig::backend(const std::string& name) const {
    auto it = backends.find(name);
    if (it == backends.end()) {
        throw ConfigError("backend '" + name + "' is not declared in the run config");
    }
    return it->second;
}

}  // namespace biasaudit
