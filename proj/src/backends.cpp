#include "biasaudit/backends.hpp"

#include <sstream>

#include "biasaudit/http_backends.hpp"
#include "biasaudit/planted.hpp"

namespace biasaudit {

LogitsJacobian AnswerModelBackend::answer_logits_jacobian(const std::vector<double>&,
                                                          const std::string&,
                                                          const std::vector<std::string>&) const {
    throw NotDifferentiableError("answer model does not expose logit gradients");
}

std::string BackendConfig::fingerprint() const {
    std::ostringstream os;
    os << kind << ":" << std::hex << fnv1a64(to_json().dump());
    return os.str();
}

BackendConfig BackendConfig::from_json(const std::string& name, const nlohmann::json& block) {
    BackendConfig cfg;
    cfg.name = name;
    try {
        cfg.kind = block.at("kind").get<std::string>();
    } catch (const nlohmann::json::exception&) {
        throw ConfigError("backend '" + name + "' is missing 'kind'");
    }
    cfg.endpoint = block.value("endpoint", std::string());
    cfg.model_id = block.value("model_id", std::string());
    cfg.seed_policy = block.value("seed_policy", std::string("derived"));
    cfg.differentiable = block.value("differentiable", false);
    if (block.contains("params")) cfg.params = block["params"];
    return cfg;
}

nlohmann::json BackendConfig::to_json() const {
    nlohmann::json j;
    j["kind"] = kind;
    if (!endpoint.empty()) j["endpoint"] = endpoint;
    if (!model_id.empty()) j["model_id"] = model_id;
    j["seed_policy"] = seed_policy;
    j["differentiable"] = differentiable;
    j["params"] = params;
    return j;
}

void BackendRegistry::register_proposer(const std::string& kind, ProposerFactory f) {
    proposers_[kind] = std::move(f);
}
void BackendRegistry::register_generator(const std::string& kind, GeneratorFactory f) {
    generators_[kind] = std::move(f);
}
void BackendRegistry::register_answer_model(const std::string& kind, AnswerFactory f) {
    answer_models_[kind] = std::move(f);
}
void BackendRegistry::register_yes_no(const std::string& kind, YesNoFactory f) {
    yes_no_[kind] = std::move(f);
}

namespace {
template <typename Map>
const typename Map::mapped_type& lookup(const Map& map, const std::string& kind,
                                        const char* role) {
    auto it = map.find(kind);
    if (it == map.end()) {
        throw ConfigError("no " + std::string(role) + " backend of kind '" + kind +
                          "' is registered");
    }
    return it->second;
}
}  // namespace

std::shared_ptr<ProposerBackend> BackendRegistry::create_proposer(const BackendConfig& cfg) const {
    return lookup(proposers_, cfg.kind, "proposer")(cfg);
}
std::shared_ptr<GeneratorBackend> BackendRegistry::create_generator(
    const BackendConfig& cfg) const {
    return lookup(generators_, cfg.kind, "generator")(cfg);
}
std::shared_ptr<AnswerModelBackend> BackendRegistry::create_answer_model(
    const BackendConfig& cfg) const {
    return lookup(answer_models_, cfg.kind, "answer model")(cfg);
}
std::shared_ptr<YesNoScorer> BackendRegistry::create_yes_no(const BackendConfig& cfg) const {
    return lookup(yes_no_, cfg.kind, "yes/no scorer")(cfg);
}

std::vector<std::string> BackendRegistry::kinds() const {
    std::vector<std::string> out;
    for (const auto& [k, _] : proposers_) out.push_back("proposer:" + k);
    for (const auto& [k, _] : generators_) out.push_back("generator:" + k);
    for (const auto& [k, _] : answer_models_) out.push_back("answer:" + k);
    for (const auto& [k, _] : yes_no_) out.push_back("yesno:" + k);
    return out;
}

BackendRegistry BackendRegistry::with_builtins() {
    BackendRegistry registry;
    register_planted_backends(registry);
    register_http_backends(registry);
    return registry;
}

}  // namespace biasaudit
