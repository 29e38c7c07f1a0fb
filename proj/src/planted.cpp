#include "biasaudit/planted.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

namespace biasaudit {

namespace {

std::vector<double> weights_or_zero(const std::map<std::string, std::vector<double>>& table,
                                    const std::string& word, std::size_t n_classes) {
    auto it = table.find(word);
    if (it != table.end()) return it->second;
    return std::vector<double>(n_classes, 0.0);
}

}  // namespace

PlantedWorld PlantedWorld::from_json(const nlohmann::json& j) {
    PlantedWorld w;
    try {
        w.classes = j.at("classes").get<std::vector<std::string>>();
        w.vocabulary = j.at("vocabulary").get<std::vector<std::string>>();
        if (j.contains("word_weights")) {
            for (auto& [word, vec] : j.at("word_weights").items()) {
                w.word_weights[to_lower(word)] = vec.get<std::vector<double>>();
            }
        }
        if (j.contains("decoy_weights")) {
            for (auto& [word, vec] : j.at("decoy_weights").items()) {
                w.decoy_weights[to_lower(word)] = vec.get<std::vector<double>>();
            }
        }
        if (j.contains("base_logit")) {
            w.base_logit = j.at("base_logit").get<std::vector<double>>();
        }
        w.noise_scale = j.value("noise_scale", 0.0);
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("malformed planted world: ") + e.what());
    }
    if (w.base_logit.empty()) w.base_logit.assign(w.classes.size(), 0.0);
    w.validate();
    return w;
}

nlohmann::json PlantedWorld::to_json() const {
    nlohmann::json j;
    j["classes"] = classes;
    j["vocabulary"] = vocabulary;
    nlohmann::json ww = nlohmann::json::object();
    for (const auto& [word, vec] : word_weights) ww[word] = vec;
    j["word_weights"] = ww;
    if (!decoy_weights.empty()) {
        nlohmann::json dw = nlohmann::json::object();
        for (const auto& [word, vec] : decoy_weights) dw[word] = vec;
        j["decoy_weights"] = dw;
    }
    j["base_logit"] = base_logit;
    j["noise_scale"] = noise_scale;
    return j;
}

std::optional<std::size_t> PlantedWorld::vocab_index(const std::string& word) const {
    std::string needle = to_lower(word);
    for (std::size_t i = 0; i < vocabulary.size(); ++i) {
        if (to_lower(vocabulary[i]) == needle) return i;
    }
    return std::nullopt;
}

void PlantedWorld::validate() const {
    if (classes.size() < 2) throw ConfigError("planted world needs at least 2 classes");
    if (vocabulary.empty()) throw ConfigError("planted world needs a vocabulary");
    if (base_logit.size() != classes.size()) {
        throw ConfigError("base_logit size must match class count");
    }
    if (noise_scale < 0.0) throw ConfigError("noise_scale must be nonnegative");
    auto check_table = [&](const std::map<std::string, std::vector<double>>& t, const char* what) {
        for (const auto& [word, vec] : t) {
            if (vec.size() != classes.size()) {
                throw ConfigError(std::string(what) + " for '" + word +
                                  "' must have one weight per class");
            }
            for (double v : vec) {
                if (!std::isfinite(v)) {
                    throw ConfigError(std::string(what) + " for '" + word + "' must be finite");
                }
            }
        }
    };
    check_table(word_weights, "word_weights");
    check_table(decoy_weights, "decoy_weights");
}

PlantedGeneratorConfig PlantedGeneratorConfig::from_params(const nlohmann::json& params) {
    PlantedGeneratorConfig cfg;
    cfg.steps = params.value("steps", 10);
    cfg.signal_decay = params.value("signal_decay", 0.0);
    cfg.feature_map = params.value("feature_map", std::string("squared"));
    cfg.norm = params.value("norm", 10.0);
    cfg.subtoken_min_len = params.value("subtoken_min_len", std::size_t{8});
    if (cfg.steps < 1) throw ConfigError("planted generator needs steps >= 1");
    if (cfg.feature_map != "squared" && cfg.feature_map != "linear") {
        throw ConfigError("feature_map must be 'squared' or 'linear'");
    }
    if (cfg.signal_decay < 0.0) throw ConfigError("signal_decay must be nonnegative");
    if (cfg.norm <= 0.0) throw ConfigError("norm must be positive");
    return cfg;
}

TokenizedPrompt tokenize_planted(const PlantedWorld& world, const PlantedGeneratorConfig& cfg,
                                 const std::string& text) {
    TokenizedPrompt tp;
    tp.text = text;
    std::size_t dim = world.vocabulary.size();

    struct Tok {
        std::vector<double> emb;
    };
    std::vector<Tok> tokens;
    tokens.push_back(Tok{std::vector<double>(dim, 0.0)});  // BOS, unassigned

    for (const auto& raw : split_words(text)) {
        std::string word = strip_punct(raw);
        if (word.empty()) continue;
        std::vector<double> emb(dim, 0.0);
        if (auto idx = world.vocab_index(word)) emb[*idx] = 1.0;
        std::size_t n_sub = word.size() >= cfg.subtoken_min_len ? 2 : 1;
        TokenSpan span{tokens.size(), tokens.size() + n_sub};
        for (std::size_t s = 0; s < n_sub; ++s) tokens.push_back(Tok{emb});
        tp.words.push_back(word);
        tp.token_spans.push_back(span);
    }
    tokens.push_back(Tok{std::vector<double>(dim, 0.0)});  // EOS, unassigned

    tp.embeddings = Matrix(tokens.size(), dim);
    for (std::size_t r = 0; r < tokens.size(); ++r) {
        for (std::size_t c = 0; c < dim; ++c) tp.embeddings(r, c) = tokens[r].emb[c];
    }
    return tp;
}

// ---------------------------------------------------------------------------

namespace {

class PlantedTrace : public GenerationTrace {
public:
    PlantedTrace(const PlantedWorld& world, const PlantedGeneratorConfig& cfg,
                 TokenizedPrompt prompt, std::uint64_t seed)
        : world_(world), cfg_(cfg), prompt_(std::move(prompt)), seed_(seed) {
        noise_.resize(world_.n_classes(), 0.0);
        if (world_.noise_scale > 0.0) {
            DetRng rng(hash_combine(seed_, fnv1a64("planted-noise")));
            for (auto& v : noise_) v = world_.noise_scale * rng.gaussian();
        }
        signal_ = Matrix(prompt_.embeddings.cols(), world_.n_classes());
        decoy_ = Matrix(prompt_.embeddings.cols(), world_.n_classes());
        for (std::size_t v = 0; v < world_.vocabulary.size(); ++v) {
            std::string key = to_lower(world_.vocabulary[v]);
            auto sig = weights_or_zero(world_.word_weights, key, world_.n_classes());
            auto dec = weights_or_zero(world_.decoy_weights, key, world_.n_classes());
            for (std::size_t c = 0; c < world_.n_classes(); ++c) {
                signal_(v, c) = sig[c];
                decoy_(v, c) = dec[c];
            }
        }
        image_.kind = "planted.features.v1";
        image_.features = features_mixed(prompt_.embeddings, 1.0, 0.0);
    }

    const TokenizedPrompt& prompt() const override { return prompt_; }
    std::uint64_t seed() const override { return seed_; }
    int steps() const override { return cfg_.steps; }
    const Image& image() const override { return image_; }
    bool differentiable() const override { return true; }

    std::vector<double> step_features(int step) const override {
        return step_features_at(step, prompt_.embeddings);
    }

    std::vector<double> step_features_at(int step, const Matrix& embeddings) const override {
        check_step(step);
        auto [alpha, beta] = mix(step);
        return features_mixed(embeddings, alpha, beta);
    }

    Matrix backprop_to_embeddings(int step,
                                  const std::vector<double>& dloss_dfeatures) const override {
        check_step(step);
        if (dloss_dfeatures.size() != world_.n_classes()) {
            throw DataError("feature gradient size does not match planted feature count");
        }
        auto [alpha, beta] = mix(step);
        const Matrix& emb = prompt_.embeddings;
        std::size_t dim = emb.cols();

        // d(agg[v])/d(e_i[v]) = 2*e_i[v]/norm (squared map) or 1/norm (linear);
        // d(f[c])/d(agg[v])   = alpha*signal[v][c] + beta*decoy[v][c].
        std::vector<double> per_dim(dim, 0.0);
        for (std::size_t v = 0; v < dim; ++v) {
            double acc = 0.0;
            for (std::size_t c = 0; c < world_.n_classes(); ++c) {
                acc += (alpha * signal_(v, c) + beta * decoy_(v, c)) * dloss_dfeatures[c];
            }
            per_dim[v] = acc;
        }

        Matrix grads(emb.rows(), dim, 0.0);
        bool squared = cfg_.feature_map == "squared";
        for (const auto& span : prompt_.token_spans) {
            for (std::size_t i = span.begin; i < span.end; ++i) {
                for (std::size_t v = 0; v < dim; ++v) {
                    double dagg = squared ? 2.0 * emb(i, v) / cfg_.norm : 1.0 / cfg_.norm;
                    grads(i, v) = dagg * per_dim[v];
                }
            }
        }
        return grads;  // unassigned tokens keep zero rows
    }

private:
    void check_step(int step) const {
        if (step < 1 || step > cfg_.steps) {
            throw DataError("step " + std::to_string(step) + " outside 1.." +
                            std::to_string(cfg_.steps));
        }
    }

    std::pair<double, double> mix(int step) const {
        if (cfg_.signal_decay == 0.0 || cfg_.steps == 1) return {1.0, 0.0};
        double t = static_cast<double>(step - 1) / static_cast<double>(cfg_.steps - 1);
        double alpha = std::exp(-cfg_.signal_decay * t);
        return {alpha, 1.0 - alpha};
    }

    std::vector<double> features_mixed(const Matrix& emb, double alpha, double beta) const {
        std::size_t dim = emb.cols();
        std::vector<double> agg(dim, 0.0);
        bool squared = cfg_.feature_map == "squared";
        for (const auto& span : prompt_.token_spans) {
            for (std::size_t i = span.begin; i < span.end; ++i) {
                for (std::size_t v = 0; v < dim; ++v) {
                    double e = emb(i, v);
                    agg[v] += squared ? e * e : e;
                }
            }
        }
        for (auto& v : agg) v /= cfg_.norm;

        std::vector<double> f(world_.n_classes(), 0.0);
        for (std::size_t c = 0; c < world_.n_classes(); ++c) {
            double sig = 0.0, dec = 0.0;
            for (std::size_t v = 0; v < dim; ++v) {
                sig += signal_(v, c) * agg[v];
                dec += decoy_(v, c) * agg[v];
            }
            f[c] = alpha * sig + beta * dec + world_.base_logit[c] + noise_[c];
        }
        return f;
    }

    const PlantedWorld& world_;
    const PlantedGeneratorConfig& cfg_;
    TokenizedPrompt prompt_;
    std::uint64_t seed_;
    std::vector<double> noise_;
    Matrix signal_;  // [vocab x classes]
    Matrix decoy_;
    Image image_;
};

}  // namespace

PlantedGenerator::PlantedGenerator(PlantedWorld world, PlantedGeneratorConfig cfg)
    : world_(std::move(world)), cfg_(cfg) {
    nlohmann::json fp;
    fp["kind"] = "planted_generator";
    fp["world"] = world_.to_json();
    fp["steps"] = cfg_.steps;
    fp["signal_decay"] = cfg_.signal_decay;
    fp["feature_map"] = cfg_.feature_map;
    fp["norm"] = cfg_.norm;
    fp["subtoken_min_len"] = cfg_.subtoken_min_len;
    std::ostringstream os;
    os << "planted:" << std::hex << fnv1a64(fp.dump());
    fingerprint_ = os.str();
}

std::unique_ptr<GenerationTrace> PlantedGenerator::generate(const std::string& prompt,
                                                            std::uint64_t seed) const {
    if (trim(prompt).empty()) throw DataError("generate: prompt must be nonempty");
    return std::make_unique<PlantedTrace>(world_, cfg_, tokenize_planted(world_, cfg_, prompt),
                                          seed);
}

std::string PlantedGenerator::fingerprint() const { return fingerprint_; }

// ---------------------------------------------------------------------------

PlantedAnswerModel::PlantedAnswerModel(PlantedWorld world, double gain, double offset,
                                       double unknown_logit, double unmatched_logit)
    : world_(std::move(world)),
      gain_(gain),
      offset_(offset),
      unknown_logit_(unknown_logit),
      unmatched_logit_(unmatched_logit) {
    nlohmann::json fp;
    fp["kind"] = "planted_answer";
    fp["classes"] = world_.classes;
    fp["gain"] = gain_;
    fp["offset"] = offset_;
    fp["unknown_logit"] = unknown_logit_;
    fp["unmatched_logit"] = unmatched_logit_;
    std::ostringstream os;
    os << "planted-vqa:" << std::hex << fnv1a64(fp.dump());
    fingerprint_ = os.str();
}

AnswerLogits PlantedAnswerModel::logits_from_features(const std::vector<double>& features,
                                                      const std::vector<std::string>& classes) const {
    if (classes.size() < 2) throw DataError("answer_logits: need at least 2 classes");
    {
        std::vector<std::string> lowered;
        lowered.reserve(classes.size());
        for (const auto& c : classes) lowered.push_back(to_lower(c));
        auto sorted = lowered;
        std::sort(sorted.begin(), sorted.end());
        if (std::adjacent_find(sorted.begin(), sorted.end()) != sorted.end()) {
            throw DataError("answer_logits: class names must be unique");
        }
    }
    if (features.size() != world_.n_classes()) {
        throw DataError("image feature count does not match planted world");
    }
    AnswerLogits out;
    out.classes = classes;
    out.logits.reserve(classes.size());
    for (const auto& cls : classes) {
        std::string key = to_lower(cls);
        if (key == "unknown") {
            out.logits.push_back(unknown_logit_);
            continue;
        }
        bool matched = false;
        for (std::size_t c = 0; c < world_.classes.size(); ++c) {
            if (to_lower(world_.classes[c]) == key) {
                out.logits.push_back(gain_ * features[c] + offset_);
                matched = true;
                break;
            }
        }
        if (!matched) out.logits.push_back(unmatched_logit_);
    }
    return out;
}

AnswerLogits PlantedAnswerModel::answer_logits(const Image& image, const std::string& /*question*/,
                                               const std::vector<std::string>& classes) const {
    return logits_from_features(image.features, classes);
}

LogitsJacobian PlantedAnswerModel::answer_logits_jacobian(
    const std::vector<double>& features, const std::string& /*question*/,
    const std::vector<std::string>& classes) const {
    LogitsJacobian out;
    out.logits = logits_from_features(features, classes);
    out.jacobian = Matrix(classes.size(), features.size(), 0.0);
    for (std::size_t i = 0; i < classes.size(); ++i) {
        std::string key = to_lower(classes[i]);
        if (key == "unknown") continue;
        for (std::size_t c = 0; c < world_.classes.size(); ++c) {
            if (to_lower(world_.classes[c]) == key) {
                out.jacobian(i, c) = gain_;
                break;
            }
        }
    }
    return out;
}

std::string PlantedAnswerModel::fingerprint() const { return fingerprint_; }

std::shared_ptr<PlantedAnswerModel> PlantedAnswerModel::from_config(const BackendConfig& cfg) {
    PlantedWorld world = load_world(cfg.params);
    return std::make_shared<PlantedAnswerModel>(
        std::move(world), cfg.params.value("gain", 1.0), cfg.params.value("offset", 0.0),
        cfg.params.value("unknown_logit", -4.0), cfg.params.value("unmatched_logit", -8.0));
}

// ---------------------------------------------------------------------------

ScriptedProposer::ScriptedProposer(std::vector<ScriptedRule> rules) : rules_(std::move(rules)) {
    for (auto& rule : rules_) {
        if (rule.classes.size() < 2) {
            throw ConfigError("scripted rule for '" + rule.bias_name + "' needs >= 2 classes");
        }
        if (rule.question.empty()) {
            throw ConfigError("scripted rule for '" + rule.bias_name + "' needs a question");
        }
        if (rule.answer_words.empty()) rule.answer_words = rule.classes;
    }
}

ProposeResult ScriptedProposer::propose(const std::string& caption) const {
    if (trim(caption).empty()) throw DataError("propose: caption must be nonempty");
    ProposeResult res;
    nlohmann::json raw = nlohmann::json::array();
    for (const auto& rule : rules_) {
        if (!rule.trigger.empty() && !contains_word(caption, rule.trigger)) continue;
        BiasProposal p;
        p.bias_name = rule.bias_name;
        p.classes = rule.classes;
        p.question = rule.question;
        p.present_in_prompt = false;
        for (const auto& w : rule.answer_words) {
            if (contains_word(caption, w)) {
                p.present_in_prompt = true;
                break;
            }
        }
        raw.push_back({{"name", p.bias_name},
                       {"classes", p.classes},
                       {"question", p.question},
                       {"present_in_prompt", p.present_in_prompt}});
        res.proposals.push_back(std::move(p));
    }
    res.raw_payload = raw.dump();
    return res;
}

bool ScriptedProposer::is_answer_in_caption(const std::string& caption,
                                            const std::string& question) const {
    if (trim(caption).empty() || trim(question).empty()) {
        throw DataError("is_answer_in_caption: caption and question must be nonempty");
    }
    for (const auto& rule : rules_) {
        if (rule.question != question) continue;
        for (const auto& w : rule.answer_words) {
            if (contains_word(caption, w)) return true;
        }
        return false;
    }
    throw ParseError("scripted proposer has no rule for question: " + question, question);
}

std::shared_ptr<ScriptedProposer> ScriptedProposer::from_config(const BackendConfig& cfg) {
    std::vector<ScriptedRule> rules;
    if (!cfg.params.contains("rules") || !cfg.params["rules"].is_array()) {
        throw ConfigError("scripted_proposer needs params.rules array");
    }
    for (const auto& r : cfg.params["rules"]) {
        ScriptedRule rule;
        rule.trigger = r.value("trigger", std::string());
        rule.bias_name = r.at("bias").get<std::string>();
        rule.classes = r.at("classes").get<std::vector<std::string>>();
        rule.question = r.at("question").get<std::string>();
        if (r.contains("answer_words")) {
            rule.answer_words = r.at("answer_words").get<std::vector<std::string>>();
        }
        rules.push_back(std::move(rule));
    }
    return std::make_shared<ScriptedProposer>(std::move(rules));
}

// ---------------------------------------------------------------------------

ScriptedYesNoScorer::ScriptedYesNoScorer(std::map<std::string, double> table, double fallback,
                                         std::vector<CaptionRule> per_caption)
    : table_(std::move(table)), fallback_(fallback), per_caption_(std::move(per_caption)) {}

namespace {
// First '...'-quoted span of the text, lowercased.
std::string quoted_candidate(const std::string& text) {
    std::size_t open = text.find('\'');
    if (open == std::string::npos) return {};
    std::size_t close = text.find('\'', open + 1);
    if (close == std::string::npos) return {};
    return to_lower(text.substr(open + 1, close - open - 1));
}
}  // namespace

double ScriptedYesNoScorer::yes_probability(const std::string& question,
                                            const Image* /*image*/) const {
    std::string candidate = quoted_candidate(question);
    const std::map<std::string, double>* table = &table_;
    for (const auto& rule : per_caption_) {
        if (question.find(rule.caption) != std::string::npos) {
            table = &rule.table;
            break;
        }
    }
    if (!candidate.empty()) {
        auto it = table->find(candidate);
        return it == table->end() ? fallback_ : it->second;
    }
    for (const auto& [word, p] : *table) {
        if (contains_word(question, word)) return p;
    }
    return fallback_;
}

std::shared_ptr<ScriptedYesNoScorer> ScriptedYesNoScorer::from_config(const BackendConfig& cfg) {
    std::map<std::string, double> table;
    if (cfg.params.contains("table")) {
        for (auto& [word, p] : cfg.params["table"].items()) {
            table[to_lower(word)] = p.get<double>();
        }
    }
    std::vector<CaptionRule> rules;
    if (cfg.params.contains("per_caption")) {
        for (const auto& r : cfg.params["per_caption"]) {
            CaptionRule rule;
            rule.caption = r.at("caption").get<std::string>();
            for (auto& [word, p] : r.at("table").items()) {
                rule.table[to_lower(word)] = p.get<double>();
            }
            rules.push_back(std::move(rule));
        }
    }
    return std::make_shared<ScriptedYesNoScorer>(std::move(table),
                                                 cfg.params.value("default", 0.0),
                                                 std::move(rules));
}

// ---------------------------------------------------------------------------

PlantedWorld load_world(const nlohmann::json& params) {
    if (!params.contains("world")) throw ConfigError("backend params need a 'world' entry");
    const auto& w = params["world"];
    if (w.is_object()) return PlantedWorld::from_json(w);
    if (w.is_string()) {
        std::ifstream in(w.get<std::string>());
        if (!in) throw ConfigError("cannot open world file: " + w.get<std::string>());
        nlohmann::json j;
        try {
            in >> j;
        } catch (const nlohmann::json::exception& e) {
            throw ConfigError("world file is not valid JSON: " + std::string(e.what()));
        }
        return PlantedWorld::from_json(j);
    }
    throw ConfigError("'world' must be an object or a file path");
}

void register_planted_backends(BackendRegistry& registry) {
    registry.register_generator("planted_generator", [](const BackendConfig& cfg) {
        return std::make_shared<PlantedGenerator>(load_world(cfg.params),
                                                  PlantedGeneratorConfig::from_params(cfg.params));
    });
    registry.register_answer_model("planted_answer", [](const BackendConfig& cfg) {
        return std::static_pointer_cast<AnswerModelBackend>(PlantedAnswerModel::from_config(cfg));
    });
    registry.register_proposer("scripted_proposer", [](const BackendConfig& cfg) {
        return std::static_pointer_cast<ProposerBackend>(ScriptedProposer::from_config(cfg));
    });
    registry.register_yes_no("scripted_yesno", [](const BackendConfig& cfg) {
        return std::static_pointer_cast<YesNoScorer>(ScriptedYesNoScorer::from_config(cfg));
    });
}

}  // namespace biasaudit
