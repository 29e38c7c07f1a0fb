#pragma once

#include <map>
#include <memory>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "biasaudit/backends.hpp"

namespace biasaudit {

// ---------------------------------------------------------------------------
// Planted world: a synthetic generator/answer-model pair with known per-word
// class influence, used as the desk-scale ground-truth substrate.
//
// Tokenization: one-hot embeddings over the vocabulary (plus a zero OOV
// embedding); long words split into two sub-tokens sharing the same base
// embedding; a BOS and an EOS token with zero embeddings are attached and
// assigned to no word.
//
// Feature map at denoising step s of S (t = (s-1)/(S-1)):
//   alpha(s) = exp(-signal_decay * t),  beta(s) = 1 - alpha(s)
//   agg      = (1/norm) * Σ over word tokens of (e_i ⊙ e_i)   ("squared" map)
//              or of e_i                                       ("linear" map)
//   f_s[c]   = alpha*Σ_v W[v][c]*agg[v] + beta*Σ_v D[v][c]*agg[v]
//              + base[c] + noise_scale*eta(seed)[c]
// The normalizer is a fixed constant, not the token count, so removing a word
// whose embedding or weights are zero leaves the features bit-identical. The
// final image always carries the pure signal features (alpha=1, beta=0):
// intermediate gradient paths may be decayed/decoyed, the delivered image is
// not. With signal_decay=0 every stage is identical to the final image.

struct PlantedWorld {
    std::vector<std::string> classes;
    std::vector<std::string> vocabulary;
    // word -> per-class weight vector; absent words weigh zero.
    std::map<std::string, std::vector<double>> word_weights;
    std::map<std::string, std::vector<double>> decoy_weights;
    std::vector<double> base_logit;
    double noise_scale = 0.0;

    static PlantedWorld from_json(const nlohmann::json& j);
    nlohmann::json to_json() const;

    std::size_t n_classes() const { return classes.size(); }
    // Index of a vocabulary word (case-insensitive), or nullopt for OOV.
    std::optional<std::size_t> vocab_index(const std::string& word) const;
    void validate() const;
};

struct PlantedGeneratorConfig {
    int steps = 10;
    double signal_decay = 0.0;
    std::string feature_map = "squared";  // or "linear"
    double norm = 10.0;                   // fixed aggregation normalizer
    std::size_t subtoken_min_len = 8;     // words at least this long get 2 sub-tokens

    static PlantedGeneratorConfig from_params(const nlohmann::json& params);
};

// Deterministic whitespace tokenizer over the planted vocabulary.
TokenizedPrompt tokenize_planted(const PlantedWorld& world, const PlantedGeneratorConfig& cfg,
                                 const std::string& text);

class PlantedGenerator : public GeneratorBackend {
public:
    PlantedGenerator(PlantedWorld world, PlantedGeneratorConfig cfg);

    std::unique_ptr<GenerationTrace> generate(const std::string& prompt,
                                              std::uint64_t seed) const override;
    bool differentiable() const override { return true; }
    std::string fingerprint() const override;

    const PlantedWorld& world() const { return world_; }
    const PlantedGeneratorConfig& config() const { return cfg_; }

private:
    PlantedWorld world_;
    PlantedGeneratorConfig cfg_;
    std::string fingerprint_;
};

// Affine-on-features answer model: logit(class) = gain * f[class] + offset
// for classes present in the world, `unknown_logit` for the "unknown"
// sentinel, `unmatched_logit` otherwise. The question is ignored; logits
// depend only on image features.
class PlantedAnswerModel : public AnswerModelBackend {
public:
    PlantedAnswerModel(PlantedWorld world, double gain, double offset, double unknown_logit,
                       double unmatched_logit);

    AnswerLogits answer_logits(const Image& image, const std::string& question,
                               const std::vector<std::string>& classes) const override;
    bool differentiable() const override { return true; }
    LogitsJacobian answer_logits_jacobian(const std::vector<double>& features,
                                          const std::string& question,
                                          const std::vector<std::string>& classes) const override;
    std::string fingerprint() const override;

    static std::shared_ptr<PlantedAnswerModel> from_config(const BackendConfig& cfg);

private:
    AnswerLogits logits_from_features(const std::vector<double>& features,
                                      const std::vector<std::string>& classes) const;

    PlantedWorld world_;
    double gain_;
    double offset_;
    double unknown_logit_;
    double unmatched_logit_;
    std::string fingerprint_;
};

// ---------------------------------------------------------------------------
// Scripted proposer: a fixed rule table standing in for the LLM.

struct ScriptedRule {
    std::string trigger;  // whole-word trigger; empty = fires on every caption
    std::string bias_name;
    std::vector<std::string> classes;
    std::string question;
    // Words whose presence in the caption means "the answer is stated".
    // Defaults to the class names.
    std::vector<std::string> answer_words;
};

class ScriptedProposer : public ProposerBackend {
public:
    explicit ScriptedProposer(std::vector<ScriptedRule> rules);

    ProposeResult propose(const std::string& caption) const override;
    bool is_answer_in_caption(const std::string& caption,
                              const std::string& question) const override;

    static std::shared_ptr<ScriptedProposer> from_config(const BackendConfig& cfg);

private:
    std::vector<ScriptedRule> rules_;
};

// Scripted yes/no scorer for the answer-ranking baselines. The templates
// quote the candidate in single quotes, so the scorer reads the candidate
// from the first '...' span; when no quoted span exists it falls back to a
// whole-word scan. Per-caption tables (matched by caption substring) take
// precedence over the global table.
class ScriptedYesNoScorer : public YesNoScorer {
public:
    struct CaptionRule {
        std::string caption;  // matched as a substring of the question
        std::map<std::string, double> table;
    };

    ScriptedYesNoScorer(std::map<std::string, double> table, double fallback,
                        std::vector<CaptionRule> per_caption = {});

    double yes_probability(const std::string& question, const Image* image) const override;

    static std::shared_ptr<ScriptedYesNoScorer> from_config(const BackendConfig& cfg);

private:
    std::map<std::string, double> table_;  // lowercased word -> p(yes)
    double fallback_;
    std::vector<CaptionRule> per_caption_;
};

// Loads a planted world from backend params: either an inline "world" object
// or a "world" string path to a JSON file.
PlantedWorld load_world(const nlohmann::json& params);

void register_planted_backends(BackendRegistry& registry);

}  // namespace biasaudit
