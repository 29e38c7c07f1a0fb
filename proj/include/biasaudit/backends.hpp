#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "biasaudit/core.hpp"

namespace biasaudit {

// ---------------------------------------------------------------------------
// Domain types shared by every backend.

struct TokenSpan {
    std::size_t begin = 0;  // first token index of the word
    std::size_t end = 0;    // one past the last token index
};

// A prompt plus its token-level view. token_spans maps each word to a
// contiguous token range; special tokens (BOS/EOS/pad) belong to no word.
struct TokenizedPrompt {
    std::string text;
    std::vector<std::string> words;
    std::vector<TokenSpan> token_spans;  // aligned with words
    Matrix embeddings;                   // [n_tokens x dim]

    std::size_t n_tokens() const { return embeddings.rows(); }
};

// Opaque image handle. Synthetic backends populate `features`; remote
// backends may carry encoded bytes instead.
struct Image {
    std::string kind;              // e.g. "planted.features.v1", "png"
    std::vector<double> features;  // feature-vector images
    std::vector<std::uint8_t> blob;

    bool operator==(const Image& other) const = default;
};

struct AnswerLogits {
    std::vector<std::string> classes;
    std::vector<double> logits;

    std::size_t argmax() const { return argmax_lowest(logits); }
};

struct BiasProposal {
    std::string bias_name;
    std::vector<std::string> classes;
    std::string question;
    bool present_in_prompt = false;
    std::string source_caption_id;
};

struct ProposeResult {
    std::vector<BiasProposal> proposals;
    std::string raw_payload;  // what the model actually emitted, for audit
};

// ---------------------------------------------------------------------------
// Proposer interface (the LLM of the bias proposal stage).

class ProposerBackend {
public:
    virtual ~ProposerBackend() = default;

    // Throws BackendError on transport failure, ParseError on non-conforming
    // model output; both carry the raw payload.
    virtual ProposeResult propose(const std::string& caption) const = 0;
    virtual bool is_answer_in_caption(const std::string& caption,
                                      const std::string& question) const = 0;
};

// ---------------------------------------------------------------------------
// Generator interface.

class GenerationTrace {
public:
    virtual ~GenerationTrace() = default;

    virtual const TokenizedPrompt& prompt() const = 0;
    virtual std::uint64_t seed() const = 0;
    virtual int steps() const = 0;
    virtual const Image& image() const = 0;

    virtual bool differentiable() const = 0;

    // Feature vector of the intermediate result after denoising step `step`
    // (1-based). Throws NotDifferentiableError when the backend does not
    // expose its internals.
    virtual std::vector<double> step_features(int step) const = 0;

    // Same, evaluated at alternative token embeddings. This is the hook
    // finite-difference sensitivity checks drive.
    virtual std::vector<double> step_features_at(int step, const Matrix& embeddings) const = 0;

    // Pulls d(loss)/d(features at `step`) back to per-token embedding
    // gradients, [n_tokens x dim].
    virtual Matrix backprop_to_embeddings(int step,
                                          const std::vector<double>& dloss_dfeatures) const = 0;
};

class GeneratorBackend {
public:
    virtual ~GeneratorBackend() = default;

    // Image is a pure function of (prompt, seed, config).
    virtual std::unique_ptr<GenerationTrace> generate(const std::string& prompt,
                                                      std::uint64_t seed) const = 0;
    virtual bool differentiable() const = 0;
    // Identifies the backend configuration for cache validity.
    virtual std::string fingerprint() const = 0;
};

// ---------------------------------------------------------------------------
// Answer-model interface (the VQA of the assessment stage).

struct LogitsJacobian {
    AnswerLogits logits;
    // d(logits[c]) / d(features[j]), row-major [n_classes x n_features].
    Matrix jacobian;
};

class AnswerModelBackend {
public:
    virtual ~AnswerModelBackend() = default;

    virtual AnswerLogits answer_logits(const Image& image, const std::string& question,
                                       const std::vector<std::string>& classes) const = 0;

    virtual bool differentiable() const { return false; }

    // Logits plus jacobian w.r.t. a raw feature vector; only differentiable
    // answer models implement this.
    virtual LogitsJacobian answer_logits_jacobian(const std::vector<double>& features,
                                                  const std::string& question,
                                                  const std::vector<std::string>& classes) const;

    virtual std::string fingerprint() const = 0;
};

// ---------------------------------------------------------------------------
// Yes/no scorer used by the answer-ranking baselines. Probability of the
// affirmative answer, normalized over {yes, no} mass only.

class YesNoScorer {
public:
    virtual ~YesNoScorer() = default;
    virtual double yes_probability(const std::string& question,
                                   const Image* image = nullptr) const = 0;
};

// ---------------------------------------------------------------------------
// Backend configuration and registry.

struct BackendConfig {
    std::string name;  // registry key from the run config
    std::string kind;
    std::string endpoint;
    std::string model_id;
    std::string seed_policy = "derived";
    bool differentiable = false;
    nlohmann::json params = nlohmann::json::object();

    std::string fingerprint() const;

    static BackendConfig from_json(const std::string& name, const nlohmann::json& block);
    nlohmann::json to_json() const;
};

class BackendRegistry {
public:
    using ProposerFactory = std::function<std::shared_ptr<ProposerBackend>(const BackendConfig&)>;
    using GeneratorFactory = std::function<std::shared_ptr<GeneratorBackend>(const BackendConfig&)>;
    using AnswerFactory = std::function<std::shared_ptr<AnswerModelBackend>(const BackendConfig&)>;
    using YesNoFactory = std::function<std::shared_ptr<YesNoScorer>(const BackendConfig&)>;

    void register_proposer(const std::string& kind, ProposerFactory f);
    void register_generator(const std::string& kind, GeneratorFactory f);
    void register_answer_model(const std::string& kind, AnswerFactory f);
    void register_yes_no(const std::string& kind, YesNoFactory f);

    std::shared_ptr<ProposerBackend> create_proposer(const BackendConfig& cfg) const;
    std::shared_ptr<GeneratorBackend> create_generator(const BackendConfig& cfg) const;
    std::shared_ptr<AnswerModelBackend> create_answer_model(const BackendConfig& cfg) const;
    std::shared_ptr<YesNoScorer> create_yes_no(const BackendConfig& cfg) const;

    std::vector<std::string> kinds() const;

    // Registry with all in-tree backends registered.
    static BackendRegistry with_builtins();

private:
    std::map<std::string, ProposerFactory> proposers_;
    std::map<std::string, GeneratorFactory> generators_;
    std::map<std::string, AnswerFactory> answer_models_;
    std::map<std::string, YesNoFactory> yes_no_;
};

}  // namespace biasaudit
