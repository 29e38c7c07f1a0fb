#pragma once

#include <string>
#include <vector>

#include "biasaudit/backends.hpp"
#include "biasaudit/proposal.hpp"

namespace biasaudit {

// A candidate word of a prompt: lowercased, punctuation-stripped, unique,
// with the position of its first occurrence.
struct CandidateWord {
    std::string word;
    std::size_t position = 0;  // word index of the first occurrence
};

// Words of the prompt surviving the exclusion rules: stop-words, words of the
// bias name, class names, and lexicon synonyms of any of those are removed.
std::vector<CandidateWord> extract_candidates(const std::string& prompt,
                                              const std::string& bias_name,
                                              const std::vector<std::string>& classes,
                                              const SynonymLexicon& lexicon);

bool is_bias_descriptive(const std::string& word, const std::string& bias_name,
                         const std::vector<std::string>& classes, const SynonymLexicon& lexicon);

struct WordInfluenceRanking {
    std::string caption_id;
    std::string bias_name;
    std::string prompt_text;
    std::vector<std::string> candidates;  // prompt order
    std::vector<double> scores;           // aligned with candidates, nonnegative
    std::vector<std::string> ranking;     // candidates sorted by score desc,
                                          // ties by earliest position
    nlohmann::json metadata = nlohmann::json::object();

    nlohmann::json to_json() const;
    static WordInfluenceRanking from_json(const nlohmann::json& j);
};

struct GradBiasOptions {
    std::size_t n_images = 10;
    int step_interval = 1;
    std::uint64_t master_seed = 0;
    std::string reduction = "l1";      // gradient vector -> scalar: "l1" or "l2"
    std::string aggregation = "mean";  // token -> word: "mean" or "sum"
    double loss_scale = 1.0;           // scales the loss; for sensitivity checks
    // Gradient evaluation is memory-heavy on real backends; image-level jobs
    // run in a pool capped at this size. Results are identical at any cap.
    int concurrency = 1;
};

// Cross-entropy loss of the answer-model logits on the trace's final image
// against the predicted class (the argmax is both the bias attribute and the
// content of the image). Returns (loss, target index).
std::pair<double, std::size_t> gradbias_loss(const GenerationTrace& trace,
                                             const AnswerModelBackend& vqa,
                                             const std::string& question,
                                             const std::vector<std::string>& classes);

// Denoising steps evaluated for a given interval: every step s with
// s % interval == 0 (1-based); when the interval exceeds the step count only
// the final step is used.
std::vector<int> steps_for_interval(int total_steps, int interval);

// Per-token influence scalars: at each evaluated step, the gradient of the
// loss w.r.t. each token embedding is reduced to a scalar (L1 by default) and
// scalars are averaged across steps.
std::vector<double> token_gradients(const GenerationTrace& trace, const AnswerModelBackend& vqa,
                                    const std::string& question,
                                    const std::vector<std::string>& classes, std::size_t target,
                                    const GradBiasOptions& options);

// Full word-influence attribution for one (prompt, bias) pair: n_images
// seeded generations, per-token scores, token->word aggregation, per-image
// averaging, exclusions, ranking.
WordInfluenceRanking word_influence(const std::string& caption_id, const std::string& prompt,
                                    const std::string& bias_name,
                                    const std::vector<std::string>& classes,
                                    const std::string& question,
                                    const GeneratorBackend& generator,
                                    const AnswerModelBackend& vqa, const SynonymLexicon& lexicon,
                                    const GradBiasOptions& options);

}  // namespace biasaudit
