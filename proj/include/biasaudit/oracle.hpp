#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "biasaudit/assessment.hpp"
#include "biasaudit/gradbias.hpp"

namespace biasaudit {

// Exact rational influence score. With n_counted <= N the distributions are
// rationals, so ties are detected by integer arithmetic, not tolerance.
// den == 0 marks a variant that could not be scored (empty distribution).
struct ExactScore {
    std::int64_t num = 0;
    std::int64_t den = 0;

    bool computable() const { return den != 0; }
    double value() const { return den == 0 ? 0.0 : static_cast<double>(num) / den; }

    // Exact comparison via cross-multiplication.
    static int compare(const ExactScore& a, const ExactScore& b);
};

// Leave-one-word-out ground truth for one (caption, bias) pair.
struct GroundTruth {
    std::string caption_id;
    std::string bias_name;
    std::string prompt_text;
    std::vector<std::string> candidates;  // after exclusions, prompt order
    std::vector<ExactScore> influence;    // aligned with candidates
    std::vector<std::string> gt_words;    // every candidate at the exact max
    ClassDistribution baseline_distribution;
    std::map<std::string, ClassDistribution> per_word_distributions;
    std::vector<std::string> not_computable;  // variants with empty distributions

    nlohmann::json to_json() const;
    static GroundTruth from_json(const nlohmann::json& j);
};

struct OracleOptions {
    std::size_t n_images = 10;
    std::uint64_t master_seed = 0;
};

// Generates n_images images for the full prompt, then for every candidate
// regenerates with that word removed (same derived seed sequence) and scores
// the word by the per-class L1 distance between the two distributions,
// unknowns excluded. gt_words is the exact argmax set.
GroundTruth compute_ground_truth(const std::string& caption_id, const std::string& caption,
                                 const std::string& bias_name,
                                 const std::vector<std::string>& classes,
                                 const std::string& question, const GeneratorBackend& generator,
                                 const AnswerModelBackend& vqa, const SynonymLexicon& lexicon,
                                 const OracleOptions& options);

// Outcome of the independent re-computation. Mismatches name the word and
// both values.
struct BruteForceReport {
    bool ok = true;
    std::vector<std::string> diffs;

    std::string summary() const;
};

// Recomputes every distribution and score through a separate minimal code
// path (no shared scoring code with compute_ground_truth) and confirms exact
// agreement. Desk-scale: prompts up to 8 candidates.
BruteForceReport brute_force_check(const GroundTruth& gt, const std::string& caption,
                                   const std::vector<std::string>& classes,
                                   const std::string& question,
                                   const GeneratorBackend& generator,
                                   const AnswerModelBackend& vqa, const SynonymLexicon& lexicon,
                                   const OracleOptions& options);

}  // namespace biasaudit
