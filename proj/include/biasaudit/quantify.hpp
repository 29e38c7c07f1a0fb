#pragma once

#include <map>
#include <string>
#include <vector>

#include "biasaudit/assessment.hpp"

namespace biasaudit {

struct BiasScore {
    std::string bias_name;
    double score = 0.0;  // in [0, 1]
    std::string majority_class;
    ClassDistribution distribution;
    std::string context;     // "free" or "aware"
    std::string caption_id;  // set in the aware context

    nlohmann::json to_json() const;
};

// Normalized-entropy bias intensity: 1 + Σ p ln p / ln |C|, natural log,
// 0·ln 0 := 0, clamped to [0,1] against floating-point drift. 0 = uniform
// (unbiased), 1 = one-hot (maximally biased). Throws NotComputableError on
// empty distributions.
double bias_intensity(const ClassDistribution& dist);

// Majority class of a distribution (argmax, lowest index on ties).
std::string majority_class(const ClassDistribution& dist);

BiasScore score_distribution(const std::string& bias_name, const ClassDistribution& dist,
                             const std::string& context, const std::string& caption_id = {});

// Descending by score, ties by bias name.
std::vector<BiasScore> rank_biases(std::vector<BiasScore> scores);

// KL(p ‖ q) with additive smoothing eps on q (then renormalized) so empirical
// zero cells are tolerated. Class lists must match.
double kl_agreement(const ClassDistribution& p, const ClassDistribution& q, double eps = 1e-9);

struct HumanAlignment {
    double ame = 0.0;                 // mean |model − user| intensity error
    double majority_agreement = 0.0;  // fraction of biases with matching majority class
    std::size_t n_biases = 0;
};

// Compares model bias scores/majorities with user-study ones over the shared
// bias keys. Throws DataError when the key sets are disjoint.
HumanAlignment human_alignment(const std::map<std::string, double>& model_scores,
                               const std::map<std::string, double>& user_scores,
                               const std::map<std::string, std::string>& model_majority,
                               const std::map<std::string, std::string>& user_majority);

}  // namespace biasaudit
