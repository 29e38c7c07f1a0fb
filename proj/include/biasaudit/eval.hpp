#pragma once

#include <map>
#include <string>
#include <vector>

#include "biasaudit/gradbias.hpp"
#include "biasaudit/oracle.hpp"
#include "biasaudit/proposal.hpp"

namespace biasaudit {

struct TopKRow {
    double top1 = 0.0;  // percentages in [0, 100]
    double top2 = 0.0;
    double top3 = 0.0;
    std::size_t n_prompts = 0;
};

struct EvalReport {
    std::string method_name;
    std::string model_fingerprint;
    TopKRow overall;                      // micro average over prompts
    TopKRow macro;                        // unweighted mean over biases
    std::map<std::string, TopKRow> per_bias;
    std::size_t n_prompts = 0;
    std::size_t unmatched = 0;  // prediction/GT keys that failed to join

    nlohmann::json to_json() const;
    static EvalReport from_json(const nlohmann::json& j);
    void validate() const;
};

// Tie-aware top-k accuracy: a prompt is a top-k hit iff the first k ranked
// words intersect gt_words (when k exceeds the ranking length the whole
// ranking is used). Unmatched (caption_id, bias) keys are excluded and
// counted.
EvalReport topk_accuracy(const std::vector<WordInfluenceRanking>& predictions,
                         const std::vector<GroundTruth>& gts);

struct EvalDatasetRow {
    std::string caption_id;
    std::string caption;
    std::string bias_name;
    std::vector<std::string> classes;
    std::string question;

    nlohmann::json to_json() const;
    static EvalDatasetRow from_json(const nlohmann::json& j);
};

// Samples up to captions_per_bias captions from each of the top n_biases
// databases (support order), deterministic under seed. Shortfalls take every
// caption and are reported through `shortfall_log` when given.
std::vector<EvalDatasetRow> build_eval_dataset(const std::vector<BiasDatabase>& kb,
                                               std::size_t n_biases,
                                               std::size_t captions_per_bias, std::uint64_t seed,
                                               std::vector<std::string>* shortfall_log = nullptr);

// Plain-text table mirroring the per-bias/overall top-k layout.
std::string render_report_table(const EvalReport& report);

}  // namespace biasaudit
