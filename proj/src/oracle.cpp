#include "biasaudit/oracle.hpp"

#include <algorithm>

namespace biasaudit {

int ExactScore::compare(const ExactScore& a, const ExactScore& b) {
    if (!a.computable() || !b.computable()) {
        throw DataError("cannot compare a not-computable influence score");
    }
    // Denominators are positive products of counted answers.
    std::int64_t lhs = a.num * b.den;
    std::int64_t rhs = b.num * a.den;
    if (lhs < rhs) return -1;
    if (lhs > rhs) return 1;
    return 0;
}

nlohmann::json GroundTruth::to_json() const {
    nlohmann::json j;
    j["caption_id"] = caption_id;
    j["bias"] = bias_name;
    j["prompt"] = prompt_text;
    j["candidates"] = candidates;
    nlohmann::json scores = nlohmann::json::array();
    for (const auto& s : influence) {
        scores.push_back({{"num", s.num}, {"den", s.den}, {"value", s.value()}});
    }
    j["influence_scores"] = scores;
    j["gt_words"] = gt_words;
    j["baseline_distribution"] = baseline_distribution.to_json();
    nlohmann::json per_word = nlohmann::json::object();
    for (const auto& [word, dist] : per_word_distributions) per_word[word] = dist.to_json();
    j["per_word_distributions"] = per_word;
    if (!not_computable.empty()) j["not_computable"] = not_computable;
    return j;
}

GroundTruth GroundTruth::from_json(const nlohmann::json& j) {
    GroundTruth gt;
    try {
        gt.caption_id = j.at("caption_id").get<std::string>();
        gt.bias_name = j.at("bias").get<std::string>();
        gt.prompt_text = j.value("prompt", std::string());
        gt.candidates = j.at("candidates").get<std::vector<std::string>>();
        for (const auto& s : j.at("influence_scores")) {
            gt.influence.push_back(
                ExactScore{s.at("num").get<std::int64_t>(), s.at("den").get<std::int64_t>()});
        }
        gt.gt_words = j.at("gt_words").get<std::vector<std::string>>();
        if (j.contains("baseline_distribution")) {
            gt.baseline_distribution = ClassDistribution::from_json(j["baseline_distribution"]);
        }
        if (j.contains("per_word_distributions")) {
            for (auto& [word, dist] : j["per_word_distributions"].items()) {
                gt.per_word_distributions[word] = ClassDistribution::from_json(dist);
            }
        }
        if (j.contains("not_computable")) {
            gt.not_computable = j["not_computable"].get<std::vector<std::string>>();
        }
    } catch (const nlohmann::json::exception& e) {
        throw DataError(std::string("malformed ground-truth record: ") + e.what());
    }
    return gt;
}

namespace {

ClassDistribution distribution_for_prompt(const std::string& prompt,
                                          const std::string& caption_id,
                                          const std::vector<std::string>& classes,
                                          const std::string& question,
                                          const GeneratorBackend& generator,
                                          const AnswerModelBackend& vqa,
                                          const OracleOptions& options) {
    std::vector<Image> images;
    images.reserve(options.n_images);
    for (std::size_t k = 0; k < options.n_images; ++k) {
        // Removal variants reuse the full prompt's derived seed sequence so
        // the word's effect is isolated from noise resampling.
        std::uint64_t seed = derive_seed(options.master_seed, caption_id, k);
        images.push_back(generator.generate(prompt, seed)->image());
    }
    return context_aware_distribution(vqa, images, question, classes);
}

// L1 distance between two count-based distributions as an exact rational:
// sum_c |a_c/n1 - b_c/n2| = sum_c |a_c*n2 - b_c*n1| / (n1*n2).
ExactScore exact_l1(const ClassDistribution& full, const ClassDistribution& variant) {
    auto n1 = static_cast<std::int64_t>(full.n_counted);
    auto n2 = static_cast<std::int64_t>(variant.n_counted);
    if (n1 == 0 || n2 == 0) return ExactScore{0, 0};
    std::int64_t num = 0;
    for (std::size_t c = 0; c < full.counts.size(); ++c) {
        std::int64_t a = static_cast<std::int64_t>(full.counts[c]);
        std::int64_t b = static_cast<std::int64_t>(variant.counts[c]);
        num += std::llabs(a * n2 - b * n1);
    }
    return ExactScore{num, n1 * n2};
}

}  // namespace

GroundTruth compute_ground_truth(const std::string& caption_id, const std::string& caption,
                                 const std::string& bias_name,
                                 const std::vector<std::string>& classes,
                                 const std::string& question, const GeneratorBackend& generator,
                                 const AnswerModelBackend& vqa, const SynonymLexicon& lexicon,
                                 const OracleOptions& options) {
    if (options.n_images < 1) throw DataError("compute_ground_truth: n_images must be >= 1");
    auto candidates = extract_candidates(caption, bias_name, classes, lexicon);
    if (candidates.empty()) {
        throw NotComputableError("no candidate words survive the exclusion rules for prompt: " +
                                 caption);
    }

    GroundTruth gt;
    gt.caption_id = caption_id;
    gt.bias_name = bias_name;
    gt.prompt_text = caption;

    gt.baseline_distribution = distribution_for_prompt(caption, caption_id, classes, question,
                                                       generator, vqa, options);
    if (gt.baseline_distribution.empty()) {
        throw NotComputableError("full-prompt distribution is empty (all answers unknown) for " +
                                 caption_id);
    }

    for (const auto& cand : candidates) {
        gt.candidates.push_back(cand.word);
        std::string reduced = remove_word(caption, cand.word);
        if (trim(reduced).empty()) {
            gt.influence.push_back(ExactScore{0, 0});
            gt.not_computable.push_back(cand.word);
            continue;
        }
        ClassDistribution dist = distribution_for_prompt(reduced, caption_id, classes, question,
                                                         generator, vqa, options);
        gt.per_word_distributions[cand.word] = dist;
        if (dist.empty()) {
            gt.influence.push_back(ExactScore{0, 0});
            gt.not_computable.push_back(cand.word);
            continue;
        }
        gt.influence.push_back(exact_l1(gt.baseline_distribution, dist));
    }

    // Exact argmax set over the computable scores.
    const ExactScore* best = nullptr;
    for (const auto& s : gt.influence) {
        if (!s.computable()) continue;
        if (!best || ExactScore::compare(s, *best) > 0) best = &s;
    }
    if (!best) {
        throw NotComputableError("no candidate of " + caption_id + " could be scored");
    }
    for (std::size_t i = 0; i < gt.candidates.size(); ++i) {
        if (gt.influence[i].computable() && ExactScore::compare(gt.influence[i], *best) == 0) {
            gt.gt_words.push_back(gt.candidates[i]);
        }
    }
    return gt;
}

}  // namespace biasaudit
