// Independent brute-force verification of leave-one-word-out ground truths.
// This translation unit deliberately reimplements prediction counting and the
// L1 influence score from the backend interfaces up, sharing no scoring code
// with oracle.cpp or assessment.cpp, so the two paths can cross-check each
// other exactly.

#include <algorithm>
#include <cstdlib>
#include <sstream>

#include "biasaudit/oracle.hpp"

namespace biasaudit {

namespace {

struct RawCounts {
    std::vector<std::int64_t> per_class;
    std::int64_t counted = 0;
};

RawCounts count_predictions(const std::string& prompt, const std::string& caption_id,
                            const std::vector<std::string>& classes, const std::string& question,
                            const GeneratorBackend& generator, const AnswerModelBackend& vqa,
                            const OracleOptions& options) {
    RawCounts counts;
    counts.per_class.assign(classes.size(), 0);
    std::vector<std::string> with_unknown = classes;
    with_unknown.push_back("unknown");
    for (std::size_t k = 0; k < options.n_images; ++k) {
        std::uint64_t seed = derive_seed(options.master_seed, caption_id, k);
        auto trace = generator.generate(prompt, seed);
        AnswerLogits logits = vqa.answer_logits(trace->image(), question, with_unknown);
        std::size_t best = 0;
        for (std::size_t i = 1; i < logits.logits.size(); ++i) {
            if (logits.logits[i] > logits.logits[best]) best = i;
        }
        if (best < classes.size()) {
            ++counts.per_class[best];
            ++counts.counted;
        }
    }
    return counts;
}

}  // namespace

std::string BruteForceReport::summary() const {
    if (ok) return "brute-force check: ok";
    std::ostringstream os;
    os << "brute-force check found " << diffs.size() << " mismatch(es):";
    for (const auto& d : diffs) os << "\n  - " << d;
    return os.str();
}

BruteForceReport brute_force_check(const GroundTruth& gt, const std::string& caption,
                                   const std::vector<std::string>& classes,
                                   const std::string& question,
                                   const GeneratorBackend& generator,
                                   const AnswerModelBackend& vqa, const SynonymLexicon& lexicon,
                                   const OracleOptions& options) {
    BruteForceReport report;
    auto fail = [&report](const std::string& msg) {
        report.ok = false;
        report.diffs.push_back(msg);
    };

    auto candidates = extract_candidates(caption, gt.bias_name, classes, lexicon);
    if (candidates.size() > 8) {
        throw DataError("brute_force_check is desk-scale: at most 8 candidate words");
    }
    if (candidates.size() != gt.candidates.size()) {
        fail("candidate count differs: expected " + std::to_string(candidates.size()) + ", got " +
             std::to_string(gt.candidates.size()));
        return report;
    }
    for (std::size_t i = 0; i < candidates.size(); ++i) {
        if (candidates[i].word != gt.candidates[i]) {
            fail("candidate " + std::to_string(i) + " differs: expected '" + candidates[i].word +
                 "', got '" + gt.candidates[i] + "'");
            return report;
        }
    }

    RawCounts full = count_predictions(caption, gt.caption_id, classes, question, generator, vqa,
                                       options);
    if (full.counted == 0) {
        fail("full prompt yields no counted answers");
        return report;
    }
    if (static_cast<std::size_t>(full.counted) != gt.baseline_distribution.n_counted) {
        fail("baseline n_counted differs: expected " + std::to_string(full.counted) + ", got " +
             std::to_string(gt.baseline_distribution.n_counted));
    }

    // Scores as exact rationals over a common comparison: numerators scaled
    // by the variant denominators, compared by cross multiplication.
    std::vector<std::int64_t> nums(candidates.size(), 0);
    std::vector<std::int64_t> dens(candidates.size(), 0);
    for (std::size_t i = 0; i < candidates.size(); ++i) {
        std::string reduced = caption;
        {
            // Word removal, re-done locally: drop matching tokens, single spaces.
            std::string needle = candidates[i].word;
            std::string rebuilt;
            for (const auto& tok : split_words(caption)) {
                if (to_lower(strip_punct(tok)) == needle) continue;
                if (!rebuilt.empty()) rebuilt += ' ';
                rebuilt += tok;
            }
            reduced = rebuilt;
        }
        if (trim(reduced).empty()) continue;
        RawCounts variant = count_predictions(reduced, gt.caption_id, classes, question,
                                              generator, vqa, options);
        if (variant.counted == 0) continue;
        std::int64_t num = 0;
        for (std::size_t c = 0; c < classes.size(); ++c) {
            num += std::llabs(full.per_class[c] * variant.counted -
                              variant.per_class[c] * full.counted);
        }
        nums[i] = num;
        dens[i] = full.counted * variant.counted;
    }

    for (std::size_t i = 0; i < candidates.size(); ++i) {
        const ExactScore& got = gt.influence[i];
        if (dens[i] == 0) {
            if (got.computable()) {
                fail("word '" + candidates[i].word +
                     "': expected not-computable, got num/den = " + std::to_string(got.num) +
                     "/" + std::to_string(got.den));
            }
            continue;
        }
        if (!got.computable()) {
            fail("word '" + candidates[i].word + "': expected a computable score");
            continue;
        }
        // Cross-multiplied exact equality.
        if (nums[i] * got.den != got.num * dens[i]) {
            fail("word '" + candidates[i].word + "': score differs, expected " +
                 std::to_string(nums[i]) + "/" + std::to_string(dens[i]) + ", got " +
                 std::to_string(got.num) + "/" + std::to_string(got.den));
        }
    }

    // Independent argmax set.
    std::vector<std::string> expected_gt;
    std::size_t best_idx = candidates.size();
    for (std::size_t i = 0; i < candidates.size(); ++i) {
        if (dens[i] == 0) continue;
        if (best_idx == candidates.size() ||
            nums[i] * dens[best_idx] > nums[best_idx] * dens[i]) {
            best_idx = i;
        }
    }
    if (best_idx < candidates.size()) {
        for (std::size_t i = 0; i < candidates.size(); ++i) {
            if (dens[i] == 0) continue;
            if (nums[i] * dens[best_idx] == nums[best_idx] * dens[i]) {
                expected_gt.push_back(candidates[i].word);
            }
        }
    }
    if (expected_gt != gt.gt_words) {
        std::ostringstream os;
        os << "gt_words differ: expected {";
        for (const auto& w : expected_gt) os << w << " ";
        os << "}, got {";
        for (const auto& w : gt.gt_words) os << w << " ";
        os << "}";
        fail(os.str());
    }
    return report;
}

}  // namespace biasaudit
