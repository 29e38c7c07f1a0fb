#pragma once

#include <optional>
#include <string>
#include <vector>

#include "biasaudit/backends.hpp"
#include "biasaudit/generation.hpp"

namespace biasaudit {

// Probability vector over the bias classes. "unknown" answers are excluded
// via denominator reduction: probs[c] = count[c] / n_counted. n_counted == 0
// is the distinguished empty state (probs empty, never zero-filled).
struct ClassDistribution {
    std::vector<std::string> classes;
    std::vector<double> probs;
    std::vector<std::size_t> counts;  // raw per-class counts when built from answers
    std::size_t n_counted = 0;
    std::size_t n_total = 0;

    bool empty() const { return n_counted == 0; }
    void validate() const;

    nlohmann::json to_json() const;
    static ClassDistribution from_json(const nlohmann::json& j);
};

// Queries the answer model over classes ∪ {"unknown"} and returns the argmax
// class index, or nullopt when "unknown" wins. Ties break to the lowest
// index. Classes must be unique, nonempty and not contain "unknown".
std::optional<std::size_t> predict_class(const AnswerModelBackend& vqa, const Image& image,
                                         const std::string& question,
                                         const std::vector<std::string>& classes);

// Per-caption distribution from an in-memory image list.
ClassDistribution context_aware_distribution(const AnswerModelBackend& vqa,
                                             const std::vector<Image>& images,
                                             const std::string& question,
                                             const std::vector<std::string>& classes);

// Per-caption distribution for a persisted image set.
ClassDistribution context_aware_distribution(const AnswerModelBackend& vqa, const ImageSet& set,
                                             const std::filesystem::path& images_root,
                                             const std::string& question,
                                             const std::vector<std::string>& classes);

// Unweighted mean of the non-empty per-caption distributions (all captions
// weigh equally regardless of how many counted answers each contributed).
ClassDistribution context_free_distribution(const std::vector<ClassDistribution>& per_caption);

}  // namespace biasaudit
