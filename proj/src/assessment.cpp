#include "biasaudit/assessment.hpp"

#include <algorithm>
#include <cmath>

namespace biasaudit {

void ClassDistribution::validate() const {
    if (n_counted > n_total) throw DataError("distribution has n_counted > n_total");
    if (empty()) {
        if (!probs.empty()) throw DataError("empty distribution must carry no probabilities");
        return;
    }
    if (probs.size() != classes.size()) {
        throw DataError("distribution probs must align with classes");
    }
    double sum = 0.0;
    for (double p : probs) {
        if (p < 0.0) throw DataError("distribution has a negative probability");
        sum += p;
    }
    if (std::abs(sum - 1.0) > 1e-9) throw DataError("distribution does not sum to 1");
}

nlohmann::json ClassDistribution::to_json() const {
    nlohmann::json j;
    j["classes"] = classes;
    j["probs"] = probs;
    if (!counts.empty()) j["counts"] = counts;
    j["n_counted"] = n_counted;
    j["n_total"] = n_total;
    return j;
}

ClassDistribution ClassDistribution::from_json(const nlohmann::json& j) {
    ClassDistribution d;
    try {
        d.classes = j.at("classes").get<std::vector<std::string>>();
        d.probs = j.at("probs").get<std::vector<double>>();
        if (j.contains("counts")) d.counts = j["counts"].get<std::vector<std::size_t>>();
        d.n_counted = j.at("n_counted").get<std::size_t>();
        d.n_total = j.at("n_total").get<std::size_t>();
    } catch (const nlohmann::json::exception& e) {
        throw DataError(std::string("malformed distribution record: ") + e.what());
    }
    return d;
}

namespace {

void check_classes(const std::vector<std::string>& classes) {
    if (classes.empty()) throw DataError("class list must be nonempty");
    std::vector<std::string> lowered;
    lowered.reserve(classes.size());
    for (const auto& c : classes) {
        std::string l = to_lower(trim(c));
        if (l.empty()) throw DataError("class names must be nonempty");
        if (l == "unknown") throw DataError("'unknown' is reserved for the sentinel answer");
        lowered.push_back(std::move(l));
    }
    std::sort(lowered.begin(), lowered.end());
    if (std::adjacent_find(lowered.begin(), lowered.end()) != lowered.end()) {
        throw DataError("class names must be unique");
    }
}

}  // namespace

std::optional<std::size_t> predict_class(const AnswerModelBackend& vqa, const Image& image,
                                         const std::string& question,
                                         const std::vector<std::string>& classes) {
    check_classes(classes);
    std::vector<std::string> extended = classes;
    extended.push_back("unknown");
    AnswerLogits logits = vqa.answer_logits(image, question, extended);
    if (logits.logits.size() != extended.size()) {
        throw ParseError("answer model returned a misaligned logits vector");
    }
    std::size_t best = argmax_lowest(logits.logits);
    if (best == classes.size()) return std::nullopt;  // "unknown" sentinel
    return best;
}

ClassDistribution context_aware_distribution(const AnswerModelBackend& vqa,
                                             const std::vector<Image>& images,
                                             const std::string& question,
                                             const std::vector<std::string>& classes) {
    check_classes(classes);
    ClassDistribution dist;
    dist.classes = classes;
    dist.counts.assign(classes.size(), 0);
    dist.n_total = images.size();
    for (const auto& img : images) {
        if (auto c = predict_class(vqa, img, question, classes)) {
            ++dist.counts[*c];
            ++dist.n_counted;
        }
    }
    if (dist.n_counted == 0) {
        dist.probs.clear();
        return dist;  // distinguished empty state
    }
    dist.probs.resize(classes.size());
    for (std::size_t c = 0; c < classes.size(); ++c) {
        dist.probs[c] =
            static_cast<double>(dist.counts[c]) / static_cast<double>(dist.n_counted);
    }
    return dist;
}

ClassDistribution context_aware_distribution(const AnswerModelBackend& vqa, const ImageSet& set,
                                             const std::filesystem::path& images_root,
                                             const std::string& question,
                                             const std::vector<std::string>& classes) {
    if (!set.complete) throw DataError("image set for caption " + set.caption_id +
                                       " is incomplete and cannot be assessed");
    std::vector<Image> images;
    images.reserve(set.image_paths.size());
    for (const auto& rel : set.image_paths) images.push_back(load_image(images_root / rel));
    return context_aware_distribution(vqa, images, question, classes);
}

ClassDistribution context_free_distribution(const std::vector<ClassDistribution>& per_caption) {
    ClassDistribution out;
    std::size_t contributing = 0;
    for (const auto& d : per_caption) {
        out.n_total += d.n_total;
        if (d.empty()) continue;
        d.validate();
        if (contributing == 0) {
            out.classes = d.classes;
            out.probs.assign(d.classes.size(), 0.0);
        } else if (d.classes != out.classes) {
            throw DataError("context_free_distribution: class lists differ across captions");
        }
        for (std::size_t c = 0; c < d.probs.size(); ++c) out.probs[c] += d.probs[c];
        out.n_counted += d.n_counted;
        ++contributing;
    }
    if (contributing == 0) {
        out.probs.clear();
        out.n_counted = 0;
        return out;
    }
    for (auto& p : out.probs) p /= static_cast<double>(contributing);
    return out;
}

}  // namespace biasaudit
