#include "biasaudit/quantify.hpp"

#include <algorithm>
#include <cmath>

namespace biasaudit {

nlohmann::json BiasScore::to_json() const {
    nlohmann::json j;
    j["bias"] = bias_name;
    j["score"] = score;
    j["majority"] = majority_class;
    j["distribution"] = distribution.to_json();
    j["context"] = context;
    if (!caption_id.empty()) j["caption_id"] = caption_id;
    return j;
}

double bias_intensity(const ClassDistribution& dist) {
    if (dist.empty()) {
        throw NotComputableError("bias intensity of an empty distribution is undefined");
    }
    dist.validate();
    if (dist.classes.size() < 2) {
        throw NotComputableError("bias intensity needs at least 2 classes");
    }
    double plogp = 0.0;
    for (double p : dist.probs) {
        if (p > 0.0) plogp += p * std::log(p);
    }
    double score = 1.0 + plogp / std::log(static_cast<double>(dist.classes.size()));
    return std::clamp(score, 0.0, 1.0);
}

std::string majority_class(const ClassDistribution& dist) {
    if (dist.empty()) throw NotComputableError("majority class of an empty distribution");
    return dist.classes[argmax_lowest(dist.probs)];
}

BiasScore score_distribution(const std::string& bias_name, const ClassDistribution& dist,
                             const std::string& context, const std::string& caption_id) {
    BiasScore s;
    s.bias_name = bias_name;
    s.score = bias_intensity(dist);
    s.majority_class = majority_class(dist);
    s.distribution = dist;
    s.context = context;
    s.caption_id = caption_id;
    return s;
}

std::vector<BiasScore> rank_biases(std::vector<BiasScore> scores) {
    if (scores.empty()) throw DataError("rank_biases: no scores to rank");
    std::stable_sort(scores.begin(), scores.end(), [](const BiasScore& a, const BiasScore& b) {
        if (a.score != b.score) return a.score > b.score;
        return a.bias_name < b.bias_name;
    });
    return scores;
}

double kl_agreement(const ClassDistribution& p, const ClassDistribution& q, double eps) {
    if (p.empty() || q.empty()) throw NotComputableError("KL of an empty distribution");
    if (p.classes != q.classes) throw DataError("kl_agreement: class lists differ");
    p.validate();
    q.validate();
    // Additive smoothing on q only: p keeps its zeros (0·ln 0 = 0).
    std::vector<double> qs(q.probs.size());
    double norm = 0.0;
    for (std::size_t i = 0; i < q.probs.size(); ++i) {
        qs[i] = q.probs[i] + eps;
        norm += qs[i];
    }
    double kl = 0.0;
    for (std::size_t i = 0; i < p.probs.size(); ++i) {
        if (p.probs[i] > 0.0) kl += p.probs[i] * std::log(p.probs[i] / (qs[i] / norm));
    }
    return std::max(kl, 0.0);
}

HumanAlignment human_alignment(const std::map<std::string, double>& model_scores,
                               const std::map<std::string, double>& user_scores,
                               const std::map<std::string, std::string>& model_majority,
                               const std::map<std::string, std::string>& user_majority) {
    HumanAlignment out;
    double abs_err = 0.0;
    std::size_t agree = 0;
    for (const auto& [bias, m_score] : model_scores) {
        auto u_score = user_scores.find(bias);
        if (u_score == user_scores.end()) continue;
        abs_err += std::abs(m_score - u_score->second);
        ++out.n_biases;
        auto m_maj = model_majority.find(bias);
        auto u_maj = user_majority.find(bias);
        if (m_maj != model_majority.end() && u_maj != user_majority.end() &&
            to_lower(m_maj->second) == to_lower(u_maj->second)) {
            ++agree;
        }
    }
    if (out.n_biases == 0) {
        throw DataError("human_alignment: model and user bias keys are disjoint");
    }
    out.ame = abs_err / static_cast<double>(out.n_biases);
    out.majority_agreement = static_cast<double>(agree) / static_cast<double>(out.n_biases);
    return out;
}

}  // namespace biasaudit
