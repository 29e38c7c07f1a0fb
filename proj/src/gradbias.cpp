#include "biasaudit/gradbias.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>

namespace biasaudit {

bool is_bias_descriptive(const std::string& word, const std::string& bias_name,
                         const std::vector<std::string>& classes, const SynonymLexicon& lexicon) {
    std::string w = to_lower(strip_punct(word));
    if (w.empty()) return false;
    std::vector<std::string> descriptors;
    for (const auto& part : split_words(bias_name)) descriptors.push_back(strip_punct(part));
    for (const auto& cls : classes) {
        for (const auto& part : split_words(cls)) descriptors.push_back(strip_punct(part));
    }
    std::vector<std::string> expanded = descriptors;
    for (const auto& d : descriptors) {
        for (const auto& syn : lexicon.synonyms(d)) expanded.push_back(syn);
    }
    for (const auto& d : expanded) {
        if (to_lower(d) == w) return true;
    }
    return false;
}

std::vector<CandidateWord> extract_candidates(const std::string& prompt,
                                              const std::string& bias_name,
                                              const std::vector<std::string>& classes,
                                              const SynonymLexicon& lexicon) {
    std::vector<CandidateWord> out;
    std::size_t position = 0;
    for (const auto& raw : split_words(prompt)) {
        std::string word = to_lower(strip_punct(raw));
        std::size_t pos = position++;
        if (word.empty()) continue;
        if (is_stopword(word)) continue;
        if (is_bias_descriptive(word, bias_name, classes, lexicon)) continue;
        bool seen = std::any_of(out.begin(), out.end(),
                                [&](const CandidateWord& c) { return c.word == word; });
        if (!seen) out.push_back(CandidateWord{word, pos});
    }
    return out;
}

nlohmann::json WordInfluenceRanking::to_json() const {
    nlohmann::json j;
    j["caption_id"] = caption_id;
    j["bias"] = bias_name;
    j["prompt"] = prompt_text;
    j["candidates"] = candidates;
    j["scores"] = scores;
    j["ranking"] = ranking;
    j["metadata"] = metadata;
    return j;
}

WordInfluenceRanking WordInfluenceRanking::from_json(const nlohmann::json& j) {
    WordInfluenceRanking r;
    try {
        r.caption_id = j.at("caption_id").get<std::string>();
        r.bias_name = j.at("bias").get<std::string>();
        r.prompt_text = j.value("prompt", std::string());
        r.candidates = j.at("candidates").get<std::vector<std::string>>();
        r.scores = j.at("scores").get<std::vector<double>>();
        r.ranking = j.at("ranking").get<std::vector<std::string>>();
        if (j.contains("metadata")) r.metadata = j["metadata"];
    } catch (const nlohmann::json::exception& e) {
        throw DataError(std::string("malformed ranking record: ") + e.what());
    }
    return r;
}

std::pair<double, std::size_t> gradbias_loss(const GenerationTrace& trace,
                                             const AnswerModelBackend& vqa,
                                             const std::string& question,
                                             const std::vector<std::string>& classes) {
    if (classes.empty()) throw DataError("gradbias_loss: class list must be nonempty");
    AnswerLogits logits = vqa.answer_logits(trace.image(), question, classes);
    std::size_t target = logits.argmax();
    double loss = log_sum_exp(logits.logits) - logits.logits[target];
    return {loss, target};
}

std::vector<int> steps_for_interval(int total_steps, int interval) {
    if (interval < 1) throw DataError("step_interval must be >= 1");
    std::vector<int> steps;
    for (int s = 1; s <= total_steps; ++s) {
        if (s % interval == 0) steps.push_back(s);
    }
    if (steps.empty()) steps.push_back(total_steps);  // interval beyond the schedule
    return steps;
}

namespace {

double reduce_gradient_row(const Matrix& grads, std::size_t row, const std::string& reduction) {
    double acc = 0.0;
    for (std::size_t c = 0; c < grads.cols(); ++c) {
        double g = grads(row, c);
        acc += reduction == "l2" ? g * g : std::abs(g);
    }
    return reduction == "l2" ? std::sqrt(acc) : acc;
}

}  // namespace

std::vector<double> token_gradients(const GenerationTrace& trace, const AnswerModelBackend& vqa,
                                    const std::string& question,
                                    const std::vector<std::string>& classes, std::size_t target,
                                    const GradBiasOptions& options) {
    if (!trace.differentiable()) {
        throw NotDifferentiableError("token gradients need a differentiable generator");
    }
    if (!vqa.differentiable()) {
        throw NotDifferentiableError("token gradients need a differentiable answer model");
    }
    if (options.reduction != "l1" && options.reduction != "l2") {
        throw ConfigError("gradient reduction must be 'l1' or 'l2'");
    }
    std::vector<int> steps = steps_for_interval(trace.steps(), options.step_interval);
    std::size_t n_tokens = trace.prompt().n_tokens();
    std::vector<double> scalars(n_tokens, 0.0);

    for (int step : steps) {
        std::vector<double> features = trace.step_features(step);
        LogitsJacobian lj = vqa.answer_logits_jacobian(features, question, classes);
        if (target >= lj.logits.logits.size()) {
            throw DataError("gradbias target index outside the class list");
        }
        // dL/dz = softmax(z) - 1_target, scaled by loss_scale.
        std::vector<double> dz = softmax(lj.logits.logits);
        dz[target] -= 1.0;
        for (auto& v : dz) v *= options.loss_scale;
        // dL/df = J^T dz.
        std::vector<double> df(features.size(), 0.0);
        for (std::size_t c = 0; c < dz.size(); ++c) {
            for (std::size_t f = 0; f < features.size(); ++f) {
                df[f] += lj.jacobian(c, f) * dz[c];
            }
        }
        Matrix grads = trace.backprop_to_embeddings(step, df);
        if (grads.rows() != n_tokens) {
            throw DataError("backend returned gradients for the wrong token count");
        }
        for (std::size_t t = 0; t < n_tokens; ++t) {
            scalars[t] += reduce_gradient_row(grads, t, options.reduction);
        }
    }
    for (auto& s : scalars) s /= static_cast<double>(steps.size());
    return scalars;
}

WordInfluenceRanking word_influence(const std::string& caption_id, const std::string& prompt,
                                    const std::string& bias_name,
                                    const std::vector<std::string>& classes,
                                    const std::string& question,
                                    const GeneratorBackend& generator,
                                    const AnswerModelBackend& vqa, const SynonymLexicon& lexicon,
                                    const GradBiasOptions& options) {
    if (options.n_images < 1) throw DataError("word_influence: n_images must be >= 1");
    if (!generator.differentiable()) {
        throw NotDifferentiableError("word_influence needs a differentiable generator backend");
    }
    auto candidates = extract_candidates(prompt, bias_name, classes, lexicon);
    if (candidates.empty()) {
        throw NotComputableError("no candidate words survive the exclusion rules for prompt: " +
                                 prompt);
    }

    // Per-image jobs land in pre-sized slots; the fold below runs in image
    // order, so results are identical at any concurrency cap.
    std::vector<std::vector<double>> per_image_scores(options.n_images);
    std::vector<std::size_t> targets(options.n_images, 0);
    parallel_for(options.n_images, options.concurrency, [&](std::size_t k) {
        std::uint64_t seed = derive_seed(options.master_seed, caption_id, k);
        auto trace = generator.generate(prompt, seed);
        auto [loss, target] = gradbias_loss(*trace, vqa, question, classes);
        (void)loss;
        targets[k] = target;
        std::vector<double> token_scores =
            token_gradients(*trace, vqa, question, classes, target, options);

        const TokenizedPrompt& tp = trace->prompt();
        std::vector<double> scores(candidates.size(), 0.0);
        for (std::size_t ci = 0; ci < candidates.size(); ++ci) {
            // All tokens of every occurrence of the word contribute.
            double acc = 0.0;
            std::size_t n_tok = 0;
            for (std::size_t w = 0; w < tp.words.size(); ++w) {
                if (to_lower(strip_punct(tp.words[w])) != candidates[ci].word) continue;
                for (std::size_t t = tp.token_spans[w].begin; t < tp.token_spans[w].end; ++t) {
                    acc += token_scores[t];
                    ++n_tok;
                }
            }
            if (n_tok == 0) continue;
            scores[ci] = options.aggregation == "sum" ? acc : acc / static_cast<double>(n_tok);
        }
        per_image_scores[k] = std::move(scores);
    });

    std::vector<double> word_scores(candidates.size(), 0.0);
    for (const auto& scores : per_image_scores) {
        for (std::size_t ci = 0; ci < candidates.size(); ++ci) word_scores[ci] += scores[ci];
    }
    for (auto& s : word_scores) s /= static_cast<double>(options.n_images);

    WordInfluenceRanking out;
    out.caption_id = caption_id;
    out.bias_name = bias_name;
    out.prompt_text = prompt;
    for (const auto& c : candidates) out.candidates.push_back(c.word);
    out.scores = word_scores;

    std::vector<std::size_t> order(candidates.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        if (word_scores[a] != word_scores[b]) return word_scores[a] > word_scores[b];
        return candidates[a].position < candidates[b].position;
    });
    for (std::size_t i : order) out.ranking.push_back(candidates[i].word);

    out.metadata = {{"method", "gradbias"},
                    {"n_images", options.n_images},
                    {"step_interval", options.step_interval},
                    {"reduction", options.reduction},
                    {"aggregation", options.aggregation},
                    {"seed", options.master_seed},
                    {"targets", targets},
                    {"generator_fingerprint", generator.fingerprint()},
                    {"vqa_fingerprint", vqa.fingerprint()}};
    return out;
}

}  // namespace biasaudit
