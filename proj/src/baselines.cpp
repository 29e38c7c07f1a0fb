#include "biasaudit/baselines.hpp"

#include <algorithm>
#include <deque>
#include <numeric>

#include "biasaudit/jsonl.hpp"

namespace biasaudit {

void DependencyParse::validate() const {
    if (words.empty()) throw DataError("dependency parse has no words");
    if (heads.size() != words.size() || deprels.size() != words.size()) {
        throw DataError("dependency parse arrays must align with words");
    }
    int roots = 0;
    for (int h : heads) {
        if (h == -1) {
            ++roots;
        } else if (h < 0 || static_cast<std::size_t>(h) >= words.size()) {
            throw DataError("dependency head index out of range");
        }
    }
    if (roots != 1) throw DataError("dependency parse must have exactly one root");
}

FixtureParseProvider::FixtureParseProvider(std::map<std::string, DependencyParse> parses)
    : parses_(std::move(parses)) {
    for (const auto& [text, parse] : parses_) {
        (void)text;
        parse.validate();
    }
}

FixtureParseProvider FixtureParseProvider::load(const std::filesystem::path& path) {
    nlohmann::json j = read_json(path);
    std::map<std::string, DependencyParse> parses;
    for (auto& [text, body] : j.items()) {
        DependencyParse p;
        p.words = body.at("words").get<std::vector<std::string>>();
        p.heads = body.at("heads").get<std::vector<int>>();
        if (body.contains("deprels")) {
            p.deprels = body.at("deprels").get<std::vector<std::string>>();
        } else {
            p.deprels.assign(p.words.size(), "dep");
        }
        parses.emplace(text, std::move(p));
    }
    return FixtureParseProvider(std::move(parses));
}

DependencyParse FixtureParseProvider::parse(const std::string& text) const {
    auto it = parses_.find(text);
    if (it == parses_.end()) {
        throw DataError("no fixture parse for sentence: " + text);
    }
    return it->second;
}

namespace {

WordInfluenceRanking ranking_skeleton(const std::string& caption_id, const std::string& prompt,
                                      const std::string& bias_name,
                                      const std::vector<CandidateWord>& candidates) {
    WordInfluenceRanking out;
    out.caption_id = caption_id;
    out.bias_name = bias_name;
    out.prompt_text = prompt;
    for (const auto& c : candidates) out.candidates.push_back(c.word);
    return out;
}

// Ranks candidates by (score desc, sentence position asc) and fills
// ranking/scores on the record.
void apply_scores(WordInfluenceRanking& out, const std::vector<CandidateWord>& candidates,
                  const std::vector<double>& scores) {
    out.scores = scores;
    std::vector<std::size_t> order(candidates.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        if (scores[a] != scores[b]) return scores[a] > scores[b];
        return candidates[a].position < candidates[b].position;
    });
    for (std::size_t i : order) out.ranking.push_back(candidates[i].word);
}

}  // namespace

WordInfluenceRanking random_baseline(const std::string& caption_id, const std::string& prompt,
                                     const std::string& bias_name,
                                     const std::vector<std::string>& classes,
                                     const SynonymLexicon& lexicon, std::uint64_t seed) {
    auto candidates = extract_candidates(prompt, bias_name, classes, lexicon);
    if (candidates.empty()) {
        throw NotComputableError("no candidate words survive the exclusion rules for prompt: " +
                                 prompt);
    }
    WordInfluenceRanking out = ranking_skeleton(caption_id, prompt, bias_name, candidates);
    std::vector<std::size_t> perm(candidates.size());
    std::iota(perm.begin(), perm.end(), 0);
    DetRng rng(seed);
    rng.shuffle(perm);
    // Scores encode the drawn order so the schema matches the other methods.
    std::vector<double> scores(candidates.size(), 0.0);
    for (std::size_t rank = 0; rank < perm.size(); ++rank) {
        scores[perm[rank]] = static_cast<double>(perm.size() - rank);
    }
    apply_scores(out, candidates, scores);
    out.metadata = {{"method", "random"}, {"seed", seed}};
    return out;
}

WordInfluenceRanking dependency_tree_baseline(const std::string& caption_id,
                                              const std::string& prompt,
                                              const std::string& bias_name,
                                              const std::vector<std::string>& classes,
                                              const SynonymLexicon& lexicon,
                                              const DependencyParseProvider& parser) {
    auto candidates = extract_candidates(prompt, bias_name, classes, lexicon);
    if (candidates.empty()) {
        throw NotComputableError("no candidate words survive the exclusion rules for prompt: " +
                                 prompt);
    }
    WordInfluenceRanking out = ranking_skeleton(caption_id, prompt, bias_name, candidates);

    bool parse_failed = false;
    std::vector<std::size_t> visit_rank;  // word index -> BFS visit order
    std::vector<std::string> parse_words;
    try {
        DependencyParse parse = parser.parse(prompt);
        parse.validate();
        parse_words = parse.words;

        // Rotate the tree around the subject: first nsubj arc, else the root.
        std::size_t root = 0;
        for (std::size_t i = 0; i < parse.heads.size(); ++i) {
            if (parse.heads[i] == -1) root = i;
        }
        for (std::size_t i = 0; i < parse.deprels.size(); ++i) {
            if (to_lower(parse.deprels[i]).find("nsubj") == 0) {
                root = i;
                break;
            }
        }

        // BFS over the undirected tree; neighbors in sentence order.
        std::vector<std::vector<std::size_t>> adjacency(parse.words.size());
        for (std::size_t i = 0; i < parse.heads.size(); ++i) {
            if (parse.heads[i] < 0) continue;
            auto h = static_cast<std::size_t>(parse.heads[i]);
            adjacency[h].push_back(i);
            adjacency[i].push_back(h);
        }
        for (auto& neighbors : adjacency) std::sort(neighbors.begin(), neighbors.end());

        visit_rank.assign(parse.words.size(), parse.words.size());
        std::deque<std::size_t> queue{root};
        std::vector<bool> seen(parse.words.size(), false);
        seen[root] = true;
        std::size_t order = 0;
        while (!queue.empty()) {
            std::size_t node = queue.front();
            queue.pop_front();
            visit_rank[node] = order++;
            for (std::size_t next : adjacency[node]) {
                if (!seen[next]) {
                    seen[next] = true;
                    queue.push_back(next);
                }
            }
        }
    } catch (const Error&) {
        parse_failed = true;
    }

    std::vector<double> scores(candidates.size(), 0.0);
    if (parse_failed) {
        // Left-to-right fallback.
        for (std::size_t i = 0; i < candidates.size(); ++i) {
            scores[i] = static_cast<double>(candidates.size() - i);
        }
    } else {
        for (std::size_t ci = 0; ci < candidates.size(); ++ci) {
            std::size_t best = parse_words.size();
            for (std::size_t w = 0; w < parse_words.size(); ++w) {
                if (to_lower(strip_punct(parse_words[w])) == candidates[ci].word) {
                    best = std::min(best, visit_rank[w]);
                }
            }
            // Earlier BFS visits score higher; unknown words sink to 0.
            scores[ci] = best >= parse_words.size()
                             ? 0.0
                             : static_cast<double>(parse_words.size() - best);
        }
    }
    apply_scores(out, candidates, scores);
    out.metadata = {{"method", "deptree"}, {"parse_failed", parse_failed}};
    return out;
}

const std::vector<std::string>& answer_ranking_templates() {
    // Versioned template set, rev 1. The candidate is single-quoted and the
    // caption double-quoted so answer models can tell the slots apart.
    static const std::vector<std::string> templates = {
        "Is '{word}' influencing {bias} bias in the prompt \"{caption}\"? Answer only with yes "
        "or no.",
        "Does the word '{word}' affect the {bias} bias when generating an image from the prompt "
        "\"{caption}\"? Answer only with yes or no.",
        "In the prompt \"{caption}\", does the word '{word}' contribute to the {bias} bias? "
        "Answer only with yes or no.",
        "Would removing the word '{word}' from the prompt \"{caption}\" change the {bias} bias "
        "of the generated image? Answer only with yes or no.",
    };
    return templates;
}

std::string fill_template(const std::string& tmpl, const std::string& word,
                          const std::string& bias, const std::string& caption) {
    std::string out = tmpl;
    auto replace_all = [&out](const std::string& slot, const std::string& value) {
        std::size_t pos = 0;
        while ((pos = out.find(slot, pos)) != std::string::npos) {
            out.replace(pos, slot.size(), value);
            pos += value.size();
        }
    };
    replace_all("{word}", word);
    replace_all("{bias}", bias);
    replace_all("{caption}", caption);
    return out;
}

WordInfluenceRanking answer_ranking_baseline(
    const std::string& caption_id, const std::string& prompt, const std::string& bias_name,
    const std::vector<std::string>& classes, const SynonymLexicon& lexicon,
    const YesNoScorer& scorer, const std::vector<Image>& images,
    const std::vector<std::string>& templates) {
    if (templates.size() != 4) throw ConfigError("answer ranking needs exactly 4 templates");
    auto candidates = extract_candidates(prompt, bias_name, classes, lexicon);
    if (candidates.empty()) {
        throw NotComputableError("no candidate words survive the exclusion rules for prompt: " +
                                 prompt);
    }
    WordInfluenceRanking out = ranking_skeleton(caption_id, prompt, bias_name, candidates);

    std::vector<std::string> failed;
    std::vector<double> scores(candidates.size(), 0.0);
    for (std::size_t ci = 0; ci < candidates.size(); ++ci) {
        double acc = 0.0;
        std::size_t n = 0;
        try {
            for (const auto& tmpl : templates) {
                std::string question = fill_template(tmpl, candidates[ci].word, bias_name, prompt);
                if (images.empty()) {
                    acc += scorer.yes_probability(question, nullptr);
                    ++n;
                } else {
                    for (const auto& img : images) {
                        acc += scorer.yes_probability(question, &img);
                        ++n;
                    }
                }
            }
            scores[ci] = acc / static_cast<double>(n);
        } catch (const Error&) {
            scores[ci] = 0.0;
            failed.push_back(candidates[ci].word);
        }
    }
    apply_scores(out, candidates, scores);
    out.metadata = {{"method", images.empty() ? "llm-rank" : "vqa-rank"},
                    {"n_templates", templates.size()},
                    {"n_images", images.size()}};
    if (!failed.empty()) out.metadata["failed_candidates"] = failed;
    return out;
}

}  // namespace biasaudit
