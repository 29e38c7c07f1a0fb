#pragma once

#include <memory>
#include <string>
#include <vector>

#include "biasaudit/gradbias.hpp"

namespace biasaudit {

// ---------------------------------------------------------------------------
// Dependency parses come from a pluggable provider so core tests never need
// an external parser.

struct DependencyParse {
    std::vector<std::string> words;
    // Head word index per word; -1 marks the root.
    std::vector<int> heads;
    std::vector<std::string> deprels;  // aligned with words ("nsubj", ...)

    void validate() const;
};

class DependencyParseProvider {
public:
    virtual ~DependencyParseProvider() = default;
    // Throws DataError when the sentence cannot be parsed.
    virtual DependencyParse parse(const std::string& text) const = 0;
};

// Hand-annotated parses keyed by exact sentence text (JSON fixture file).
class FixtureParseProvider : public DependencyParseProvider {
public:
    explicit FixtureParseProvider(std::map<std::string, DependencyParse> parses);
    static FixtureParseProvider load(const std::filesystem::path& path);

    DependencyParse parse(const std::string& text) const override;

private:
    std::map<std::string, DependencyParse> parses_;
};

// ---------------------------------------------------------------------------
// Baselines. All emit the same record schema as GradBias.

// Uniform random permutation of the candidates from a seeded PRNG.
WordInfluenceRanking random_baseline(const std::string& caption_id, const std::string& prompt,
                                     const std::string& bias_name,
                                     const std::vector<std::string>& classes,
                                     const SynonymLexicon& lexicon, std::uint64_t seed);

// Re-roots the dependency tree at the sentence subject (first "nsubj" arc;
// fallback: original root), BFS from that root, candidates ranked by visit
// order (ties by sentence position). Parse failures fall back to
// left-to-right order and are flagged in metadata.
WordInfluenceRanking dependency_tree_baseline(const std::string& caption_id,
                                              const std::string& prompt,
                                              const std::string& bias_name,
                                              const std::vector<std::string>& classes,
                                              const SynonymLexicon& lexicon,
                                              const DependencyParseProvider& parser);

// The four question templates of the answer-ranking baselines, with {word},
// {bias} and {caption} slots. Versioned defaults; overridable per run.
const std::vector<std::string>& answer_ranking_templates();
std::string fill_template(const std::string& tmpl, const std::string& word,
                          const std::string& bias, const std::string& caption);

// Scores each candidate by its mean "yes" probability over the four template
// questions (and over the supplied images for the multimodal variant), ranks
// descending, ties by sentence position. A scorer failure on a candidate
// scores it 0 and flags it.
WordInfluenceRanking answer_ranking_baseline(
    const std::string& caption_id, const std::string& prompt, const std::string& bias_name,
    const std::vector<std::string>& classes, const SynonymLexicon& lexicon,
    const YesNoScorer& scorer, const std::vector<Image>& images = {},
    const std::vector<std::string>& templates = answer_ranking_templates());

}  // namespace biasaudit
