#pragma once

#include <map>
#include <set>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "biasaudit/backends.hpp"

namespace biasaudit {

struct Caption {
    std::string id;
    std::string text;
};

// Loads either a JSONL {id, caption} corpus or a plain one-caption-per-line
// file (ids become the 1-based line numbers).
std::vector<Caption> load_captions(const std::filesystem::path& path);

struct DatabaseEntry {
    std::string caption_id;
    std::string caption;
    std::string question;

    auto operator<=>(const DatabaseEntry&) const = default;
};

// Per-bias database: the retained (caption, question) pairs plus the merged
// class set.
struct BiasDatabase {
    std::string bias_name;
    std::vector<std::string> class_union;
    std::vector<DatabaseEntry> entries;
    std::vector<std::string> merged_from;  // original bias names folded in

    std::size_t support() const { return entries.size(); }

    nlohmann::json to_json() const;
    static BiasDatabase from_json(const nlohmann::json& j);
};

// Case-insensitive class -> synonyms lookup backed by a static JSON map file.
class SynonymLexicon {
public:
    SynonymLexicon() = default;
    explicit SynonymLexicon(std::map<std::string, std::vector<std::string>> entries);

    static SynonymLexicon load(const std::filesystem::path& path);

    // Synonyms of `term` (empty set when the lexicon has no entry).
    const std::vector<std::string>& synonyms(const std::string& term) const;

private:
    std::map<std::string, std::vector<std::string>> entries_;  // lowercased keys
};

// Structured record of a caption the pipeline skipped and why.
struct SkipRecord {
    std::string caption_id;
    std::string stage;  // "propose", "filter", ...
    std::string error;
    std::string payload;

    nlohmann::json to_json() const;
};

struct KnowledgeBaseResult {
    std::vector<BiasProposal> proposals;
    std::vector<SkipRecord> skipped;
    // caption_id -> raw model payload, persisted for audit.
    std::vector<std::pair<std::string, std::string>> raw_payloads;
};

// Queries the proposer for every caption; backend failures are logged per
// caption and the scan continues.
KnowledgeBaseResult build_knowledge_base(const std::vector<Caption>& captions,
                                         const ProposerBackend& proposer);

// Two-stage filter: drops entries whose answer is judged explicit in the
// caption (stage 1) and entries whose caption contains a class of the
// database or a synonym of one (stage 2, whole-word, case-insensitive).
// Backend failures mark entries undecided; undecided entries are dropped.
BiasDatabase filter_database(const BiasDatabase& db, const ProposerBackend& proposer,
                             const SynonymLexicon& lexicon,
                             std::vector<SkipRecord>* skip_log = nullptr);

// Groups proposals into per-bias databases, merges databases whose class sets
// overlap by at least `overlap_threshold` (fraction of the smaller set,
// single linkage), drops databases with support below `min_support`, sorts by
// support descending then name. `caption_texts` (id -> text) fills the
// caption field of each entry; ids without a text keep an empty caption.
std::vector<BiasDatabase> postprocess_knowledge_base(
    const std::vector<BiasProposal>& proposals, double overlap_threshold,
    std::size_t min_support,
    const std::map<std::string, std::string>& caption_texts = {});

// Fraction of the smaller class set shared by the two (case-insensitive).
double class_overlap(const std::vector<std::string>& a, const std::vector<std::string>& b);

}  // namespace biasaudit
