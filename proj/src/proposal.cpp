#include "biasaudit/proposal.hpp"

#include <algorithm>
#include <fstream>
#include <functional>

#include "biasaudit/jsonl.hpp"

namespace biasaudit {

std::vector<Caption> load_captions(const std::filesystem::path& path) {
    std::ifstream probe(path);
    if (!probe) throw DataError("cannot open captions file: " + path.string());
    std::string first_line;
    std::getline(probe, first_line);
    probe.close();

    std::vector<Caption> out;
    if (!trim(first_line).empty() && trim(first_line).front() == '{') {
        for (const auto& row : read_jsonl(path)) {
            Caption c;
            if (row.contains("id")) {
                c.id = row["id"].is_string() ? row["id"].get<std::string>() : row["id"].dump();
            }
            c.text = row.value("caption", std::string());
            if (c.id.empty() || trim(c.text).empty()) {
                throw DataError("captions JSONL rows need nonempty 'id' and 'caption'");
            }
            out.push_back(std::move(c));
        }
    } else {
        std::ifstream in(path);
        std::string line;
        std::size_t n = 0;
        while (std::getline(in, line)) {
            ++n;
            if (trim(line).empty()) continue;
            out.push_back(Caption{std::to_string(n), trim(line)});
        }
    }
    if (out.empty()) throw DataError("captions file is empty: " + path.string());
    return out;
}

nlohmann::json BiasDatabase::to_json() const {
    nlohmann::json j;
    j["bias"] = bias_name;
    j["classes"] = class_union;
    j["support"] = support();
    nlohmann::json entries_json = nlohmann::json::array();
    for (const auto& e : entries) {
        entries_json.push_back(
            {{"caption_id", e.caption_id}, {"caption", e.caption}, {"question", e.question}});
    }
    j["entries"] = entries_json;
    if (!merged_from.empty()) j["merged_from"] = merged_from;
    return j;
}

BiasDatabase BiasDatabase::from_json(const nlohmann::json& j) {
    BiasDatabase db;
    try {
        db.bias_name = j.at("bias").get<std::string>();
        db.class_union = j.at("classes").get<std::vector<std::string>>();
        for (const auto& e : j.at("entries")) {
            db.entries.push_back(DatabaseEntry{e.at("caption_id").get<std::string>(),
                                               e.at("caption").get<std::string>(),
                                               e.at("question").get<std::string>()});
        }
        if (j.contains("merged_from")) {
            db.merged_from = j["merged_from"].get<std::vector<std::string>>();
        }
    } catch (const nlohmann::json::exception& e) {
        throw DataError(std::string("malformed knowledge-base record: ") + e.what());
    }
    return db;
}

SynonymLexicon::SynonymLexicon(std::map<std::string, std::vector<std::string>> entries) {
    for (auto& [key, vals] : entries) entries_[to_lower(key)] = std::move(vals);
}

SynonymLexicon SynonymLexicon::load(const std::filesystem::path& path) {
    nlohmann::json j = read_json(path);
    std::map<std::string, std::vector<std::string>> entries;
    for (auto& [key, vals] : j.items()) {
        entries[key] = vals.get<std::vector<std::string>>();
    }
    return SynonymLexicon(std::move(entries));
}

const std::vector<std::string>& SynonymLexicon::synonyms(const std::string& term) const {
    static const std::vector<std::string> empty;
    auto it = entries_.find(to_lower(term));
    return it == entries_.end() ? empty : it->second;
}

nlohmann::json SkipRecord::to_json() const {
    nlohmann::json j{{"caption_id", caption_id}, {"stage", stage}, {"error", error}};
    if (!payload.empty()) j["payload"] = payload;
    return j;
}

KnowledgeBaseResult build_knowledge_base(const std::vector<Caption>& captions,
                                         const ProposerBackend& proposer) {
    if (captions.empty()) throw DataError("build_knowledge_base: corpus must be nonempty");
    KnowledgeBaseResult result;
    for (const auto& caption : captions) {
        if (caption.id.empty()) throw DataError("caption without a stable id");
        try {
            ProposeResult pr = proposer.propose(caption.text);
            result.raw_payloads.emplace_back(caption.id, pr.raw_payload);
            for (auto& p : pr.proposals) {
                p.source_caption_id = caption.id;
                result.proposals.push_back(std::move(p));
            }
        } catch (const Error& e) {
            result.skipped.push_back(SkipRecord{caption.id, "propose", e.what(), e.payload()});
        }
    }
    return result;
}

namespace {

// caption text -> needed entry lookups; caption match against class names and
// their synonyms.
bool caption_mentions_class(const std::string& caption, const std::vector<std::string>& classes,
                            const SynonymLexicon& lexicon) {
    for (const auto& cls : classes) {
        if (contains_word(caption, cls)) return true;
        for (const auto& syn : lexicon.synonyms(cls)) {
            if (contains_word(caption, syn)) return true;
        }
    }
    return false;
}

std::string canon(const std::string& s) { return to_lower(trim(s)); }

}  // namespace

BiasDatabase filter_database(const BiasDatabase& db, const ProposerBackend& proposer,
                             const SynonymLexicon& lexicon, std::vector<SkipRecord>* skip_log) {
    BiasDatabase out;
    out.bias_name = db.bias_name;
    out.class_union = db.class_union;
    out.merged_from = db.merged_from;
    for (const auto& entry : db.entries) {
        // Stage 2 first: a pure string scan, no backend round trip.
        if (caption_mentions_class(entry.caption, db.class_union, lexicon)) continue;
        try {
            if (proposer.is_answer_in_caption(entry.caption, entry.question)) continue;
        } catch (const Error& e) {
            // Undecided entries are dropped: a caption that may leak the
            // attribute must never reach bias measurement.
            if (skip_log) {
                skip_log->push_back(
                    SkipRecord{entry.caption_id, "filter", e.what(), e.payload()});
            }
            continue;
        }
        out.entries.push_back(entry);
    }
    return out;
}

double class_overlap(const std::vector<std::string>& a, const std::vector<std::string>& b) {
    if (a.empty() || b.empty()) return 0.0;
    std::set<std::string> sa, sb;
    for (const auto& c : a) sa.insert(canon(c));
    for (const auto& c : b) sb.insert(canon(c));
    std::size_t shared = 0;
    for (const auto& c : sa) shared += sb.count(c);
    return static_cast<double>(shared) / static_cast<double>(std::min(sa.size(), sb.size()));
}

std::vector<BiasDatabase> postprocess_knowledge_base(
    const std::vector<BiasProposal>& proposals, double overlap_threshold,
    std::size_t min_support, const std::map<std::string, std::string>& caption_texts) {
    if (overlap_threshold <= 0.0 || overlap_threshold > 1.0) {
        throw DataError("overlap_threshold must be in (0, 1]");
    }
    if (min_support < 1) throw DataError("min_support must be >= 1");

    auto text_of = [&](const std::string& id) -> std::string {
        auto it = caption_texts.find(id);
        return it == caption_texts.end() ? std::string() : it->second;
    };

    // Group by canonical bias name. Display name per group: most frequent
    // original spelling, ties broken lexicographically.
    struct Group {
        std::string name;
        std::set<std::string> classes;               // canonical
        std::map<std::string, std::string> display;  // canonical -> first spelling
        std::set<DatabaseEntry> entries;
    };
    std::map<std::string, Group> groups;
    std::map<std::string, std::map<std::string, std::size_t>> spellings;
    for (const auto& p : proposals) {
        if (p.classes.size() < 2 || trim(p.question).empty() || trim(p.bias_name).empty()) {
            throw DataError("malformed proposal for caption " + p.source_caption_id);
        }
        std::string key = canon(p.bias_name);
        auto& g = groups[key];
        spellings[key][trim(p.bias_name)]++;
        for (const auto& cls : p.classes) {
            std::string c = canon(cls);
            g.classes.insert(c);
            g.display.emplace(c, trim(cls));
        }
        g.entries.insert(
            DatabaseEntry{p.source_caption_id, text_of(p.source_caption_id), p.question});
    }

    for (auto& [key, g] : groups) {
        const auto& counts = spellings[key];
        std::size_t best = 0;
        for (const auto& [spelling, n] : counts) {
            if (n > best || (n == best && (g.name.empty() || spelling < g.name))) {
                best = n;
                g.name = spelling;
            }
        }
    }

    // Single-linkage clustering over the overlap relation.
    std::vector<std::string> keys;
    for (const auto& [key, _] : groups) keys.push_back(key);
    std::vector<std::size_t> parent(keys.size());
    for (std::size_t i = 0; i < parent.size(); ++i) parent[i] = i;
    std::function<std::size_t(std::size_t)> find = [&](std::size_t x) {
        while (parent[x] != x) x = parent[x] = parent[parent[x]];
        return x;
    };
    for (std::size_t i = 0; i < keys.size(); ++i) {
        for (std::size_t j = i + 1; j < keys.size(); ++j) {
            std::vector<std::string> ci(groups[keys[i]].classes.begin(),
                                        groups[keys[i]].classes.end());
            std::vector<std::string> cj(groups[keys[j]].classes.begin(),
                                        groups[keys[j]].classes.end());
            if (class_overlap(ci, cj) >= overlap_threshold) {
                parent[find(i)] = find(j);
            }
        }
    }

    std::map<std::size_t, std::vector<std::string>> clusters;
    for (std::size_t i = 0; i < keys.size(); ++i) clusters[find(i)].push_back(keys[i]);

    std::vector<BiasDatabase> out;
    for (auto& [root, members] : clusters) {
        (void)root;
        // Cluster name: member with the highest support, ties lexicographic.
        std::sort(members.begin(), members.end(), [&](const auto& a, const auto& b) {
            auto sa = groups[a].entries.size(), sb = groups[b].entries.size();
            if (sa != sb) return sa > sb;
            return groups[a].name < groups[b].name;
        });
        BiasDatabase db;
        db.bias_name = groups[members.front()].name;
        std::set<DatabaseEntry> entry_set;
        std::map<std::string, std::string> display;  // canonical class -> spelling
        for (const auto& m : members) {
            const auto& g = groups[m];
            if (g.name != db.bias_name) db.merged_from.push_back(g.name);
            entry_set.insert(g.entries.begin(), g.entries.end());
            for (const auto& c : g.classes) display.emplace(c, g.display.at(c));
        }
        std::sort(db.merged_from.begin(), db.merged_from.end());
        for (const auto& [c, spelling] : display) {
            (void)c;
            db.class_union.push_back(spelling);
        }
        db.entries.assign(entry_set.begin(), entry_set.end());
        if (db.support() < min_support) continue;
        out.push_back(std::move(db));
    }
    std::sort(out.begin(), out.end(), [](const BiasDatabase& a, const BiasDatabase& b) {
        if (a.support() != b.support()) return a.support() > b.support();
        return a.bias_name < b.bias_name;
    });
    return out;
}

}  // namespace biasaudit
