#include "biasaudit/eval.hpp"

#include <algorithm>
#include <iomanip>
#include <set>
#include <sstream>

namespace biasaudit {

namespace {

nlohmann::json row_to_json(const TopKRow& row) {
    return {{"top1", row.top1}, {"top2", row.top2}, {"top3", row.top3},
            {"n_prompts", row.n_prompts}};
}

TopKRow row_from_json(const nlohmann::json& j) {
    TopKRow row;
    row.top1 = j.at("top1").get<double>();
    row.top2 = j.at("top2").get<double>();
    row.top3 = j.at("top3").get<double>();
    row.n_prompts = j.value("n_prompts", std::size_t{0});
    return row;
}

}  // namespace

nlohmann::json EvalReport::to_json() const {
    nlohmann::json j;
    j["method"] = method_name;
    j["model_fingerprint"] = model_fingerprint;
    j["overall"] = row_to_json(overall);
    j["macro"] = row_to_json(macro);
    nlohmann::json per = nlohmann::json::object();
    for (const auto& [bias, row] : per_bias) per[bias] = row_to_json(row);
    j["per_bias"] = per;
    j["n_prompts"] = n_prompts;
    j["unmatched"] = unmatched;
    return j;
}

EvalReport EvalReport::from_json(const nlohmann::json& j) {
    EvalReport r;
    try {
        r.method_name = j.at("method").get<std::string>();
        r.model_fingerprint = j.value("model_fingerprint", std::string());
        r.overall = row_from_json(j.at("overall"));
        if (j.contains("macro")) r.macro = row_from_json(j["macro"]);
        for (auto& [bias, row] : j.at("per_bias").items()) {
            r.per_bias[bias] = row_from_json(row);
        }
        r.n_prompts = j.value("n_prompts", std::size_t{0});
        r.unmatched = j.value("unmatched", std::size_t{0});
    } catch (const nlohmann::json::exception& e) {
        throw DataError(std::string("malformed eval report: ") + e.what());
    }
    return r;
}

void EvalReport::validate() const {
    if (per_bias.empty()) throw DataError("eval report needs at least one bias row");
    auto check = [](const TopKRow& row, const std::string& name) {
        for (double v : {row.top1, row.top2, row.top3}) {
            if (v < 0.0 || v > 100.0) throw DataError("top-k outside [0,100] for " + name);
        }
        if (row.top1 > row.top2 + 1e-9 || row.top2 > row.top3 + 1e-9) {
            throw DataError("top-k not monotone for " + name);
        }
    };
    check(overall, "overall");
    check(macro, "macro");
    for (const auto& [bias, row] : per_bias) check(row, bias);
}

EvalReport topk_accuracy(const std::vector<WordInfluenceRanking>& predictions,
                         const std::vector<GroundTruth>& gts) {
    std::map<std::pair<std::string, std::string>, const GroundTruth*> gt_index;
    for (const auto& gt : gts) {
        gt_index[{gt.caption_id, to_lower(gt.bias_name)}] = &gt;
    }

    struct Hits {
        std::size_t top1 = 0, top2 = 0, top3 = 0, n = 0;
    };
    std::map<std::string, Hits> per_bias_hits;
    Hits total;
    std::size_t unmatched = 0;
    std::string method = "unknown";
    std::string fingerprint;

    for (const auto& pred : predictions) {
        if (pred.metadata.contains("method")) {
            method = pred.metadata["method"].get<std::string>();
        }
        if (pred.metadata.contains("generator_fingerprint")) {
            fingerprint = pred.metadata["generator_fingerprint"].get<std::string>();
        }
        auto it = gt_index.find({pred.caption_id, to_lower(pred.bias_name)});
        if (it == gt_index.end()) {
            ++unmatched;
            continue;
        }
        const GroundTruth& gt = *it->second;
        std::set<std::string> gt_set(gt.gt_words.begin(), gt.gt_words.end());
        auto hit_at = [&](std::size_t k) {
            std::size_t upto = std::min(k, pred.ranking.size());
            for (std::size_t i = 0; i < upto; ++i) {
                if (gt_set.count(pred.ranking[i])) return true;
            }
            return false;
        };
        Hits& bias_hits = per_bias_hits[gt.bias_name];
        bool h1 = hit_at(1), h2 = hit_at(2), h3 = hit_at(3);
        bias_hits.top1 += h1;
        bias_hits.top2 += h2;
        bias_hits.top3 += h3;
        ++bias_hits.n;
        total.top1 += h1;
        total.top2 += h2;
        total.top3 += h3;
        ++total.n;
    }
    if (total.n == 0) throw DataError("topk_accuracy: no prediction joined a ground truth");

    auto to_row = [](const Hits& h) {
        TopKRow row;
        row.n_prompts = h.n;
        row.top1 = 100.0 * static_cast<double>(h.top1) / static_cast<double>(h.n);
        row.top2 = 100.0 * static_cast<double>(h.top2) / static_cast<double>(h.n);
        row.top3 = 100.0 * static_cast<double>(h.top3) / static_cast<double>(h.n);
        return row;
    };

    EvalReport report;
    report.method_name = method;
    report.model_fingerprint = fingerprint;
    report.overall = to_row(total);
    report.n_prompts = total.n;
    report.unmatched = unmatched;
    TopKRow macro;
    for (const auto& [bias, hits] : per_bias_hits) {
        TopKRow row = to_row(hits);
        macro.top1 += row.top1;
        macro.top2 += row.top2;
        macro.top3 += row.top3;
        macro.n_prompts += row.n_prompts;
        report.per_bias[bias] = row;
    }
    auto n_biases = static_cast<double>(per_bias_hits.size());
    macro.top1 /= n_biases;
    macro.top2 /= n_biases;
    macro.top3 /= n_biases;
    report.macro = macro;
    report.validate();
    return report;
}

nlohmann::json EvalDatasetRow::to_json() const {
    return {{"caption_id", caption_id},
            {"caption", caption},
            {"bias", bias_name},
            {"classes", classes},
            {"question", question}};
}

EvalDatasetRow EvalDatasetRow::from_json(const nlohmann::json& j) {
    EvalDatasetRow row;
    try {
        row.caption_id = j.at("caption_id").get<std::string>();
        row.caption = j.at("caption").get<std::string>();
        row.bias_name = j.at("bias").get<std::string>();
        row.classes = j.at("classes").get<std::vector<std::string>>();
        row.question = j.at("question").get<std::string>();
    } catch (const nlohmann::json::exception& e) {
        throw DataError(std::string("malformed eval dataset row: ") + e.what());
    }
    return row;
}

std::vector<EvalDatasetRow> build_eval_dataset(const std::vector<BiasDatabase>& kb,
                                               std::size_t n_biases,
                                               std::size_t captions_per_bias, std::uint64_t seed,
                                               std::vector<std::string>* shortfall_log) {
    if (kb.empty()) throw DataError("build_eval_dataset: knowledge base is empty");
    std::vector<const BiasDatabase*> ordered;
    for (const auto& db : kb) ordered.push_back(&db);
    std::sort(ordered.begin(), ordered.end(), [](const BiasDatabase* a, const BiasDatabase* b) {
        if (a->support() != b->support()) return a->support() > b->support();
        return a->bias_name < b->bias_name;
    });
    if (ordered.size() > n_biases) ordered.resize(n_biases);

    std::vector<EvalDatasetRow> out;
    for (const BiasDatabase* db : ordered) {
        // One row per caption id (first question in sorted entry order).
        std::map<std::string, const DatabaseEntry*> by_id;
        for (const auto& e : db->entries) by_id.emplace(e.caption_id, &e);
        std::vector<std::string> ids;
        for (const auto& [id, _] : by_id) ids.push_back(id);

        if (ids.size() < captions_per_bias && shortfall_log) {
            shortfall_log->push_back(db->bias_name + ": wanted " +
                                     std::to_string(captions_per_bias) + " captions, corpus has " +
                                     std::to_string(ids.size()));
        }
        DetRng rng(hash_combine(seed, fnv1a64("eval-dataset:" + to_lower(db->bias_name))));
        auto picks = rng.sample_indices(ids.size(), captions_per_bias);
        std::sort(picks.begin(), picks.end());
        for (std::size_t p : picks) {
            const DatabaseEntry* e = by_id.at(ids[p]);
            out.push_back(EvalDatasetRow{e->caption_id, e->caption, db->bias_name,
                                         db->class_union, e->question});
        }
    }
    return out;
}

std::string render_report_table(const EvalReport& report) {
    report.validate();
    std::ostringstream os;
    os << std::fixed << std::setprecision(2);
    std::size_t width = 12;
    for (const auto& [bias, _] : report.per_bias) width = std::max(width, bias.size() + 2);
    os << std::left << std::setw(static_cast<int>(width)) << "Bias" << std::right
       << std::setw(9) << "Top-1" << std::setw(9) << "Top-2" << std::setw(9) << "Top-3"
       << std::setw(9) << "N" << '\n';
    auto line = [&](const std::string& name, const TopKRow& row) {
        os << std::left << std::setw(static_cast<int>(width)) << name << std::right
           << std::setw(9) << row.top1 << std::setw(9) << row.top2 << std::setw(9) << row.top3
           << std::setw(9) << row.n_prompts << '\n';
    };
    for (const auto& [bias, row] : report.per_bias) line(bias, row);
    line("overall", report.overall);
    line("macro", report.macro);
    os << "method: " << report.method_name << "  unmatched: " << report.unmatched << '\n';
    return os.str();
}

}  // namespace biasaudit
