// biasaudit: open-set bias discovery, quantification and word-level
// attribution for text-to-image generators, behind pluggable model backends.

#include <CLI11.hpp>

#include <iostream>
#include <map>
#include <set>

#include "biasaudit/assessment.hpp"
#include "biasaudit/baselines.hpp"
#include "biasaudit/config.hpp"
#include "biasaudit/eval.hpp"
#include "biasaudit/generation.hpp"
#include "biasaudit/gradbias.hpp"
#include "biasaudit/jsonl.hpp"
#include "biasaudit/oracle.hpp"
#include "biasaudit/planted.hpp"
#include "biasaudit/proposal.hpp"
#include "biasaudit/quantify.hpp"
#include "biasaudit/svg.hpp"

namespace ba = biasaudit;

namespace {

struct CommonArgs {
    std::string config_path;
    std::string lexicon_path;
};

ba::SynonymLexicon load_lexicon(const std::string& path) {
    if (path.empty()) return ba::SynonymLexicon{};
    return ba::SynonymLexicon::load(path);
}

// ---------------------------------------------------------------------------

int cmd_propose(const CommonArgs& common, const std::string& captions_path,
                const std::string& backend_name, const std::string& out_path, double overlap,
                long min_support, const std::string& skip_log_path,
                const std::string& raw_log_path) {
    ba::RunConfig cfg = ba::RunConfig::load(common.config_path);
    auto registry = ba::BackendRegistry::with_builtins();
    auto proposer = registry.create_proposer(cfg.backend(backend_name));
    ba::SynonymLexicon lexicon = load_lexicon(common.lexicon_path);

    auto captions = ba::load_captions(captions_path);
    std::map<std::string, std::string> caption_texts;
    for (const auto& c : captions) caption_texts[c.id] = c.text;

    ba::KnowledgeBaseResult kb = ba::build_knowledge_base(captions, *proposer);
    auto databases = ba::postprocess_knowledge_base(kb.proposals, overlap,
                                                    static_cast<std::size_t>(min_support),
                                                    caption_texts);

    std::vector<ba::SkipRecord> skip_log = kb.skipped;
    std::vector<nlohmann::json> rows;
    for (const auto& db : databases) {
        ba::BiasDatabase filtered = ba::filter_database(db, *proposer, lexicon, &skip_log);
        if (filtered.support() < static_cast<std::size_t>(min_support)) {
            std::cerr << "dropping '" << db.bias_name << "': support "
                      << filtered.support() << " < " << min_support << " after filtering\n";
            continue;
        }
        nlohmann::json row = filtered.to_json();
        row["config_hash"] = cfg.config_hash;
        rows.push_back(std::move(row));
    }
    ba::write_jsonl(out_path, rows);

    if (!skip_log_path.empty()) {
        std::vector<nlohmann::json> skip_rows;
        for (const auto& s : skip_log) skip_rows.push_back(s.to_json());
        ba::write_jsonl(skip_log_path, skip_rows);
    }
    if (!raw_log_path.empty()) {
        std::vector<nlohmann::json> raw_rows;
        for (const auto& [id, payload] : kb.raw_payloads) {
            raw_rows.push_back({{"caption_id", id}, {"payload", payload}});
        }
        ba::write_jsonl(raw_log_path, raw_rows);
    }
    std::cout << "knowledge base: " << rows.size() << " biases, " << skip_log.size()
              << " skipped captions -> " << out_path << "\n";
    return 0;
}

// ---------------------------------------------------------------------------

int cmd_generate(const CommonArgs& common, const std::string& kb_path,
                 const std::string& backend_name, long n_captions, long n_images, long seed,
                 const std::string& out_dir) {
    ba::RunConfig cfg = ba::RunConfig::load(common.config_path);
    auto registry = ba::BackendRegistry::with_builtins();
    auto generator = registry.create_generator(cfg.backend(backend_name));

    ba::GenerationOptions options;
    options.n_captions = n_captions > 0 ? static_cast<std::size_t>(n_captions)
                                        : cfg.pipeline.n_captions;
    options.n_images = n_images > 0 ? static_cast<std::size_t>(n_images) : cfg.pipeline.n_images;
    options.master_seed = seed >= 0 ? static_cast<std::uint64_t>(seed)
                                    : cfg.pipeline.master_seed;
    options.concurrency = cfg.pipeline.concurrency;

    std::size_t generated = 0, cached = 0, failures = 0;
    for (const auto& row : ba::read_jsonl(kb_path)) {
        ba::BiasDatabase db = ba::BiasDatabase::from_json(row);
        auto outcome = ba::synthesize_image_sets(db, *generator, options, out_dir);
        generated += outcome.generated;
        cached += outcome.cache_hits;
        failures += outcome.failures.size();
        for (const auto& f : outcome.failures) {
            std::cerr << "generation failure (" << db.bias_name << "/" << f.caption_id
                      << "): " << f.error << "\n";
        }
    }
    std::cout << "generated " << generated << " images (" << cached << " cache hits, "
              << failures << " failures) -> " << out_dir << "\n";
    return 0;
}

// ---------------------------------------------------------------------------

int cmd_assess(const CommonArgs& common, const std::string& images_dir,
               const std::string& kb_path, const std::string& backend_name,
               const std::string& out_path, const std::string& context_mode) {
    ba::RunConfig cfg = ba::RunConfig::load(common.config_path);
    auto registry = ba::BackendRegistry::with_builtins();
    auto vqa = registry.create_answer_model(cfg.backend(backend_name));

    auto index = ba::load_index(images_dir, /*verify_hashes=*/true);
    std::map<std::string, std::vector<const ba::ImageSet*>> by_bias;
    for (const auto& set : index) {
        if (!set.complete) {
            std::cerr << "skipping incomplete image set " << set.bias_name << "/"
                      << set.caption_id << "\n";
            continue;
        }
        by_bias[ba::to_lower(set.bias_name)].push_back(&set);
    }

    std::vector<nlohmann::json> rows;
    for (const auto& kb_row : ba::read_jsonl(kb_path)) {
        ba::BiasDatabase db = ba::BiasDatabase::from_json(kb_row);
        auto sets = by_bias.find(ba::to_lower(db.bias_name));
        if (sets == by_bias.end()) continue;
        std::vector<ba::ClassDistribution> per_caption;
        for (const ba::ImageSet* set : sets->second) {
            ba::ClassDistribution dist = ba::context_aware_distribution(
                *vqa, *set, images_dir, set->question, db.class_union);
            if (context_mode != "free") {
                nlohmann::json row = dist.to_json();
                row["bias"] = db.bias_name;
                row["caption_id"] = set->caption_id;
                row["config_hash"] = cfg.config_hash;
                row["model_fingerprint"] = set->backend_fingerprint;
                rows.push_back(std::move(row));
            }
            per_caption.push_back(std::move(dist));
        }
        if (context_mode != "aware" && !per_caption.empty()) {
            ba::ClassDistribution free_dist = ba::context_free_distribution(per_caption);
            nlohmann::json row = free_dist.to_json();
            row["bias"] = db.bias_name;
            row["config_hash"] = cfg.config_hash;
            row["model_fingerprint"] = sets->second.front()->backend_fingerprint;
            rows.push_back(std::move(row));
        }
    }
    ba::write_jsonl(out_path, rows);
    std::cout << "assessed " << rows.size() << " distributions -> " << out_path << "\n";
    return 0;
}

// ---------------------------------------------------------------------------

int cmd_rank(const std::string& res_path, const std::string& out_path,
             const std::string& plot_path, const std::string& context_mode) {
    std::vector<ba::BiasScore> scores;
    std::map<std::string, std::vector<ba::BiasScore>> aware_scores;
    std::string fingerprint;
    for (const auto& row : ba::read_jsonl(res_path)) {
        bool is_aware = row.contains("caption_id");
        if (row.contains("model_fingerprint")) {
            fingerprint = row["model_fingerprint"].get<std::string>();
        }
        ba::ClassDistribution dist = ba::ClassDistribution::from_json(row);
        if (dist.empty()) continue;
        std::string bias = row.at("bias").get<std::string>();
        if (context_mode == "free" && !is_aware) {
            scores.push_back(ba::score_distribution(bias, dist, "free"));
        } else if (context_mode == "aware" && is_aware) {
            aware_scores[bias].push_back(ba::score_distribution(
                bias, dist, "aware", row["caption_id"].get<std::string>()));
        }
    }
    if (context_mode == "aware") {
        // Per-bias summary: mean of the per-caption scores; the full list is
        // retained in the report.
        for (auto& [bias, list] : aware_scores) {
            double mean = 0.0;
            for (const auto& s : list) mean += s.score;
            mean /= static_cast<double>(list.size());
            ba::BiasScore summary = list.front();
            summary.score = mean;
            summary.caption_id.clear();
            scores.push_back(std::move(summary));
        }
    }
    if (scores.empty()) throw ba::DataError("rank: no usable distributions in " + res_path);
    auto ranked = ba::rank_biases(std::move(scores));

    nlohmann::json report;
    report["model_fingerprint"] = fingerprint;
    report["context_mode"] = context_mode;
    nlohmann::json ranking = nlohmann::json::array();
    for (const auto& s : ranked) {
        nlohmann::json entry = s.to_json();
        if (context_mode == "aware") {
            nlohmann::json per_caption = nlohmann::json::array();
            for (const auto& c : aware_scores[s.bias_name]) per_caption.push_back(c.to_json());
            entry["per_caption"] = per_caption;
        }
        ranking.push_back(std::move(entry));
    }
    report["ranking"] = ranking;
    ba::write_json(out_path, report);

    if (!plot_path.empty()) {
        std::vector<ba::LabeledValue> bars;
        for (const auto& s : ranked) {
            bars.push_back({s.bias_name + " (" + s.majority_class + ")", s.score});
        }
        ba::write_svg(plot_path, ba::svg_bar_chart("bias intensity (" + context_mode + ")", bars));
    }
    std::cout << "ranked " << ranked.size() << " biases -> " << out_path << "\n";
    return 0;
}

// ---------------------------------------------------------------------------

std::vector<ba::EvalDatasetRow> load_dataset(const std::string& path) {
    std::vector<ba::EvalDatasetRow> rows;
    for (const auto& row : ba::read_jsonl(path)) {
        rows.push_back(ba::EvalDatasetRow::from_json(row));
    }
    if (rows.empty()) throw ba::DataError("dataset is empty: " + path);
    return rows;
}

int cmd_gradbias(const CommonArgs& common, const std::string& dataset_path,
                 const std::string& gen_name, const std::string& vqa_name, long n_images,
                 long step_interval, long seed, const std::string& out_path) {
    ba::RunConfig cfg = ba::RunConfig::load(common.config_path);
    auto registry = ba::BackendRegistry::with_builtins();
    auto generator = registry.create_generator(cfg.backend(gen_name));
    auto vqa = registry.create_answer_model(cfg.backend(vqa_name));
    ba::SynonymLexicon lexicon = load_lexicon(common.lexicon_path);

    ba::GradBiasOptions options;
    options.n_images = n_images > 0 ? static_cast<std::size_t>(n_images) : cfg.pipeline.n_images;
    options.step_interval = step_interval > 0 ? static_cast<int>(step_interval)
                                              : cfg.pipeline.step_interval;
    options.master_seed = seed >= 0 ? static_cast<std::uint64_t>(seed)
                                    : cfg.pipeline.master_seed;
    options.concurrency = cfg.pipeline.gradient_concurrency;

    std::vector<nlohmann::json> rows;
    for (const auto& item : load_dataset(dataset_path)) {
        ba::WordInfluenceRanking ranking =
            ba::word_influence(item.caption_id, item.caption, item.bias_name, item.classes,
                               item.question, *generator, *vqa, lexicon, options);
        nlohmann::json row = ranking.to_json();
        row["config_hash"] = cfg.config_hash;
        rows.push_back(std::move(row));
    }
    ba::write_jsonl(out_path, rows);
    std::cout << "gradbias scored " << rows.size() << " prompts -> " << out_path << "\n";
    return 0;
}

// ---------------------------------------------------------------------------

int cmd_baseline(const CommonArgs& common, const std::string& method,
                 const std::string& dataset_path, const std::string& model_name,
                 const std::string& parses_path, const std::string& images_dir, long seed,
                 const std::string& out_path) {
    if (method != "random" && method != "deptree" && method != "llm-rank" &&
        method != "vqa-rank") {
        throw ba::ConfigError("unknown baseline method: " + method);
    }
    ba::RunConfig cfg = ba::RunConfig::load(common.config_path);
    auto registry = ba::BackendRegistry::with_builtins();
    ba::SynonymLexicon lexicon = load_lexicon(common.lexicon_path);
    std::uint64_t master_seed = seed >= 0 ? static_cast<std::uint64_t>(seed)
                                          : cfg.pipeline.master_seed;

    std::shared_ptr<ba::YesNoScorer> scorer;
    if (method == "llm-rank" || method == "vqa-rank") {
        if (model_name.empty()) {
            throw ba::ConfigError("--model is required for the answer-ranking baselines");
        }
        scorer = registry.create_yes_no(cfg.backend(model_name));
    }
    std::unique_ptr<ba::FixtureParseProvider> parser;
    if (method == "deptree") {
        if (parses_path.empty()) {
            throw ba::ConfigError("--parses fixture file is required for the deptree baseline");
        }
        parser = std::make_unique<ba::FixtureParseProvider>(
            ba::FixtureParseProvider::load(parses_path));
    }
    std::vector<ba::ImageSet> index;
    if (method == "vqa-rank") {
        if (images_dir.empty()) {
            throw ba::ConfigError("--images directory is required for the vqa-rank baseline");
        }
        index = ba::load_index(images_dir, /*verify_hashes=*/false);
    }

    std::vector<nlohmann::json> rows;
    for (const auto& item : load_dataset(dataset_path)) {
        ba::WordInfluenceRanking ranking;
        if (method == "random") {
            ranking = ba::random_baseline(item.caption_id, item.caption, item.bias_name,
                                          item.classes, lexicon,
                                          ba::derive_seed(master_seed, item.caption_id, 0));
        } else if (method == "deptree") {
            ranking = ba::dependency_tree_baseline(item.caption_id, item.caption, item.bias_name,
                                                   item.classes, lexicon, *parser);
        } else if (method == "llm-rank") {
            ranking = ba::answer_ranking_baseline(item.caption_id, item.caption, item.bias_name,
                                                  item.classes, lexicon, *scorer);
        } else if (method == "vqa-rank") {
            std::vector<ba::Image> images;
            for (const auto& set : index) {
                if (set.caption_id == item.caption_id &&
                    ba::to_lower(set.bias_name) == ba::to_lower(item.bias_name) &&
                    set.complete) {
                    for (const auto& rel : set.image_paths) {
                        images.push_back(ba::load_image(std::filesystem::path(images_dir) / rel));
                    }
                    break;
                }
            }
            ranking = ba::answer_ranking_baseline(item.caption_id, item.caption, item.bias_name,
                                                  item.classes, lexicon, *scorer, images);
        }
        nlohmann::json row = ranking.to_json();
        row["config_hash"] = cfg.config_hash;
        rows.push_back(std::move(row));
    }
    ba::write_jsonl(out_path, rows);
    std::cout << "baseline '" << method << "' scored " << rows.size() << " prompts -> "
              << out_path << "\n";
    return 0;
}

// ---------------------------------------------------------------------------

int cmd_groundtruth(const CommonArgs& common, const std::string& dataset_path,
                    const std::string& gen_name, const std::string& vqa_name, long n_images,
                    long seed, const std::string& out_path) {
    ba::RunConfig cfg = ba::RunConfig::load(common.config_path);
    auto registry = ba::BackendRegistry::with_builtins();
    auto generator = registry.create_generator(cfg.backend(gen_name));
    auto vqa = registry.create_answer_model(cfg.backend(vqa_name));
    ba::SynonymLexicon lexicon = load_lexicon(common.lexicon_path);

    ba::OracleOptions options;
    options.n_images = n_images > 0 ? static_cast<std::size_t>(n_images) : cfg.pipeline.n_images;
    options.master_seed = seed >= 0 ? static_cast<std::uint64_t>(seed)
                                    : cfg.pipeline.master_seed;

    std::vector<nlohmann::json> rows;
    for (const auto& item : load_dataset(dataset_path)) {
        ba::GroundTruth gt =
            ba::compute_ground_truth(item.caption_id, item.caption, item.bias_name, item.classes,
                                     item.question, *generator, *vqa, lexicon, options);
        nlohmann::json row = gt.to_json();
        row["config_hash"] = cfg.config_hash;
        rows.push_back(std::move(row));
    }
    ba::write_jsonl(out_path, rows);
    std::cout << "ground truth for " << rows.size() << " prompts -> " << out_path << "\n";
    return 0;
}

// ---------------------------------------------------------------------------

int cmd_dataset(const std::string& kb_path, long n_biases, long captions_per_bias, long seed,
                const std::string& out_path) {
    std::vector<ba::BiasDatabase> kb;
    for (const auto& row : ba::read_jsonl(kb_path)) {
        kb.push_back(ba::BiasDatabase::from_json(row));
    }
    std::vector<std::string> shortfalls;
    auto rows = ba::build_eval_dataset(kb, static_cast<std::size_t>(n_biases),
                                       static_cast<std::size_t>(captions_per_bias),
                                       static_cast<std::uint64_t>(seed), &shortfalls);
    std::vector<nlohmann::json> out;
    for (const auto& r : rows) out.push_back(r.to_json());
    ba::write_jsonl(out_path, out);
    for (const auto& s : shortfalls) std::cerr << "shortfall: " << s << "\n";
    std::cout << "eval dataset: " << rows.size() << " prompts -> " << out_path << "\n";
    return 0;
}

// ---------------------------------------------------------------------------

std::vector<ba::WordInfluenceRanking> load_predictions(const std::string& path) {
    std::vector<ba::WordInfluenceRanking> out;
    for (const auto& row : ba::read_jsonl(path)) {
        out.push_back(ba::WordInfluenceRanking::from_json(row));
    }
    return out;
}

std::vector<ba::GroundTruth> load_ground_truths(const std::string& path) {
    std::vector<ba::GroundTruth> out;
    for (const auto& row : ba::read_jsonl(path)) {
        out.push_back(ba::GroundTruth::from_json(row));
    }
    return out;
}

int cmd_eval(const std::string& pred_path, const std::string& gt_path,
             const std::string& out_path, const std::string& table_path) {
    ba::EvalReport report = ba::topk_accuracy(load_predictions(pred_path),
                                              load_ground_truths(gt_path));
    if (report.unmatched > 0) {
        std::cerr << "warning: " << report.unmatched << " predictions had no ground truth\n";
    }
    ba::write_json(out_path, report.to_json());
    std::string table = ba::render_report_table(report);
    if (!table_path.empty()) ba::write_text(table_path, table);
    std::cout << table;
    return 0;
}

// ---------------------------------------------------------------------------

int cmd_sweep(const CommonArgs& common, const std::string& dataset_path,
              const std::string& gen_name, const std::string& vqa_name,
              const std::string& gt_path, const std::string& intervals_csv, long n_images,
              long seed, const std::string& out_path, const std::string& plot_path) {
    ba::RunConfig cfg = ba::RunConfig::load(common.config_path);
    auto registry = ba::BackendRegistry::with_builtins();
    auto generator = registry.create_generator(cfg.backend(gen_name));
    auto vqa = registry.create_answer_model(cfg.backend(vqa_name));
    ba::SynonymLexicon lexicon = load_lexicon(common.lexicon_path);
    auto gts = load_ground_truths(gt_path);
    auto dataset = load_dataset(dataset_path);

    std::vector<int> intervals;
    for (const auto& part : ba::split_words(intervals_csv)) intervals.push_back(std::stoi(part));
    if (intervals.empty()) intervals = {1, 2, 5, 10, 50};

    ba::GradBiasOptions options;
    options.n_images = n_images > 0 ? static_cast<std::size_t>(n_images) : cfg.pipeline.n_images;
    options.master_seed = seed >= 0 ? static_cast<std::uint64_t>(seed)
                                    : cfg.pipeline.master_seed;

    nlohmann::json sweep = nlohmann::json::array();
    std::vector<std::string> labels;
    ba::LineSeries top1{"top-1", {}}, top2{"top-2", {}};
    for (int interval : intervals) {
        options.step_interval = interval;
        std::vector<ba::WordInfluenceRanking> predictions;
        for (const auto& item : dataset) {
            predictions.push_back(ba::word_influence(item.caption_id, item.caption,
                                                     item.bias_name, item.classes, item.question,
                                                     *generator, *vqa, lexicon, options));
        }
        ba::EvalReport report = ba::topk_accuracy(predictions, gts);
        sweep.push_back({{"interval", interval}, {"report", report.to_json()}});
        labels.push_back(std::to_string(interval));
        top1.values.push_back(report.overall.top1);
        top2.values.push_back(report.overall.top2);
        std::cout << "interval " << interval << ": top-1 " << report.overall.top1 << "\n";
    }
    nlohmann::json doc;
    doc["config_hash"] = cfg.config_hash;
    doc["sweep"] = sweep;
    ba::write_json(out_path, doc);
    if (!plot_path.empty()) {
        ba::write_svg(plot_path,
                      ba::svg_line_chart("gradient interval ablation", labels, {top1, top2}));
    }
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Open-set bias audit toolkit for text-to-image generators"};
    app.require_subcommand(1);

    CommonArgs common;
    app.add_option("--config", common.config_path, "Run configuration JSON")
        ->envname("BIASAUDIT_CONFIG");
    app.add_option("--lexicon", common.lexicon_path, "Synonym lexicon JSON map");

    // propose
    std::string captions_path, backend_name, out_path, skip_log_path, raw_log_path;
    double overlap = 0.75;
    long min_support = 30;
    auto* propose = app.add_subcommand("propose", "Build the bias knowledge base from captions");
    propose->add_option("--captions", captions_path, "Caption corpus (text or JSONL)")
        ->required();
    propose->add_option("--backend", backend_name, "Proposer backend name")->required();
    propose->add_option("--out", out_path, "Knowledge-base JSONL output")->required();
    propose->add_option("--overlap", overlap, "Class-overlap merge threshold");
    propose->add_option("--min-support", min_support, "Minimum captions per bias");
    propose->add_option("--skip-log", skip_log_path, "Skip-log JSONL output");
    propose->add_option("--raw-log", raw_log_path, "Raw model payload JSONL output");

    // generate
    std::string kb_path, gen_out_dir;
    long n_captions = -1, n_images = -1, seed = -1;
    auto* generate = app.add_subcommand("generate", "Synthesize the per-bias image sets");
    generate->add_option("--kb", kb_path, "Knowledge-base JSONL")->required();
    generate->add_option("--backend", backend_name, "Generator backend name")->required();
    generate->add_option("--n-captions", n_captions, "Captions sampled per bias");
    generate->add_option("--n-images", n_images, "Images per caption");
    generate->add_option("--seed", seed, "Master seed");
    generate->add_option("--out", gen_out_dir, "Image output directory")->required();

    // assess
    std::string images_dir, context_mode = "both";
    auto* assess = app.add_subcommand("assess", "Turn image sets into class distributions");
    assess->add_option("--images", images_dir, "Image directory (with index.jsonl)")->required();
    assess->add_option("--kb", kb_path, "Knowledge-base JSONL")->required();
    assess->add_option("--backend", backend_name, "Answer-model backend name")->required();
    assess->add_option("--out", out_path, "Results JSONL output")->required();
    assess->add_option("--context", context_mode, "aware|free|both");

    // rank
    std::string res_path, plot_path, rank_context = "free";
    auto* rank = app.add_subcommand("rank", "Score and rank biases by intensity");
    rank->add_option("--res", res_path, "Results JSONL from assess")->required();
    rank->add_option("--out", out_path, "Report JSON output")->required();
    rank->add_option("--plot", plot_path, "Bar-chart SVG output");
    rank->add_option("--context", rank_context, "free|aware");

    // gradbias
    std::string dataset_path, vqa_name;
    long step_interval = -1;
    auto* gradbias = app.add_subcommand("gradbias", "Gradient word-influence attribution");
    gradbias->add_option("--dataset", dataset_path, "Eval dataset JSONL")->required();
    gradbias->add_option("--gen", backend_name, "Generator backend name")->required();
    gradbias->add_option("--vqa", vqa_name, "Answer-model backend name")->required();
    gradbias->add_option("--n-images", n_images, "Images per prompt");
    gradbias->add_option("--step-interval", step_interval, "Denoising-step interval");
    gradbias->add_option("--seed", seed, "Master seed");
    gradbias->add_option("--out", out_path, "Rankings JSONL output")->required();

    // baseline
    std::string method, model_name, parses_path;
    auto* baseline = app.add_subcommand("baseline", "Comparison word-ranking methods");
    baseline->add_option("--method", method, "random|deptree|llm-rank|vqa-rank")->required();
    baseline->add_option("--dataset", dataset_path, "Eval dataset JSONL")->required();
    baseline->add_option("--model", model_name, "Yes/no scorer backend (answer ranking)");
    baseline->add_option("--parses", parses_path, "Dependency-parse fixture JSON (deptree)");
    baseline->add_option("--images", images_dir, "Image directory (vqa-rank)");
    baseline->add_option("--seed", seed, "Master seed");
    baseline->add_option("--out", out_path, "Rankings JSONL output")->required();

    // groundtruth
    auto* groundtruth = app.add_subcommand("groundtruth",
                                           "Leave-one-word-out influence ground truth");
    groundtruth->add_option("--dataset", dataset_path, "Eval dataset JSONL")->required();
    groundtruth->add_option("--gen", backend_name, "Generator backend name")->required();
    groundtruth->add_option("--vqa", vqa_name, "Answer-model backend name")->required();
    groundtruth->add_option("--n-images", n_images, "Images per prompt");
    groundtruth->add_option("--seed", seed, "Master seed");
    groundtruth->add_option("--out", out_path, "Ground-truth JSONL output")->required();

    // dataset
    long n_biases = 11, captions_per_bias = 50;
    auto* dataset = app.add_subcommand("dataset", "Sample a word-influence eval dataset");
    dataset->add_option("--kb", kb_path, "Knowledge-base JSONL")->required();
    dataset->add_option("--n-biases", n_biases, "Top biases by support");
    dataset->add_option("--captions-per-bias", captions_per_bias, "Captions sampled per bias");
    dataset->add_option("--seed", seed, "Sampling seed");
    dataset->add_option("--out", out_path, "Dataset JSONL output")->required();

    // eval
    std::string pred_path, gt_path, table_path;
    auto* eval = app.add_subcommand("eval", "Top-k accuracy against tie-aware ground truth");
    eval->add_option("--pred", pred_path, "Predictions JSONL")->required();
    eval->add_option("--gt", gt_path, "Ground-truth JSONL")->required();
    eval->add_option("--out", out_path, "Report JSON output")->required();
    eval->add_option("--table", table_path, "Plain-text table output");

    // sweep
    std::string intervals_csv = "1 2 5 10 50";
    auto* sweep = app.add_subcommand("sweep", "Step-interval ablation sweep");
    sweep->add_option("--dataset", dataset_path, "Eval dataset JSONL")->required();
    sweep->add_option("--gen", backend_name, "Generator backend name")->required();
    sweep->add_option("--vqa", vqa_name, "Answer-model backend name")->required();
    sweep->add_option("--gt", gt_path, "Ground-truth JSONL")->required();
    sweep->add_option("--intervals", intervals_csv, "Space-separated interval list");
    sweep->add_option("--n-images", n_images, "Images per prompt");
    sweep->add_option("--seed", seed, "Master seed");
    sweep->add_option("--out", out_path, "Sweep JSON output")->required();
    sweep->add_option("--plot", plot_path, "Line-chart SVG output");

    CLI11_PARSE(app, argc, argv);

    try {
        if (propose->parsed()) {
            return cmd_propose(common, captions_path, backend_name, out_path, overlap,
                               min_support, skip_log_path, raw_log_path);
        }
        if (generate->parsed()) {
            return cmd_generate(common, kb_path, backend_name, n_captions, n_images, seed,
                                gen_out_dir);
        }
        if (assess->parsed()) {
            return cmd_assess(common, images_dir, kb_path, backend_name, out_path, context_mode);
        }
        if (rank->parsed()) return cmd_rank(res_path, out_path, plot_path, rank_context);
        if (gradbias->parsed()) {
            return cmd_gradbias(common, dataset_path, backend_name, vqa_name, n_images,
                                step_interval, seed, out_path);
        }
        if (baseline->parsed()) {
            return cmd_baseline(common, method, dataset_path, model_name, parses_path, images_dir,
                                seed, out_path);
        }
        if (groundtruth->parsed()) {
            return cmd_groundtruth(common, dataset_path, backend_name, vqa_name, n_images, seed,
                                   out_path);
        }
        if (dataset->parsed()) {
            return cmd_dataset(kb_path, n_biases, captions_per_bias, seed < 0 ? 0 : seed,
                               out_path);
        }
        if (eval->parsed()) return cmd_eval(pred_path, gt_path, out_path, table_path);
        if (sweep->parsed()) {
            return cmd_sweep(common, dataset_path, backend_name, vqa_name, gt_path, intervals_csv,
                             n_images, seed, out_path, plot_path);
        }
    } catch (const ba::Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        if (!e.payload().empty()) std::cerr << "payload: " << e.payload() << "\n";
        return static_cast<int>(e.kind());
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 4;
    }
    return 0;
}
