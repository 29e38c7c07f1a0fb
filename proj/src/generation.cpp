#include "biasaudit/generation.hpp"

#include <algorithm>
#include <atomic>
#include <fstream>
#include <functional>
#include <map>
#include <mutex>
#include <set>
#include <sstream>
#include <thread>

#include "biasaudit/jsonl.hpp"

namespace biasaudit {

nlohmann::json ImageSet::to_json() const {
    nlohmann::json j;
    j["bias"] = bias_name;
    j["caption_id"] = caption_id;
    j["prompt"] = prompt_text;
    j["question"] = question;
    j["classes"] = classes;
    j["seeds"] = seeds;
    j["images"] = image_paths;
    j["hashes"] = image_hashes;
    j["backend_fingerprint"] = backend_fingerprint;
    j["complete"] = complete;
    return j;
}

ImageSet ImageSet::from_json(const nlohmann::json& j) {
    ImageSet s;
    try {
        s.bias_name = j.at("bias").get<std::string>();
        s.caption_id = j.at("caption_id").get<std::string>();
        s.prompt_text = j.at("prompt").get<std::string>();
        s.question = j.value("question", std::string());
        if (j.contains("classes")) s.classes = j["classes"].get<std::vector<std::string>>();
        s.seeds = j.at("seeds").get<std::vector<std::uint64_t>>();
        s.image_paths = j.at("images").get<std::vector<std::string>>();
        s.image_hashes = j.value("hashes", std::vector<std::string>{});
        s.backend_fingerprint = j.value("backend_fingerprint", std::string());
        s.complete = j.value("complete", true);
    } catch (const nlohmann::json::exception& e) {
        throw DataError(std::string("malformed image-set record: ") + e.what());
    }
    return s;
}

std::string sanitize_path_component(const std::string& name) {
    std::string out;
    for (char c : name) {
        if (std::isalnum(static_cast<unsigned char>(c)) || c == '-' || c == '_') {
            out += c;
        } else if (c == ' ') {
            out += '_';
        }
    }
    if (out.empty()) out = "x";
    return out;
}

void save_image(const std::filesystem::path& path, const Image& image) {
    std::filesystem::create_directories(path.parent_path());
    if (!image.blob.empty()) {
        std::ofstream out(path, std::ios::binary | std::ios::trunc);
        if (!out) throw DataError("cannot write image: " + path.string());
        out.write(reinterpret_cast<const char*>(image.blob.data()),
                  static_cast<std::streamsize>(image.blob.size()));
        return;
    }
    nlohmann::json j;
    j["kind"] = image.kind;
    j["features"] = image.features;
    write_text(path, j.dump());
}

Image load_image(const std::filesystem::path& path) {
    std::string text = read_text(path);
    Image img;
    if (!text.empty() && text.front() == '{') {
        try {
            nlohmann::json j = nlohmann::json::parse(text);
            img.kind = j.value("kind", std::string("planted.features.v1"));
            img.features = j.at("features").get<std::vector<double>>();
            return img;
        } catch (const nlohmann::json::exception&) {
            // fall through: binary image that happens to start with '{'
        }
    }
    img.kind = "blob";
    img.blob.assign(text.begin(), text.end());
    return img;
}

std::string image_content_hash(const Image& image) {
    std::string material = image.kind;
    if (!image.blob.empty()) {
        material.append(reinterpret_cast<const char*>(image.blob.data()), image.blob.size());
    } else {
        nlohmann::json j = image.features;
        material += j.dump();
    }
    std::ostringstream os;
    os << std::hex << fnv1a64(material);
    return os.str();
}

std::vector<ImageSet> load_index(const std::filesystem::path& out_dir, bool verify_hashes) {
    auto index_path = out_dir / "index.jsonl";
    std::vector<ImageSet> sets;
    if (!std::filesystem::exists(index_path)) return sets;
    for (const auto& row : read_jsonl(index_path)) {
        ImageSet s = ImageSet::from_json(row);
        if (verify_hashes && s.complete) {
            for (std::size_t i = 0; i < s.image_paths.size(); ++i) {
                auto path = out_dir / s.image_paths[i];
                if (!std::filesystem::exists(path)) {
                    s.complete = false;
                    break;
                }
                if (i < s.image_hashes.size() &&
                    image_content_hash(load_image(path)) != s.image_hashes[i]) {
                    s.complete = false;
                    break;
                }
            }
        }
        sets.push_back(std::move(s));
    }
    return sets;
}

namespace {

struct Job {
    std::string caption_id;
    std::string caption;
    std::string question;
};

}  // namespace

GenerationOutcome synthesize_image_sets(const BiasDatabase& db, const GeneratorBackend& generator,
                                        const GenerationOptions& options,
                                        const std::filesystem::path& out_dir) {
    if (options.n_captions < 1 || options.n_images < 1) {
        throw DataError("synthesize_image_sets: n_captions and n_images must be >= 1");
    }
    std::filesystem::create_directories(out_dir);

    // One job per caption id; duplicate entries for the same caption keep the
    // first question in sorted order.
    std::map<std::string, Job> by_caption;
    for (const auto& e : db.entries) {
        by_caption.emplace(e.caption_id, Job{e.caption_id, e.caption, e.question});
    }
    std::vector<std::string> ids;
    for (const auto& [id, _] : by_caption) ids.push_back(id);
    // ids are sorted by map order; sampling therefore commutes with the
    // corpus order.
    DetRng sampler(hash_combine(options.master_seed,
                                fnv1a64("caption-sample:" + to_lower(db.bias_name))));
    auto picks = sampler.sample_indices(ids.size(), options.n_captions);
    std::sort(picks.begin(), picks.end());

    // Previous runs: reusable sets keyed by caption id.
    std::map<std::string, ImageSet> cache;
    for (auto& s : load_index(out_dir, /*verify_hashes=*/true)) {
        if (to_lower(s.bias_name) == to_lower(db.bias_name)) {
            cache.emplace(s.caption_id, std::move(s));
        }
    }

    const std::string fingerprint = generator.fingerprint();
    const std::string bias_dir = sanitize_path_component(db.bias_name);

    GenerationOutcome outcome;
    outcome.sets.resize(picks.size());
    std::mutex mu;

    parallel_for(picks.size(), options.concurrency, [&](std::size_t j) {
        const Job& job = by_caption.at(ids[picks[j]]);
        auto cached = cache.find(job.caption_id);
        if (cached != cache.end() && cached->second.complete &&
            cached->second.backend_fingerprint == fingerprint &&
            cached->second.seeds.size() == options.n_images) {
            ImageSet reuse = cached->second;
            reuse.question = job.question;
            reuse.classes = db.class_union;
            std::lock_guard<std::mutex> lock(mu);
            outcome.cache_hits += reuse.seeds.size();
            outcome.sets[j] = std::move(reuse);
            return;
        }

        ImageSet set;
        set.bias_name = db.bias_name;
        set.caption_id = job.caption_id;
        set.prompt_text = job.caption;
        set.question = job.question;
        set.classes = db.class_union;
        set.backend_fingerprint = fingerprint;
        for (std::size_t k = 0; k < options.n_images; ++k) {
            std::uint64_t seed = derive_seed(options.master_seed, job.caption_id, k);
            std::ostringstream rel;
            rel << bias_dir << "/" << sanitize_path_component(job.caption_id) << "/" << seed
                << ".img";
            try {
                auto trace = generator.generate(job.caption, seed);
                save_image(out_dir / rel.str(), trace->image());
                set.seeds.push_back(seed);
                set.image_paths.push_back(rel.str());
                set.image_hashes.push_back(image_content_hash(trace->image()));
                std::lock_guard<std::mutex> lock(mu);
                ++outcome.generated;
            } catch (const Error& e) {
                set.complete = false;
                std::lock_guard<std::mutex> lock(mu);
                outcome.failures.push_back(SkipRecord{
                    job.caption_id, "generate", e.what(),
                    "seed=" + std::to_string(seed)});
            }
        }
        std::lock_guard<std::mutex> lock(mu);
        outcome.sets[j] = std::move(set);
    });

    // Index rebuild: keep foreign-bias rows, replace rows for this bias.
    // Rows are written in deterministic (bias, caption_id) order.
    std::vector<ImageSet> all_rows;
    for (auto& s : load_index(out_dir, /*verify_hashes=*/false)) {
        if (to_lower(s.bias_name) != to_lower(db.bias_name)) all_rows.push_back(std::move(s));
    }
    std::set<std::string> emitted;
    for (const auto& s : outcome.sets) {
        all_rows.push_back(s);
        emitted.insert(s.caption_id);
    }
    for (auto& [id, s] : cache) {
        if (!emitted.count(id)) all_rows.push_back(std::move(s));
    }
    std::sort(all_rows.begin(), all_rows.end(), [](const ImageSet& a, const ImageSet& b) {
        if (a.bias_name != b.bias_name) return a.bias_name < b.bias_name;
        return a.caption_id < b.caption_id;
    });
    std::vector<nlohmann::json> rows;
    rows.reserve(all_rows.size());
    for (const auto& s : all_rows) rows.push_back(s.to_json());
    write_jsonl(out_dir / "index.jsonl", rows);

    return outcome;
}

}  // namespace biasaudit
