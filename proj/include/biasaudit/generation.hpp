#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "biasaudit/backends.hpp"
#include "biasaudit/proposal.hpp"

namespace biasaudit {

// One generated image set I_b^t: all images for a single (bias, caption).
struct ImageSet {
    std::string bias_name;
    std::string caption_id;
    std::string prompt_text;
    std::string question;
    std::vector<std::string> classes;  // class order fixed by the knowledge base
    std::vector<std::uint64_t> seeds;
    std::vector<std::string> image_paths;  // relative to the output root
    std::vector<std::string> image_hashes;
    std::string backend_fingerprint;
    bool complete = true;

    nlohmann::json to_json() const;
    static ImageSet from_json(const nlohmann::json& j);
};

struct GenerationOptions {
    std::size_t n_captions = 100;
    std::size_t n_images = 10;
    std::uint64_t master_seed = 0;
    int concurrency = 1;
};

struct GenerationOutcome {
    std::vector<ImageSet> sets;
    std::size_t generated = 0;   // images actually produced this run
    std::size_t cache_hits = 0;  // images reused from a previous run
    std::vector<SkipRecord> failures;
};

// Samples min(n_captions, |D_b|) captions from the database (PRNG seeded from
// master_seed, operating on sorted caption ids), generates n_images images
// per caption with seeds derive_seed(master_seed, caption_id, k), persists
// them under out_dir and appends/refreshes out_dir/index.jsonl. Re-running
// with identical inputs is a no-op.
GenerationOutcome synthesize_image_sets(const BiasDatabase& db, const GeneratorBackend& generator,
                                        const GenerationOptions& options,
                                        const std::filesystem::path& out_dir);

// Image (de)serialization. Feature images round-trip exactly.
void save_image(const std::filesystem::path& path, const Image& image);
Image load_image(const std::filesystem::path& path);
std::string image_content_hash(const Image& image);

// Loads an index and re-validates every image hash; sets whose files are
// missing or corrupt come back with complete=false.
std::vector<ImageSet> load_index(const std::filesystem::path& out_dir, bool verify_hashes = true);

std::string sanitize_path_component(const std::string& name);

}  // namespace biasaudit
