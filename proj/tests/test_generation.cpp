#include <doctest.h>

#include <filesystem>
#include <set>

#include "biasaudit/generation.hpp"
#include "biasaudit/jsonl.hpp"
#include "support/fixtures.hpp"

using namespace biasaudit;
namespace fs = std::filesystem;

namespace {

struct TempDir {
    fs::path path;
    TempDir() {
        path = fs::temp_directory_path() /
               ("biasaudit-test-" + std::to_string(DetRng(::getpid()).next()));
        fs::create_directories(path);
    }
    ~TempDir() { fs::remove_all(path); }
};

// Wraps a generator and counts calls, for cache-hit assertions.
class CountingGenerator : public GeneratorBackend {
public:
    explicit CountingGenerator(const GeneratorBackend& inner) : inner_(inner) {}
    std::unique_ptr<GenerationTrace> generate(const std::string& prompt,
                                              std::uint64_t seed) const override {
        ++calls;
        return inner_.generate(prompt, seed);
    }
    bool differentiable() const override { return inner_.differentiable(); }
    std::string fingerprint() const override { return inner_.fingerprint(); }
    mutable std::size_t calls = 0;

private:
    const GeneratorBackend& inner_;
};

// Fails on a fixed caption id's prompt, to exercise incomplete sets.
class FlakyGenerator : public GeneratorBackend {
public:
    FlakyGenerator(const GeneratorBackend& inner, std::string poison)
        : inner_(inner), poison_(std::move(poison)) {}
    std::unique_ptr<GenerationTrace> generate(const std::string& prompt,
                                              std::uint64_t seed) const override {
        if (prompt.find(poison_) != std::string::npos) {
            throw BackendError("synthetic outage");
        }
        return inner_.generate(prompt, seed);
    }
    bool differentiable() const override { return inner_.differentiable(); }
    std::string fingerprint() const override { return inner_.fingerprint(); }

private:
    const GeneratorBackend& inner_;
    std::string poison_;
};

BiasDatabase fixture_database(const fixtures::PlantedFixture& fx) {
    BiasDatabase db;
    db.bias_name = fx.bias_name;
    db.class_union = fx.classes;
    for (const auto& p : fx.prompts) {
        db.entries.push_back(DatabaseEntry{p.id, p.text, fx.question});
    }
    return db;
}

}  // namespace

TEST_CASE("image sets derive distinct seeds and persist loadable images") {
    auto fx = fixtures::make_fixture({.n_prompts = 4, .seed = 3});
    auto gen = fx.generator();
    auto db = fixture_database(fx);
    TempDir dir;

    GenerationOptions options{.n_captions = 4, .n_images = 5, .master_seed = 11};
    auto outcome = synthesize_image_sets(db, gen, options, dir.path);
    REQUIRE(outcome.sets.size() == 4);
    CHECK(outcome.generated == 20);
    for (const auto& set : outcome.sets) {
        CHECK(set.complete);
        CHECK(set.seeds.size() == 5);
        std::set<std::uint64_t> unique(set.seeds.begin(), set.seeds.end());
        CHECK(unique.size() == 5);
        for (std::size_t k = 0; k < set.seeds.size(); ++k) {
            CHECK(set.seeds[k] == derive_seed(11, set.caption_id, k));
            Image img = load_image(dir.path / set.image_paths[k]);
            CHECK(image_content_hash(img) == set.image_hashes[k]);
        }
    }
}

TEST_CASE("re-running with the same inputs is a cache no-op") {
    auto fx = fixtures::make_fixture({.n_prompts = 3, .seed = 5});
    auto planted = fx.generator();
    auto db = fixture_database(fx);
    TempDir dir;
    GenerationOptions options{.n_captions = 3, .n_images = 4, .master_seed = 2};

    CountingGenerator first(planted);
    auto outcome1 = synthesize_image_sets(db, first, options, dir.path);
    CHECK(first.calls == 12);
    auto index1 = read_text(dir.path / "index.jsonl");

    CountingGenerator second(planted);
    auto outcome2 = synthesize_image_sets(db, second, options, dir.path);
    CHECK(second.calls == 0);  // every image served from cache
    CHECK(outcome2.cache_hits == 12);
    CHECK(read_text(dir.path / "index.jsonl") == index1);
}

TEST_CASE("corrupted cached images invalidate the set and trigger regeneration") {
    auto fx = fixtures::make_fixture({.n_prompts = 2, .seed = 9});
    auto gen = fx.generator();
    auto db = fixture_database(fx);
    TempDir dir;
    GenerationOptions options{.n_captions = 2, .n_images = 3, .master_seed = 4};

    auto outcome1 = synthesize_image_sets(db, gen, options, dir.path);
    write_text(dir.path / outcome1.sets[0].image_paths[1], "{\"features\": [9.9]}");

    CountingGenerator counting(gen);
    auto outcome2 = synthesize_image_sets(db, counting, options, dir.path);
    CHECK(counting.calls == 3);  // only the corrupted caption regenerates
    CHECK(outcome2.cache_hits == 3);
    Image img = load_image(dir.path / outcome1.sets[0].image_paths[1]);
    CHECK(image_content_hash(img) == outcome1.sets[0].image_hashes[1]);
}

TEST_CASE("a changed backend fingerprint invalidates the cache") {
    auto fx = fixtures::make_fixture({.n_prompts = 2, .seed = 13});
    auto db = fixture_database(fx);
    TempDir dir;
    GenerationOptions options{.n_captions = 2, .n_images = 2, .master_seed = 4};

    auto gen1 = fx.generator();
    synthesize_image_sets(db, gen1, options, dir.path);

    auto cfg2 = fx.gen_cfg;
    cfg2.steps += 5;  // different config, different fingerprint
    PlantedGenerator gen2(fx.world, cfg2);
    CountingGenerator counting(gen2);
    auto outcome = synthesize_image_sets(db, counting, options, dir.path);
    CHECK(counting.calls == 4);
    CHECK(outcome.cache_hits == 0);
}

TEST_CASE("caption sampling is capped by the database and commutes with order") {
    auto fx = fixtures::make_fixture({.n_prompts = 6, .seed = 21});
    auto gen = fx.generator();
    auto db = fixture_database(fx);
    TempDir dir1, dir2;
    GenerationOptions options{.n_captions = 4, .n_images = 1, .master_seed = 77};

    auto outcome1 = synthesize_image_sets(db, gen, options, dir1.path);
    CHECK(outcome1.sets.size() == 4);

    BiasDatabase shuffled = db;
    std::reverse(shuffled.entries.begin(), shuffled.entries.end());
    auto outcome2 = synthesize_image_sets(shuffled, gen, options, dir2.path);
    REQUIRE(outcome2.sets.size() == 4);
    for (std::size_t i = 0; i < 4; ++i) {
        CHECK(outcome1.sets[i].caption_id == outcome2.sets[i].caption_id);
    }

    GenerationOptions all{.n_captions = 100, .n_images = 1, .master_seed = 77};
    TempDir dir3;
    CHECK(synthesize_image_sets(db, gen, all, dir3.path).sets.size() == 6);
}

TEST_CASE("generator failures mark the set incomplete and are excluded downstream") {
    auto fx = fixtures::make_fixture({.n_prompts = 3, .seed = 31});
    auto planted = fx.generator();
    FlakyGenerator flaky(planted, fx.prompts[1].dominant);
    auto db = fixture_database(fx);
    TempDir dir;
    GenerationOptions options{.n_captions = 3, .n_images = 2, .master_seed = 1};

    auto outcome = synthesize_image_sets(db, flaky, options, dir.path);
    std::size_t incomplete = 0;
    for (const auto& set : outcome.sets) incomplete += set.complete ? 0 : 1;
    CHECK(incomplete >= 1);
    CHECK_FALSE(outcome.failures.empty());

    auto loaded = load_index(dir.path, true);
    for (const auto& set : loaded) {
        if (!set.complete) continue;
        for (const auto& rel : set.image_paths) CHECK(fs::exists(dir.path / rel));
    }
}

TEST_CASE("index rows survive a JSON round trip") {
    ImageSet set;
    set.bias_name = "person gender";
    set.caption_id = "c1";
    set.prompt_text = "a person";
    set.question = "q?";
    set.classes = {"male", "female"};
    set.seeds = {1, 2};
    set.image_paths = {"a/1.img", "a/2.img"};
    set.image_hashes = {"aa", "bb"};
    set.backend_fingerprint = "fp";
    auto restored = ImageSet::from_json(set.to_json());
    CHECK(restored.caption_id == set.caption_id);
    CHECK(restored.seeds == set.seeds);
    CHECK(restored.image_paths == set.image_paths);
    CHECK(restored.complete);
}

TEST_CASE("precondition violations are rejected") {
    auto fx = fixtures::make_fixture({.n_prompts = 2});
    auto gen = fx.generator();
    auto db = fixture_database(fx);
    TempDir dir;
    CHECK_THROWS_AS(
        synthesize_image_sets(db, gen, GenerationOptions{.n_captions = 0}, dir.path), DataError);
    CHECK_THROWS_AS(
        synthesize_image_sets(db, gen, GenerationOptions{.n_images = 0}, dir.path), DataError);
}
