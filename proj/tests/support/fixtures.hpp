#pragma once

// Shared planted-world fixtures for the test suites: a two-class world with
// one strongly influential word per prompt and near-neutral fillers, plus the
// knobs the step-interval and baseline-ordering scenarios need.

#include <map>
#include <string>
#include <vector>

#include "biasaudit/planted.hpp"
#include "biasaudit/proposal.hpp"

namespace fixtures {

namespace ba = biasaudit;

inline const std::vector<std::string>& influencer_pool() {
    static const std::vector<std::string> pool = {
        "kitchen",  "hospital", "office",  "garage",    "library",  "stadium",
        "workshop", "laboratory", "nursery", "barracks", "salon",    "garden",
        "studio",   "bakery",   "warehouse", "classroom", "clinic",  "hangar",
        "boutique", "quarry",   "diner",   "arcade",    "chapel",   "foundry"};
    return pool;
}

inline const std::vector<std::string>& filler_pool() {
    static const std::vector<std::string> pool = {
        "table", "chair", "window", "door",  "lamp",  "plant", "wall",
        "floor", "shelf", "bottle", "cup",   "road",  "tree",  "cloud",
        "stone", "fence", "sign",   "gate",  "crate", "basket"};
    return pool;
}

struct FixtureOptions {
    std::size_t n_prompts = 50;
    std::uint64_t seed = 7;
    double noise_scale = 0.12;
    double dominant_lo = 14.0;
    double dominant_hi = 20.0;
    double filler_hi = 0.5;
    int steps = 10;
    double signal_decay = 0.0;
    // When set, this word is appended to every prompt and carries the given
    // decoy weight toward the opposite class of the prompt's dominant word.
    std::string decoy_word;
    double decoy_weight = 0.0;
};

struct FixturePrompt {
    std::string id;
    std::string text;
    std::string dominant;
    std::vector<std::string> fillers;
};

struct PlantedFixture {
    ba::PlantedWorld world;
    ba::PlantedGeneratorConfig gen_cfg;
    std::string bias_name = "person gender";
    std::vector<std::string> classes = {"male", "female"};
    std::string question = "What is the gender of the person?";
    std::vector<FixturePrompt> prompts;

    ba::PlantedGenerator generator() const { return ba::PlantedGenerator(world, gen_cfg); }
    ba::PlantedAnswerModel answer_model(double gain = 1.0, double offset = 0.0) const {
        return ba::PlantedAnswerModel(world, gain, offset, /*unknown_logit=*/-6.0,
                                      /*unmatched_logit=*/-12.0);
    }
};

inline PlantedFixture make_fixture(const FixtureOptions& opts = {}) {
    PlantedFixture fx;
    ba::DetRng rng(ba::hash_combine(opts.seed, ba::fnv1a64("planted-fixture")));

    fx.world.classes = fx.classes;
    fx.world.base_logit = {0.0, 0.0};
    fx.world.noise_scale = opts.noise_scale;
    fx.world.vocabulary.push_back("person");
    for (const auto& w : influencer_pool()) fx.world.vocabulary.push_back(w);
    for (const auto& w : filler_pool()) fx.world.vocabulary.push_back(w);
    if (!opts.decoy_word.empty()) fx.world.vocabulary.push_back(opts.decoy_word);

    for (const auto& w : influencer_pool()) {
        double a = rng.uniform(opts.dominant_lo, opts.dominant_hi);
        bool male = rng.below(2) == 0;
        fx.world.word_weights[w] = male ? std::vector<double>{a, 0.0}
                                        : std::vector<double>{0.0, a};
    }
    for (const auto& w : filler_pool()) {
        double b = rng.uniform(0.0, opts.filler_hi);
        bool male = rng.below(2) == 0;
        fx.world.word_weights[w] = male ? std::vector<double>{b, 0.0}
                                        : std::vector<double>{0.0, b};
    }
    if (!opts.decoy_word.empty()) {
        fx.world.word_weights[opts.decoy_word] = {0.0, 0.0};
        fx.world.decoy_weights[opts.decoy_word] = {opts.decoy_weight, 0.0};
    }

    fx.gen_cfg.steps = opts.steps;
    fx.gen_cfg.signal_decay = opts.signal_decay;

    for (std::size_t i = 0; i < opts.n_prompts; ++i) {
        FixturePrompt p;
        p.id = "p" + std::to_string(i);
        p.dominant = influencer_pool()[i % influencer_pool().size()];
        std::vector<std::size_t> picks = rng.sample_indices(filler_pool().size(), 4);
        for (std::size_t f : picks) p.fillers.push_back(filler_pool()[f]);
        p.text = "a person in the " + p.dominant + " with a " + p.fillers[0] + " and a " +
                 p.fillers[1] + " near the " + p.fillers[2] + " by the " + p.fillers[3];
        if (!opts.decoy_word.empty()) p.text += " at the " + opts.decoy_word;
        fx.prompts.push_back(std::move(p));
    }
    fx.world.validate();
    return fx;
}

// Run-config JSON driving the CLI end to end on a fixture world.
inline nlohmann::json fixture_run_config(const PlantedFixture& fx, std::uint64_t master_seed,
                                         std::size_t n_captions, std::size_t n_images) {
    nlohmann::json world = fx.world.to_json();
    nlohmann::json rules = nlohmann::json::array();
    rules.push_back({{"trigger", "person"},
                     {"bias", fx.bias_name},
                     {"classes", fx.classes},
                     {"question", fx.question}});
    return nlohmann::json{
        {"backends",
         {{"gen",
           {{"kind", "planted_generator"},
            {"differentiable", true},
            {"seed_policy", "derived"},
            {"params",
             {{"world", world},
              {"steps", fx.gen_cfg.steps},
              {"signal_decay", fx.gen_cfg.signal_decay},
              {"feature_map", fx.gen_cfg.feature_map},
              {"norm", fx.gen_cfg.norm}}}}},
          {"vqa",
           {{"kind", "planted_answer"},
            {"params",
             {{"world", world}, {"gain", 1.0}, {"offset", 0.0}, {"unknown_logit", -6.0}}}}},
          {"vqa_gt",
           {{"kind", "planted_answer"},
            {"params",
             {{"world", world}, {"gain", 2.2}, {"offset", 0.7}, {"unknown_logit", -6.0}}}}},
          {"llm", {{"kind", "scripted_proposer"}, {"params", {{"rules", rules}}}}}}},
        {"pipeline",
         {{"n_captions", n_captions},
          {"n_images", n_images},
          {"master_seed", master_seed},
          {"min_support", 30},
          {"overlap", 0.75}}}};
}

// Caption corpus JSONL rows for the fixture prompts.
inline std::vector<nlohmann::json> fixture_captions(const PlantedFixture& fx) {
    std::vector<nlohmann::json> rows;
    for (const auto& p : fx.prompts) {
        rows.push_back({{"id", p.id}, {"caption", p.text}});
    }
    return rows;
}

}  // namespace fixtures
