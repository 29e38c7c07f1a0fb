#include <doctest.h>

#include <algorithm>

#include "biasaudit/oracle.hpp"
#include "support/fixtures.hpp"

using namespace biasaudit;

namespace {

PlantedWorld chef_world() {
    // "chef" carries a male weight but is excluded from candidacy; removing
    // "kitchen" drops the gap below zero, so its leave-one-out distribution
    // shifts, while "counter" and "jars" removals leave every argmax as-is.
    PlantedWorld w;
    w.classes = {"male", "female"};
    w.vocabulary = {"chef", "kitchen", "counter", "jars"};
    w.word_weights["chef"] = {4.0, 0.0};
    w.word_weights["kitchen"] = {18.0, 0.0};
    w.word_weights["counter"] = {0.0, 6.0};
    w.word_weights["jars"] = {0.0, 0.0};
    w.base_logit = {0.0, 0.0};
    w.noise_scale = 0.3;
    return w;
}

}  // namespace

TEST_CASE("ground truth finds the influential word once bias descriptors are excluded") {
    // "chef" carries the dominant weight but is excluded as bias-descriptive;
    // "kitchen" carries the remaining signal.
    auto world = chef_world();
    PlantedGenerator gen(world, PlantedGeneratorConfig{});
    PlantedAnswerModel vqa(world, 1.0, 0.0, -6.0, -12.0);
    SynonymLexicon lexicon(std::map<std::string, std::vector<std::string>>{{"person", {"chef"}}});

    auto gt = compute_ground_truth("c1", "a chef in a kitchen with a counter and jars",
                                   "person gender", {"male", "female"},
                                   "What is the gender of the chef?", gen, vqa, lexicon,
                                   OracleOptions{.n_images = 10, .master_seed = 19});
    CHECK(gt.candidates == std::vector<std::string>{"kitchen", "counter", "jars"});
    CHECK(gt.gt_words == std::vector<std::string>{"kitchen"});
    CHECK_FALSE(gt.baseline_distribution.empty());
    // Influence scores are nonnegative rationals.
    for (const auto& s : gt.influence) {
        if (s.computable()) CHECK(s.value() >= 0.0);
    }
}

TEST_CASE("removing a word with zero planted influence scores exactly zero") {
    auto world = chef_world();
    PlantedGenerator gen(world, PlantedGeneratorConfig{});
    PlantedAnswerModel vqa(world, 1.0, 0.0, -6.0, -12.0);

    auto gt = compute_ground_truth("c1", "a chef in a kitchen with jars", "person gender",
                                   {"male", "female"}, "What is the gender of the chef?", gen,
                                   vqa, SynonymLexicon(std::map<std::string, std::vector<std::string>>{{"person", {"chef"}}}),
                                   OracleOptions{.n_images = 10, .master_seed = 7});
    auto it = std::find(gt.candidates.begin(), gt.candidates.end(), "jars");
    REQUIRE(it != gt.candidates.end());
    auto idx = static_cast<std::size_t>(it - gt.candidates.begin());
    REQUIRE(gt.influence[idx].computable());
    CHECK(gt.influence[idx].num == 0);  // exact rational zero
}

TEST_CASE("two words with identical planted weights tie into the ground-truth set") {
    // The twins oppose a strong female prior: with both present the argmax is
    // male, with either one removed it sits at the decision boundary. Shared
    // seeds make the two leave-one-out runs bit-identical, so the tie is
    // exact.
    PlantedWorld world;
    world.classes = {"male", "female"};
    world.vocabulary = {"person", "twina", "twinb", "lamp"};
    world.word_weights["twina"] = {30.0, 0.0};
    world.word_weights["twinb"] = {30.0, 0.0};
    world.word_weights["lamp"] = {0.0, 0.0};
    world.base_logit = {0.0, 2.8};
    world.noise_scale = 0.3;
    PlantedGenerator gen(world, PlantedGeneratorConfig{});
    PlantedAnswerModel vqa(world, 1.0, 0.0, -6.0, -12.0);

    auto gt = compute_ground_truth("c1", "a person with a twina and a twinb and a lamp",
                                   "person gender", {"male", "female"},
                                   "What is the gender of the person?", gen, vqa,
                                   SynonymLexicon{}, OracleOptions{.n_images = 10,
                                                                   .master_seed = 3});
    // Identical embeddings and weights with shared seeds: identical counts,
    // so the tie is exact.
    CHECK(gt.gt_words == std::vector<std::string>{"twina", "twinb"});
}

TEST_CASE("ground truth is deterministic under a fixed master seed") {
    auto fx = fixtures::make_fixture({.n_prompts = 2, .seed = 47});
    auto gen = fx.generator();
    auto vqa = fx.answer_model();
    const auto& p = fx.prompts[0];
    auto a = compute_ground_truth(p.id, p.text, fx.bias_name, fx.classes, fx.question, gen, vqa,
                                  SynonymLexicon{}, OracleOptions{.n_images = 6,
                                                                  .master_seed = 99});
    auto b = compute_ground_truth(p.id, p.text, fx.bias_name, fx.classes, fx.question, gen, vqa,
                                  SynonymLexicon{}, OracleOptions{.n_images = 6,
                                                                  .master_seed = 99});
    CHECK(a.gt_words == b.gt_words);
    for (std::size_t i = 0; i < a.influence.size(); ++i) {
        CHECK(a.influence[i].num == b.influence[i].num);
        CHECK(a.influence[i].den == b.influence[i].den);
    }
}

TEST_CASE("exact score comparison orders rationals without floating error") {
    CHECK(ExactScore::compare({1, 3}, {2, 6}) == 0);    // 1/3 == 2/6
    CHECK(ExactScore::compare({1, 3}, {3, 8}) < 0);     // 0.333 < 0.375
    CHECK(ExactScore::compare({7, 10}, {2, 3}) > 0);    // 0.7 > 0.667
    CHECK_THROWS_AS(ExactScore::compare({1, 3}, {0, 0}), DataError);
}

TEST_CASE("brute force check agrees with the oracle on planted prompts") {
    auto fx = fixtures::make_fixture({.n_prompts = 6, .seed = 53});
    auto gen = fx.generator();
    auto vqa = fx.answer_model();
    SynonymLexicon lexicon;
    OracleOptions options{.n_images = 5, .master_seed = 13};
    for (const auto& p : fx.prompts) {
        auto gt = compute_ground_truth(p.id, p.text, fx.bias_name, fx.classes, fx.question, gen,
                                       vqa, lexicon, options);
        auto report = brute_force_check(gt, p.text, fx.classes, fx.question, gen, vqa, lexicon,
                                        options);
        INFO(report.summary());
        CHECK(report.ok);
    }
}

TEST_CASE("a corrupted score fails the brute force check naming the word") {
    auto fx = fixtures::make_fixture({.n_prompts = 1, .seed = 59});
    auto gen = fx.generator();
    auto vqa = fx.answer_model();
    SynonymLexicon lexicon;
    OracleOptions options{.n_images = 5, .master_seed = 13};
    const auto& p = fx.prompts[0];
    auto gt = compute_ground_truth(p.id, p.text, fx.bias_name, fx.classes, fx.question, gen, vqa,
                                   lexicon, options);
    gt.influence[1].num += 1;  // inject corruption
    auto report = brute_force_check(gt, p.text, fx.classes, fx.question, gen, vqa, lexicon,
                                    options);
    CHECK_FALSE(report.ok);
    bool names_word = false;
    for (const auto& d : report.diffs) {
        if (d.find(gt.candidates[1]) != std::string::npos) names_word = true;
    }
    CHECK(names_word);
    CHECK(report.summary().find("mismatch") != std::string::npos);
}

TEST_CASE("ground truth may use a different answer model than the rest of the pipeline") {
    auto fx = fixtures::make_fixture({.n_prompts = 2, .seed = 61});
    auto gen = fx.generator();
    // Same argmax decision boundary, different logits.
    auto vqa_a = fx.answer_model(1.0, 0.0);
    auto vqa_b = fx.answer_model(2.2, 0.7);
    OracleOptions options{.n_images = 8, .master_seed = 5};
    for (const auto& p : fx.prompts) {
        auto gt_a = compute_ground_truth(p.id, p.text, fx.bias_name, fx.classes, fx.question,
                                         gen, vqa_a, SynonymLexicon{}, options);
        auto gt_b = compute_ground_truth(p.id, p.text, fx.bias_name, fx.classes, fx.question,
                                         gen, vqa_b, SynonymLexicon{}, options);
        CHECK(gt_a.gt_words == gt_b.gt_words);  // identical decisions
    }
}

TEST_CASE("ground-truth records round-trip through JSON") {
    auto fx = fixtures::make_fixture({.n_prompts = 1, .seed = 67});
    auto gen = fx.generator();
    auto vqa = fx.answer_model();
    const auto& p = fx.prompts[0];
    auto gt = compute_ground_truth(p.id, p.text, fx.bias_name, fx.classes, fx.question, gen, vqa,
                                   SynonymLexicon{}, OracleOptions{.n_images = 4,
                                                                   .master_seed = 2});
    auto restored = GroundTruth::from_json(gt.to_json());
    CHECK(restored.candidates == gt.candidates);
    CHECK(restored.gt_words == gt.gt_words);
    REQUIRE(restored.influence.size() == gt.influence.size());
    for (std::size_t i = 0; i < gt.influence.size(); ++i) {
        CHECK(restored.influence[i].num == gt.influence[i].num);
        CHECK(restored.influence[i].den == gt.influence[i].den);
    }
}

TEST_CASE("oracle preconditions: images, candidates and desk-scale limits") {
    auto fx = fixtures::make_fixture({.n_prompts = 1, .seed = 71});
    auto gen = fx.generator();
    auto vqa = fx.answer_model();
    CHECK_THROWS_AS(compute_ground_truth("c", "a person", fx.bias_name, fx.classes, fx.question,
                                         gen, vqa, SynonymLexicon{}, OracleOptions{}),
                    NotComputableError);
    CHECK_THROWS_AS(compute_ground_truth("c", fx.prompts[0].text, fx.bias_name, fx.classes,
                                         fx.question, gen, vqa, SynonymLexicon{},
                                         OracleOptions{.n_images = 0}),
                    DataError);

    GroundTruth gt;
    gt.bias_name = fx.bias_name;
    std::string overlong = "a person with alpha beta gamma delta epsilon zeta eta theta iota";
    CHECK_THROWS_AS(brute_force_check(gt, overlong, fx.classes, fx.question, gen, vqa,
                                      SynonymLexicon{}, OracleOptions{}),
                    DataError);
}
