#include <doctest.h>

#include <cmath>

#include "biasaudit/gradbias.hpp"
#include "support/fixtures.hpp"

using namespace biasaudit;

namespace {

// CE loss recomputed from first principles for the closed-form checks.
double ce_of(const std::vector<double>& logits, std::size_t target) {
    double lse = log_sum_exp(logits);
    return lse - logits[target];
}

struct FixedLogitsVqa : AnswerModelBackend {
    std::vector<double> logits;
    explicit FixedLogitsVqa(std::vector<double> l) : logits(std::move(l)) {}
    AnswerLogits answer_logits(const Image&, const std::string&,
                               const std::vector<std::string>& classes) const override {
        AnswerLogits out;
        out.classes = classes;
        out.logits = logits;
        return out;
    }
    std::string fingerprint() const override { return "fixed-logits"; }
};

}  // namespace

TEST_CASE("gradbias loss is the cross entropy against the predicted class") {
    auto fx = fixtures::make_fixture({.n_prompts = 1, .seed = 1, .noise_scale = 0.0});
    auto gen = fx.generator();
    auto trace = gen.generate(fx.prompts[0].text, 0);

    // logits (3.0, -1.0): target 0, loss = -ln softmax_0 ≈ 0.01815.
    FixedLogitsVqa vqa({3.0, -1.0});
    auto [loss, target] = gradbias_loss(*trace, vqa, fx.question, fx.classes);
    CHECK(target == 0);
    CHECK(loss == doctest::Approx(std::log(1.0 + std::exp(-4.0))).epsilon(1e-12));
    CHECK(loss == doctest::Approx(0.01815).epsilon(1e-3));
    CHECK(loss >= 0.0);
}

TEST_CASE("equal logits over k classes give loss ln k") {
    auto fx = fixtures::make_fixture({.n_prompts = 1, .seed = 2, .noise_scale = 0.0});
    auto gen = fx.generator();
    auto trace = gen.generate(fx.prompts[0].text, 0);
    for (std::size_t k : {2, 3, 5}) {
        FixedLogitsVqa vqa(std::vector<double>(k, 0.7));
        std::vector<std::string> classes;
        for (std::size_t i = 0; i < k; ++i) classes.push_back("c" + std::to_string(i));
        auto [loss, target] = gradbias_loss(*trace, vqa, fx.question, classes);
        CHECK(target == 0);
        CHECK(loss == doctest::Approx(std::log(static_cast<double>(k))).epsilon(1e-12));
    }
}

TEST_CASE("the argmax target minimizes the cross entropy over all classes") {
    DetRng rng(7);
    auto fx = fixtures::make_fixture({.n_prompts = 1, .seed = 3});
    auto gen = fx.generator();
    auto trace = gen.generate(fx.prompts[0].text, 0);
    for (int trial = 0; trial < 30; ++trial) {
        std::vector<double> logits{rng.uniform(-3, 3), rng.uniform(-3, 3), rng.uniform(-3, 3)};
        FixedLogitsVqa vqa(logits);
        auto [loss, target] = gradbias_loss(*trace, vqa, fx.question, {"a", "b", "c"});
        for (std::size_t c = 0; c < logits.size(); ++c) {
            CHECK(loss <= ce_of(logits, c) + 1e-12);
        }
        CHECK(target == argmax_lowest(logits));
    }
}

TEST_CASE("steps_for_interval matches the 1-based modulo schedule") {
    CHECK(steps_for_interval(10, 1).size() == 10);
    CHECK(steps_for_interval(10, 2) == std::vector<int>{2, 4, 6, 8, 10});
    CHECK(steps_for_interval(10, 5) == std::vector<int>{5, 10});
    CHECK(steps_for_interval(10, 10) == std::vector<int>{10});
    // Interval beyond the schedule: only the final step.
    CHECK(steps_for_interval(10, 50) == std::vector<int>{10});
    CHECK_THROWS_AS(steps_for_interval(10, 0), DataError);
}

TEST_CASE("per-token gradient scalars match central finite differences") {
    // Default squared feature map, noise on, multi-token words in play.
    auto fx = fixtures::make_fixture({.n_prompts = 5, .seed = 17, .noise_scale = 0.2});
    auto gen = fx.generator();
    auto vqa = fx.answer_model();
    GradBiasOptions options{.n_images = 1, .step_interval = 3, .master_seed = 9};

    const double h = 1e-4;
    for (const auto& prompt : fx.prompts) {
        auto trace = gen.generate(prompt.text, derive_seed(9, prompt.id, 0));
        auto [loss, target] = gradbias_loss(*trace, vqa, fx.question, fx.classes);
        (void)loss;
        auto analytic = token_gradients(*trace, vqa, fx.question, fx.classes, target, options);

        auto steps = steps_for_interval(trace->steps(), options.step_interval);
        const Matrix& base = trace->prompt().embeddings;
        std::vector<double> fd(base.rows(), 0.0);
        for (int step : steps) {
            for (std::size_t t = 0; t < base.rows(); ++t) {
                double l1 = 0.0;
                for (std::size_t v = 0; v < base.cols(); ++v) {
                    Matrix plus = base, minus = base;
                    plus(t, v) += h;
                    minus(t, v) -= h;
                    auto loss_at = [&](const Matrix& emb) {
                        auto features = trace->step_features_at(step, emb);
                        auto lj = vqa.answer_logits_jacobian(features, fx.question, fx.classes);
                        return ce_of(lj.logits.logits, target);
                    };
                    l1 += std::abs((loss_at(plus) - loss_at(minus)) / (2 * h));
                }
                fd[t] += l1;
            }
        }
        for (auto& v : fd) v /= static_cast<double>(steps.size());

        for (std::size_t t = 0; t < fd.size(); ++t) {
            double denom = std::max({std::abs(analytic[t]), std::abs(fd[t]), 1e-10});
            CHECK(std::abs(analytic[t] - fd[t]) / denom < 1e-4);
        }
    }
}

TEST_CASE("special tokens and zero-weight words get exactly zero gradient") {
    auto fx = fixtures::make_fixture({.n_prompts = 1, .seed = 23, .noise_scale = 0.1});
    auto world = fx.world;
    world.vocabulary.push_back("ghost");
    world.word_weights["ghost"] = {0.0, 0.0};
    PlantedGenerator gen(world, fx.gen_cfg);
    auto vqa = PlantedAnswerModel(world, 1.0, 0.0, -6.0, -12.0);

    auto trace = gen.generate("a person in the kitchen with a ghost", 4);
    auto [loss, target] = gradbias_loss(*trace, vqa, fx.question, fx.classes);
    (void)loss;
    GradBiasOptions options;
    auto scalars = token_gradients(*trace, vqa, fx.question, fx.classes, target, options);

    const auto& tp = trace->prompt();
    // BOS and EOS are unassigned.
    CHECK(scalars.front() == 0.0);
    CHECK(scalars.back() == 0.0);
    for (std::size_t w = 0; w < tp.words.size(); ++w) {
        if (tp.words[w] == "ghost") {
            for (std::size_t t = tp.token_spans[w].begin; t < tp.token_spans[w].end; ++t) {
                CHECK(scalars[t] == 0.0);
            }
        }
        if (tp.words[w] == "kitchen") {
            for (std::size_t t = tp.token_spans[w].begin; t < tp.token_spans[w].end; ++t) {
                CHECK(scalars[t] > 0.0);
            }
        }
    }
}

TEST_CASE("word influence recovers the planted dominant word") {
    auto fx = fixtures::make_fixture({.n_prompts = 8, .seed = 31});
    auto gen = fx.generator();
    auto vqa = fx.answer_model();
    for (const auto& prompt : fx.prompts) {
        auto ranking = word_influence(prompt.id, prompt.text, fx.bias_name, fx.classes,
                                      fx.question, gen, vqa, SynonymLexicon{},
                                      GradBiasOptions{.n_images = 3, .master_seed = 5});
        CHECK(ranking.ranking.front() == prompt.dominant);
        CHECK(ranking.candidates.size() == 5);  // person + stopwords excluded
        for (double s : ranking.scores) {
            CHECK(s >= 0.0);
            CHECK(std::isfinite(s));
        }
    }
}

TEST_CASE("rankings are bit-identical across repeated runs") {
    auto fx = fixtures::make_fixture({.n_prompts = 2, .seed = 37});
    auto gen = fx.generator();
    auto vqa = fx.answer_model();
    GradBiasOptions options{.n_images = 4, .master_seed = 12};
    const auto& p = fx.prompts[0];
    auto a = word_influence(p.id, p.text, fx.bias_name, fx.classes, fx.question, gen, vqa,
                            SynonymLexicon{}, options);
    auto b = word_influence(p.id, p.text, fx.bias_name, fx.classes, fx.question, gen, vqa,
                            SynonymLexicon{}, options);
    CHECK(a.scores == b.scores);  // bitwise
    CHECK(a.ranking == b.ranking);
}

TEST_CASE("scaling the loss scales scores and preserves the ranking") {
    auto fx = fixtures::make_fixture({.n_prompts = 1, .seed = 41});
    auto gen = fx.generator();
    auto vqa = fx.answer_model();
    const auto& p = fx.prompts[0];
    GradBiasOptions base{.n_images = 2, .master_seed = 3};
    GradBiasOptions scaled = base;
    scaled.loss_scale = 3.5;
    auto r1 = word_influence(p.id, p.text, fx.bias_name, fx.classes, fx.question, gen, vqa,
                             SynonymLexicon{}, base);
    auto r2 = word_influence(p.id, p.text, fx.bias_name, fx.classes, fx.question, gen, vqa,
                             SynonymLexicon{}, scaled);
    CHECK(r1.ranking == r2.ranking);
    for (std::size_t i = 0; i < r1.scores.size(); ++i) {
        CHECK(r2.scores[i] == doctest::Approx(3.5 * r1.scores[i]).epsilon(1e-12));
    }
}

TEST_CASE("identical planted weights tie and break by earliest position") {
    PlantedWorld world;
    world.classes = {"male", "female"};
    world.vocabulary = {"person", "alpha", "beta", "gamma"};
    world.word_weights["alpha"] = {2.0, 0.0};
    world.word_weights["beta"] = {2.0, 0.0};
    world.word_weights["gamma"] = {2.0, 0.0};
    world.base_logit = {0.0, 0.0};
    PlantedGenerator gen(world, PlantedGeneratorConfig{});
    PlantedAnswerModel vqa(world, 1.0, 0.0, -6.0, -12.0);

    auto r = word_influence("t", "a person with beta and gamma and alpha", "person gender",
                            {"male", "female"}, "What is the gender of the person?", gen, vqa,
                            SynonymLexicon{}, GradBiasOptions{.n_images = 1, .master_seed = 0});
    CHECK(r.ranking == std::vector<std::string>{"beta", "gamma", "alpha"});
}

TEST_CASE("raising a word's planted weight never lowers its rank") {
    std::size_t last_rank = 99;
    for (double boost : {0.5, 1.0, 2.0, 6.0, 12.0, 20.0}) {
        PlantedWorld world;
        world.classes = {"male", "female"};
        world.vocabulary = {"person", "target", "rival"};
        world.word_weights["target"] = {boost, 0.0};
        world.word_weights["rival"] = {4.0, 0.0};
        world.base_logit = {0.0, 0.0};
        PlantedGenerator gen(world, PlantedGeneratorConfig{});
        PlantedAnswerModel vqa(world, 1.0, 0.0, -6.0, -12.0);
        auto r = word_influence("t", "a person with a target and a rival", "person gender",
                                {"male", "female"}, "What is the gender of the person?", gen,
                                vqa, SynonymLexicon{},
                                GradBiasOptions{.n_images = 1, .master_seed = 0});
        std::size_t rank = static_cast<std::size_t>(
            std::find(r.ranking.begin(), r.ranking.end(), "target") - r.ranking.begin());
        CHECK(rank <= last_rank);
        last_rank = rank;
    }
}

TEST_CASE("answer models sharing a decision boundary give stable top-1 attributions") {
    // Two distinct affine answer models with the same argmax decisions: the
    // fraction of prompts where the top-ranked word matches stays within 5
    // percentage points.
    auto fx = fixtures::make_fixture({.n_prompts = 30, .seed = 73});
    auto gen = fx.generator();
    auto vqa_a = fx.answer_model(1.0, 0.0);
    auto vqa_b = fx.answer_model(2.2, 0.7);
    GradBiasOptions options{.n_images = 2, .master_seed = 21};
    std::size_t agree = 0;
    for (const auto& p : fx.prompts) {
        auto ra = word_influence(p.id, p.text, fx.bias_name, fx.classes, fx.question, gen, vqa_a,
                                 SynonymLexicon{}, options);
        auto rb = word_influence(p.id, p.text, fx.bias_name, fx.classes, fx.question, gen, vqa_b,
                                 SynonymLexicon{}, options);
        agree += ra.ranking.front() == rb.ranking.front();
    }
    double agreement = 100.0 * static_cast<double>(agree) / fx.prompts.size();
    CHECK(agreement >= 95.0);
}

TEST_CASE("every tested image count produces a valid ranking") {
    auto fx = fixtures::make_fixture({.n_prompts = 2, .seed = 79});
    auto gen = fx.generator();
    auto vqa = fx.answer_model();
    const auto& p = fx.prompts[0];
    for (std::size_t n : {1, 2, 5, 10}) {
        auto r = word_influence(p.id, p.text, fx.bias_name, fx.classes, fx.question, gen, vqa,
                                SynonymLexicon{},
                                GradBiasOptions{.n_images = n, .master_seed = 4});
        CHECK(r.ranking.size() == r.candidates.size());
        CHECK(r.ranking.front() == p.dominant);
        CHECK(r.metadata["n_images"] == n);
        CHECK(r.metadata["targets"].size() == n);
    }
}

TEST_CASE("the gradient concurrency cap does not change results") {
    auto fx = fixtures::make_fixture({.n_prompts = 2, .seed = 83});
    auto gen = fx.generator();
    auto vqa = fx.answer_model();
    const auto& p = fx.prompts[1];
    GradBiasOptions serial{.n_images = 8, .master_seed = 6};
    GradBiasOptions pooled = serial;
    pooled.concurrency = 4;
    auto a = word_influence(p.id, p.text, fx.bias_name, fx.classes, fx.question, gen, vqa,
                            SynonymLexicon{}, serial);
    auto b = word_influence(p.id, p.text, fx.bias_name, fx.classes, fx.question, gen, vqa,
                            SynonymLexicon{}, pooled);
    CHECK(a.scores == b.scores);  // bitwise
    CHECK(a.ranking == b.ranking);
}

TEST_CASE("word influence refuses prompts where every word is excluded") {
    auto fx = fixtures::make_fixture({.n_prompts = 1, .seed = 43});
    auto gen = fx.generator();
    auto vqa = fx.answer_model();
    CHECK_THROWS_AS(word_influence("t", "a person", fx.bias_name, fx.classes, fx.question, gen,
                                   vqa, SynonymLexicon{}, GradBiasOptions{}),
                    NotComputableError);
}

TEST_CASE("non-differentiable backends are refused with a clear error") {
    struct OpaqueGenerator : GeneratorBackend {
        std::unique_ptr<GenerationTrace> generate(const std::string&,
                                                  std::uint64_t) const override {
            throw BackendError("unreachable");
        }
        bool differentiable() const override { return false; }
        std::string fingerprint() const override { return "opaque"; }
    } gen;
    auto fx = fixtures::make_fixture({.n_prompts = 1});
    auto vqa = fx.answer_model();
    CHECK_THROWS_AS(word_influence("t", "a person in the kitchen", fx.bias_name, fx.classes,
                                   fx.question, gen, vqa, SynonymLexicon{}, GradBiasOptions{}),
                    NotDifferentiableError);
}

TEST_CASE("candidate extraction applies exclusion rules") {
    SynonymLexicon lexicon(std::map<std::string, std::vector<std::string>>{{"gender", {"sex"}}, {"male", {"masculine", "chef"}}});
    auto candidates = extract_candidates("A male chef in the kitchen shows his sex appeal",
                                         "person gender", {"male", "female"}, lexicon);
    // "male" (class), "chef" (synonym of a class), "sex" (synonym of a bias
    // word), stop words and "his" are all gone; content words stay.
    REQUIRE(candidates.size() == 3);
    CHECK(candidates[0].word == "kitchen");
    CHECK(candidates[1].word == "shows");
    CHECK(candidates[2].word == "appeal");

    // Duplicate surface words collapse to the first occurrence.
    auto dupes = extract_candidates("kitchen near the kitchen", "person gender",
                                    {"male", "female"}, SynonymLexicon{});
    REQUIRE(dupes.size() == 1);
    CHECK(dupes[0].position == 0);
}
