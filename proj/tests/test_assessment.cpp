#include <doctest.h>

#include <algorithm>

#include "biasaudit/assessment.hpp"

using namespace biasaudit;

namespace {

// Answer model that replays a scripted list of per-image winners. The image
// feature [0] indexes into the script; "u" means unknown wins.
class ScriptedVqa : public AnswerModelBackend {
public:
    explicit ScriptedVqa(std::vector<std::string> winners) : winners_(std::move(winners)) {}

    AnswerLogits answer_logits(const Image& image, const std::string&,
                               const std::vector<std::string>& classes) const override {
        AnswerLogits out;
        out.classes = classes;
        out.logits.assign(classes.size(), -1.0);
        auto idx = static_cast<std::size_t>(image.features.at(0));
        const std::string& winner = winners_.at(idx);
        for (std::size_t c = 0; c < classes.size(); ++c) {
            if (to_lower(classes[c]) == to_lower(winner)) out.logits[c] = 1.0;
        }
        return out;
    }
    std::string fingerprint() const override { return "scripted-vqa"; }

private:
    std::vector<std::string> winners_;
};

std::vector<Image> indexed_images(std::size_t n) {
    std::vector<Image> images;
    for (std::size_t i = 0; i < n; ++i) {
        images.push_back(Image{"planted.features.v1", {static_cast<double>(i)}, {}});
    }
    return images;
}

ClassDistribution dist_of(std::vector<std::string> winners,
                          std::vector<std::string> classes = {"male", "female"}) {
    ScriptedVqa vqa(winners);
    return context_aware_distribution(vqa, indexed_images(winners.size()), "q?", classes);
}

}  // namespace

TEST_CASE("predict_class takes the argmax and reports unknown separately") {
    // logits (male: 2.1, female: 0.3, unknown: -1.0) -> male
    struct FixedVqa : AnswerModelBackend {
        AnswerLogits answer_logits(const Image&, const std::string&,
                                   const std::vector<std::string>& classes) const override {
            AnswerLogits out;
            out.classes = classes;
            out.logits = {2.1, 0.3, -1.0};
            return out;
        }
        std::string fingerprint() const override { return "fixed"; }
    } vqa;
    Image img;
    auto pred = predict_class(vqa, img, "q?", {"male", "female"});
    REQUIRE(pred.has_value());
    CHECK(*pred == 0);
}

TEST_CASE("equal logits fall to the first class by the tie rule") {
    struct FlatVqa : AnswerModelBackend {
        AnswerLogits answer_logits(const Image&, const std::string&,
                                   const std::vector<std::string>& classes) const override {
            AnswerLogits out;
            out.classes = classes;
            out.logits.assign(classes.size(), 0.5);
            return out;
        }
        std::string fingerprint() const override { return "flat"; }
    } vqa;
    auto pred = predict_class(vqa, Image{}, "q?", {"a", "b", "c"});
    REQUIRE(pred.has_value());
    CHECK(*pred == 0);
}

TEST_CASE("unknown wins return the sentinel") {
    struct UnknownVqa : AnswerModelBackend {
        AnswerLogits answer_logits(const Image&, const std::string&,
                                   const std::vector<std::string>& classes) const override {
            AnswerLogits out;
            out.classes = classes;
            out.logits.assign(classes.size(), 0.0);
            out.logits.back() = 3.0;  // classes ∪ {"unknown"}: sentinel wins
            return out;
        }
        std::string fingerprint() const override { return "unknown"; }
    } unknown_vqa;
    CHECK_FALSE(predict_class(unknown_vqa, Image{}, "q?", {"a", "b"}).has_value());
}

TEST_CASE("class list preconditions reject duplicates and the unknown name") {
    ScriptedVqa vqa({"x"});
    auto images = indexed_images(1);
    CHECK_THROWS_AS(predict_class(vqa, images[0], "q?", {"a", "a"}), DataError);
    CHECK_THROWS_AS(predict_class(vqa, images[0], "q?", {"a", "Unknown"}), DataError);
    CHECK_THROWS_AS(predict_class(vqa, images[0], "q?", {}), DataError);
}

TEST_CASE("context-aware counting: 7 male + 3 female over 10 images") {
    auto dist = dist_of({"male", "male", "male", "male", "male", "male", "male",
                         "female", "female", "female"});
    CHECK(dist.probs[0] == doctest::Approx(0.7));
    CHECK(dist.probs[1] == doctest::Approx(0.3));
    CHECK(dist.n_counted == 10);
    CHECK(dist.n_total == 10);
}

TEST_CASE("unknown answers renormalize by denominator reduction") {
    // 8 x male + 2 x unknown over {male, female} -> (1.0, 0.0), n_counted = 8.
    auto dist = dist_of({"male", "male", "male", "male", "male", "male", "male", "male",
                         "unknown", "unknown"});
    CHECK(dist.probs[0] == 1.0);
    CHECK(dist.probs[1] == 0.0);
    CHECK(dist.n_counted == 8);
    CHECK(dist.n_total == 10);
    double sum = dist.probs[0] + dist.probs[1];
    CHECK(sum == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("all-unknown answers produce the distinguished empty state") {
    auto dist = dist_of({"unknown", "unknown", "unknown"});
    CHECK(dist.empty());
    CHECK(dist.probs.empty());
    CHECK(dist.n_counted == 0);
    CHECK(dist.n_total == 3);
}

TEST_CASE("permuting images leaves the distribution unchanged") {
    std::vector<std::string> winners{"male", "female", "male", "unknown", "female", "male"};
    auto base = dist_of(winners);
    std::sort(winners.begin(), winners.end());
    do {
        auto permuted = dist_of(winners);
        CHECK(permuted.probs == base.probs);
        CHECK(permuted.n_counted == base.n_counted);
    } while (std::next_permutation(winners.begin(), winners.end()));
}

TEST_CASE("context-free averages per-caption distributions with equal weight") {
    auto a = dist_of({"male", "male", "male", "male", "female"});          // (0.8, 0.2)
    auto b = dist_of({"male", "male", "female", "female", "female"});      // (0.4, 0.6)
    auto combined = context_free_distribution({a, b});
    CHECK(combined.probs[0] == doctest::Approx(0.6));
    CHECK(combined.probs[1] == doctest::Approx(0.4));

    // Captions weigh equally even when their counted answers differ.
    auto c = dist_of({"male", "unknown", "unknown", "unknown", "unknown"});  // (1.0, 0.0), n=1
    auto d = dist_of({"female", "female", "female", "female", "female"});
    auto uneven = context_free_distribution({c, d});
    CHECK(uneven.probs[0] == doctest::Approx(0.5));
}

TEST_CASE("context-free over a singleton equals the input exactly") {
    auto a = dist_of({"male", "male", "female"});
    auto reduced = context_free_distribution({a});
    CHECK(reduced.classes == a.classes);
    CHECK(reduced.probs == a.probs);  // bitwise equality
    CHECK(reduced.n_counted == a.n_counted);
    CHECK(reduced.n_total == a.n_total);
}

TEST_CASE("context-free mean oracle on three captions") {
    auto a = dist_of({"male", "male"});                    // (1, 0)
    auto b = dist_of({"female", "female"});                // (0, 1)
    auto c = dist_of({"male", "female"});                  // (0.5, 0.5)
    auto combined = context_free_distribution({a, b, c});
    CHECK(combined.probs[0] == doctest::Approx(0.5));
    CHECK(combined.probs[1] == doctest::Approx(0.5));
}

TEST_CASE("empty per-caption distributions are excluded from the mean") {
    auto a = dist_of({"unknown", "unknown"});
    auto b = dist_of({"male", "male"});
    auto combined = context_free_distribution({a, b});
    CHECK(combined.probs[0] == 1.0);

    auto all_empty = context_free_distribution({a});
    CHECK(all_empty.empty());
}

TEST_CASE("permuting captions leaves the context-free distribution unchanged") {
    auto a = dist_of({"male", "male", "female"});
    auto b = dist_of({"female", "female", "male"});
    auto c = dist_of({"male", "female", "female"});
    auto fwd = context_free_distribution({a, b, c});
    auto rev = context_free_distribution({c, b, a});
    CHECK(fwd.probs == rev.probs);
}

TEST_CASE("mismatched class lists across captions are rejected") {
    auto a = dist_of({"male"});
    auto b = dist_of({"red"}, {"red", "blue"});
    CHECK_THROWS_AS(context_free_distribution({a, b}), DataError);
}

TEST_CASE("probabilities sum to 1 under any mix of unknown answers") {
    DetRng rng(404);
    const std::vector<std::string> options{"male", "female", "unknown"};
    for (int trial = 0; trial < 100; ++trial) {
        std::vector<std::string> winners;
        std::size_t n = 1 + rng.below(12);
        for (std::size_t i = 0; i < n; ++i) {
            winners.push_back(options[rng.below(options.size())]);
        }
        auto dist = dist_of(winners);
        if (dist.empty()) continue;
        double sum = 0.0;
        for (double p : dist.probs) sum += p;
        CHECK(std::abs(sum - 1.0) <= 1e-9);
        CHECK(dist.n_counted <= dist.n_total);
    }
}

TEST_CASE("distributions round-trip through JSON") {
    auto a = dist_of({"male", "male", "unknown", "female"});
    auto restored = ClassDistribution::from_json(a.to_json());
    CHECK(restored.classes == a.classes);
    CHECK(restored.probs == a.probs);
    CHECK(restored.counts == a.counts);
    CHECK(restored.n_counted == a.n_counted);
    CHECK(restored.n_total == a.n_total);
}
