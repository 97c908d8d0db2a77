#include <gtest/gtest.h>

#include <cmath>

#include "pixelstorm/metrics.hpp"
#include "pixelstorm/serialize.hpp"
#include "support/fixtures.hpp"
#include "support/test_oracles.hpp"

using namespace pixelstorm;
using namespace pixelstorm::metrics;
using fixtures::one_hot;

namespace {

AttackOutcome outcome(bool success, std::size_t orig, std::size_t pred, double p = 0.9, std::size_t k = 10) {
    AttackOutcome o;
    o.id = "o";
    o.success = success;
    o.original_class = orig;
    o.predicted_class = pred;
    o.final_probs = ProbabilityVector(one_hot(pred, k, p));
    return o;
}

std::vector<AttackOutcome> targeted_group(const std::string& id, std::size_t truth, std::vector<std::size_t> wins,
                                          std::size_t k = 10) {
    std::vector<AttackOutcome> g;
    for (std::size_t t = 0; t < k; ++t) {
        if (t == truth)
            continue;
        const bool win = std::find(wins.begin(), wins.end(), t) != wins.end();
        auto o = outcome(win, truth, win ? t : truth, 0.8, k);
        o.id = id;
        o.mode = AttackMode::targeted;
        o.target_class = t;
        o.evaluations_used = win ? 800 : 40400;
        o.perturbation = {{1, 1, {win ? std::uint8_t(40) : std::uint8_t(10)}}};
        o.original_colors = {{10}};
        g.push_back(o);
    }
    return g;
}

} // namespace

TEST(SuccessRate, Examples) {
    std::vector v{outcome(true, 0, 1), outcome(false, 0, 0), outcome(false, 0, 0), outcome(true, 0, 2)};
    EXPECT_EQ(success_rate(v), 0.5);
    std::vector f(3, outcome(false, 0, 0));
    EXPECT_EQ(success_rate(f), 0.0);
    EXPECT_THROW(success_rate(std::vector<AttackOutcome>{}), UsageError);
}

TEST(Confidence, Examples) {
    std::vector v{outcome(true, 0, 1, 0.6), outcome(true, 0, 2, 0.8), outcome(false, 0, 0, 0.99)};
    EXPECT_NEAR(*confidence(v), 0.7, 1e-15);
    std::vector one{outcome(true, 0, 1, 1.0)};
    EXPECT_EQ(*confidence(one), 1.0);
    std::vector none{outcome(false, 0, 0)};
    EXPECT_FALSE(confidence(none).has_value());
}

TEST(Histogram, Examples) {
    std::vector<std::vector<AttackOutcome>> zero{targeted_group("a", 0, {}), targeted_group("b", 3, {})};
    const auto h0 = target_class_histogram(zero, 10);
    EXPECT_EQ(h0, (std::vector<std::size_t>{2, 0, 0, 0, 0, 0, 0, 0, 0, 0}));
    std::vector<std::vector<AttackOutcome>> all9{targeted_group("a", 4, {0, 1, 2, 3, 5, 6, 7, 8, 9})};
    EXPECT_EQ(target_class_histogram(all9, 10)[9], 1u);
    std::vector<std::vector<AttackOutcome>> mixed{targeted_group("a", 0, {1, 2}), targeted_group("b", 1, {0}),
                                                  targeted_group("c", 2, {0, 1}), targeted_group("d", 3, {})};
    EXPECT_EQ(target_class_histogram(mixed, 10), (std::vector<std::size_t>{1, 1, 2, 0, 0, 0, 0, 0, 0, 0}));
}

TEST(PairMatrix, Examples) {
    std::vector v{outcome(true, 3, 5), outcome(true, 3, 5), outcome(true, 5, 3), outcome(false, 3, 3)};
    const auto m = pair_matrix(v, 10);
    EXPECT_EQ(m[3][5], 2u);
    EXPECT_EQ(m[5][3], 1u);
    const auto t = class_totals(m);
    EXPECT_EQ(t.as_origin[3], 2u);
    EXPECT_EQ(t.as_target[3], 1u);

    std::vector none{outcome(false, 3, 3)};
    EXPECT_EQ(pair_matrix(none, 10), CountMatrix(10, std::vector<std::size_t>(10, 0)));
    EXPECT_EQ(class_totals(pair_matrix(none, 10)).as_target, std::vector<std::size_t>(10, 0));

    std::vector sym{outcome(true, 1, 2), outcome(true, 2, 1), outcome(true, 7, 0), outcome(true, 0, 7)};
    const auto s = pair_matrix(sym, 10);
    for (std::size_t a = 0; a < 10; ++a)
        for (std::size_t b = 0; b < 10; ++b)
            EXPECT_EQ(s[a][b], s[b][a]);

    std::vector bad{outcome(true, 4, 4)};
    EXPECT_THROW(pair_matrix(bad, 10), UsageError);
}

TEST(ClassTotals, RandomMatrixRecomputed) {
    Rng rng(17);
    CountMatrix m(6, std::vector<std::size_t>(6, 0));
    for (auto& row : m)
        for (auto& c : row)
            c = rng.below(9);
    const auto t = class_totals(m);
    for (std::size_t i = 0; i < 6; ++i) {
        std::size_t row = 0, col = 0;
        for (std::size_t j = 0; j < 6; ++j) {
            row += m[i][j];
            col += m[j][i];
        }
        EXPECT_EQ(t.as_origin[i], row);
        EXPECT_EQ(t.as_target[i], col);
    }
}

TEST(Distortion, Examples) {
    auto o = outcome(true, 0, 1);
    o.perturbation = {{0, 0, {110, 20, 30}}};
    o.original_colors = {{10, 20, 30}};
    EXPECT_NEAR(outcome_distortion(o), 100.0 / 3.0, 1e-12);
    EXPECT_NEAR(*average_distortion(std::vector{o}), 100.0 / 3.0, 1e-12);
    o.perturbation = {{0, 0, {10, 20, 30}}};
    EXPECT_EQ(*average_distortion(std::vector{o}), 0.0);
    EXPECT_FALSE(average_distortion(std::vector{outcome(false, 0, 0)}).has_value());
}

TEST(Distortion, MultiPixelAndRepeatedCoordinate) {
    auto o = outcome(true, 0, 1);
    // (0,0) moves 90 on one channel → 30; (2,1) counts only its last write → 5.
    o.perturbation = {{0, 0, {100, 20, 30}}, {2, 1, {40, 40, 40}}, {2, 1, {15, 15, 15}}};
    o.original_colors = {{10, 20, 30}, {10, 10, 10}, {10, 10, 10}};
    EXPECT_NEAR(outcome_distortion(o), (30.0 + 5.0) / 2.0, 1e-12);
}

TEST(AverageEvaluations, SuccessesOnly) {
    auto a = outcome(true, 0, 1);
    a.evaluations_used = 800;
    auto b = outcome(true, 0, 1);
    b.evaluations_used = 1200;
    auto c = outcome(false, 0, 0);
    c.evaluations_used = 40400;
    EXPECT_EQ(*average_evaluations(std::vector{a, b, c}), 1000.0);
    EXPECT_FALSE(average_evaluations(std::vector{c}).has_value());
}

TEST(AggregateTraces, Examples) {
    using T = std::vector<de::TracePoint>;
    std::vector<T> same{T{{0, 1, 0}, {1, 2, 0}}, T{{0, 1, 0}, {1, 2, 0}}};
    EXPECT_EQ(aggregate_traces(same), (std::vector<double>{1, 2}));
    std::vector<T> consts{T{{0, 0.2, 0}, {1, 0.2, 0}}, T{{0, 0.4, 0}, {1, 0.4, 0}}};
    const auto c = aggregate_traces(consts);
    EXPECT_NEAR(c[0], 0.3, 1e-15);
    EXPECT_NEAR(c[1], 0.3, 1e-15);
    // Ragged: [0.1, 0.5] padded to [0.1, 0.5, 0.5, 0.5]; other is [0.3, 0.3, 0.7, 0.9].
    std::vector<T> ragged{T{{0, 0.1, 0}, {1, 0.5, 0}}, T{{0, 0.3, 0}, {1, 0.3, 0}, {2, 0.7, 0}, {3, 0.9, 0}}};
    const auto r = aggregate_traces(ragged);
    ASSERT_EQ(r.size(), 4u);
    EXPECT_NEAR(r[0], 0.2, 1e-15);
    EXPECT_NEAR(r[1], 0.4, 1e-15);
    EXPECT_NEAR(r[2], 0.6, 1e-15);
    EXPECT_NEAR(r[3], 0.7, 1e-15);
}

TEST(RandomBaseline, ConstantOracleFailsAfterExactBudget) {
    const auto o = fixtures::constant_oracle({4, 4, 3, 10, {}}, one_hot(2, 10));
    CountingOracle counted(o);
    const auto out = random_one_pixel_attack(counted, {fixtures::noise_image(4, 4, 3, 1), 2, "c"}, {100, 3});
    EXPECT_FALSE(out.success);
    EXPECT_EQ(out.evaluations_used, 100u);
    EXPECT_EQ(counted.count(), 100u);
    EXPECT_EQ(out.mode, AttackMode::random);
}

TEST(RandomBaseline, FlippingOracleSucceedsAndRunsAllAttempts) {
    const auto img = fixtures::noise_image(4, 4, 3, 1);
    const auto o = fixtures::change_oracle({4, 4, 3, 10, {}}, img, one_hot(2, 10), one_hot(7, 10, 0.9));
    CountingOracle counted(o);
    const auto out = random_one_pixel_attack(counted, {img, 2, "f"}, {100, 3}, 16);
    EXPECT_TRUE(out.success);
    EXPECT_EQ(out.predicted_class, 7u);
    EXPECT_EQ(counted.count(), 100u);
    EXPECT_EQ(pixel_l0_distance(img, out.adversarial_image), 1u);
}

TEST(RandomBaseline, DeterministicAndBatchIndependent) {
    const auto model = fixtures::linear_8x8();
    const LabeledImage li{fixtures::noise_image(8, 8, 1, 5), model.predict(fixtures::noise_image(8, 8, 1, 5)).argmax(),
                          "x"};
    const auto a = random_one_pixel_attack(model, li, {300, 9}, 512);
    const auto b = random_one_pixel_attack(model, li, {300, 9}, 7);
    EXPECT_EQ(a.perturbation, b.perturbation);
    EXPECT_EQ(a.final_probs, b.final_probs);
}

TEST(RandomBaseline, LinearFixtureMatchesExhaustiveFlipProbability) {
    const auto model = fixtures::linear_8x8();
    const std::size_t attempts = 20;
    double expected = 0, variance = 0;
    std::size_t observed = 0;
    for (std::uint64_t i = 0; i < 100; ++i) {
        const auto img = fixtures::noise_image(8, 8, 1, derive_seed(31, i));
        const auto z0 = fixtures::reference_linear_logits(model.weights(), model.bias(), img);
        const std::size_t cls = fixtures::reference_argmax(fixtures::reference_softmax(z0));
        std::size_t flips = 0;
        for (std::size_t px = 0; px < 64; ++px)
            for (int u = 0; u < 256; ++u) {
                std::vector<double> z(z0.size());
                for (std::size_t k = 0; k < z.size(); ++k)
                    z[k] = z0[k] + model.weights()(k, px) * (u - img.data()[px]) / 255.0;
                flips += fixtures::reference_argmax(z) != cls;
            }
        const double q = static_cast<double>(flips) / (64.0 * 256.0);
        const double p = 1.0 - std::pow(1.0 - q, static_cast<double>(attempts));
        expected += p;
        variance += p * (1 - p);
        observed += random_one_pixel_attack(model, {img, cls, "r" + std::to_string(i)}, {attempts, 77}).success;
    }
    EXPECT_GT(expected, 5.0);
    EXPECT_LT(expected, 95.0);
    EXPECT_LE(std::abs(static_cast<double>(observed) - expected), 4.0 * std::sqrt(variance) + 1.0)
        << "observed " << observed << ", expected " << expected;
}

TEST(Report, HandBuiltTargetedFixture) {
    // Image a (class 0) reaches classes 1, 2; image b (class 1) reaches 0; image c reaches nothing.
    std::vector<std::vector<AttackOutcome>> groups{targeted_group("a", 0, {1, 2}), targeted_group("b", 1, {0}),
                                                   targeted_group("c", 2, {})};
    const auto r = build_report(groups, 10);
    EXPECT_EQ(r.images, 3u);
    EXPECT_EQ(r.targeted_attacks, 27u);
    EXPECT_EQ(r.targeted_successes, 3u);
    EXPECT_NEAR(*r.success_rate_targeted, 3.0 / 27.0, 1e-15);
    EXPECT_NEAR(*r.success_rate_nontargeted, 2.0 / 3.0, 1e-15);
    EXPECT_NEAR(*r.confidence, 0.8, 1e-15);
    EXPECT_EQ(*r.target_class_histogram, (std::vector<std::size_t>{1, 1, 1, 0, 0, 0, 0, 0, 0, 0}));
    EXPECT_EQ(r.pair_matrix[0][1], 1u);
    EXPECT_EQ(r.pair_matrix[0][2], 1u);
    EXPECT_EQ(r.pair_matrix[1][0], 1u);
    EXPECT_EQ(r.class_totals.as_origin[0], 2u);
    EXPECT_EQ(r.class_totals.as_target[0], 1u);
    EXPECT_EQ(*r.avg_evaluations, 800.0);
    EXPECT_EQ(*r.avg_distortion, 30.0);

    const auto j = report_to_json(r);
    EXPECT_EQ(j.at("targeted").at("attacks"), 27);
    EXPECT_EQ(histogram_csv(*r.target_class_histogram).substr(0, 25), "target_classes,images\n0,1");
}

TEST(Report, NontargetedHasNoHistogram) {
    std::vector<std::vector<AttackOutcome>> groups{{outcome(true, 0, 3)}, {outcome(false, 1, 1)}};
    const auto r = build_report(groups, 10);
    EXPECT_FALSE(r.target_class_histogram.has_value());
    EXPECT_FALSE(r.success_rate_targeted.has_value());
    EXPECT_EQ(*r.success_rate_nontargeted, 0.5);
    std::vector<std::vector<AttackOutcome>> mixed{{outcome(true, 0, 3), outcome(true, 0, 3)}};
    EXPECT_THROW(build_report(mixed, 10), UsageError);
}

TEST(Serialize, OutcomeRoundTrip) {
    const auto model = fixtures::corner_cnn();
    auto li = fixtures::corner_images(model, 1, 3)[0];
    AttackSpec spec = AttackSpec::from_preset(Preset::kaggle_cifar10, 3, 5);
    spec.de.population_size = 12;
    spec.de.max_generations = 2;
    const auto o = run_targeted_attack(model, li, (li.true_class + 1) % 8, spec);
    const auto back = outcome_from_json(outcome_to_json(o));
    EXPECT_EQ(back.id, o.id);
    EXPECT_EQ(back.mode, o.mode);
    EXPECT_EQ(back.success, o.success);
    EXPECT_EQ(back.perturbation, o.perturbation);
    EXPECT_EQ(back.original_colors, o.original_colors);
    EXPECT_EQ(back.final_probs, o.final_probs);
    EXPECT_EQ(back.target_class, o.target_class);
    EXPECT_EQ(back.evaluations_used, o.evaluations_used);
    EXPECT_EQ(back.generations_run, o.generations_run);
    EXPECT_EQ(back.stopped_early, o.stopped_early);
    EXPECT_EQ(outcome_to_json(back).dump(), outcome_to_json(o).dump());
}
