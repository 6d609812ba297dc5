#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <random>

#include <nlohmann/json.hpp>

#include "sgs/errors.hpp"
#include "sgs/evaluation.hpp"

namespace sgs {
namespace {

std::vector<bool> batch(std::size_t n, std::size_t flagged) {
    std::vector<bool> v(n, false);
    std::fill_n(v.begin(), flagged, true);
    return v;
}

TEST(OneClassMetrics, TableOneFraction) {
    const auto m = one_class_metrics(batch(1000, 943));
    EXPECT_DOUBLE_EQ(m.acc, 0.943);
    EXPECT_DOUBLE_EQ(m.recall, 0.943);
    EXPECT_DOUBLE_EQ(m.precision, 1.0);
    EXPECT_NEAR(m.f1, 0.971, 0.0005);
}

TEST(OneClassMetrics, AllAndNothingFlagged) {
    const auto all = one_class_metrics(batch(7, 7));
    EXPECT_DOUBLE_EQ(all.acc, 1.0);
    EXPECT_DOUBLE_EQ(all.f1, 1.0);
    const auto none = one_class_metrics(batch(7, 0));
    EXPECT_DOUBLE_EQ(none.acc, 0.0);
    EXPECT_DOUBLE_EQ(none.f1, 0.0);
    EXPECT_DOUBLE_EQ(none.precision, 0.0);
}

TEST(OneClassMetrics, F1FormulaAgainstTables) {
    // 2r/(1+r) evaluated by hand
    EXPECT_NEAR(one_class_metrics(batch(1000, 328)).f1, 0.4939759036, 1e-9);
    EXPECT_NEAR(one_class_metrics(batch(1000, 500)).f1, 2.0 / 3.0, 1e-12);
    EXPECT_EQ(round_half_even(one_class_metrics(batch(1000, 328)).f1), 0.494);
    EXPECT_EQ(round_half_even(one_class_metrics(batch(1000, 500)).f1), 0.667);
}

TEST(OneClassMetrics, EmptyRejected) { EXPECT_THROW(one_class_metrics({}), InvalidInput); }

TEST(OneClassMetricsProperty, F1IdentityAndPermutationInvariance) {
    std::mt19937_64 rng(21);
    for (int t = 0; t < 1000; ++t) {
        std::vector<bool> labels(1 + rng() % 300);
        for (auto&& l : labels) l = rng() % 2;
        const auto m = one_class_metrics(labels);
        EXPECT_EQ(m.acc, m.frac_flagged);
        EXPECT_NEAR(m.f1, 2.0 * m.acc / (1.0 + m.acc), 1e-9);
        std::shuffle(labels.begin(), labels.end(), rng);
        const auto p = one_class_metrics(labels);
        EXPECT_EQ(p.acc, m.acc);
        EXPECT_EQ(p.f1, m.f1);
    }
}

TEST(ScoreStats, SimpleLists) {
    const std::vector<double> constant{0.2, 0.2, 0.2};
    const auto c = score_stats(constant);
    EXPECT_NEAR(c.mean, 0.2, 1e-15);
    EXPECT_NEAR(c.sd, 0.0, 1e-15);
    EXPECT_EQ(c.median, 0.2);

    const std::vector<double> two{0.0, 1.0};
    const auto t = score_stats(two);
    EXPECT_EQ(t.mean, 0.5);
    EXPECT_EQ(t.median, 0.5);

    const std::vector<double> one{0.4};
    EXPECT_EQ(score_stats(one).sd, 0.0);
}

TEST(ScoreStats, TwentyValueListMatchesIndependentRecomputation) {
    // expected values from Python's statistics module (fmean, stdev, pstdev, median)
    const std::vector<double> xs{0.12, 0.48, 0.33, 0.91, 0.05, 0.27, 0.66, 0.19, 0.74, 0.38,
                                 0.21, 0.59, 0.44, 0.08, 0.83, 0.15, 0.52, 0.29, 0.97, 0.36};
    const auto s = score_stats(xs);
    EXPECT_NEAR(s.mean, 0.4285, 1e-12);
    EXPECT_NEAR(s.sd, 0.27883734175661395, 1e-12);
    EXPECT_NEAR(s.median, 0.37, 1e-12);
    EXPECT_NEAR(score_stats(xs, SdFormula::Population).sd, 0.27177702257549297, 1e-12);
}

TEST(ScoreStats, InvalidInputs) {
    EXPECT_THROW(score_stats(std::vector<double>{}), InvalidInput);
    EXPECT_THROW(score_stats(std::vector<double>{0.1, NAN}), InvalidInput);
}

TEST(ThresholdSweep, HandEnumeratedExamples) {
    std::vector<double> scores;
    for (int i = 1; i <= 9; ++i) scores.push_back(i / 10.0);
    const std::vector<double> taus{0.0, 0.55, 1.0};
    const auto sweep = threshold_sweep(scores, taus);
    ASSERT_EQ(sweep.size(), 3u);
    EXPECT_EQ(sweep[0].metrics.n_flagged, 0u);
    EXPECT_EQ(sweep[1].metrics.n_flagged, 5u);
    EXPECT_DOUBLE_EQ(sweep[1].metrics.frac_flagged, 5.0 / 9.0);
    EXPECT_EQ(sweep[2].metrics.n_flagged, 9u);
    ASSERT_TRUE(sweep[1].metrics.score);
    EXPECT_NEAR(sweep[1].metrics.score->mean, 0.5, 1e-12);
}

TEST(ThresholdSweep, TauOutsideUnitIntervalRejected) {
    const std::vector<double> scores{0.5};
    EXPECT_THROW(threshold_sweep(scores, std::vector<double>{1.0001}), InvalidInput);
    EXPECT_THROW(threshold_sweep(scores, std::vector<double>{}), InvalidInput);
    EXPECT_THROW(threshold_sweep(std::vector<double>{}, std::vector<double>{0.5}), InvalidInput);
}

TEST(CalibrateTau, HandEnumeratedExamples) {
    const std::vector<double> high(5, 0.9);
    EXPECT_EQ(calibrate_tau(high, 0.0).tau, 0.0);

    const std::vector<double> four{0.2, 0.4, 0.6, 0.8};
    const auto half = calibrate_tau(four, 0.5);
    EXPECT_DOUBLE_EQ(half.tau, 0.41);
    EXPECT_DOUBLE_EQ(half.achieved_rate, 0.5);
    EXPECT_TRUE(half.reachable);

    const auto all = calibrate_tau(four, 1.0);
    EXPECT_DOUBLE_EQ(all.tau, 0.81);
    EXPECT_TRUE(all.reachable);
}

TEST(CalibrateTau, UnreachableTargetReportsBestRate) {
    const std::vector<double> with_one{0.3, 1.0};
    const auto c = calibrate_tau(with_one, 1.0);
    EXPECT_FALSE(c.reachable);
    EXPECT_EQ(c.tau, 1.0);
    EXPECT_DOUBLE_EQ(c.achieved_rate, 0.5);
    EXPECT_THROW(calibrate_tau(with_one, 1.5), InvalidInput);
}

TEST(RoundHalfEven, TiesGoToEven) {
    EXPECT_EQ(round_half_even(0.5, 0), 0.0);
    EXPECT_EQ(round_half_even(1.5, 0), 2.0);
    EXPECT_EQ(round_half_even(2.5, 0), 2.0);
    EXPECT_EQ(round_half_even(0.97066), 0.971);
}

TEST(Report, JsonCarriesEveryField) {
    auto m = one_class_metrics(batch(4, 3));
    m.score = ScoreStats{0.1, 0.2, 0.3};
    const auto j = to_json(m);
    EXPECT_EQ(j["n"], 4);
    EXPECT_EQ(j["n_flagged"], 3);
    EXPECT_DOUBLE_EQ(j["acc"].get<double>(), 0.75);
    EXPECT_DOUBLE_EQ(j["score"]["median"].get<double>(), 0.3);
    EXPECT_NE(summary(m).find("0.750 / 0.857"), std::string::npos) << summary(m);
}

}  // namespace
}  // namespace sgs
