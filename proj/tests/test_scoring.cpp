#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "sgs/errors.hpp"
#include "sgs/scoring.hpp"
#include "test_support.hpp"

namespace sgs {
namespace {

using test::stem_for_bucket;
using test::TempDir;
using test::write_image;

TEST(Cosine, BasicIdentities) {
    const std::vector<double> x{0.3, -1.2, 4.0};
    std::vector<double> neg{-0.3, 1.2, -4.0};
    EXPECT_DOUBLE_EQ(cosine(x, x), 1.0);
    EXPECT_DOUBLE_EQ(cosine(x, neg), -1.0);
    EXPECT_DOUBLE_EQ(cosine(std::vector<double>{1, 0, 0}, std::vector<double>{0, 1, 0}), 0.0);
}

TEST(Cosine, Errors) {
    EXPECT_THROW(cosine(std::vector<double>{0, 0}, std::vector<double>{1, 0}), DegenerateEmbedding);
    EXPECT_THROW(cosine(std::vector<double>{1, 0}, std::vector<double>{1, 0, 0}), InvalidInput);
}

TEST(Cosine, ClampedAgainstOvershoot) {
    std::mt19937_64 rng(3);
    std::uniform_real_distribution<double> d(-1e3, 1e3);
    for (int t = 0; t < 2000; ++t) {
        std::vector<double> v(1 + rng() % 50);
        for (auto& e : v) e = d(rng);
        const double c = cosine(v, v);
        EXPECT_LE(c, 1.0);
        EXPECT_GE(c, -1.0);
    }
}

TEST(CosineProperty, SymmetricAndScaleInvariant) {
    std::mt19937_64 rng(11);
    std::uniform_real_distribution<double> d(-5, 5);
    std::uniform_real_distribution<double> scale(1e-3, 1e3);
    for (int t = 0; t < 1000; ++t) {
        const std::size_t n = 1 + rng() % 20;
        std::vector<double> u(n), v(n);
        for (auto& e : u) e = d(rng);
        for (auto& e : v) e = d(rng);
        EXPECT_EQ(cosine(u, v), cosine(v, u));
        const double a = scale(rng), b = scale(rng);
        std::vector<double> au(u), bv(v);
        for (auto& e : au) e *= a;
        for (auto& e : bv) e *= b;
        EXPECT_NEAR(cosine(au, bv), cosine(u, v), 1e-12);
    }
}

TEST(NormalizeScore, PiecewiseExamples) {
    EXPECT_DOUBLE_EQ(normalize_score(0.7), 0.7);
    EXPECT_DOUBLE_EQ(normalize_score(-1.0), 0.0);
    EXPECT_DOUBLE_EQ(normalize_score(-0.5), 0.25);
    EXPECT_DOUBLE_EQ(normalize_score(1.0), 1.0);
    EXPECT_DOUBLE_EQ(normalize_score(1.0 + 1e-12), 1.0);
}

TEST(NormalizeScore, JumpAtZero) {
    EXPECT_EQ(normalize_score(0.0), 0.0);
    EXPECT_NEAR(normalize_score(-1e-9), 0.5, 1e-9);
    EXPECT_LT(normalize_score(-1e-9), 0.5);
}

TEST(NormalizeScore, NonFiniteRejected) {
    EXPECT_THROW(normalize_score(std::nan("")), InvalidInput);
    EXPECT_THROW(normalize_score(INFINITY), InvalidInput);
}

TEST(NormalizeScoreProperty, BranchesAndRange) {
    std::mt19937_64 rng(5);
    std::uniform_real_distribution<double> d(-1.0, 1.0);
    for (int t = 0; t < 5000; ++t) {
        const double s = d(rng);
        const double n = normalize_score(s);
        if (s >= 0) EXPECT_EQ(n, s);
        else EXPECT_EQ(n, (s + 1.0) / 2.0);
        EXPECT_GE(n, 0.0);
        EXPECT_LE(n, 1.0);
    }
}

TEST(Decide, BoundaryIsInclusive) {
    EXPECT_EQ(decide(0.55, 0.55), Label::Match);
    EXPECT_EQ(decide(0.238, 0.55), Label::Mismatch);
    EXPECT_EQ(decide(1.0, 0.0), Label::Match);
    EXPECT_EQ(decide(0.0, 0.0), Label::Match);
    EXPECT_EQ(decide(std::nextafter(0.55, 0.0), 0.55), Label::Mismatch);
}

TEST(DecideProperty, MonotoneInScore) {
    std::mt19937_64 rng(9);
    std::uniform_real_distribution<double> d(0.0, 1.0);
    for (int t = 0; t < 2000; ++t) {
        const double tau = d(rng), a = d(rng), b = d(rng);
        const double lo = std::min(a, b), hi = std::max(a, b);
        if (decide(lo, tau) == Label::Match) EXPECT_EQ(decide(hi, tau), Label::Match);
    }
}

class ScorePairTest : public ::testing::Test {
protected:
    CropPair make(std::size_t fg_bucket, std::size_t bg_bucket) {
        const auto fg = dir / "fg" / (stem_for_bucket(fg_bucket, "f") + ".png");
        const auto bg = dir / "bg" / (stem_for_bucket(bg_bucket, "b") + ".png");
        write_image(fg);
        write_image(bg, 20, 10);
        return {"p", fg, bg};
    }
    TempDir dir;
    Backends backends{BackendConfig::stubs()};
};

TEST_F(ScorePairTest, SameCaptionIsFullMatch) {
    const auto r = std::get<ScoredPair>(score_pair(make(7, 7), backends, kDefaultTau));
    EXPECT_EQ(r.fg_text, r.bg_text);
    EXPECT_DOUBLE_EQ(r.raw_cosine, 1.0);
    EXPECT_DOUBLE_EQ(r.sts01, 1.0);
    EXPECT_EQ(r.label, Label::Match);
}

TEST_F(ScorePairTest, DisjointCaptionsAreMismatch) {
    const auto r = std::get<ScoredPair>(score_pair(make(0, 1), backends, kDefaultTau));
    EXPECT_EQ(r.fg_text, "a man");
    EXPECT_EQ(r.bg_text, "red desert");
    EXPECT_DOUBLE_EQ(r.raw_cosine, 0.0);
    EXPECT_DOUBLE_EQ(r.sts01, 0.0);
    EXPECT_EQ(r.label, Label::Mismatch);
}

TEST_F(ScorePairTest, PartialOverlapHandComputed) {
    // {a, man, giving, speech} vs {a, woman, giving, speech, at, podium}: 3 / sqrt(24)
    const auto r = std::get<ScoredPair>(score_pair(make(5, 3), backends, kDefaultTau));
    EXPECT_NEAR(r.raw_cosine, 3.0 / std::sqrt(24.0), 1e-12);
    EXPECT_EQ(r.sts01, r.raw_cosine);
    EXPECT_EQ(r.label, Label::Match);
    EXPECT_EQ(std::get<ScoredPair>(score_pair(make(5, 3), backends, 0.62)).label, Label::Mismatch);
}

TEST_F(ScorePairTest, UnreadableCropIsFailureRecord) {
    auto pair = make(0, 1);
    pair.fg_path = dir / "missing.png";
    const auto out = score_pair(pair, backends, kDefaultTau);
    ASSERT_TRUE(std::holds_alternative<PairFailure>(out));
    const auto& f = std::get<PairFailure>(out);
    EXPECT_EQ(f.id, "p");
    EXPECT_EQ(f.stage, PairFailure::Stage::Decode);
    EXPECT_NE(f.message.find("missing.png"), std::string::npos);
}

TEST_F(ScorePairTest, DeterministicAndInvariantsHold) {
    for (std::size_t a = 0; a < stub::caption_table().size(); ++a) {
        for (std::size_t b = 0; b < stub::caption_table().size(); ++b) {
            const auto pair = make(a, b);
            const auto r1 = std::get<ScoredPair>(score_pair(pair, backends, 0.4));
            const auto r2 = std::get<ScoredPair>(score_pair(pair, backends, 0.4));
            EXPECT_EQ(r1, r2);
            EXPECT_EQ(r1.sts01, normalize_score(r1.raw_cosine));
            EXPECT_EQ(r1.label == Label::Match, r1.sts01 >= 0.4);
        }
    }
}

TEST_F(ScorePairTest, TauOutsideUnitIntervalThrows) {
    EXPECT_THROW(score_pair(make(0, 0), backends, 1.5), InvalidInput);
}

}  // namespace
}  // namespace sgs
