#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <map>
#include <random>

#include "sgs/baselines.hpp"
#include "sgs/errors.hpp"
#include "sgs/evaluation.hpp"
#include "test_support.hpp"

namespace sgs {
namespace {

using test::TempDir;
using test::write_image;

// Image vector (s, sqrt(1 - s^2)) against text vector (1, 0) gives cosine s,
// so each crop's similarity can be dialled in by filename.
class DialJointEncoder final : public JointEncoder {
public:
    explicit DialJointEncoder(std::map<std::string, double> sims) : sims_(std::move(sims)) {}
    Embedding embed_image(const ImageTensor& image) override {
        const double s = sims_.at(image.source.stem().string());
        return {{s, std::sqrt(1.0 - s * s)}};
    }
    Embedding embed_text(const std::string&) override { return {{1.0, 0.0}}; }

private:
    std::map<std::string, double> sims_;
};

class FixedVisionEncoder final : public VisionEncoder {
public:
    Embedding embed(const ImageTensor& image) override {
        const auto stem = image.source.stem().string();
        if (stem == "e1") return {{3.0, 0.0}};
        if (stem == "e2") return {{0.0, 0.5}};
        if (stem == "neg") return {{-2.0, 0.0}};
        if (stem == "zero") return {{0.0, 0.0}};
        return {{1.0, 0.0}};
    }
};

class BaselineTest : public ::testing::Test {
protected:
    CropPair pair(const std::string& id, const std::string& fg, const std::string& bg) {
        write_image(dir / "fg" / (fg + ".png"));
        write_image(dir / "bg" / (bg + ".png"));
        return {id, dir / "fg" / (fg + ".png"), dir / "bg" / (bg + ".png")};
    }
    TempDir dir;
};

TEST_F(BaselineTest, GapTestFromDialledEncoder) {
    BackendRegistry::global().add_joint_encoder("test-dial", [](const BackendConfig&) {
        return std::make_shared<DialJointEncoder>(
            std::map<std::string, double>{{"fg03", 0.3}, {"bg05", 0.5}, {"same", 0.4}});
    });
    auto cfg = BackendConfig::stubs();
    cfg.joint_encoder_id = "test-dial";
    Backends b(cfg);

    const auto g = std::get<GapResult>(gap_test(pair("x", "fg03", "bg05"), "a photo of a person", b));
    EXPECT_NEAR(g.s_fg, 0.3, 1e-12);
    EXPECT_NEAR(g.s_bg, 0.5, 1e-12);
    EXPECT_NEAR(g.delta, -0.2, 1e-12);
    EXPECT_EQ(g.label, Consistency::Inconsistent);

    const auto tie = std::get<GapResult>(gap_test(pair("t", "same", "same"), "a photo of a person", b));
    EXPECT_EQ(tie.delta, 0.0);
    EXPECT_EQ(tie.label, Consistency::Consistent);

    EXPECT_THROW(gap_test(pair("x", "fg03", "bg05"), " ", b), InvalidInput);
}

TEST_F(BaselineTest, GapTestNeedsJointEncoder) {
    Backends b(BackendConfig::stubs());
    EXPECT_THROW(gap_test(pair("x", "a", "b"), "a photo of a person", b), ConfigError);
}

TEST_F(BaselineTest, GapTestDecodeFailureIsRecorded) {
    auto cfg = BackendConfig::stubs();
    cfg.joint_encoder_id = "stub";
    Backends b(cfg);
    auto p = pair("x", "a", "b");
    p.bg_path = dir / "nope.png";
    const auto out = gap_test(p, "a photo of a person", b);
    ASSERT_TRUE(std::holds_alternative<PairFailure>(out));
    EXPECT_EQ(std::get<PairFailure>(out).stage, PairFailure::Stage::Decode);
}

TEST(GapProperty, SwapNegatesDelta) {
    std::mt19937_64 rng(4);
    std::uniform_real_distribution<double> d(-1, 1);
    for (int t = 0; t < 1000; ++t) {
        const double a = d(rng), b = t % 10 == 0 ? a : d(rng);
        const auto fwd = make_gap_result("p", a, b);
        const auto rev = make_gap_result("p", b, a);
        EXPECT_EQ(fwd.delta, -rev.delta);
        if (fwd.delta != 0.0) EXPECT_NE(fwd.label, rev.label);
        else EXPECT_EQ(fwd.label, Consistency::Consistent);
    }
}

TEST(RolePrompt, TemplateSubstitution) {
    EXPECT_EQ(render_role_prompt(kDefaultRoleTemplate, kDefaultRole), "a photo of a person");
    EXPECT_EQ(render_role_prompt("{role} and {role}", "x"), "x and x");
    EXPECT_EQ(render_role_prompt("no placeholder", "x"), "no placeholder");
}

TEST(UnitDistance, Examples) {
    const Embedding a{{2.0, 0.0}}, same{{5.0, 0.0}}, orth{{0.0, 0.1}}, anti{{-1.0, 0.0}};
    EXPECT_DOUBLE_EQ(unit_distance(a, same), 0.0);
    EXPECT_NEAR(unit_distance(a, orth), std::sqrt(2.0), 1e-12);
    EXPECT_DOUBLE_EQ(unit_distance(a, anti), 2.0);
    EXPECT_THROW(unit_distance(a, Embedding{{0.0, 0.0}}), DegenerateEmbedding);
    EXPECT_THROW(unit_distance(a, Embedding{{1.0}}), InvalidInput);
}

TEST(UnitDistanceProperty, SymmetricAndBounded) {
    std::mt19937_64 rng(8);
    std::normal_distribution<double> d;
    for (int t = 0; t < 1000; ++t) {
        Embedding f, b;
        for (int i = 0; i < 16; ++i) {
            f.values.push_back(d(rng));
            b.values.push_back(d(rng));
        }
        const double x = unit_distance(f, b);
        EXPECT_EQ(x, unit_distance(b, f));
        EXPECT_GE(x, 0.0);
        EXPECT_LE(x, 2.0);
    }
}

TEST_F(BaselineTest, FeatureDistanceThroughBackends) {
    BackendRegistry::global().add_vision_encoder(
        "test-fixed", [](const BackendConfig&) { return std::make_shared<FixedVisionEncoder>(); });
    auto cfg = BackendConfig::stubs();
    cfg.vision_encoder_id = "test-fixed";
    Backends b(cfg);
    EXPECT_NEAR(std::get<DistanceResult>(feature_distance(pair("o", "e1", "e2"), b)).distance,
                std::sqrt(2.0), 1e-12);
    EXPECT_DOUBLE_EQ(std::get<DistanceResult>(feature_distance(pair("n", "e1", "neg"), b)).distance, 2.0);
    EXPECT_DOUBLE_EQ(std::get<DistanceResult>(feature_distance(pair("s", "e1", "other"), b)).distance, 0.0);
    const auto z = feature_distance(pair("z", "e1", "zero"), b);
    ASSERT_TRUE(std::holds_alternative<PairFailure>(z));
    EXPECT_EQ(std::get<PairFailure>(z).stage, PairFailure::Stage::Degenerate);

    Backends none(BackendConfig::stubs());
    EXPECT_THROW(feature_distance(pair("o", "e1", "e2"), none), ConfigError);
}

std::vector<DistanceResult> distances(std::initializer_list<double> ds) {
    std::vector<DistanceResult> out;
    int i = 0;
    for (double d : ds) out.push_back({"d" + std::to_string(i++), d, std::nullopt});
    return out;
}

std::vector<bool> flags(const MedianLabels& m) {
    std::vector<bool> f;
    for (const auto& r : m.results) f.push_back(r.label == Consistency::Inconsistent);
    return f;
}

TEST(MedianThreshold, EvenCountTableThreeCase) {
    const auto m = median_threshold(distances({1, 2, 3, 4}));
    EXPECT_EQ(m.median, 2.5);
    EXPECT_EQ(flags(m), (std::vector<bool>{false, false, true, true}));
    const auto metrics = one_class_metrics(flags(m));
    EXPECT_EQ(round_half_even(metrics.acc), 0.5);
    EXPECT_EQ(round_half_even(metrics.f1), 0.667);
}

TEST(MedianThreshold, DegenerateLists) {
    EXPECT_EQ(flags(median_threshold(distances({1.2, 1.2, 1.2}))), (std::vector<bool>(3, false)));
    EXPECT_EQ(flags(median_threshold(distances({0.7}))), std::vector<bool>{false});
    EXPECT_THROW(median_threshold({}), InvalidInput);
}

TEST(MedianThresholdProperty, FlagsFloorHalfOnDistinctLists) {
    std::mt19937_64 rng(12);
    std::uniform_real_distribution<double> d(0, 2);
    for (int t = 0; t < 500; ++t) {
        std::vector<DistanceResult> rs;
        const std::size_t n = 1 + rng() % 60;
        for (std::size_t i = 0; i < n; ++i) rs.push_back({std::to_string(i), d(rng), std::nullopt});
        const auto m = median_threshold(rs);
        const auto f = flags(m);
        EXPECT_EQ(static_cast<std::size_t>(std::count(f.begin(), f.end(), true)), n / 2);
        for (std::size_t i = 0; i < n; ++i) EXPECT_EQ(m.results[i].id, rs[i].id);
    }
}

TEST(MapYesNo, LeadingToken) {
    EXPECT_EQ(map_yes_no("No, the scene is implausible."), Consistency::Inconsistent);
    EXPECT_EQ(map_yes_no("YES"), Consistency::Consistent);
    EXPECT_EQ(map_yes_no("  \"yes\" - it fits"), Consistency::Consistent);
    EXPECT_EQ(map_yes_no("no."), Consistency::Inconsistent);
    EXPECT_EQ(map_yes_no("Nope"), Consistency::Unparsed);
    EXPECT_EQ(map_yes_no("Maybe yes"), Consistency::Unparsed);
    EXPECT_EQ(map_yes_no(""), Consistency::Unparsed);
    EXPECT_EQ(map_yes_no("123 ..."), Consistency::Unparsed);
}

TEST(MapYesNoProperty, TotalOverRandomBytes) {
    std::mt19937_64 rng(13);
    for (int t = 0; t < 5000; ++t) {
        std::string s(rng() % 40, '\0');
        for (auto& c : s) c = static_cast<char>(rng() % 256);
        const auto c = map_yes_no(s);
        EXPECT_TRUE(c == Consistency::Consistent || c == Consistency::Inconsistent ||
                    c == Consistency::Unparsed);
    }
}

TEST_F(BaselineTest, VlmStubAnswersAreMapped) {
    auto cfg = BackendConfig::stubs();
    cfg.vlm_id = "stub";
    Backends b(cfg);
    int seen = 0;
    for (int i = 0; i < 12; ++i) {
        const auto r = std::get<VlmResult>(vlm_check(pair(std::to_string(i), "f" + std::to_string(i),
                                                          "b" + std::to_string(i)),
                                                     kDefaultVlmPrompt, b));
        EXPECT_EQ(r.label, map_yes_no(r.answer));
        seen |= 1 << static_cast<int>(r.label);
    }
    EXPECT_EQ(seen, 0b111) << "stub should produce all three outcomes over 12 pairs";
}

}  // namespace
}  // namespace sgs
