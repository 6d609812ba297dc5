#include "sgs/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>

#include <nlohmann/json.hpp>

#include "sgs/errors.hpp"
#include "sgs/scoring.hpp"

namespace sgs {

MetricsReport one_class_metrics(const std::vector<bool>& flagged) {
    if (flagged.empty()) throw InvalidInput("metrics need at least one prediction");
    MetricsReport r;
    r.n = flagged.size();
    r.n_flagged = static_cast<std::size_t>(std::count(flagged.begin(), flagged.end(), true));
    r.frac_flagged = static_cast<double>(r.n_flagged) / static_cast<double>(r.n);
    r.acc = r.frac_flagged;
    r.recall = r.frac_flagged;
    if (r.n_flagged > 0) {
        r.precision = 1.0;
        r.f1 = 2.0 * r.precision * r.recall / (r.precision + r.recall);
    }
    return r;
}

double median(std::vector<double> values) {
    if (values.empty()) throw InvalidInput("median of an empty list");
    const std::size_t mid = values.size() / 2;
    std::nth_element(values.begin(), values.begin() + mid, values.end());
    const double upper = values[mid];
    if (values.size() % 2) return upper;
    const double lower = *std::max_element(values.begin(), values.begin() + mid);
    return (lower + upper) / 2.0;
}

ScoreStats score_stats(std::span<const double> scores, SdFormula sd) {
    if (scores.empty()) throw InvalidInput("score statistics need at least one value");
    for (double s : scores)
        if (!std::isfinite(s)) throw InvalidInput("score statistics need finite values");

    // Welford keeps the variance accurate for long, tightly clustered lists.
    double mean = 0.0, m2 = 0.0;
    std::size_t k = 0;
    for (double s : scores) {
        ++k;
        const double d = s - mean;
        mean += d / static_cast<double>(k);
        m2 += d * (s - mean);
    }
    const std::size_t n = scores.size();
    double var = 0.0;
    if (sd == SdFormula::Population) var = m2 / static_cast<double>(n);
    else if (n > 1) var = m2 / static_cast<double>(n - 1);

    return {mean, std::sqrt(std::max(0.0, var)), median({scores.begin(), scores.end()})};
}

std::vector<SweepPoint> threshold_sweep(std::span<const double> scores, std::span<const double> taus,
                                        SdFormula sd) {
    if (taus.empty()) throw InvalidInput("threshold sweep needs at least one tau");
    const ScoreStats stats = score_stats(scores, sd);
    std::vector<SweepPoint> out;
    out.reserve(taus.size());
    for (double tau : taus) {
        if (!(tau >= 0.0 && tau <= 1.0)) throw InvalidInput("tau must lie in [0,1]");
        std::vector<bool> flagged;
        flagged.reserve(scores.size());
        for (double s : scores) flagged.push_back(decide(s, tau) == Label::Mismatch);
        SweepPoint p{tau, one_class_metrics(flagged)};
        p.metrics.score = stats;
        out.push_back(std::move(p));
    }
    return out;
}

Calibration calibrate_tau(std::span<const double> scores, double target_flag_rate) {
    if (scores.empty()) throw InvalidInput("calibration needs at least one score");
    if (!(target_flag_rate >= 0.0 && target_flag_rate <= 1.0))
        throw InvalidInput("target flag rate must lie in [0,1]");

    auto rate_at = [&](double tau) {
        const auto flagged = std::count_if(scores.begin(), scores.end(), [&](double s) { return s < tau; });
        return static_cast<double>(flagged) / static_cast<double>(scores.size());
    };
    double rate = 0.0;
    for (int k = 0; k <= 100; ++k) {
        const double tau = k / 100.0;
        rate = rate_at(tau);
        if (rate >= target_flag_rate) return {tau, rate, true};
    }
    return {1.0, rate, false};
}

double round_half_even(double x, int decimals) {
    const double scale = std::pow(10.0, decimals);
    return std::nearbyint(x * scale) / scale;
}

nlohmann::json to_json(const MetricsReport& r) {
    nlohmann::json j{
        {"n", r.n},
        {"n_flagged", r.n_flagged},
        {"frac_flagged", r.frac_flagged},
        {"acc", r.acc},
        {"precision", r.precision},
        {"recall", r.recall},
        {"f1", r.f1},
    };
    if (r.score)
        j["score"] = {{"mean", r.score->mean}, {"sd", r.score->sd}, {"median", r.score->median}};
    return j;
}

std::string summary(const MetricsReport& r) {
    char buf[256];
    std::string out;
    std::snprintf(buf, sizeof buf, "N             %zu\n%% flagged     %.1f\nAcc / F1      %.3f / %.3f\n",
                  r.n, round_half_even(r.frac_flagged * 100.0, 1), round_half_even(r.acc),
                  round_half_even(r.f1));
    out += buf;
    if (r.score) {
        std::snprintf(buf, sizeof buf, "score         %.3f +- %.3f (median %.3f)\n",
                      round_half_even(r.score->mean), round_half_even(r.score->sd),
                      round_half_even(r.score->median));
        out += buf;
    }
    return out;
}

}  // namespace sgs
