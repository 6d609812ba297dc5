#pragma once

#include <optional>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

namespace sgs {

enum class SdFormula { Sample, Population };

struct ScoreStats {
    double mean = 0.0;
    double sd = 0.0;
    double median = 0.0;
};

// One-class protocol: every item is a true positive, so a prediction is
// correct exactly when it is flagged.
struct MetricsReport {
    std::size_t n = 0;
    std::size_t n_flagged = 0;
    double frac_flagged = 0.0;
    double acc = 0.0;
    double precision = 0.0;
    double recall = 0.0;
    double f1 = 0.0;
    std::optional<ScoreStats> score;
};

/// Acc/F1 against all-1 labels. acc = recall = fraction flagged; precision is
/// 1 when anything is flagged; f1 = 2 acc / (1 + acc), 0 when nothing is.
/// Throws InvalidInput on an empty list.
MetricsReport one_class_metrics(const std::vector<bool>& flagged);

// Mean, standard deviation and median (mean of the middle two for even n).
ScoreStats score_stats(std::span<const double> scores, SdFormula sd = SdFormula::Sample);

double median(std::vector<double> values);

struct SweepPoint {
    double tau = 0.0;
    MetricsReport metrics;
};

// For each tau (each in [0,1]) an item is flagged when its score < tau.
std::vector<SweepPoint> threshold_sweep(std::span<const double> scores, std::span<const double> taus,
                                        SdFormula sd = SdFormula::Sample);

struct Calibration {
    double tau = 0.0;
    double achieved_rate = 0.0;
    bool reachable = true;  // false: tau = 1.0 and achieved_rate is the best the grid allows
};

// Smallest tau on the 0.00, 0.01, ..., 1.00 grid whose flag rate reaches target.
Calibration calibrate_tau(std::span<const double> scores, double target_flag_rate);

double round_half_even(double x, int decimals = 3);

nlohmann::json to_json(const MetricsReport& report);
// Human-readable block, values rounded to three decimals.
std::string summary(const MetricsReport& report);

}  // namespace sgs
