#pragma once

#include <algorithm>
#include <atomic>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include "sgs/backends.hpp"
#include "sgs/baselines.hpp"
#include "sgs/cascade.hpp"
#include "sgs/evaluation.hpp"
#include "sgs/pairing.hpp"
#include "sgs/scoring.hpp"

namespace sgs {

enum class RunMode { Score, BaselineGap, BaselineDistance, BaselineVlm, Cascade, Evaluate };

std::string_view to_string(RunMode m);
std::optional<RunMode> parse_run_mode(std::string_view s);

namespace exit_code {
inline constexpr int kOk = 0;
inline constexpr int kUsage = 2;
inline constexpr int kNoPairs = 3;
inline constexpr int kOutputIo = 4;
}  // namespace exit_code

struct DownstreamSpec {
    std::optional<std::string> command;  // shell template, see CommandClient
    std::optional<std::string> url;      // http:// endpoint, see HttpClient
    double timeout_seconds = 30.0;
    std::size_t max_in_flight = 1;
};

struct RunConfig {
    RunMode mode = RunMode::Score;
    PairingSpec pairing;
    BackendConfig backends;
    double tau = kDefaultTau;
    std::filesystem::path out_path;
    std::uint64_t seed = 0;
    std::size_t jobs = 1;
    SdFormula sd = SdFormula::Sample;

    MismatchPolicy policy = MismatchPolicy::SkipOnMismatch;
    DownstreamSpec downstream;
    std::string role_text = render_role_prompt(kDefaultRoleTemplate, kDefaultRole);
    std::string vlm_prompt = kDefaultVlmPrompt;

    // evaluate mode: re-score an existing output CSV
    std::optional<std::filesystem::path> scores_path;
    std::vector<double> sweep_taus;
    std::optional<double> calibrate_target;

    // Throws ConfigError.
    void validate() const;
};

// Sidecar names: results.csv -> results.metrics.json / results.errors.csv /
// results.routing.csv
std::filesystem::path metrics_path_for(const std::filesystem::path& out);
std::filesystem::path errors_path_for(const std::filesystem::path& out);
std::filesystem::path routing_path_for(const std::filesystem::path& out);

// sts01 and other reals in output CSVs: fixed, six decimals.
std::string format_real(double v);

inline constexpr const char* kScoreHeader = "id,fg_path,bg_path,fg_text,bg_text,sts01,label";

/// Writes the scored-pair CSV. UTF-8, LF line endings, standard quoting.
/// Throws IoError when the file cannot be written.
void write_rows(const std::vector<ScoredPair>& rows, const std::filesystem::path& out_path);
void write_rows(const std::vector<ScoredPair>& rows, std::ostream& out);

// Reads a CSV written by write_rows. tau is attached to every row.
std::vector<ScoredPair> read_rows(const std::filesystem::path& path, double tau = kDefaultTau);

void write_gap_csv(const std::vector<GapResult>& rows, const std::filesystem::path& out);
void write_distance_csv(const std::vector<DistanceResult>& rows, const std::filesystem::path& out);
void write_vlm_csv(const std::vector<VlmResult>& rows, const std::filesystem::path& out);
void write_routing_csv(const std::vector<RoutingDecision>& rows, const std::filesystem::path& out);
void write_errors_csv(const std::vector<PairFailure>& failures, const std::filesystem::path& out);

template <class T>
struct BatchResult {
    std::vector<T> ok;  // input order, failed pairs omitted
    std::vector<PairFailure> failures;
};

/// Applies fn to every pair on `jobs` worker threads and collects the
/// outcomes in input order.
template <class T, class Fn>
BatchResult<T> map_pairs(const std::vector<CropPair>& pairs, std::size_t jobs, Fn&& fn) {
    std::vector<std::optional<PairOutcome<T>>> slots(pairs.size());
    const std::size_t workers = std::max<std::size_t>(1, std::min(jobs, pairs.size()));
    if (workers == 1) {
        for (std::size_t i = 0; i < pairs.size(); ++i) slots[i].emplace(fn(pairs[i]));
    } else {
        std::atomic<std::size_t> next{0};
        std::vector<std::jthread> pool;
        for (std::size_t w = 0; w < workers; ++w)
            pool.emplace_back([&] {
                for (std::size_t i; (i = next++) < pairs.size();) slots[i].emplace(fn(pairs[i]));
            });
    }
    BatchResult<T> out;
    for (auto& s : slots) {
        if (auto* v = std::get_if<T>(&*s)) out.ok.push_back(std::move(*v));
        else out.failures.push_back(std::move(std::get<PairFailure>(*s)));
    }
    return out;
}

BatchResult<ScoredPair> score_batch(const std::vector<CropPair>& pairs, Backends& backends, double tau,
                                    std::size_t jobs = 1);

/// Executes one batch run and writes its artifacts. Diagnostics go to `err`,
/// the human-readable summary to `out`. Returns an exit_code value.
int run(const RunConfig& config, std::ostream& out, std::ostream& err);

}  // namespace sgs
