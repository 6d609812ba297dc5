#include "sgs/runner.hpp"

#include <cstdio>
#include <fstream>
#include <map>
#include <ostream>

#include <nlohmann/json.hpp>

#include "sgs/csv.hpp"
#include "sgs/errors.hpp"

namespace sgs {

namespace fs = std::filesystem;
using nlohmann::json;

std::string_view to_string(RunMode m) {
    switch (m) {
        case RunMode::Score: return "score";
        case RunMode::BaselineGap: return "baseline_gap";
        case RunMode::BaselineDistance: return "baseline_distance";
        case RunMode::BaselineVlm: return "baseline_vlm";
        case RunMode::Cascade: return "cascade";
        case RunMode::Evaluate: return "evaluate";
    }
    return "score";
}

std::optional<RunMode> parse_run_mode(std::string_view s) {
    for (auto m : {RunMode::Score, RunMode::BaselineGap, RunMode::BaselineDistance, RunMode::BaselineVlm,
                   RunMode::Cascade, RunMode::Evaluate})
        if (to_string(m) == s) return m;
    return std::nullopt;
}

void RunConfig::validate() const {
    if (!(tau >= 0.0 && tau <= 1.0)) throw ConfigError("tau must lie in [0,1]");
    if (out_path.empty()) throw ConfigError("an output path is required");
    if (jobs < 1) throw ConfigError("jobs must be at least 1");
    if (backends.max_tokens < 1) throw ConfigError("max tokens must be positive");
    for (double t : sweep_taus)
        if (!(t >= 0.0 && t <= 1.0)) throw ConfigError("sweep taus must lie in [0,1]");
    if (calibrate_target && !(*calibrate_target >= 0.0 && *calibrate_target <= 1.0))
        throw ConfigError("calibration target must lie in [0,1]");

    if (mode == RunMode::Evaluate) {
        if (!scores_path) throw ConfigError("evaluate mode needs a scores CSV");
        return;
    }
    pairing.validate();
    switch (mode) {
        case RunMode::BaselineGap:
            if (!backends.joint_encoder_id) throw ConfigError("baseline_gap needs a joint encoder");
            if (role_text.find_first_not_of(" \t") == std::string::npos)
                throw ConfigError("baseline_gap needs a non-empty role text");
            break;
        case RunMode::BaselineDistance:
            if (!backends.vision_encoder_id) throw ConfigError("baseline_distance needs a vision encoder");
            break;
        case RunMode::BaselineVlm:
            if (!backends.vlm_id) throw ConfigError("baseline_vlm needs a VLM");
            break;
        case RunMode::Cascade:
            if (downstream.command && downstream.url)
                throw ConfigError("give either a downstream command or a URL, not both");
            if (!(downstream.timeout_seconds > 0.0)) throw ConfigError("downstream timeout must be positive");
            if (downstream.max_in_flight < 1) throw ConfigError("max in-flight must be at least 1");
            break;
        default:
            break;
    }
}

fs::path metrics_path_for(const fs::path& out) {
    return fs::path(out).replace_extension(".metrics.json");
}

fs::path errors_path_for(const fs::path& out) {
    return fs::path(out).replace_extension(".errors.csv");
}

fs::path routing_path_for(const fs::path& out) {
    return fs::path(out).replace_extension(".routing.csv");
}

std::string format_real(double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.6f", v);
    return buf;
}

namespace {

std::ofstream open_out(const fs::path& path) {
    std::error_code ec;
    if (path.has_parent_path()) fs::create_directories(path.parent_path(), ec);
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot open '" + path.string() + "' for writing");
    return out;
}

void finish(std::ofstream& out, const fs::path& path) {
    out.flush();
    if (!out) throw IoError("failed writing '" + path.string() + "'");
}

template <class Rows, class Emit>
void write_csv(const fs::path& path, const csv::Row& header, const Rows& rows, Emit emit) {
    auto out = open_out(path);
    csv::write_row(out, header);
    for (const auto& r : rows) csv::write_row(out, emit(r));
    finish(out, path);
}

void write_json(const json& j, const fs::path& path) {
    auto out = open_out(path);
    out << j.dump(2) << '\n';
    finish(out, path);
}

}  // namespace

void write_rows(const std::vector<ScoredPair>& rows, std::ostream& out) {
    out << kScoreHeader << '\n';
    for (const auto& r : rows)
        csv::write_row(out, {r.id, r.fg_path.string(), r.bg_path.string(), r.fg_text, r.bg_text,
                             format_real(r.sts01), std::string(to_string(r.label))});
}

void write_rows(const std::vector<ScoredPair>& rows, const fs::path& out_path) {
    auto out = open_out(out_path);
    write_rows(rows, out);
    finish(out, out_path);
}

std::vector<ScoredPair> read_rows(const fs::path& path, double tau) {
    std::error_code ec;
    if (!fs::is_regular_file(path, ec)) throw InvalidInput("scores file '" + path.string() + "' not found");
    const auto table = csv::read_file(path.string());
    if (table.empty()) throw InvalidInput("'" + path.string() + "' is empty");
    std::map<std::string, std::size_t> col;
    for (std::size_t i = 0; i < table[0].size(); ++i) col.emplace(table[0][i], i);
    for (const char* name : {"id", "fg_path", "bg_path", "fg_text", "bg_text", "sts01", "label"})
        if (!col.count(name))
            throw InvalidInput("'" + path.string() + "' lacks column '" + std::string(name) + "'");

    std::vector<ScoredPair> rows;
    for (std::size_t r = 1; r < table.size(); ++r) {
        const auto& row = table[r];
        auto cell = [&](const char* name) -> const std::string& {
            const std::size_t c = col.at(name);
            if (c >= row.size())
                throw InvalidInput("'" + path.string() + "' row " + std::to_string(r + 1) + " is short");
            return row[c];
        };
        ScoredPair p;
        p.id = cell("id");
        p.fg_path = cell("fg_path");
        p.bg_path = cell("bg_path");
        p.fg_text = cell("fg_text");
        p.bg_text = cell("bg_text");
        try {
            std::size_t used = 0;
            p.sts01 = std::stod(cell("sts01"), &used);
            if (used != cell("sts01").size()) throw std::invalid_argument("trailing characters");
        } catch (const std::logic_error&) {
            throw InvalidInput("'" + path.string() + "' row " + std::to_string(r + 1) + ": bad sts01 '" +
                               cell("sts01") + "'");
        }
        const auto& label = cell("label");
        if (label == "Match") p.label = Label::Match;
        else if (label == "Mismatch") p.label = Label::Mismatch;
        else
            throw InvalidInput("'" + path.string() + "' row " + std::to_string(r + 1) + ": bad label '" +
                               label + "'");
        p.raw_cosine = p.sts01;  // not stored; the raw value is not recoverable from sts01
        p.tau = tau;
        rows.push_back(std::move(p));
    }
    return rows;
}

void write_gap_csv(const std::vector<GapResult>& rows, const fs::path& out) {
    write_csv(out, {"id", "s_fg", "s_bg", "delta", "label"}, rows, [](const GapResult& r) {
        return csv::Row{r.id, format_real(r.s_fg), format_real(r.s_bg), format_real(r.delta),
                        std::string(to_string(r.label))};
    });
}

void write_distance_csv(const std::vector<DistanceResult>& rows, const fs::path& out) {
    write_csv(out, {"id", "distance", "label"}, rows, [](const DistanceResult& r) {
        return csv::Row{r.id, format_real(r.distance), r.label ? std::string(to_string(*r.label)) : ""};
    });
}

void write_vlm_csv(const std::vector<VlmResult>& rows, const fs::path& out) {
    write_csv(out, {"id", "answer", "label"}, rows, [](const VlmResult& r) {
        return csv::Row{r.id, r.answer, std::string(to_string(r.label))};
    });
}

void write_routing_csv(const std::vector<RoutingDecision>& rows, const fs::path& out) {
    write_csv(out, {"id", "sts01", "label", "action", "downstream_status"}, rows,
              [](const RoutingDecision& r) {
                  return csv::Row{r.id, format_real(r.sts01), std::string(to_string(r.sgs_label)),
                                  std::string(to_string(r.action)), r.downstream_status};
              });
}

void write_errors_csv(const std::vector<PairFailure>& failures, const fs::path& out) {
    write_csv(out, {"id", "stage", "message"}, failures, [](const PairFailure& f) {
        return csv::Row{f.id, std::string(to_string(f.stage)), f.message};
    });
}

BatchResult<ScoredPair> score_batch(const std::vector<CropPair>& pairs, Backends& backends, double tau,
                                    std::size_t jobs) {
    return map_pairs<ScoredPair>(pairs, jobs,
                                 [&](const CropPair& p) { return score_pair(p, backends, tau); });
}

namespace {

struct Context {
    const RunConfig& config;
    std::ostream& out;
    std::ostream& err;
    std::vector<std::string> skipped;
};

json base_report(const Context& ctx, std::size_t n_pairs, std::size_t n_failed) {
    json j{{"mode", to_string(ctx.config.mode)},
           {"n_pairs", n_pairs},
           {"n_failed", n_failed},
           {"sd_formula", ctx.config.sd == SdFormula::Sample ? "sample" : "population"}};
    if (!ctx.skipped.empty()) j["skipped_stems"] = ctx.skipped;
    return j;
}

MetricsReport metrics_for(const std::vector<bool>& flagged, const std::vector<double>& scores, SdFormula sd) {
    MetricsReport m = one_class_metrics(flagged);
    m.score = score_stats(scores, sd);
    return m;
}

void report_failures(Context& ctx, const std::vector<PairFailure>& failures) {
    for (const auto& f : failures) ctx.err << "warning: pair '" << f.id << "' failed (" << to_string(f.stage)
                                           << "): " << f.message << '\n';
}

// Shared tail of every per-pair mode: metrics JSON, errors sidecar, summary.
void emit_reports(Context& ctx, json report, const std::optional<MetricsReport>& metrics,
                  const std::vector<PairFailure>& failures) {
    report["metrics"] = metrics ? to_json(*metrics) : json(nullptr);
    write_json(report, metrics_path_for(ctx.config.out_path));
    write_errors_csv(failures, errors_path_for(ctx.config.out_path));
    report_failures(ctx, failures);
    ctx.out << "mode          " << to_string(ctx.config.mode) << '\n';
    if (metrics) ctx.out << summary(*metrics);
    ctx.out << "failed        " << failures.size() << '\n';
}

int run_score(Context& ctx, const std::vector<CropPair>& pairs, Backends& backends) {
    const auto& cfg = ctx.config;
    auto batch = score_batch(pairs, backends, cfg.tau, cfg.jobs);
    write_rows(batch.ok, cfg.out_path);

    std::optional<MetricsReport> metrics;
    if (!batch.ok.empty()) {
        std::vector<bool> flagged;
        std::vector<double> scores;
        for (const auto& r : batch.ok) {
            flagged.push_back(r.label == Label::Mismatch);
            scores.push_back(r.sts01);
        }
        metrics = metrics_for(flagged, scores, cfg.sd);
    }
    json report = base_report(ctx, pairs.size(), batch.failures.size());
    report["tau"] = cfg.tau;
    report["captioner"] = cfg.backends.captioner_id;
    report["encoder"] = cfg.backends.encoder_id;
    report["max_tokens"] = cfg.backends.max_tokens;

    if (cfg.mode == RunMode::Cascade) {
        std::unique_ptr<DownstreamClient> client;
        const auto timeout = std::chrono::milliseconds(
            static_cast<long long>(cfg.downstream.timeout_seconds * 1000.0));
        if (cfg.downstream.command) client = std::make_unique<CommandClient>(*cfg.downstream.command, timeout);
        else if (cfg.downstream.url) client = std::make_unique<HttpClient>(*cfg.downstream.url, timeout);
        else client = std::make_unique<DisabledClient>();

        auto cascade = run_cascade(batch.ok, cfg.policy, *client, cfg.downstream.max_in_flight);
        write_routing_csv(cascade.decisions, routing_path_for(cfg.out_path));
        report["policy"] = to_string(cfg.policy);
        report["downstream_enabled"] = client->enabled();
        report["cascade"] = {{"forwarded", cascade.forwarded},
                             {"skipped", cascade.skipped},
                             {"failed", cascade.failed}};
        for (const auto& d : cascade.decisions)
            if (d.downstream_status == "timeout" || d.downstream_status == "error")
                ctx.err << "warning: downstream call for '" << d.id << "' " << d.downstream_status
                        << (d.detail.empty() ? "" : ": " + d.detail) << '\n';
        emit_reports(ctx, std::move(report), metrics, batch.failures);
        ctx.out << "forwarded     " << cascade.forwarded << "\nskipped       " << cascade.skipped
                << "\ndownstream failures " << cascade.failed << '\n';
        return exit_code::kOk;
    }

    emit_reports(ctx, std::move(report), metrics, batch.failures);
    return exit_code::kOk;
}

int run_gap(Context& ctx, const std::vector<CropPair>& pairs, Backends& backends) {
    const auto& cfg = ctx.config;
    auto batch = map_pairs<GapResult>(pairs, cfg.jobs, [&](const CropPair& p) {
        return gap_test(p, cfg.role_text, backends);
    });
    write_gap_csv(batch.ok, cfg.out_path);

    std::optional<MetricsReport> metrics;
    if (!batch.ok.empty()) {
        std::vector<bool> flagged;
        std::vector<double> deltas;
        for (const auto& r : batch.ok) {
            flagged.push_back(r.label == Consistency::Inconsistent);
            deltas.push_back(r.delta);
        }
        metrics = metrics_for(flagged, deltas, cfg.sd);
    }
    json report = base_report(ctx, pairs.size(), batch.failures.size());
    report["role_text"] = cfg.role_text;
    report["joint_encoder"] = *cfg.backends.joint_encoder_id;
    emit_reports(ctx, std::move(report), metrics, batch.failures);
    return exit_code::kOk;
}

int run_distance(Context& ctx, const std::vector<CropPair>& pairs, Backends& backends) {
    const auto& cfg = ctx.config;
    auto batch = map_pairs<DistanceResult>(pairs, cfg.jobs,
                                           [&](const CropPair& p) { return feature_distance(p, backends); });

    std::optional<MetricsReport> metrics;
    json report = base_report(ctx, pairs.size(), batch.failures.size());
    report["vision_encoder"] = *cfg.backends.vision_encoder_id;
    if (!batch.ok.empty()) {
        auto labelled = median_threshold(std::move(batch.ok));
        batch.ok = std::move(labelled.results);
        report["median"] = labelled.median;
        std::vector<bool> flagged;
        std::vector<double> distances;
        for (const auto& r : batch.ok) {
            flagged.push_back(r.label == Consistency::Inconsistent);
            distances.push_back(r.distance);
        }
        metrics = metrics_for(flagged, distances, cfg.sd);
    }
    write_distance_csv(batch.ok, cfg.out_path);
    emit_reports(ctx, std::move(report), metrics, batch.failures);
    return exit_code::kOk;
}

int run_vlm(Context& ctx, const std::vector<CropPair>& pairs, Backends& backends) {
    const auto& cfg = ctx.config;
    auto batch = map_pairs<VlmResult>(pairs, cfg.jobs, [&](const CropPair& p) {
        return vlm_check(p, cfg.vlm_prompt, backends);
    });
    write_vlm_csv(batch.ok, cfg.out_path);

    std::vector<bool> flagged;
    std::size_t unparsed = 0;
    for (const auto& r : batch.ok) {
        if (r.label == Consistency::Unparsed) ++unparsed;
        else flagged.push_back(r.label == Consistency::Inconsistent);
    }
    std::optional<MetricsReport> metrics;
    if (!flagged.empty()) metrics = one_class_metrics(flagged);
    json report = base_report(ctx, pairs.size(), batch.failures.size());
    report["vlm"] = *cfg.backends.vlm_id;
    report["prompt"] = cfg.vlm_prompt;
    report["n_unparsed"] = unparsed;
    emit_reports(ctx, std::move(report), metrics, batch.failures);
    ctx.out << "unparsed      " << unparsed << '\n';
    return exit_code::kOk;
}

int run_evaluate(Context& ctx) {
    const auto& cfg = ctx.config;
    const auto rows = read_rows(*cfg.scores_path, cfg.tau);
    if (rows.empty()) {
        ctx.err << "error: '" << cfg.scores_path->string() << "' has no rows\n";
        return exit_code::kNoPairs;
    }
    std::vector<double> scores;
    std::vector<bool> flagged;
    std::size_t label_disagreements = 0;
    for (const auto& r : rows) {
        scores.push_back(r.sts01);
        const Label l = decide(r.sts01, cfg.tau);
        flagged.push_back(l == Label::Mismatch);
        if (l != r.label) ++label_disagreements;
    }
    const MetricsReport metrics = metrics_for(flagged, scores, cfg.sd);

    json report{{"mode", "evaluate"},
                {"scores", cfg.scores_path->string()},
                {"tau", cfg.tau},
                {"sd_formula", cfg.sd == SdFormula::Sample ? "sample" : "population"},
                {"label_disagreements", label_disagreements},
                {"metrics", to_json(metrics)}};
    if (!cfg.sweep_taus.empty()) {
        json sweep = json::array();
        for (const auto& p : threshold_sweep(scores, cfg.sweep_taus, cfg.sd)) {
            json m = to_json(p.metrics);
            m["tau"] = p.tau;
            sweep.push_back(std::move(m));
        }
        report["sweep"] = std::move(sweep);
    }
    if (cfg.calibrate_target) {
        const auto c = calibrate_tau(scores, *cfg.calibrate_target);
        report["calibration"] = {{"target_flag_rate", *cfg.calibrate_target},
                                 {"tau", c.tau},
                                 {"achieved_rate", c.achieved_rate},
                                 {"reachable", c.reachable}};
        if (!c.reachable)
            ctx.err << "warning: flag rate " << *cfg.calibrate_target << " is unreachable; best is "
                    << c.achieved_rate << " at tau 1.00\n";
        ctx.out << "calibrated tau " << format_real(c.tau) << '\n';
    }
    write_json(report, cfg.out_path);
    ctx.out << summary(metrics);
    if (label_disagreements)
        ctx.out << "labels differing from the stored column at this tau: " << label_disagreements << '\n';
    return exit_code::kOk;
}

}  // namespace

int run(const RunConfig& config, std::ostream& out, std::ostream& err) {
    Context ctx{config, out, err, {}};
    try {
        config.validate();
    } catch (const ConfigError& e) {
        err << "error: " << e.what() << '\n';
        return exit_code::kUsage;
    }

    try {
        if (config.mode == RunMode::Evaluate) return run_evaluate(ctx);

        std::vector<CropPair> pairs;
        try {
            pairs = resolve_pairs(config.pairing, &ctx.skipped);
        } catch (const PairingError& e) {
            err << "error: " << e.what() << '\n';
            return exit_code::kUsage;
        }
        if (!ctx.skipped.empty())
            err << "note: " << ctx.skipped.size() << " stem(s) present on one side only were skipped\n";
        if (pairs.empty()) {
            err << "error: no pairs to process\n";
            return exit_code::kNoPairs;
        }

        Backends backends(config.backends);
        switch (config.mode) {
            case RunMode::Score:
            case RunMode::Cascade: return run_score(ctx, pairs, backends);
            case RunMode::BaselineGap: return run_gap(ctx, pairs, backends);
            case RunMode::BaselineDistance: return run_distance(ctx, pairs, backends);
            case RunMode::BaselineVlm: return run_vlm(ctx, pairs, backends);
            case RunMode::Evaluate: break;
        }
        return exit_code::kOk;
    } catch (const IoError& e) {
        err << "error: " << e.what() << '\n';
        return exit_code::kOutputIo;
    } catch (const ConfigError& e) {
        err << "error: " << e.what() << '\n';
        return exit_code::kUsage;
    } catch (const Error& e) {
        err << "error: " << e.what() << '\n';
        return exit_code::kUsage;
    }
}

}  // namespace sgs
