#include "sgs/cascade.hpp"

#include <atomic>
#include <charconv>
#include <cstdio>
#include <thread>

#include <httplib.h>
#include <nlohmann/json.hpp>

#include "sgs/errors.hpp"
#include "sgs/subprocess.hpp"

namespace sgs {

std::string_view to_string(RouteAction a) {
    switch (a) {
        case RouteAction::ForwardToDetector: return "forward_to_detector";
        case RouteAction::FlagAndSkip: return "flag_and_skip";
        case RouteAction::FlagAndForward: return "flag_and_forward";
    }
    return "forward_to_detector";
}

std::string_view to_string(MismatchPolicy p) {
    return p == MismatchPolicy::SkipOnMismatch ? "skip_on_mismatch" : "forward_on_mismatch";
}

RoutingDecision route(const ScoredPair& scored, MismatchPolicy policy) {
    RoutingDecision d;
    d.id = scored.id;
    d.sgs_label = scored.label;
    d.sts01 = scored.sts01;
    if (scored.label == Label::Match) d.action = RouteAction::ForwardToDetector;
    else if (policy == MismatchPolicy::SkipOnMismatch) d.action = RouteAction::FlagAndSkip;
    else d.action = RouteAction::FlagAndForward;
    if (d.action == RouteAction::FlagAndSkip) d.downstream_status = "skipped";
    return d;
}

double fuse(double sts01, double detector_score, double weight) {
    auto unit = [](double v) { return v >= 0.0 && v <= 1.0; };
    if (!unit(sts01) || !unit(detector_score) || !unit(weight))
        throw InvalidInput("fuse arguments must lie in [0,1]");
    return weight * (1.0 - sts01) + (1.0 - weight) * detector_score;
}

namespace {

std::string format_score(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.6f", v);
    return buf;
}

bool flagged(RouteAction a) { return a != RouteAction::ForwardToDetector; }

std::optional<double> parse_score(std::string_view s) {
    const auto b = s.find_first_not_of(" \t\r\n");
    if (b == std::string_view::npos) return std::nullopt;
    s.remove_prefix(b);
    s = s.substr(0, s.find_first_of(" \t\r\n"));
    double v = 0.0;
    auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc{} || ptr != s.data() + s.size() || !(v >= 0.0 && v <= 1.0)) return std::nullopt;
    return v;
}

std::string shell_quote(std::string_view s) {
    std::string out = "'";
    for (char c : s) {
        if (c == '\'') out += "'\\''";
        else out.push_back(c);
    }
    return out + "'";
}

}  // namespace

CommandClient::CommandClient(std::string command_template, std::chrono::milliseconds timeout)
    : template_(std::move(command_template)), timeout_(timeout) {
    if (template_.empty()) throw ConfigError("downstream command template is empty");
}

std::string CommandClient::render(const ScoredPair& pair, RouteAction action) const {
    const std::pair<std::string_view, std::string> vars[] = {
        {"{id}", pair.id},
        {"{fg_path}", pair.fg_path.string()},
        {"{bg_path}", pair.bg_path.string()},
        {"{sts01}", format_score(pair.sts01)},
        {"{label}", std::string(to_string(pair.label))},
        {"{flagged}", flagged(action) ? "1" : "0"},
    };
    std::string out;
    std::string_view rest = template_;
    while (!rest.empty()) {
        bool hit = false;
        if (rest.front() == '{') {
            for (const auto& [key, value] : vars) {
                if (rest.starts_with(key)) {
                    out += shell_quote(value);
                    rest.remove_prefix(key.size());
                    hit = true;
                    break;
                }
            }
        }
        if (!hit) {
            out.push_back(rest.front());
            rest.remove_prefix(1);
        }
    }
    return out;
}

DownstreamResult CommandClient::submit(const ScoredPair& pair, RouteAction action) {
    DownstreamResult r;
    ProcessResult p;
    try {
        p = run_process({"/bin/sh", "-c", render(pair, action)}, timeout_);
    } catch (const std::exception& e) {
        return {DownstreamResult::Status::Error, std::nullopt, e.what()};
    }
    if (p.timed_out) {
        r.status = DownstreamResult::Status::Timeout;
        r.message = "timed out after " + std::to_string(timeout_.count()) + " ms";
    } else if (p.exit_code != 0) {
        r.status = DownstreamResult::Status::Error;
        r.message = "exit code " + std::to_string(p.exit_code);
    } else {
        r.score = parse_score(p.out);
    }
    return r;
}

HttpClient::HttpClient(std::string url, std::chrono::milliseconds timeout) : timeout_(timeout) {
    const auto scheme_end = url.find("://");
    if (scheme_end == std::string::npos || url.substr(0, scheme_end) != "http")
        throw ConfigError("downstream URL must start with http:// ('" + url + "')");
    const auto path_start = url.find('/', scheme_end + 3);
    origin_ = url.substr(0, path_start);
    path_ = path_start == std::string::npos ? "/" : url.substr(path_start);
    if (origin_.size() <= scheme_end + 3) throw ConfigError("downstream URL has no host");
}

DownstreamResult HttpClient::submit(const ScoredPair& pair, RouteAction action) {
    httplib::Client cli(origin_);
    const auto sec = std::chrono::duration_cast<std::chrono::seconds>(timeout_);
    const auto usec = std::chrono::duration_cast<std::chrono::microseconds>(timeout_ - sec);
    cli.set_connection_timeout(sec.count(), usec.count());
    cli.set_read_timeout(sec.count(), usec.count());
    cli.set_write_timeout(sec.count(), usec.count());

    const nlohmann::json body{
        {"id", pair.id},
        {"fg_path", pair.fg_path.string()},
        {"bg_path", pair.bg_path.string()},
        {"sts01", pair.sts01},
        {"label", to_string(pair.label)},
        {"flagged", flagged(action)},
    };
    auto res = cli.Post(path_, body.dump(), "application/json");
    if (!res) {
        const auto err = res.error();
        const bool timeout = err == httplib::Error::Read || err == httplib::Error::ConnectionTimeout;
        return {timeout ? DownstreamResult::Status::Timeout : DownstreamResult::Status::Error,
                std::nullopt, httplib::to_string(err)};
    }
    if (res->status < 200 || res->status >= 300)
        return {DownstreamResult::Status::Error, std::nullopt, "HTTP " + std::to_string(res->status)};

    DownstreamResult r;
    auto reply = nlohmann::json::parse(res->body, nullptr, false);
    if (reply.is_object() && reply.contains("score") && reply["score"].is_number()) {
        const double s = reply["score"].get<double>();
        if (s >= 0.0 && s <= 1.0) r.score = s;
    }
    return r;
}

CascadeReport run_cascade(const std::vector<ScoredPair>& pairs, MismatchPolicy policy,
                          DownstreamClient& client, std::size_t max_in_flight) {
    CascadeReport report;
    report.decisions.reserve(pairs.size());
    std::vector<std::size_t> to_call;
    for (std::size_t i = 0; i < pairs.size(); ++i) {
        report.decisions.push_back(route(pairs[i], policy));
        if (report.decisions.back().action != RouteAction::FlagAndSkip && client.enabled())
            to_call.push_back(i);
    }

    auto work = [&](std::size_t i) {
        RoutingDecision& d = report.decisions[i];
        DownstreamResult r;
        try {
            r = client.submit(pairs[i], d.action);
        } catch (const std::exception& e) {
            r = {DownstreamResult::Status::Error, std::nullopt, e.what()};
        }
        switch (r.status) {
            case DownstreamResult::Status::Ok: d.downstream_status = "ok"; break;
            case DownstreamResult::Status::Timeout: d.downstream_status = "timeout"; break;
            case DownstreamResult::Status::Error: d.downstream_status = "error"; break;
        }
        d.detector_score = r.score;
        d.detail = std::move(r.message);
    };

    const std::size_t workers = std::clamp<std::size_t>(max_in_flight, 1, std::max<std::size_t>(1, to_call.size()));
    if (workers == 1) {
        for (auto i : to_call) work(i);
    } else {
        std::atomic<std::size_t> next{0};
        std::vector<std::jthread> pool;
        for (std::size_t w = 0; w < workers; ++w)
            pool.emplace_back([&] {
                for (std::size_t k; (k = next++) < to_call.size();) work(to_call[k]);
            });
    }

    for (const auto& d : report.decisions) {
        if (d.action == RouteAction::FlagAndSkip) ++report.skipped;
        else if (d.downstream_status == "ok" || d.downstream_status == "not_called") ++report.forwarded;
        else ++report.failed;
    }
    return report;
}

}  // namespace sgs
