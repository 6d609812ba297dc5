#pragma once

#include <chrono>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "sgs/scoring.hpp"

namespace sgs {

enum class RouteAction { ForwardToDetector, FlagAndSkip, FlagAndForward };

// What happens to a Mismatch. Skip keeps flagged pairs away from the
// expensive detector; forward sends them on with the flag attached.
enum class MismatchPolicy { SkipOnMismatch, ForwardOnMismatch };

std::string_view to_string(RouteAction a);
std::string_view to_string(MismatchPolicy p);

struct RoutingDecision {
    std::string id;
    RouteAction action = RouteAction::ForwardToDetector;
    Label sgs_label = Label::Match;
    double sts01 = 0.0;
    // not_called | skipped | ok | timeout | error
    std::string downstream_status = "not_called";
    std::optional<double> detector_score;
    std::string detail;
};

// Match always forwards; Mismatch is flagged and then skipped or forwarded.
RoutingDecision route(const ScoredPair& scored, MismatchPolicy policy);

/// Suspicion score: weight * (1 - sts01) + (1 - weight) * detector_score.
/// All inputs must lie in [0,1], else InvalidInput.
double fuse(double sts01, double detector_score, double weight = 0.5);

struct DownstreamResult {
    enum class Status { Ok, Timeout, Error };
    Status status = Status::Ok;
    std::optional<double> score;  // detector's own score when it reports one
    std::string message;
};

// Boundary to an external detector. Implementations must be callable from
// several threads at once.
class DownstreamClient {
public:
    virtual ~DownstreamClient() = default;
    virtual bool enabled() const { return true; }
    virtual DownstreamResult submit(const ScoredPair& pair, RouteAction action) = 0;
};

class DisabledClient final : public DownstreamClient {
public:
    bool enabled() const override { return false; }
    DownstreamResult submit(const ScoredPair&, RouteAction) override { return {}; }
};

/// Runs a shell command per forwarded pair. Placeholders {id}, {fg_path},
/// {bg_path}, {sts01}, {label} and {flagged} are substituted shell-quoted.
/// Exit 0 is success; a number in [0,1] as the first stdout token is taken
/// as the detector score.
class CommandClient final : public DownstreamClient {
public:
    CommandClient(std::string command_template, std::chrono::milliseconds timeout);
    DownstreamResult submit(const ScoredPair& pair, RouteAction action) override;
    std::string render(const ScoredPair& pair, RouteAction action) const;

private:
    std::string template_;
    std::chrono::milliseconds timeout_;
};

/// POSTs {id, fg_path, bg_path, sts01, label, flagged} as JSON to an
/// http:// URL. A 2xx reply is success; an optional numeric "score" member
/// is taken as the detector score.
class HttpClient final : public DownstreamClient {
public:
    HttpClient(std::string url, std::chrono::milliseconds timeout);
    DownstreamResult submit(const ScoredPair& pair, RouteAction action) override;

private:
    std::string origin_;  // scheme://host[:port]
    std::string path_;
    std::chrono::milliseconds timeout_;
};

struct CascadeReport {
    std::vector<RoutingDecision> decisions;  // input order
    std::size_t forwarded = 0;
    std::size_t skipped = 0;
    std::size_t failed = 0;
};

/// Routes every pair and submits forward actions to the client (only when it
/// is enabled), at most max_in_flight at a time. Downstream failures are
/// recorded per pair. forwarded + skipped + failed == pairs.size().
CascadeReport run_cascade(const std::vector<ScoredPair>& pairs, MismatchPolicy policy,
                          DownstreamClient& client, std::size_t max_in_flight = 1);

}  // namespace sgs
