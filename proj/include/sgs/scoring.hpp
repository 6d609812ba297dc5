#pragma once

#include <span>
#include <string>
#include <string_view>
#include <variant>

#include "sgs/backends.hpp"
#include "sgs/pairing.hpp"

namespace sgs {

inline constexpr double kDefaultTau = 0.55;

enum class Label { Match, Mismatch };

std::string_view to_string(Label label);

struct ScoredPair {
    std::string id;
    fs::path fg_path;
    fs::path bg_path;
    std::string fg_text;
    std::string bg_text;
    double raw_cosine = 0.0;  // caption-embedding cosine, [-1,1]
    double sts01 = 0.0;       // normalize_score(raw_cosine)
    Label label = Label::Mismatch;
    double tau = kDefaultTau;

    bool operator==(const ScoredPair&) const = default;
};

// A pair that could not be scored. The batch carries on without it.
struct PairFailure {
    enum class Stage { Decode, Backend, Degenerate, Invalid };

    std::string id;
    Stage stage = Stage::Invalid;
    std::string message;
};

std::string_view to_string(PairFailure::Stage stage);

template <class T>
using PairOutcome = std::variant<T, PairFailure>;

/// dot(u,v) / (|u| |v|), clamped to [-1,1].
/// Throws InvalidInput on a dimension mismatch and DegenerateEmbedding when
/// either vector has zero norm.
double cosine(std::span<const double> u, std::span<const double> v);
inline double cosine(const Embedding& u, const Embedding& v) { return cosine(u.values, v.values); }

/// Maps a cosine into [0,1]: non-negative scores are capped at 1, negative
/// scores become (s+1)/2. Note the jump at 0: 0 -> 0 while 0- -> 0.5.
/// Throws InvalidInput for NaN or infinities.
double normalize_score(double s);

// Match iff sts01 >= tau.
inline Label decide(double sts01, double tau) {
    return sts01 >= tau ? Label::Match : Label::Mismatch;
}

/// Full per-pair pipeline: load and resize both crops, caption each one on
/// its own, embed both captions, then cosine -> normalize -> decide.
/// Any decode, backend or degenerate-embedding error comes back as a PairFailure.
PairOutcome<ScoredPair> score_pair(const CropPair& pair, Backends& backends, double tau);

// Maps the exception currently being handled to a failure record.
PairFailure failure_from_current_exception(const std::string& id);

}  // namespace sgs
