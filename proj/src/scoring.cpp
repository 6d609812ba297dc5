#include "sgs/scoring.hpp"

#include <algorithm>
#include <cmath>

#include "sgs/errors.hpp"

namespace sgs {

std::string_view to_string(Label label) {
    return label == Label::Match ? "Match" : "Mismatch";
}

std::string_view to_string(PairFailure::Stage stage) {
    switch (stage) {
        case PairFailure::Stage::Decode: return "decode";
        case PairFailure::Stage::Backend: return "backend";
        case PairFailure::Stage::Degenerate: return "degenerate";
        case PairFailure::Stage::Invalid: return "invalid";
    }
    return "invalid";
}

double cosine(std::span<const double> u, std::span<const double> v) {
    if (u.size() != v.size())
        throw InvalidInput("cosine of vectors with different dimensions (" + std::to_string(u.size()) +
                           " vs " + std::to_string(v.size()) + ")");
    double dot = 0.0, uu = 0.0, vv = 0.0;
    for (std::size_t i = 0; i < u.size(); ++i) {
        dot += u[i] * v[i];
        uu += u[i] * u[i];
        vv += v[i] * v[i];
    }
    if (uu == 0.0 || vv == 0.0) throw DegenerateEmbedding("cosine of a zero-norm embedding");
    const double c = dot / (std::sqrt(uu) * std::sqrt(vv));
    if (!std::isfinite(c)) throw DegenerateEmbedding("cosine is not finite");
    return std::clamp(c, -1.0, 1.0);
}

double normalize_score(double s) {
    if (!std::isfinite(s)) throw InvalidInput("score is not finite");
    if (s >= 0.0) return std::min(1.0, s);
    return std::max(0.0, (s + 1.0) / 2.0);
}

PairFailure failure_from_current_exception(const std::string& id) {
    using Stage = PairFailure::Stage;
    try {
        throw;
    } catch (const DecodeError& e) {
        return {id, Stage::Decode, e.what()};
    } catch (const DegenerateEmbedding& e) {
        return {id, Stage::Degenerate, e.what()};
    } catch (const BackendUnavailable& e) {
        return {id, Stage::Backend, e.what()};
    } catch (const InvalidInput& e) {
        return {id, Stage::Invalid, e.what()};
    } catch (const std::exception& e) {
        return {id, Stage::Backend, e.what()};
    }
}

PairOutcome<ScoredPair> score_pair(const CropPair& pair, Backends& backends, double tau) {
    if (!(tau >= 0.0 && tau <= 1.0)) throw InvalidInput("tau must lie in [0,1]");
    try {
        const ImageTensor fg = load_image(pair.fg_path);
        const ImageTensor bg = load_image(pair.bg_path);
        Caption fg_caption = backends.caption(fg);
        Caption bg_caption = backends.caption(bg);
        const Embedding fg_vec = backends.embed(fg_caption.text);
        const Embedding bg_vec = backends.embed(bg_caption.text);

        ScoredPair out;
        out.id = pair.id;
        out.fg_path = pair.fg_path;
        out.bg_path = pair.bg_path;
        out.fg_text = std::move(fg_caption.text);
        out.bg_text = std::move(bg_caption.text);
        out.raw_cosine = cosine(fg_vec, bg_vec);
        out.sts01 = normalize_score(out.raw_cosine);
        out.label = decide(out.sts01, tau);
        out.tau = tau;
        return out;
    } catch (...) {
        return failure_from_current_exception(pair.id);
    }
}

}  // namespace sgs
