#include "sgs/baselines.hpp"

#include <cctype>
#include <cmath>

#include "sgs/errors.hpp"
#include "sgs/evaluation.hpp"

namespace sgs {

std::string_view to_string(Consistency c) {
    switch (c) {
        case Consistency::Consistent: return "consistent";
        case Consistency::Inconsistent: return "inconsistent";
        case Consistency::Unparsed: return "unparsed";
    }
    return "unparsed";
}

std::string render_role_prompt(std::string_view tmpl, std::string_view role) {
    static constexpr std::string_view key = "{role}";
    std::string out;
    std::size_t pos = 0;
    for (auto hit = tmpl.find(key); hit != std::string_view::npos; hit = tmpl.find(key, pos)) {
        out.append(tmpl.substr(pos, hit - pos));
        out.append(role);
        pos = hit + key.size();
    }
    out.append(tmpl.substr(pos));
    return out;
}

GapResult make_gap_result(std::string id, double s_fg, double s_bg) {
    GapResult r{std::move(id), s_fg, s_bg, s_fg - s_bg, Consistency::Consistent};
    if (r.delta < 0.0) r.label = Consistency::Inconsistent;
    return r;
}

PairOutcome<GapResult> gap_test(const CropPair& pair, const std::string& role_text, Backends& backends) {
    if (!backends.has_joint_encoder()) throw ConfigError("gap test needs a joint image-text encoder");
    if (role_text.find_first_not_of(" \t") == std::string::npos)
        throw InvalidInput("gap test needs a non-empty role text");
    try {
        const double s_fg = backends.joint_similarity(load_image(pair.fg_path), role_text);
        const double s_bg = backends.joint_similarity(load_image(pair.bg_path), role_text);
        return make_gap_result(pair.id, s_fg, s_bg);
    } catch (...) {
        return failure_from_current_exception(pair.id);
    }
}

double unit_distance(const Embedding& f, const Embedding& b) {
    if (f.dim() != b.dim())
        throw InvalidInput("feature vectors differ in dimension (" + std::to_string(f.dim()) + " vs " +
                           std::to_string(b.dim()) + ")");
    double nf = 0.0, nb = 0.0;
    for (std::size_t i = 0; i < f.dim(); ++i) {
        nf += f.values[i] * f.values[i];
        nb += b.values[i] * b.values[i];
    }
    nf = std::sqrt(nf);
    nb = std::sqrt(nb);
    if (nf == 0.0 || nb == 0.0) throw DegenerateEmbedding("cannot normalise a zero feature vector");
    double sq = 0.0;
    for (std::size_t i = 0; i < f.dim(); ++i) {
        const double d = f.values[i] / nf - b.values[i] / nb;
        sq += d * d;
    }
    return std::sqrt(sq);
}

PairOutcome<DistanceResult> feature_distance(const CropPair& pair, Backends& backends) {
    if (!backends.has_vision_encoder()) throw ConfigError("feature distance needs a vision encoder");
    try {
        const Embedding f = backends.vision_embed(load_image(pair.fg_path));
        const Embedding b = backends.vision_embed(load_image(pair.bg_path));
        return DistanceResult{pair.id, unit_distance(f, b), std::nullopt};
    } catch (...) {
        return failure_from_current_exception(pair.id);
    }
}

MedianLabels median_threshold(std::vector<DistanceResult> results) {
    if (results.empty()) throw InvalidInput("median threshold needs at least one distance");
    std::vector<double> d;
    d.reserve(results.size());
    for (const auto& r : results) d.push_back(r.distance);

    MedianLabels out;
    out.median = median(std::move(d));
    for (auto& r : results)
        r.label = r.distance > out.median ? Consistency::Inconsistent : Consistency::Consistent;
    out.results = std::move(results);
    return out;
}

Consistency map_yes_no(std::string_view answer) {
    auto is_alpha = [](char c) { return std::isalpha(static_cast<unsigned char>(c)) != 0; };
    std::size_t i = 0;
    while (i < answer.size() && !is_alpha(answer[i])) ++i;
    std::string token;
    for (; i < answer.size() && is_alpha(answer[i]); ++i)
        token.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(answer[i]))));
    if (token == "no") return Consistency::Inconsistent;
    if (token == "yes") return Consistency::Consistent;
    return Consistency::Unparsed;
}

PairOutcome<VlmResult> vlm_check(const CropPair& pair, const std::string& prompt, Backends& backends) {
    if (!backends.has_vlm()) throw ConfigError("VLM baseline needs a VLM backend");
    try {
        std::string answer = backends.vlm_answer(load_image(pair.fg_path), load_image(pair.bg_path), prompt);
        const Consistency label = map_yes_no(answer);
        return VlmResult{pair.id, std::move(answer), label};
    } catch (...) {
        return failure_from_current_exception(pair.id);
    }
}

}  // namespace sgs
