#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "sgs/backends.hpp"
#include "sgs/pairing.hpp"
#include "sgs/scoring.hpp"

namespace sgs {

enum class Consistency { Consistent, Inconsistent, Unparsed };

std::string_view to_string(Consistency c);

inline constexpr const char* kDefaultRoleTemplate = "a photo of a {role}";
inline constexpr const char* kDefaultRole = "person";
inline constexpr const char* kDefaultVlmPrompt =
    "Does the person in the first image plausibly belong in the scene shown in the second "
    "image? Answer Yes or No.";

// Replaces every "{role}" in the template.
std::string render_role_prompt(std::string_view tmpl, std::string_view role);

// --- contrastive gap test -------------------------------------------------

struct GapResult {
    std::string id;
    double s_fg = 0.0;
    double s_bg = 0.0;
    double delta = 0.0;  // s_fg - s_bg
    Consistency label = Consistency::Consistent;
};

// Inconsistent iff delta < 0 (delta == 0 stays consistent).
GapResult make_gap_result(std::string id, double s_fg, double s_bg);

// Throws ConfigError without a joint encoder, InvalidInput on empty role text.
PairOutcome<GapResult> gap_test(const CropPair& pair, const std::string& role_text, Backends& backends);

// --- vision-only feature distance ------------------------------------------

struct DistanceResult {
    std::string id;
    double distance = 0.0;  // |F/|F| - B/|B||, in [0,2]
    std::optional<Consistency> label;
};

// Euclidean distance after scaling both vectors to unit length.
double unit_distance(const Embedding& f, const Embedding& b);

// Throws ConfigError without a vision encoder.
PairOutcome<DistanceResult> feature_distance(const CropPair& pair, Backends& backends);

struct MedianLabels {
    double median = 0.0;
    std::vector<DistanceResult> results;
};

/// Batch-level proxy threshold: inconsistent iff distance > median of the
/// batch; ties at the median count as consistent. Throws InvalidInput when empty.
MedianLabels median_threshold(std::vector<DistanceResult> results);

// --- VLM yes/no -------------------------------------------------------------

/// Looks at the first run of ASCII letters, case-insensitively:
/// "no" -> Inconsistent, "yes" -> Consistent, anything else -> Unparsed.
Consistency map_yes_no(std::string_view answer);

struct VlmResult {
    std::string id;
    std::string answer;
    Consistency label = Consistency::Unparsed;
};

// Throws ConfigError without a VLM.
PairOutcome<VlmResult> vlm_check(const CropPair& pair, const std::string& prompt, Backends& backends);

}  // namespace sgs
