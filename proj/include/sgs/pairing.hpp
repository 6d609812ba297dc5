#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace sgs {

namespace fs = std::filesystem;

// One evaluation unit: a foreground crop and the background crop it was cut from.
struct CropPair {
    std::string id;
    fs::path fg_path;
    fs::path bg_path;

    bool operator==(const CropPair&) const = default;
};

enum class PairingMode { ManifestCsv, IdListJson, AutoStem };

const std::vector<std::string>& default_extensions();

struct PairingSpec {
    PairingMode mode = PairingMode::AutoStem;
    std::optional<fs::path> manifest_path;
    std::optional<fs::path> ids_path;
    std::optional<fs::path> fg_dir;
    std::optional<fs::path> bg_dir;
    std::vector<std::string> extensions = default_extensions();

    // Throws ConfigError unless exactly the fields the mode needs are set.
    void validate() const;
};

struct AutoPairResult {
    std::vector<CropPair> pairs;
    std::vector<std::string> fg_only;  // stems seen only under fg_dir, sorted
    std::vector<std::string> bg_only;
};

/// Reads an `id,fg,bg` manifest. Column order is free and extra columns are
/// ignored. Relative paths resolve against the manifest's own directory.
/// Errors name the 1-based file row (the header is row 1).
std::vector<CropPair> load_pairs_csv(const fs::path& manifest_path);

/// Reads a flat JSON array of ids and resolves each one to `<dir>/<id><ext>`,
/// taking the first extension (in list order) that exists in each directory.
std::vector<CropPair> load_pairs_json(const fs::path& ids_path, const fs::path& fg_dir,
                                      const fs::path& bg_dir,
                                      const std::vector<std::string>& extensions = default_extensions());

/// Pairs files whose stems occur in both directories. Output is sorted by id;
/// stems present on one side only are reported, not treated as errors.
AutoPairResult autopair(const fs::path& fg_dir, const fs::path& bg_dir,
                        const std::vector<std::string>& extensions = default_extensions());

// Dispatches on spec.mode. Skipped stems from auto mode go to `skipped` if given.
std::vector<CropPair> resolve_pairs(const PairingSpec& spec,
                                    std::vector<std::string>* skipped = nullptr);

}  // namespace sgs
