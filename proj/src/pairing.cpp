#include "sgs/pairing.hpp"

#include <algorithm>
#include <fstream>
#include <map>
#include <set>
#include <unordered_map>

#include <nlohmann/json.hpp>

#include "sgs/csv.hpp"
#include "sgs/errors.hpp"

namespace sgs {
namespace {

using Kind = PairingError::Kind;

std::string lower(std::string s) {
    std::transform(s.begin(), s.end(), s.begin(),
                   [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    return s;
}

std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t");
    if (b == std::string::npos) return {};
    const auto e = s.find_last_not_of(" \t");
    return s.substr(b, e - b + 1);
}

std::string join(const std::vector<std::string>& items, const char* sep = ", ") {
    std::string out;
    for (std::size_t i = 0; i < items.size(); ++i) {
        if (i) out += sep;
        out += items[i];
    }
    return out;
}

bool readable_file(const fs::path& p) {
    std::error_code ec;
    if (!fs::is_regular_file(p, ec)) return false;
    std::ifstream in(p, std::ios::binary);
    return static_cast<bool>(in);
}

void require_dir(const fs::path& dir, const char* role) {
    std::error_code ec;
    if (!fs::is_directory(dir, ec))
        throw PairingError(Kind::MissingFile,
                           std::string(role) + " '" + dir.string() + "' is not a directory");
}

// stem -> files carrying that stem, each tagged with the priority rank of its
// extension. Extensions match case-insensitively; stems are case-sensitive.
class StemIndex {
public:
    StemIndex(const fs::path& dir, const std::vector<std::string>& extensions) : dir_(dir) {
        std::unordered_map<std::string, std::size_t> rank;
        for (std::size_t i = 0; i < extensions.size(); ++i) rank.emplace(lower(extensions[i]), i);

        for (const auto& entry : fs::directory_iterator(dir)) {
            std::error_code ec;
            if (!entry.is_regular_file(ec)) continue;
            const fs::path& p = entry.path();
            auto it = rank.find(lower(p.extension().string()));
            if (it == rank.end()) continue;
            files_[p.stem().string()].push_back({it->second, p.filename().string()});
        }
        for (auto& [stem, candidates] : files_) std::sort(candidates.begin(), candidates.end());
    }

    std::vector<std::string> stems() const {
        std::vector<std::string> out;
        out.reserve(files_.size());
        for (const auto& [stem, _] : files_) out.push_back(stem);
        return out;
    }

    // Highest-priority file for `stem`; throws AmbiguousStem when two files tie.
    std::optional<fs::path> resolve(const std::string& stem) const {
        auto it = files_.find(stem);
        if (it == files_.end()) return std::nullopt;
        const auto& c = it->second;
        if (c.size() > 1 && c[0].first == c[1].first)
            throw PairingError(Kind::AmbiguousStem,
                               "ambiguous stem '" + stem + "' in '" + dir_.string() + "': '" +
                                   c[0].second + "' and '" + c[1].second +
                                   "' match the same extension");
        return (dir_ / c[0].second).lexically_normal();
    }

private:
    fs::path dir_;
    std::map<std::string, std::vector<std::pair<std::size_t, std::string>>> files_;
};

void check_extensions(const std::vector<std::string>& extensions) {
    if (extensions.empty()) throw ConfigError("extension list must not be empty");
}

}  // namespace

const std::vector<std::string>& default_extensions() {
    static const std::vector<std::string> exts{".jpg", ".jpeg", ".png", ".webp"};
    return exts;
}

void PairingSpec::validate() const {
    auto need = [](bool present, const char* field, const char* mode) {
        if (!present)
            throw ConfigError(std::string(mode) + " pairing requires " + field);
    };
    auto forbid = [](bool present, const char* field, const char* mode) {
        if (present)
            throw ConfigError(std::string(mode) + " pairing does not take " + field);
    };
    switch (mode) {
        case PairingMode::ManifestCsv:
            need(manifest_path.has_value(), "a manifest path", "manifest");
            forbid(ids_path.has_value(), "an id list", "manifest");
            forbid(fg_dir.has_value() || bg_dir.has_value(), "fg/bg directories", "manifest");
            break;
        case PairingMode::IdListJson:
            need(ids_path.has_value(), "an id list path", "id-list");
            need(fg_dir.has_value() && bg_dir.has_value(), "both fg and bg directories", "id-list");
            forbid(manifest_path.has_value(), "a manifest", "id-list");
            check_extensions(extensions);
            break;
        case PairingMode::AutoStem:
            need(fg_dir.has_value() && bg_dir.has_value(), "both fg and bg directories", "auto-stem");
            forbid(manifest_path.has_value(), "a manifest", "auto-stem");
            forbid(ids_path.has_value(), "an id list", "auto-stem");
            check_extensions(extensions);
            break;
    }
}

std::vector<CropPair> load_pairs_csv(const fs::path& manifest_path) {
    if (!readable_file(manifest_path))
        throw PairingError(Kind::MissingFile,
                           "manifest '" + manifest_path.string() + "' does not exist or is unreadable");

    const auto rows = csv::read_file(manifest_path.string());
    if (rows.empty())
        throw PairingError(Kind::MissingColumn, "manifest '" + manifest_path.string() + "' has no header");

    std::map<std::string, std::size_t> col;
    for (std::size_t i = 0; i < rows[0].size(); ++i) col.emplace(trim(rows[0][i]), i);
    for (const char* name : {"id", "fg", "bg"})
        if (!col.count(name))
            throw PairingError(Kind::MissingColumn, "manifest '" + manifest_path.string() +
                                                        "' lacks required column '" + name + "'");

    const fs::path base = manifest_path.parent_path();
    auto resolve = [&](const std::string& cell) {
        fs::path p(cell);
        return (p.is_absolute() ? p : base / p).lexically_normal();
    };

    std::vector<CropPair> pairs;
    std::unordered_map<std::string, std::size_t> seen;  // id -> row number
    for (std::size_t r = 1; r < rows.size(); ++r) {
        const std::size_t row_no = r + 1;
        const auto& row = rows[r];
        auto cell = [&](const char* name) {
            const std::size_t c = col.at(name);
            std::string v = c < row.size() ? trim(row[c]) : std::string{};
            if (v.empty())
                throw PairingError(Kind::EmptyCell, "manifest row " + std::to_string(row_no) +
                                                        ": empty '" + name + "' cell");
            return v;
        };
        CropPair pair{cell("id"), resolve(cell("fg")), resolve(cell("bg"))};

        if (auto [it, fresh] = seen.emplace(pair.id, row_no); !fresh)
            throw PairingError(Kind::DuplicateId, "manifest row " + std::to_string(row_no) +
                                                      ": duplicate id '" + pair.id +
                                                      "' (first seen on row " +
                                                      std::to_string(it->second) + ")");
        if (pair.fg_path == pair.bg_path)
            throw PairingError(Kind::SamePath, "manifest row " + std::to_string(row_no) +
                                                   ": fg and bg are the same file '" +
                                                   pair.fg_path.string() + "'");
        for (const auto* p : {&pair.fg_path, &pair.bg_path})
            if (!readable_file(*p))
                throw PairingError(Kind::MissingPath, "manifest row " + std::to_string(row_no) +
                                                          ": '" + p->string() +
                                                          "' does not exist or is unreadable");
        pairs.push_back(std::move(pair));
    }
    return pairs;
}

std::vector<CropPair> load_pairs_json(const fs::path& ids_path, const fs::path& fg_dir,
                                      const fs::path& bg_dir,
                                      const std::vector<std::string>& extensions) {
    check_extensions(extensions);
    if (!readable_file(ids_path))
        throw PairingError(Kind::MissingFile,
                           "id list '" + ids_path.string() + "' does not exist or is unreadable");
    require_dir(fg_dir, "fg_dir");
    require_dir(bg_dir, "bg_dir");
    if (fs::equivalent(fg_dir, bg_dir))
        throw PairingError(Kind::SamePath, "fg_dir and bg_dir are the same directory '" +
                                               fg_dir.string() + "'");

    nlohmann::json doc;
    try {
        std::ifstream in(ids_path);
        doc = nlohmann::json::parse(in);
    } catch (const nlohmann::json::exception& e) {
        throw PairingError(Kind::BadFormat, "id list '" + ids_path.string() + "': " + e.what());
    }
    if (!doc.is_array())
        throw PairingError(Kind::BadFormat, "id list '" + ids_path.string() + "' is not a JSON array");

    std::vector<std::string> ids;
    std::set<std::string> seen;
    for (const auto& v : doc) {
        if (!v.is_string())
            throw PairingError(Kind::BadFormat, "id list '" + ids_path.string() +
                                                    "' contains a non-string entry: " + v.dump());
        auto id = v.get<std::string>();
        if (id.empty()) throw PairingError(Kind::EmptyCell, "id list contains an empty id");
        if (id.find_first_of("/\\") != std::string::npos)
            throw PairingError(Kind::BadFormat, "id '" + id + "' contains a path separator");
        if (!seen.insert(id).second)
            throw PairingError(Kind::DuplicateId, "id list repeats id '" + id + "'");
        ids.push_back(std::move(id));
    }
    if (ids.empty()) return {};

    const StemIndex fg(fg_dir, extensions);
    const StemIndex bg(bg_dir, extensions);

    std::vector<CropPair> pairs;
    std::vector<std::string> unresolved;
    for (const auto& id : ids) {
        auto f = fg.resolve(id);
        auto b = bg.resolve(id);
        if (f && b) {
            pairs.push_back({id, *f, *b});
            continue;
        }
        std::vector<std::string> missing;
        if (!f) missing.push_back("fg_dir '" + fg_dir.string() + "'");
        if (!b) missing.push_back("bg_dir '" + bg_dir.string() + "'");
        unresolved.push_back("'" + id + "' not found in " + join(missing, " or "));
    }
    if (!unresolved.empty())
        throw PairingError(Kind::UnresolvedId, "unresolved ids (tried extensions " +
                                                   join(extensions) + "): " +
                                                   join(unresolved, "; "));
    return pairs;
}

AutoPairResult autopair(const fs::path& fg_dir, const fs::path& bg_dir,
                        const std::vector<std::string>& extensions) {
    check_extensions(extensions);
    require_dir(fg_dir, "fg_dir");
    require_dir(bg_dir, "bg_dir");
    if (fs::equivalent(fg_dir, bg_dir))
        throw PairingError(Kind::SamePath, "fg_dir and bg_dir are the same directory '" +
                                               fg_dir.string() + "'");

    const StemIndex fg(fg_dir, extensions);
    const StemIndex bg(bg_dir, extensions);
    const auto fg_stems = fg.stems();  // sorted: StemIndex is an ordered map
    const auto bg_stems = bg.stems();

    AutoPairResult result;
    std::vector<std::string> common;
    std::set_intersection(fg_stems.begin(), fg_stems.end(), bg_stems.begin(), bg_stems.end(),
                          std::back_inserter(common));
    std::set_difference(fg_stems.begin(), fg_stems.end(), bg_stems.begin(), bg_stems.end(),
                        std::back_inserter(result.fg_only));
    std::set_difference(bg_stems.begin(), bg_stems.end(), fg_stems.begin(), fg_stems.end(),
                        std::back_inserter(result.bg_only));

    for (const auto& stem : common) result.pairs.push_back({stem, *fg.resolve(stem), *bg.resolve(stem)});
    return result;
}

std::vector<CropPair> resolve_pairs(const PairingSpec& spec, std::vector<std::string>* skipped) {
    spec.validate();
    switch (spec.mode) {
        case PairingMode::ManifestCsv:
            return load_pairs_csv(*spec.manifest_path);
        case PairingMode::IdListJson:
            return load_pairs_json(*spec.ids_path, *spec.fg_dir, *spec.bg_dir, spec.extensions);
        case PairingMode::AutoStem: {
            auto r = autopair(*spec.fg_dir, *spec.bg_dir, spec.extensions);
            if (skipped) {
                skipped->clear();
                std::set_union(r.fg_only.begin(), r.fg_only.end(), r.bg_only.begin(),
                               r.bg_only.end(), std::back_inserter(*skipped));
            }
            return std::move(r.pairs);
        }
    }
    return {};
}

}  // namespace sgs
