#pragma once

#include <filesystem>
#include <fstream>
#include <random>
#include <string>

#include <opencv2/imgcodecs.hpp>

#include "sgs/backends.hpp"

namespace sgs::test {

namespace fs = std::filesystem;

// Scratch directory removed on destruction.
class TempDir {
public:
    TempDir() {
        static std::mt19937_64 rng{std::random_device{}()};
        path_ = fs::temp_directory_path() / ("sgs-test-" + std::to_string(rng()));
        fs::create_directories(path_);
    }
    ~TempDir() {
        std::error_code ec;
        fs::remove_all(path_, ec);
    }
    TempDir(const TempDir&) = delete;
    TempDir& operator=(const TempDir&) = delete;

    const fs::path& path() const { return path_; }
    fs::path operator/(const fs::path& rel) const { return path_ / rel; }

private:
    fs::path path_;
};

inline void write_text(const fs::path& p, const std::string& text) {
    fs::create_directories(p.parent_path());
    std::ofstream(p, std::ios::binary) << text;
}

inline std::string read_text(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

// Solid-colour image; the format follows the extension.
inline void write_image(const fs::path& p, int w = 8, int h = 8, int channels = 3, int value = 128) {
    fs::create_directories(p.parent_path());
    cv::Mat m(h, w, CV_8UC(channels), cv::Scalar::all(value));
    cv::imwrite(p.string(), m);
}

// First stem "<prefix><n>" whose stub caption is entry `bucket`.
inline std::string stem_for_bucket(std::size_t bucket, const std::string& prefix = "s") {
    for (int n = 0;; ++n) {
        std::string stem = prefix + std::to_string(n);
        if (stub::caption_bucket(stem) == bucket) return stem;
    }
}

}  // namespace sgs::test
