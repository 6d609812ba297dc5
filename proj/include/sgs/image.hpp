#pragma once

#include <filesystem>
#include <vector>

namespace sgs {

// Decoded pixels before any resizing. Interleaved, row-major, values in [0,1].
// channels is 1 (gray), 3 (RGB) or 4 (RGBA).
struct Raster {
    int width = 0;
    int height = 0;
    int channels = 0;
    std::vector<float> data;
    std::filesystem::path source;
};

// What every captioner and encoder receives: 448x448 RGB in [0,1].
struct ImageTensor {
    static constexpr int kSide = 448;
    static constexpr int kChannels = 3;

    int width = kSide;
    int height = kSide;
    std::vector<float> rgb;  // kSide * kSide * 3, interleaved
    std::filesystem::path source;

    float at(int x, int y, int c) const { return rgb[(static_cast<std::size_t>(y) * width + x) * 3 + c]; }
};

// Throws DecodeError (carrying the path) for missing, truncated or non-image files.
Raster decode_image(const std::filesystem::path& path);

// Plain bilinear stretch to 448x448 (aspect ratio is not kept). Gray is
// replicated to three channels and alpha is dropped.
ImageTensor preprocess_image(const Raster& raster);

inline ImageTensor load_image(const std::filesystem::path& path) {
    return preprocess_image(decode_image(path));
}

// 8-bit PNG dump, used to hand tensors to out-of-process model adapters.
void write_png(const ImageTensor& image, const std::filesystem::path& path);

}  // namespace sgs
