#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

namespace deal::png {

struct Image8 {
    int width = 0;
    int height = 0;
    int channels = 0;  // 1 (gray / indexed) or 3 (RGB)
    std::vector<std::uint8_t> pixels;  // row-major, interleaved
};

/// Reads gray, palette or RGB(A) PNGs. Palette images keep their indices,
/// RGB(A) is returned as 3 channels, gray as 1.
Image8 read(const std::filesystem::path& path);
void write(const std::filesystem::path& path, const Image8& image);

}  // namespace deal::png
