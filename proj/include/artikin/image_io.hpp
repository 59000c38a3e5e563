// Copyright Contributors to the artikin project
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

namespace artikin {

/// Binary mask, row-major, one byte per pixel (0 or 1).
struct BinaryImage {
    int width = 0;
    int height = 0;
    std::vector<std::uint8_t> pixels;

    BinaryImage() = default;
    BinaryImage(int w, int h) : width(w), height(h), pixels(static_cast<std::size_t>(w) * h, 0) {}

    [[nodiscard]] bool inside(int x, int y) const { return x >= 0 && y >= 0 && x < width && y < height; }
    [[nodiscard]] bool at(int x, int y) const { return pixels[static_cast<std::size_t>(y) * width + x] != 0; }
    void set(int x, int y, bool v) { pixels[static_cast<std::size_t>(y) * width + x] = v ? 1 : 0; }
    [[nodiscard]] std::size_t count() const;

    friend bool operator==(const BinaryImage&, const BinaryImage&) = default;
};

/// Depth PGMs store round(depth · kDepthScale), i.e. millimetres for metre scenes.
inline constexpr double kDepthScale = 1000.0;
/// Weight PGMs store round(weight · kWeightScale).
inline constexpr double kWeightScale = 65535.0;

/// P6, maxval 255. `rgb` is interleaved in [0,1] and clamped.
std::string encode_ppm(int width, int height, std::span<const double> rgb);
/// 8-bit RGB PNG.
std::string encode_png(int width, int height, std::span<const double> rgb);
/// P5, maxval 65535, big-endian; values are round(v · scale) clamped to 16 bits.
std::string encode_pgm16(int width, int height, std::span<const double> values, double scale);
/// P5, maxval 255, 0/255 values.
std::string encode_mask_pgm(const BinaryImage& mask);
/// Parse an 8-bit P5 mask; nonzero pixels are set.
BinaryImage decode_mask_pgm(const std::string& bytes);

void write_ppm(const std::filesystem::path& path, int width, int height, std::span<const double> rgb);
void write_pgm16(const std::filesystem::path& path, int width, int height, std::span<const double> values,
                 double scale);
void write_mask_pgm(const std::filesystem::path& path, const BinaryImage& mask);
BinaryImage read_mask_pgm(const std::filesystem::path& path);

} // namespace artikin
