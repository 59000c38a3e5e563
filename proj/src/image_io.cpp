// Copyright Contributors to the artikin project
// SPDX-License-Identifier: Apache-2.0

#include "artikin/image_io.hpp"

#include "artikin/error.hpp"
#include "artikin/scene_io.hpp"

#include <zlib.h>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iterator>
#include <numeric>
#include <sstream>

namespace artikin {

std::size_t BinaryImage::count() const
{
    return static_cast<std::size_t>(std::count_if(pixels.begin(), pixels.end(), [](auto v) { return v != 0; }));
}

std::string encode_ppm(int width, int height, std::span<const double> rgb)
{
    std::string out = "P6\n" + std::to_string(width) + " " + std::to_string(height) + "\n255\n";
    out.reserve(out.size() + rgb.size());
    for (double v : rgb) {
        const double c = std::clamp(v, 0.0, 1.0);
        out.push_back(static_cast<char>(static_cast<unsigned char>(std::lround(c * 255.0))));
    }
    return out;
}

namespace {

void put_be32(std::string& out, std::uint32_t v)
{
    for (int shift = 24; shift >= 0; shift -= 8) {
        out.push_back(static_cast<char>((v >> shift) & 0xff));
    }
}

void put_chunk(std::string& out, const char* type, const std::string& data)
{
    put_be32(out, static_cast<std::uint32_t>(data.size()));
    const std::string body = std::string(type, 4) + data;
    out += body;
    const auto crc = crc32(0L, reinterpret_cast<const Bytef*>(body.data()), static_cast<uInt>(body.size()));
    put_be32(out, static_cast<std::uint32_t>(crc));
}

} // namespace

std::string encode_png(int width, int height, std::span<const double> rgb)
{
    if (width <= 0 || height <= 0 || rgb.size() != 3 * static_cast<std::size_t>(width) * height) {
        throw ValidationError("encode_png: pixel buffer does not match the image size");
    }
    // Filter type 0 on every scanline.
    std::string raw;
    raw.reserve(static_cast<std::size_t>(height) * (3 * width + 1));
    for (int y = 0; y < height; ++y) {
        raw.push_back('\0');
        for (int i = 0; i < 3 * width; ++i) {
            const double c = std::clamp(rgb[static_cast<std::size_t>(y) * 3 * width + i], 0.0, 1.0);
            raw.push_back(static_cast<char>(static_cast<unsigned char>(std::lround(c * 255.0))));
        }
    }
    uLongf packed_size = compressBound(static_cast<uLong>(raw.size()));
    std::string packed(packed_size, '\0');
    if (compress2(reinterpret_cast<Bytef*>(packed.data()), &packed_size, reinterpret_cast<const Bytef*>(raw.data()),
                  static_cast<uLong>(raw.size()), Z_BEST_SPEED) != Z_OK) {
        throw RuntimeFailure("encode_png: deflate failed");
    }
    packed.resize(packed_size);

    std::string out("\x89PNG\r\n\x1a\n", 8);
    std::string ihdr;
    put_be32(ihdr, static_cast<std::uint32_t>(width));
    put_be32(ihdr, static_cast<std::uint32_t>(height));
    ihdr += std::string("\x08\x02\x00\x00\x00", 5);
    put_chunk(out, "IHDR", ihdr);
    put_chunk(out, "IDAT", packed);
    put_chunk(out, "IEND", "");
    return out;
}

std::string encode_pgm16(int width, int height, std::span<const double> values, double scale)
{
    std::string out = "P5\n" + std::to_string(width) + " " + std::to_string(height) + "\n65535\n";
    out.reserve(out.size() + 2 * values.size());
    for (double v : values) {
        const auto q = static_cast<unsigned>(std::clamp(std::lround(v * scale), 0L, 65535L));
        out.push_back(static_cast<char>((q >> 8) & 0xff));
        out.push_back(static_cast<char>(q & 0xff));
    }
    return out;
}

std::string encode_mask_pgm(const BinaryImage& mask)
{
    std::string out = "P5\n" + std::to_string(mask.width) + " " + std::to_string(mask.height) + "\n255\n";
    for (auto v : mask.pixels) {
        out.push_back(static_cast<char>(v ? 255 : 0));
    }
    return out;
}

BinaryImage decode_mask_pgm(const std::string& bytes)
{
    std::istringstream in(bytes);
    std::string magic;
    int w = 0, h = 0, maxval = 0;
    in >> magic >> w >> h >> maxval;
    if (magic != "P5" || w <= 0 || h <= 0 || maxval != 255) {
        throw ValidationError("mask is not an 8-bit binary PGM");
    }
    in.get();
    BinaryImage mask(w, h);
    std::string body(std::istreambuf_iterator<char>(in), {});
    if (body.size() < mask.pixels.size()) {
        throw ValidationError("mask PGM is truncated");
    }
    for (std::size_t i = 0; i < mask.pixels.size(); ++i) {
        mask.pixels[i] = body[i] != 0 ? 1 : 0;
    }
    return mask;
}

void write_ppm(const std::filesystem::path& path, int width, int height, std::span<const double> rgb)
{
    write_text_file(encode_ppm(width, height, rgb), path);
}

void write_pgm16(const std::filesystem::path& path, int width, int height, std::span<const double> values,
                 double scale)
{
    write_text_file(encode_pgm16(width, height, values, scale), path);
}

void write_mask_pgm(const std::filesystem::path& path, const BinaryImage& mask)
{
    write_text_file(encode_mask_pgm(mask), path);
}

BinaryImage read_mask_pgm(const std::filesystem::path& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw ValidationError("cannot open mask '" + path.string() + "'");
    }
    return decode_mask_pgm(std::string(std::istreambuf_iterator<char>(in), {}));
}

} // namespace artikin
