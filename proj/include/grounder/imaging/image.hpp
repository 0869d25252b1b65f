#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "grounder/spatial/geometry.hpp"

namespace grounder::imaging {

struct ImageError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct Rgb {
    std::uint8_t r = 0, g = 0, b = 0;
    bool operator==(const Rgb&) const = default;
};

/// 8-bit RGB raster, row-major.
struct Image {
    int width = 0;
    int height = 0;
    std::vector<std::uint8_t> pixels;  // width*height*3

    static Image filled(int w, int h, Rgb color);

    Rgb at(int x, int y) const {
        const std::size_t i = (static_cast<std::size_t>(y) * width + x) * 3;
        return {pixels[i], pixels[i + 1], pixels[i + 2]};
    }
    void set(int x, int y, Rgb c) {
        const std::size_t i = (static_cast<std::size_t>(y) * width + x) * 3;
        pixels[i] = c.r;
        pixels[i + 1] = c.g;
        pixels[i + 2] = c.b;
    }
    bool operator==(const Image&) const = default;
};

/// Decodes 8-bit RGB/RGBA/gray non-interlaced PNG. Alpha is dropped.
Image decode_png(const std::vector<std::uint8_t>& bytes);

/// Deterministic PNG encoder (stored deflate blocks); identical pixels give
/// identical bytes on every platform.
std::vector<std::uint8_t> encode_png(const Image& image);

void fill_rect(Image& image, const spatial::BoundingBox& box, Rgb color);
Image crop(const Image& image, const spatial::BoundingBox& box);

std::vector<std::uint8_t> read_file(const std::string& path);
void write_file(const std::string& path, const std::vector<std::uint8_t>& bytes);

}  // namespace grounder::imaging
