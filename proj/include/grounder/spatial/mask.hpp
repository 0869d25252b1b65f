#pragma once

#include <cstdint>
#include <utility>
#include <vector>

#include "grounder/spatial/geometry.hpp"

namespace grounder::spatial {

struct DimensionMismatch : SpatialError {
    using SpatialError::SpatialError;
};
struct RleError : SpatialError {
    using SpatialError::SpatialError;
};

/// Binary pixel mask, one byte per pixel, row-major.
struct Bitmask {
    int width = 0;
    int height = 0;
    std::vector<std::uint8_t> bits;  // width*height entries, 0 or 1

    static Bitmask zeros(int w, int h);
    static Bitmask from_box(int w, int h, const BoundingBox& box);

    std::uint8_t at(int x, int y) const {
        return bits[static_cast<std::size_t>(y) * width + x];
    }
    void set(int x, int y, std::uint8_t v) {
        bits[static_cast<std::size_t>(y) * width + x] = v;
    }
    long long popcount() const;
    bool operator==(const Bitmask&) const = default;
};

/// COCO-style uncompressed RLE: alternating 0-run/1-run lengths, column-major
/// scan (down each column), starting with a 0-run.
std::vector<int> rle_encode(const Bitmask& mask);
Bitmask rle_decode(int width, int height, const std::vector<int>& counts);

/// (|AND|, |OR|) pixel counts; the harness accumulates these into cIoU.
std::pair<long long, long long> mask_intersection_union(const Bitmask& pred,
                                                        const Bitmask& gt);

}  // namespace grounder::spatial
