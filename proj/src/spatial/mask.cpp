#include "grounder/spatial/mask.hpp"

#include <algorithm>
#include <numeric>

namespace grounder::spatial {

Bitmask Bitmask::zeros(int w, int h) {
    Bitmask m;
    m.width = w;
    m.height = h;
    m.bits.assign(static_cast<std::size_t>(w) * h, 0);
    return m;
}

Bitmask Bitmask::from_box(int w, int h, const BoundingBox& box) {
    Bitmask m = zeros(w, h);
    const int x1 = std::clamp(box.x1, 0, w);
    const int x2 = std::clamp(box.x2, 0, w);
    const int y1 = std::clamp(box.y1, 0, h);
    const int y2 = std::clamp(box.y2, 0, h);
    for (int y = y1; y < y2; ++y) {
        std::fill(m.bits.begin() + static_cast<std::size_t>(y) * w + x1,
                  m.bits.begin() + static_cast<std::size_t>(y) * w + x2,
                  static_cast<std::uint8_t>(1));
    }
    return m;
}

long long Bitmask::popcount() const {
    return std::accumulate(bits.begin(), bits.end(), 0LL);
}

std::vector<int> rle_encode(const Bitmask& mask) {
    std::vector<int> counts;
    std::uint8_t current = 0;
    int run = 0;
    for (int x = 0; x < mask.width; ++x) {
        for (int y = 0; y < mask.height; ++y) {
            const std::uint8_t v = mask.at(x, y);
            if (v == current) {
                ++run;
            } else {
                counts.push_back(run);
                current = v;
                run = 1;
            }
        }
    }
    counts.push_back(run);
    return counts;
}

Bitmask rle_decode(int width, int height, const std::vector<int>& counts) {
    const long long total = static_cast<long long>(width) * height;
    long long sum = 0;
    for (int c : counts) {
        if (c < 0) throw RleError("negative RLE run");
        sum += c;
    }
    if (sum != total) throw RleError("RLE counts do not sum to width*height");
    Bitmask m = Bitmask::zeros(width, height);
    long long pos = 0;
    std::uint8_t value = 0;
    for (int c : counts) {
        for (int i = 0; i < c; ++i, ++pos) {
            const int x = static_cast<int>(pos / height);
            const int y = static_cast<int>(pos % height);
            m.set(x, y, value);
        }
        value ^= 1;
    }
    return m;
}

std::pair<long long, long long> mask_intersection_union(const Bitmask& pred,
                                                        const Bitmask& gt) {
    if (pred.width != gt.width || pred.height != gt.height) {
        throw DimensionMismatch("mask dimensions differ");
    }
    long long inter = 0;
    long long uni = 0;
    for (std::size_t i = 0; i < pred.bits.size(); ++i) {
        inter += pred.bits[i] & gt.bits[i];
        uni += pred.bits[i] | gt.bits[i];
    }
    return {inter, uni};
}

}  // namespace grounder::spatial
