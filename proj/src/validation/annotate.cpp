#include "grounder/validation/annotate.hpp"

#include <algorithm>

namespace grounder::validation {
namespace {

// 8x10 bitmap glyph for 'A', rendered at 2x into the 16x20 label cell.
// Bundled so rendering is identical on every platform.
constexpr std::uint8_t kGlyphA[10] = {
    0b00111100,
    0b01100110,
    0b11000011,
    0b11000011,
    0b11111111,
    0b11000011,
    0b11000011,
    0b11000011,
    0b11000011,
    0b00000000,
};

void draw_label(imaging::Image& image, int cell_x, int cell_y) {
    for (int y = 0; y < kLabelCellHeight; ++y) {
        for (int x = 0; x < kLabelCellWidth; ++x) {
            const int px = cell_x + x;
            const int py = cell_y + y;
            if (px < 0 || py < 0 || px >= image.width || py >= image.height) continue;
            const int gx = x / 2;
            const int gy = y / 2;
            const bool on = (kGlyphA[gy] >> (7 - gx)) & 1;
            image.set(px, py, on ? kLabelWhite : kAnnotationRed);
        }
    }
}

}  // namespace

imaging::Image annotate_candidate(const imaging::Image& image,
                                  const spatial::BoundingBox& box) {
    if (!box.valid() || box.x2 > image.width || box.y2 > image.height) {
        throw BoxOutOfBounds("annotation box outside image bounds");
    }
    imaging::Image out = image;

    auto border_stripe = [&](int x1, int y1, int x2, int y2) {
        imaging::fill_rect(out, {std::max(x1, 0), std::max(y1, 0),
                                 std::min(x2, image.width), std::min(y2, image.height)},
                           kAnnotationRed);
    };
    border_stripe(box.x1 - kBorderWidth, box.y1 - kBorderWidth, box.x2 + kBorderWidth,
                  box.y1);  // top
    border_stripe(box.x1 - kBorderWidth, box.y2, box.x2 + kBorderWidth,
                  box.y2 + kBorderWidth);  // bottom
    border_stripe(box.x1 - kBorderWidth, box.y1, box.x1, box.y2);  // left
    border_stripe(box.x2, box.y1, box.x2 + kBorderWidth, box.y2);  // right

    // Label at the top-left corner of the box, repositioned inside the frame
    // when the box touches the edge.
    const int cell_x =
        std::max(0, std::min(box.x1 - kBorderWidth, image.width - kLabelCellWidth));
    const int cell_y = std::max(0, std::min(box.y1 - kBorderWidth - kLabelCellHeight,
                                            image.height - kLabelCellHeight));
    draw_label(out, cell_x, cell_y);
    return out;
}

Verdict decide(double p_yes) { return p_yes >= 0.5 ? Verdict::Yes : Verdict::No; }

}  // namespace grounder::validation
