#pragma once

#include <stdexcept>

#include "grounder/imaging/image.hpp"
#include "grounder/spatial/geometry.hpp"

namespace grounder::validation {

struct BoxOutOfBounds : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Frozen annotation style: 4 px pure red border, label "A" in a 20 px cell
// at the top-left corner of the box, white glyph on red background.
inline constexpr int kBorderWidth = 4;
inline constexpr imaging::Rgb kAnnotationRed{255, 0, 0};
inline constexpr imaging::Rgb kLabelWhite{255, 255, 255};
inline constexpr int kLabelCellWidth = 16;
inline constexpr int kLabelCellHeight = 20;

/// Draws the candidate marker. Deterministic: identical inputs give
/// byte-identical pixels (and PNG bytes via the deterministic encoder).
imaging::Image annotate_candidate(const imaging::Image& image,
                                  const spatial::BoundingBox& box);

enum class Verdict { Yes, No };

/// Yes iff p_yes >= 0.5; the boundary is assigned to Yes.
Verdict decide(double p_yes);

}  // namespace grounder::validation
