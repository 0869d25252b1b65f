#pragma once

#include <stdexcept>
#include <string>
#include <vector>

namespace grounder::spatial {

struct SpatialError : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct UnknownSpatialRelation : SpatialError {
    explicit UnknownSpatialRelation(const std::string& rel)
        : SpatialError("unknown spatial relation: " + rel) {}
};
struct UnknownDepthRelation : SpatialError {
    explicit UnknownDepthRelation(const std::string& rel)
        : SpatialError("unknown depth relation: " + rel) {}
};
struct EmptyRegion : SpatialError {
    using SpatialError::SpatialError;
};

/// Axis-aligned box in pixel coordinates, origin top-left, x1 < x2, y1 < y2.
struct BoundingBox {
    int x1 = 0;
    int y1 = 0;
    int x2 = 0;
    int y2 = 0;

    bool valid() const { return x1 < x2 && y1 < y2 && x1 >= 0 && y1 >= 0; }
    long long area() const {
        return static_cast<long long>(x2 - x1) * static_cast<long long>(y2 - y1);
    }
    double center_x() const { return 0.5 * (x1 + x2); }
    double center_y() const { return 0.5 * (y1 + y2); }
    bool operator==(const BoundingBox&) const = default;
};

/// Monocular relative depth, row-major, normalized to [0,1] with 0 nearest.
struct DepthField {
    int width = 0;
    int height = 0;
    std::vector<float> values;
};

// Gain of the logistic soft scores; a displacement of ~20% of the image
// extent saturates above 0.9.
inline constexpr double kRelationGain = 12.0;

double logistic(double x);

long long intersection_area(const BoundingBox& a, const BoundingBox& b);
double box_iou(const BoundingBox& a, const BoundingBox& b);

bool is_geometric_relation(const std::string& relation);
bool is_depth_relation(const std::string& relation);

/// Soft score in [0,1] for a geometric relation between two boxes.
double geometric_relation(const BoundingBox& a, const BoundingBox& b,
                          const std::string& relation, int img_w, int img_h);

/// Soft score for "in front of"/"behind" given per-entity depths in [0,1].
double depth_relation(double a_depth, double b_depth, const std::string& relation);

/// Median depth inside the box.
double entity_depth(const DepthField& field, const BoundingBox& box);

}  // namespace grounder::spatial
