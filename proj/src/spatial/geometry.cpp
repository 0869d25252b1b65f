#include "grounder/spatial/geometry.hpp"

#include <algorithm>
#include <cmath>

namespace grounder::spatial {

double logistic(double x) { return 1.0 / (1.0 + std::exp(-x)); }

long long intersection_area(const BoundingBox& a, const BoundingBox& b) {
    const int ix1 = std::max(a.x1, b.x1);
    const int iy1 = std::max(a.y1, b.y1);
    const int ix2 = std::min(a.x2, b.x2);
    const int iy2 = std::min(a.y2, b.y2);
    if (ix1 >= ix2 || iy1 >= iy2) return 0;
    return static_cast<long long>(ix2 - ix1) * static_cast<long long>(iy2 - iy1);
}

double box_iou(const BoundingBox& a, const BoundingBox& b) {
    const long long inter = intersection_area(a, b);
    const long long uni = a.area() + b.area() - inter;
    if (uni <= 0) return 0.0;
    return static_cast<double>(inter) / static_cast<double>(uni);
}

bool is_geometric_relation(const std::string& relation) {
    return relation == "left of" || relation == "right of" || relation == "above" ||
           relation == "below" || relation == "inside" || relation == "contains" ||
           relation == "overlapping";
}

bool is_depth_relation(const std::string& relation) {
    return relation == "in front of" || relation == "behind";
}

double geometric_relation(const BoundingBox& a, const BoundingBox& b,
                          const std::string& relation, int img_w, int img_h) {
    if (relation == "left of") {
        return logistic(kRelationGain * (b.center_x() - a.center_x()) / img_w);
    }
    if (relation == "right of") {
        return logistic(kRelationGain * (a.center_x() - b.center_x()) / img_w);
    }
    if (relation == "above") {
        return logistic(kRelationGain * (b.center_y() - a.center_y()) / img_h);
    }
    if (relation == "below") {
        return logistic(kRelationGain * (a.center_y() - b.center_y()) / img_h);
    }
    if (relation == "inside") {
        return static_cast<double>(intersection_area(a, b)) / static_cast<double>(a.area());
    }
    if (relation == "contains") {
        return static_cast<double>(intersection_area(a, b)) / static_cast<double>(b.area());
    }
    if (relation == "overlapping") {
        return box_iou(a, b);
    }
    throw UnknownSpatialRelation(relation);
}

double depth_relation(double a_depth, double b_depth, const std::string& relation) {
    if (relation == "in front of") {
        return logistic(kRelationGain * (b_depth - a_depth));
    }
    if (relation == "behind") {
        return logistic(kRelationGain * (a_depth - b_depth));
    }
    throw UnknownDepthRelation(relation);
}

double entity_depth(const DepthField& field, const BoundingBox& box) {
    if (!box.valid() || box.x2 > field.width || box.y2 > field.height) {
        throw EmptyRegion("degenerate or out-of-field box");
    }
    std::vector<float> region;
    region.reserve(static_cast<std::size_t>(box.area()));
    for (int y = box.y1; y < box.y2; ++y) {
        const float* row = field.values.data() + static_cast<std::size_t>(y) * field.width;
        region.insert(region.end(), row + box.x1, row + box.x2);
    }
    if (region.empty()) throw EmptyRegion("empty region");
    std::sort(region.begin(), region.end());
    const std::size_t n = region.size();
    if (n % 2 == 1) return region[n / 2];
    return 0.5 * (static_cast<double>(region[n / 2 - 1]) + static_cast<double>(region[n / 2]));
}

}  // namespace grounder::spatial
