#pragma once

#include <span>
#include <vector>

#include "dift/core/types.hpp"
#include "dift/temporal/label_mask.hpp"

namespace dift {

/// Region similarity |pred ∩ gt| / |pred ∪ gt| over one object's pixels;
/// 1 when the object is absent from both.
double jaccard_J(const HardMask& pred, const HardMask& gt, int object_id);

/// Object pixels with a 4-neighbour of another label (image edges do not
/// count as boundary).
std::vector<bool> object_boundary(const HardMask& mask, int object_id);

/// Boundary F-measure: precision and recall of boundary pixels matched within
/// a disk of radius tolerance_px. Both boundaries empty gives 1, exactly one
/// empty gives 0.
double contour_F(const HardMask& pred, const HardMask& gt, int object_id, double tolerance_px);

/// ceil(0.008 * image diagonal).
double default_contour_tolerance(Dims image);

/// Fraction of keypoints within alpha * max(norm height, norm width).
struct KeypointPck {
    std::size_t correct = 0;
    std::size_t total = 0;
    double value() const { return total == 0 ? 0.0 : static_cast<double>(correct) / total; }
};

KeypointPck keypoint_pck(std::span<const Point2D> predicted, std::span<const Point2D> truth, double norm_height,
                         double norm_width, double alpha);

/// Tight box around a set of points (the annotated person extent).
BoundingBox points_bbox(std::span<const Point2D> points);

}  // namespace dift
