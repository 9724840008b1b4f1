#pragma once

#include "pod/image.hpp"

namespace pod {

/// Intersection over union of two corner-form boxes; 0 when the union is empty.
double iou(const Corners& a, const Corners& b) noexcept;

inline double iou(const BBox& a, const BBox& b) noexcept { return iou(to_corners(a), to_corners(b)); }

} // namespace pod
