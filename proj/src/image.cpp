#include "pod/image.hpp"

#include "pod/errors.hpp"

#include <algorithm>
#include <cmath>

namespace pod {

Image::Image(int height, int width, double fill)
    : height_(height), width_(width)
{
    if (height < 1 || width < 1)
        throw ContractError("image dimensions must be positive");
    pixels_.assign(static_cast<std::size_t>(height) * width, fill);
}

Image resize_bilinear(const Image& src, int height, int width)
{
    if (src.height() == height && src.width() == width)
        return src;
    Image out(height, width);
    const double sy = static_cast<double>(src.height()) / height;
    const double sx = static_cast<double>(src.width()) / width;
    for (int y = 0; y < height; ++y) {
        const double fy = std::clamp((y + 0.5) * sy - 0.5, 0.0, src.height() - 1.0);
        const int y0 = static_cast<int>(fy);
        const int y1 = std::min(y0 + 1, src.height() - 1);
        const double wy = fy - y0;
        for (int x = 0; x < width; ++x) {
            const double fx = std::clamp((x + 0.5) * sx - 0.5, 0.0, src.width() - 1.0);
            const int x0 = static_cast<int>(fx);
            const int x1 = std::min(x0 + 1, src.width() - 1);
            const double wx = fx - x0;
            const double top = src.at(y0, x0) * (1 - wx) + src.at(y0, x1) * wx;
            const double bot = src.at(y1, x0) * (1 - wx) + src.at(y1, x1) * wx;
            out.at(y, x) = top * (1 - wy) + bot * wy;
        }
    }
    return out;
}

Corners to_corners(const BBox& b) noexcept
{
    return {b.cx - b.bw / 2, b.cy - b.bh / 2, b.cx + b.bw / 2, b.cy + b.bh / 2};
}

BBox from_corners(int class_id, const Corners& c) noexcept
{
    return {class_id, (c.x0 + c.x1) / 2, (c.y0 + c.y1) / 2, c.x1 - c.x0, c.y1 - c.y0};
}

BBox clamp_to_unit(const BBox& b) noexcept
{
    Corners c = to_corners(b);
    c.x0 = std::clamp(c.x0, 0.0, 1.0);
    c.y0 = std::clamp(c.y0, 0.0, 1.0);
    c.x1 = std::clamp(c.x1, 0.0, 1.0);
    c.y1 = std::clamp(c.y1, 0.0, 1.0);
    return from_corners(b.class_id, c);
}

BBox rect_to_bbox(int class_id, const PixelRect& r, int image_height, int image_width) noexcept
{
    const double w = image_width;
    const double h = image_height;
    return from_corners(class_id, {r.x0 / w, r.y0 / h, r.x1 / w, r.y1 / h});
}

double pixel_width(const BBox& b, int image_width) noexcept { return b.bw * image_width; }
double pixel_height(const BBox& b, int image_height) noexcept { return b.bh * image_height; }

bool bbox_valid(const BBox& b) noexcept
{
    constexpr double eps = 1e-9;
    if (!(std::isfinite(b.cx) && std::isfinite(b.cy) && std::isfinite(b.bw) && std::isfinite(b.bh)))
        return false;
    if (b.class_id != kHumanClass && b.class_id != kPatchClass)
        return false;
    if (b.bw <= 0 || b.bh <= 0 || b.bw > 1 + eps || b.bh > 1 + eps)
        return false;
    const Corners c = to_corners(b);
    return c.x0 >= -eps && c.y0 >= -eps && c.x1 <= 1 + eps && c.y1 <= 1 + eps;
}

} // namespace pod
