#pragma once

#include <span>
#include <string>
#include <vector>

namespace pod {

/// Single-channel intensity image, row-major, values in [0, 1].
class Image
{
public:
    Image() = default;
    Image(int height, int width, double fill = 0.0);

    int height() const noexcept { return height_; }
    int width() const noexcept { return width_; }
    bool empty() const noexcept { return pixels_.empty(); }

    double& at(int y, int x) { return pixels_[static_cast<std::size_t>(y) * width_ + x]; }
    double at(int y, int x) const { return pixels_[static_cast<std::size_t>(y) * width_ + x]; }

    std::span<double> pixels() noexcept { return pixels_; }
    std::span<const double> pixels() const noexcept { return pixels_; }

    bool operator==(const Image&) const = default;

private:
    int height_ = 0;
    int width_ = 0;
    std::vector<double> pixels_;
};

/// Bilinear resample to the requested size (pixel-center aligned).
Image resize_bilinear(const Image& src, int height, int width);

inline constexpr int kHumanClass = 0;
inline constexpr int kPatchClass = 1;

/// Half-open pixel rectangle [x0, x1) x [y0, y1).
struct PixelRect
{
    int x0 = 0;
    int y0 = 0;
    int x1 = 0;
    int y1 = 0;

    int width() const noexcept { return x1 - x0; }
    int height() const noexcept { return y1 - y0; }
    bool operator==(const PixelRect&) const = default;
};

/// Box geometry normalized to the unit square, center + size.
struct BBox
{
    int class_id = kHumanClass;
    double cx = 0.0;
    double cy = 0.0;
    double bw = 0.0;
    double bh = 0.0;

    bool operator==(const BBox&) const = default;
};

/// Corner form, used by IoU and clamping.
struct Corners
{
    double x0 = 0.0;
    double y0 = 0.0;
    double x1 = 0.0;
    double y1 = 0.0;
};

Corners to_corners(const BBox& b) noexcept;
BBox from_corners(int class_id, const Corners& c) noexcept;

/// Clip to the unit square. The result may be degenerate if the box was outside.
BBox clamp_to_unit(const BBox& b) noexcept;

BBox rect_to_bbox(int class_id, const PixelRect& r, int image_height, int image_width) noexcept;
/// Pixel extent of a normalized box (width, height in pixels).
double pixel_width(const BBox& b, int image_width) noexcept;
double pixel_height(const BBox& b, int image_height) noexcept;

bool bbox_valid(const BBox& b) noexcept;

struct Sample
{
    std::string id;
    Image image;
    std::vector<BBox> boxes;
};

struct Dataset
{
    std::string split_name;
    std::vector<Sample> samples;

    std::size_t size() const noexcept { return samples.size(); }
    bool empty() const noexcept { return samples.empty(); }
};

} // namespace pod
