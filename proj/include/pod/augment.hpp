#pragma once

#include "pod/image.hpp"
#include "pod/rng.hpp"

#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace pod {

enum class PatchType { erase, invert, noise, external };

std::string to_string(PatchType t);
PatchType patch_type_from_string(const std::string& s);

/// Square l x l patch payload. An optional mask restricts which pixels are painted
/// (empty mask = every pixel), used for non-square shapes.
struct PatchPixels
{
    PatchType type = PatchType::noise;
    int side = 0;
    std::vector<double> values;
    std::vector<std::uint8_t> mask;

    double at(int y, int x) const { return values[static_cast<std::size_t>(y) * side + x]; }
    bool painted(int y, int x) const { return mask.empty() || mask[static_cast<std::size_t>(y) * side + x] != 0; }
};

/// erase -> zeros, invert -> 1 - source, noise -> i.i.d. Uniform[0,1].
/// `source` (row-major l x l) is required for invert and ignored otherwise.
PatchPixels make_patch(PatchType type, int side, std::optional<std::span<const double>> source, Rng& rng);

/// Wraps arbitrary pixels (e.g. an optimized adversarial patch) as an external patch.
PatchPixels external_patch(std::vector<double> values, int side);

/// Nearest-neighbour source index for destination index `i` when scaling `src_len` -> `dst_len`.
inline int nearest_source_index(int i, int dst_len, int src_len)
{
    const int j = static_cast<int>((static_cast<long long>(2 * i + 1) * src_len) / (2LL * dst_len));
    return j < src_len ? j : src_len - 1;
}

/// Nearest-neighbour rescale to `side` x `side`; type and mask are carried along.
PatchPixels resize_patch(const PatchPixels& patch, int side);

/// Copies the l x l image region at (x0, y0), row-major.
std::vector<double> crop_region(const Image& image, int x0, int y0, int side);

/// Returns a copy of `image` with `patch` pasted at (x0, y0). Throws ContractError when the
/// patch does not fit inside the image.
Image apply_patch(const Image& image, const PatchPixels& patch, int x0, int y0);
void apply_patch_inplace(Image& image, const PatchPixels& patch, int x0, int y0);

struct AugmentConfig
{
    int count_min = 1;
    int count_max = 3;
    /// patch side as a fraction of min(h, w)
    double size_fraction_min = 0.1;
    double size_fraction_max = 0.4;
    /// sampling weights for erase, invert, noise, external
    std::array<double, 4> type_weights{1.0, 1.0, 1.0, 0.0};
    bool emit_patch_labels = true;
};

void validate(const AugmentConfig& config);

struct AppliedPatch
{
    PatchType type = PatchType::noise;
    PixelRect rect;
};

struct AugmentResult
{
    Image image;
    std::vector<BBox> boxes;
    std::vector<AppliedPatch> patches;
};

/// Pixel rectangle covered by a normalized box (rounded to the nearest pixel edge).
PixelRect bbox_to_rect(const BBox& box, int image_height, int image_width);

/// Random-patch occlusion augmentation. Draws N patches with random side, type and placement
/// and applies them in sequence. With emit_patch_labels, one patch-class box per applied patch
/// is appended after the untouched input labels. External patches are drawn uniformly from
/// `external_pool`, which must be nonempty when the external weight is positive.
AugmentResult pod_augment(const Image& image, std::span<const BBox> labels, const AugmentConfig& config, Rng& rng,
                          std::span<const PatchPixels> external_pool = {});

} // namespace pod
