#include "pod/augment.hpp"

#include "pod/errors.hpp"

#include <algorithm>
#include <cmath>

namespace pod {

std::string to_string(PatchType t)
{
    switch (t) {
    case PatchType::erase: return "erase";
    case PatchType::invert: return "invert";
    case PatchType::noise: return "noise";
    case PatchType::external: return "external";
    }
    return "?";
}

PatchType patch_type_from_string(const std::string& s)
{
    if (s == "erase")
        return PatchType::erase;
    if (s == "invert")
        return PatchType::invert;
    if (s == "noise")
        return PatchType::noise;
    if (s == "external")
        return PatchType::external;
    throw ContractError("unknown patch type '" + s + "'");
}

PatchPixels make_patch(PatchType type, int side, std::optional<std::span<const double>> source, Rng& rng)
{
    if (side < 1)
        throw ContractError("patch side must be at least 1");
    const std::size_t n = static_cast<std::size_t>(side) * side;
    PatchPixels p{type, side, std::vector<double>(n, 0.0), {}};
    switch (type) {
    case PatchType::erase:
        break;
    case PatchType::invert:
        if (!source || source->size() != n)
            throw ContractError("invert patch requires an l x l source region");
        for (std::size_t i = 0; i < n; ++i)
            p.values[i] = 1.0 - (*source)[i];
        break;
    case PatchType::noise:
        for (auto& v : p.values)
            v = uniform01(rng);
        break;
    case PatchType::external:
        throw ContractError("external patches are built with external_patch()");
    }
    return p;
}

PatchPixels external_patch(std::vector<double> values, int side)
{
    if (side < 1 || values.size() != static_cast<std::size_t>(side) * side)
        throw ContractError("external patch payload must be l x l");
    for (double v : values)
        if (!(v >= 0.0 && v <= 1.0))
            throw ContractError("external patch values must lie in [0,1]");
    return {PatchType::external, side, std::move(values), {}};
}

PatchPixels resize_patch(const PatchPixels& patch, int side)
{
    if (side < 1)
        throw ContractError("patch side must be at least 1");
    if (side == patch.side)
        return patch;
    PatchPixels out{patch.type, side, std::vector<double>(static_cast<std::size_t>(side) * side), {}};
    if (!patch.mask.empty())
        out.mask.resize(out.values.size());
    for (int y = 0; y < side; ++y) {
        const int sy = nearest_source_index(y, side, patch.side);
        for (int x = 0; x < side; ++x) {
            const int sx = nearest_source_index(x, side, patch.side);
            const std::size_t src = static_cast<std::size_t>(sy) * patch.side + sx;
            const std::size_t dst = static_cast<std::size_t>(y) * side + x;
            out.values[dst] = patch.values[src];
            if (!patch.mask.empty())
                out.mask[dst] = patch.mask[src];
        }
    }
    return out;
}

std::vector<double> crop_region(const Image& image, int x0, int y0, int side)
{
    if (side < 1 || x0 < 0 || y0 < 0 || x0 + side > image.width() || y0 + side > image.height())
        throw ContractError("crop region outside image");
    std::vector<double> out(static_cast<std::size_t>(side) * side);
    for (int y = 0; y < side; ++y)
        for (int x = 0; x < side; ++x)
            out[static_cast<std::size_t>(y) * side + x] = image.at(y0 + y, x0 + x);
    return out;
}

void apply_patch_inplace(Image& image, const PatchPixels& patch, int x0, int y0)
{
    if (patch.side < 1 || patch.values.size() != static_cast<std::size_t>(patch.side) * patch.side)
        throw ContractError("malformed patch");
    if (x0 < 0 || y0 < 0 || x0 + patch.side > image.width() || y0 + patch.side > image.height())
        throw ContractError("patch placement out of bounds");
    for (int y = 0; y < patch.side; ++y)
        for (int x = 0; x < patch.side; ++x)
            if (patch.painted(y, x))
                image.at(y0 + y, x0 + x) = patch.at(y, x);
}

Image apply_patch(const Image& image, const PatchPixels& patch, int x0, int y0)
{
    Image out = image;
    apply_patch_inplace(out, patch, x0, y0);
    return out;
}

void validate(const AugmentConfig& c)
{
    if (c.count_min < 0 || c.count_max < c.count_min)
        throw ContractError("augment count range must be nonnegative and ordered");
    if (!(c.size_fraction_min > 0) || c.size_fraction_max > 1 || c.size_fraction_max < c.size_fraction_min)
        throw ContractError("augment size fractions must satisfy 0 < min <= max <= 1");
    double sum = 0;
    for (double w : c.type_weights) {
        if (!(w >= 0))
            throw ContractError("augment type weights must be nonnegative");
        sum += w;
    }
    if (!(sum > 0))
        throw ContractError("augment type weights must have a positive sum");
}

PixelRect bbox_to_rect(const BBox& box, int image_height, int image_width)
{
    const Corners c = to_corners(box);
    return {static_cast<int>(std::lround(c.x0 * image_width)), static_cast<int>(std::lround(c.y0 * image_height)),
            static_cast<int>(std::lround(c.x1 * image_width)), static_cast<int>(std::lround(c.y1 * image_height))};
}

AugmentResult pod_augment(const Image& image, std::span<const BBox> labels, const AugmentConfig& config, Rng& rng,
                          std::span<const PatchPixels> external_pool)
{
    validate(config);
    if (config.type_weights[3] > 0 && external_pool.empty())
        throw ContractError("external patch weight set but the patch pool is empty");

    AugmentResult out{image, {labels.begin(), labels.end()}, {}};
    const int h = image.height();
    const int w = image.width();
    const int base = std::min(h, w);
    std::discrete_distribution<int> pick_type(config.type_weights.begin(), config.type_weights.end());

    const int count = uniform_int(rng, config.count_min, config.count_max);
    for (int i = 0; i < count; ++i) {
        const double frac =
            config.size_fraction_min + (config.size_fraction_max - config.size_fraction_min) * uniform01(rng);
        const int side = std::clamp(static_cast<int>(std::lround(frac * base)), 1, base);
        const auto type = static_cast<PatchType>(pick_type(rng));
        const int x0 = uniform_int(rng, 0, w - side);
        const int y0 = uniform_int(rng, 0, h - side);

        PatchPixels patch;
        if (type == PatchType::external) {
            const auto& src = external_pool[static_cast<std::size_t>(
                uniform_int(rng, 0, static_cast<int>(external_pool.size()) - 1))];
            patch = resize_patch(src, side);
            patch.type = PatchType::external;
        } else if (type == PatchType::invert) {
            const auto region = crop_region(out.image, x0, y0, side);
            patch = make_patch(type, side, std::span<const double>(region), rng);
        } else {
            patch = make_patch(type, side, std::nullopt, rng);
        }
        apply_patch_inplace(out.image, patch, x0, y0);

        const PixelRect rect{x0, y0, x0 + side, y0 + side};
        out.patches.push_back({type, rect});
        if (config.emit_patch_labels)
            out.boxes.push_back(rect_to_bbox(kPatchClass, rect, h, w));
    }
    return out;
}

} // namespace pod
