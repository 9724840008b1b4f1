#pragma once

#include "pod/image.hpp"

#include <filesystem>

namespace pod {

/// Reads an 8-bit PNG (any color type, converted to gray) or a binary/ASCII PGM.
/// Intensities are mapped linearly to [0, 1].
Image read_image(const std::filesystem::path& path);

/// Writes an 8-bit grayscale PNG; values are clamped to [0, 1] and rounded to 1/255 steps.
void write_png(const std::filesystem::path& path, const Image& image);

/// Writes a binary (P5) 8-bit PGM.
void write_pgm(const std::filesystem::path& path, const Image& image);

/// Rounds every pixel to the nearest 1/255 level, the same quantization the writers apply.
Image quantize_8bit(const Image& image);

} // namespace pod
