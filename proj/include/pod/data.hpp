#pragma once

#include "pod/image.hpp"
#include "pod/rng.hpp"

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

namespace pod {

/// Reads `<root>/<split>/images/*.{png,pgm}` paired by stem with `<root>/<split>/labels/*.txt`.
/// Samples are ordered by file name. An image without a label file has no boxes.
/// Boxes are clamped to the unit square; boxes that clamp to zero area are dropped.
Dataset load_dataset(const std::filesystem::path& root, const std::string& split);

/// Writes the dataset as PNG + label text files in the layout read by load_dataset.
void save_dataset(const std::filesystem::path& root, const Dataset& dataset);

/// Parses one label line "class cx cy bw bh". Throws ParseError on malformed input.
BBox parse_label_line(const std::string& line, const std::string& file, std::size_t line_no);
std::string format_label_line(const BBox& box);

struct FilterResult
{
    Dataset dataset;
    std::size_t kept_images = 0;
    std::size_t kept_labels = 0;
};

/// Keeps human boxes whose larger pixel side exceeds `min_size_px` and drops images left
/// without boxes. Non-human boxes are discarded.
FilterResult filter_persons(const Dataset& dataset, double min_size_px);

struct SynthConfig
{
    int image_size = 128;
    int persons_min = 1;
    int persons_max = 3;
    double intensity_min = 0.65;
    double intensity_max = 0.95;
    double background_level = 0.22;
    double background_noise_level = 0.08;
    /// person height as a fraction of the image side
    double height_min = 0.25;
    double height_max = 0.6;
    /// person width / height
    double aspect_min = 0.3;
    double aspect_max = 0.5;
    /// fraction of the normalized radius over which the edge fades out
    double edge_softness = 0.3;
    int max_retries = 50;
    std::uint64_t seed = 0;
};

void validate(const SynthConfig& config);

struct SynthScene
{
    Image image;
    std::vector<BBox> boxes;
    int requested = 0;
    int placed = 0;
};

/// Dark speckled background with bright elliptical persons, one tight human box per blob.
/// Persons that cannot be placed without overlap after `max_retries` attempts are skipped.
SynthScene synth_scene(const SynthConfig& config, Rng& rng);

/// `count` scenes; scene i uses the stream derive_seed(config.seed, split, i).
Dataset synth_dataset(const SynthConfig& config, std::size_t count, const std::string& split);

} // namespace pod
