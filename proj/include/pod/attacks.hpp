#pragma once

#include "pod/augment.hpp"
#include "pod/detector.hpp"
#include "pod/image.hpp"
#include "pod/network.hpp"
#include "pod/rng.hpp"

#include <array>
#include <filesystem>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace pod {

enum class AttackKind { noise, universal, hcb, shapeloc };
enum class LocationPolicy { fixed_on_person, grid_search, random };

std::string to_string(AttackKind k);
std::string to_string(LocationPolicy p);
AttackKind attack_kind_from_string(const std::string& s);
LocationPolicy location_policy_from_string(const std::string& s);

struct AttackConfig
{
    AttackKind kind = AttackKind::universal;
    /// patch side relative to the person box (geometric-mean side) or, for the random
    /// policy, relative to min(h, w)
    double patch_fraction = 0.3;
    int steps = 200;
    double step_size = 0.05;
    LocationPolicy location_policy = LocationPolicy::fixed_on_person;
    std::uint64_t seed = 0;
    int batch_size = 16;       ///< images per universal-patch step
    int patch_resolution = 16; ///< side of the universal patch before per-image scaling
    int grid_positions = 5;    ///< candidate positions per axis over the person box
    int max_rects = 3;         ///< shapeloc rectangle budget (k)
    double area_budget = 0.15; ///< shapeloc area budget, fraction of the person box
    ClassWeights class_weights;
};

void validate(const AttackConfig& config);

struct PlacedPatch
{
    PatchPixels patch;
    int x0 = 0;
    int y0 = 0;
    bool per_image = true;
    double objective = 0.0;
};

/// Largest human box (first on ties), or nullptr.
const BBox* target_person(std::span<const BBox> boxes);

/// Patch side for a person box: patch_fraction * sqrt(box_w_px * box_h_px), at least 1 pixel.
int person_patch_side(const BBox& person, int image_height, int image_width, double fraction);

/// Top-left corner placing a side x side patch centered on the person, clamped into the image.
std::pair<int, int> centered_on(const BBox& person, int side, int image_height, int image_width);

/// n x n evenly spaced top-left corners spanning the person box, clamped into the image.
std::vector<std::pair<int, int>> candidate_positions(const BBox& person, int side, int image_height, int image_width,
                                                     int n);

/// Uniform[0,1] block, same sampler as the augmentation noise patch.
PatchPixels noise_patch(int side, Rng& rng);

/// Max class-0 confidence over cells whose decoded box overlaps `person`.
double person_confidence(const DetectorModel& model, const Image& image, const BBox& person, Workspace& ws);

struct UniversalTrace
{
    std::vector<double> batch_objective; ///< mean detection loss per step, before the update
};

/// Projected gradient ascent of the mean detection loss over mini-batches of `dataset` with
/// respect to a single patch. The patch (patch_resolution^2 pixels) starts from Uniform[0,1]
/// and is rescaled per image with nearest-neighbour sampling. Each step moves by step_size
/// along the gradient normalized to unit max-norm, then clips to [0,1].
PatchPixels optimize_universal_patch(const DetectorModel& model, const Dataset& dataset, const AttackConfig& config,
                                     UniversalTrace* trace = nullptr);

/// Mean detection loss over `samples` with `patch` placed per the config's policy
/// (random placements use a fixed stream derived from config.seed).
double universal_objective(const DetectorModel& model, const Dataset& dataset, const PatchPixels& patch,
                           const AttackConfig& config);

/// Binary 3x3 block pattern; bit (r*3 + c) of `pattern` gives cell (r, c).
PatchPixels hcb_pattern_patch(int pattern, int side);

inline constexpr int kHcbPatterns = 512;

struct HcbTrace
{
    int locations = 0;
    int patterns_per_location = 0;
    int best_pattern = -1;
};

/// Exhaustive search over all 512 binary 3x3 patterns at each candidate location over the
/// target person; objective is the fall in person confidence. Returns the first maximizer.
PlacedPatch hcb_attack(const DetectorModel& model, const Image& image, std::span<const BBox> gt,
                       const AttackConfig& config, HcbTrace* trace = nullptr);

struct ShapelocTrace
{
    std::vector<double> step_objective; ///< objective after each accepted rectangle, starting with the clean value
    int patched_area = 0;
    int area_budget_px = 0;
};

/// Greedy binary rectangle-union search: up to max_rects rectangles (value 0 or 1) inside the
/// person box, each chosen to maximize the fall in person confidence, within the area budget.
PlacedPatch shapeloc_attack(const DetectorModel& model, const Image& image, std::span<const BBox> gt,
                            const AttackConfig& config, ShapelocTrace* trace = nullptr);

/// Fall in person confidence caused by `placed`.
double confidence_drop(const DetectorModel& model, const Image& image, const BBox& person, const PlacedPatch& placed,
                       Workspace& ws);

struct ScenarioResult
{
    Dataset dataset;
    std::vector<std::optional<PlacedPatch>> placements; ///< per image, empty when nothing was applied
    std::optional<PatchPixels> universal;
};

/// Builds an attacked copy of `dataset`; ground-truth labels are kept unchanged and no
/// patch-class labels are added. The input is never modified.
ScenarioResult apply_attack_scenario(const DetectorModel& model, const Dataset& dataset, const AttackConfig& attack,
                                     Rng& rng);

struct PatchArchiveMeta
{
    std::string kind;
    int size = 0;
    std::uint64_t seed = 0;
    double objective = 0.0;
    int epoch = -1; ///< generation epoch for training-time patches, -1 otherwise
};

/// Writes `<stem>.png` (the patch pixels) and `<stem>.txt` (key=value metadata).
void save_patch_archive(const std::filesystem::path& stem, const PatchPixels& patch, const PatchArchiveMeta& meta);

struct PatchArchive
{
    PatchPixels patch;
    PatchArchiveMeta meta;
};

PatchArchive load_patch_archive(const std::filesystem::path& stem);

} // namespace pod
