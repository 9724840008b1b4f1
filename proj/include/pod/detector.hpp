#pragma once

#include "pod/image.hpp"
#include "pod/network.hpp"

#include "json.hpp"

#include <filesystem>
#include <optional>
#include <span>
#include <vector>

namespace pod {

struct Detection
{
    BBox box; ///< box.class_id is the predicted class
    double confidence = 0.0;
};

struct ClassWeights
{
    double human = 0.9;
    double patch = 0.1;
};

/// Selects which loss terms contribute (value and gradient).
struct LossTerms
{
    bool objectness = true;
    bool box = true;
    bool classification = true;
};

struct LossBreakdown
{
    double objectness = 0.0;
    double box = 0.0;
    double classification = 0.0;
    int matched = 0;         ///< targets assigned to a cell
    int skipped = 0;         ///< targets dropped because their cell was taken
    int patch_targets = 0;   ///< matched targets of the patch class

    double total() const noexcept { return objectness + box + classification; }
};

inline constexpr double kDefaultBoxWeight = 5.0;

/// Grid cell owning each target (by box center), -1 for targets skipped because an earlier
/// target already claimed the cell.
std::vector<int> assign_targets(std::span<const BBox> targets, int grid);

/// Composite detection loss on raw head outputs (channels x grid^2):
///   sum over cells of BCE(objectness)
/// + box_weight * squared error of the sigmoid box parameters on matched cells
/// + class-weighted cross-entropy on matched cells.
/// When `grad` is non-null it receives dLoss/dRaw for the selected terms.
LossBreakdown detection_loss(const Matrix& raw, int grid, std::span<const BBox> targets, const ClassWeights& weights,
                             Matrix* grad = nullptr, const LossTerms& terms = {},
                             double box_weight = kDefaultBoxWeight);

/// Decodes every cell into one detection per class with confidence sigma(obj) * softmax(class)
/// and keeps those with confidence >= conf_threshold. No suppression.
std::vector<Detection> decode(const Matrix& raw, int grid, double conf_threshold);

/// Greedy per-class suppression: detections are visited by descending confidence (stable) and
/// dropped when their IoU with an already kept same-class detection exceeds `iou_threshold`.
std::vector<Detection> non_max_suppression(std::vector<Detection> detections, double iou_threshold);

/// Resamples the image to the model input when needed, decodes and suppresses.
/// Throws EvalError if the network output is not finite.
std::vector<Detection> predict(const DetectorModel& model, const Image& image, double conf_threshold,
                               double nms_iou, Workspace* ws = nullptr);

inline constexpr const char* kCheckpointMagic = "podmodel-v1";

nlohmann::json to_json(const Architecture& arch);
Architecture architecture_from_json(const nlohmann::json& j);

struct Checkpoint
{
    DetectorModel model;
    nlohmann::json metadata; ///< training config snapshot, wall time, ...
};

void save_checkpoint(const std::filesystem::path& path, const DetectorModel& model, const nlohmann::json& metadata);
Checkpoint load_checkpoint(const std::filesystem::path& path);

} // namespace pod
