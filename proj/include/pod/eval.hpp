#pragma once

#include "pod/attacks.hpp"
#include "pod/detector.hpp"
#include "pod/iou.hpp"

#include "json.hpp"

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace pod {

struct ScoredDetection
{
    Detection detection;
    std::size_t image_id = 0;
};

struct GroundTruth
{
    BBox box;
    std::size_t image_id = 0;
};

struct PRPoint
{
    double precision = 0.0;
    double recall = 0.0;
    double threshold = 0.0;
};

/// One point per distinct confidence level (tied detections enter together). Detections are
/// visited by descending confidence, input order on ties; each matches the unmatched
/// ground truth of its image with the highest IoU >= iou_threshold.
std::vector<PRPoint> precision_recall_curve(std::span<const ScoredDetection> detections,
                                            std::span<const GroundTruth> gts, int class_id,
                                            double iou_threshold = 0.5);

/// All-points interpolated AP for one class. 1 when there are neither ground truths nor
/// detections of the class, 0 when only one side is empty.
double average_precision(std::span<const ScoredDetection> detections, std::span<const GroundTruth> gts, int class_id,
                         double iou_threshold = 0.5);

struct EvalOptions
{
    int repeats = 5;
    double conf_threshold = 0.001;
    double nms_iou = 0.5;
    double iou_threshold = 0.5;
    std::uint64_t seed = 0;
    int threads = 1;
};

/// Human-class AP of `model` on `dataset`.
double dataset_ap(const DetectorModel& model, const Dataset& dataset, const EvalOptions& options);

struct Scenario
{
    std::string name;
    std::optional<AttackConfig> attack; ///< empty = clean
};

struct NamedModel
{
    std::string mode;
    const DetectorModel* model = nullptr;
    double train_wall_time_s = 0.0;
};

struct EvalCell
{
    std::string mode;
    std::string scenario;
    double ap_mean = 0.0;
    double ap_std = 0.0;
    int repeats = 0;
    std::vector<double> aps;
    double train_wall_time_s = 0.0;
};

struct EvalReport
{
    std::vector<EvalCell> rows; ///< model-major, scenario order as given
    nlohmann::json metadata = nlohmann::json::object();

    const EvalCell* find(const std::string& mode, const std::string& scenario) const;
};

/// Attack settings and random stream used for repeat `repeat` of a scenario. Exposed so that
/// single attacked datasets can be regenerated outside the evaluation loop.
AttackConfig repeat_attack_config(const Scenario& scenario, std::uint64_t eval_seed, int repeat);
Rng repeat_rng(const Scenario& scenario, std::uint64_t eval_seed, int repeat);

/// Sample mean and (n-1) standard deviation; std is 0 for a single value.
std::pair<double, double> mean_std(std::span<const double> values);

/// For every (model, scenario, repeat) rebuild the attacked dataset with a repeat-specific
/// seed and compute human AP. The attack randomness of a (scenario, repeat) pair is shared
/// by all models. Scenarios without randomness (clean, hcb, shapeloc) are evaluated once per
/// model and the value is repeated.
EvalReport evaluate_scenarios(std::span<const NamedModel> models, const Dataset& dataset,
                              std::span<const Scenario> scenarios, const EvalOptions& options);

struct Threshold
{
    std::string mode;
    std::string scenario;
    std::optional<double> min_ap;
    std::optional<double> max_ap;
};

struct ThresholdOutcome
{
    Threshold threshold;
    std::optional<double> value; ///< empty when the cell is missing
    bool passed = false;
};

std::vector<ThresholdOutcome> check_thresholds(const EvalReport& report, std::span<const Threshold> thresholds);

// report serialization
std::string report_csv(const EvalReport& report);
std::string report_markdown(const EvalReport& report);
nlohmann::json to_json(const EvalReport& report);
EvalReport report_from_json(const nlohmann::json& j);

} // namespace pod
