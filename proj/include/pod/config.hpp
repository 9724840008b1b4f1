#pragma once

#include "pod/attacks.hpp"
#include "pod/data.hpp"
#include "pod/eval.hpp"
#include "pod/train.hpp"

#include "json.hpp"

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace pod {

struct DatasetSection
{
    /// When set, `<root>/<split>` is ingested and filtered; otherwise a synthetic corpus is generated.
    std::optional<std::string> root;
    std::string train_split = "train";
    std::string test_split = "test";
    double filter_min_size_px = 120.0;
    SynthConfig synth;
    int train_count = 240;
    int test_count = 60;
    int test_persons_min = 1;
    int test_persons_max = 1;
};

struct ModelSection
{
    int input_size = 128;
    int grid_size = 8;
    std::vector<int> widths{16, 32, 32, 64};

    Architecture architecture() const { return Architecture::toy(input_size, grid_size, widths); }
};

struct TrainSection
{
    std::vector<TrainMode> modes = all_train_modes();
    TrainConfig base; ///< mode and seed are filled per run
    int dump_augmented = 0;
};

struct EvalSection
{
    int repeats = 5;
    double conf_threshold = 0.001;
    double nms_iou = 0.5;
    double iou_threshold = 0.5;
    bool retrain_per_repeat = false;
    std::vector<Threshold> thresholds;
};

struct RunConfig
{
    std::uint64_t seed = 0;
    std::string out = "runs/default";
    int threads = 1;
    DatasetSection dataset;
    ModelSection model;
    TrainSection train;
    std::vector<Scenario> attacks = default_attacks();
    EvalSection eval;

    static std::vector<Scenario> default_attacks();

    // Per-component seeds, derived from the global seed by stream name.
    std::uint64_t synth_seed() const { return derive_seed(seed, "synth"); }
    std::uint64_t train_seed(TrainMode mode, int repeat = 0) const
    {
        return derive_seed(seed, "train/" + to_string(mode), static_cast<std::uint64_t>(repeat));
    }
    std::uint64_t eval_seed(int repeat = 0) const
    {
        return derive_seed(seed, "eval", static_cast<std::uint64_t>(repeat));
    }
};

/// Parses a run configuration. Missing keys take defaults; unknown keys and type errors raise
/// ConfigError naming the field path (e.g. "train.epochs").
RunConfig parse_run_config(const nlohmann::json& j);
RunConfig load_run_config(const std::filesystem::path& path);

/// Fully resolved configuration, every defaulted value spelled out.
nlohmann::json to_json(const RunConfig& config);

nlohmann::json to_json(const AttackConfig& a);
nlohmann::json to_json(const TrainConfig& t);

void validate(const RunConfig& config);

} // namespace pod
