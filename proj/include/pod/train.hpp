#pragma once

#include "pod/attacks.hpp"
#include "pod/augment.hpp"
#include "pod/detector.hpp"
#include "pod/network.hpp"

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

namespace pod {

/// The five training configurations compared in the robustness table.
enum class TrainMode { std_training, pod, pod_nodet, advpod, advpod_nodet };

std::string to_string(TrainMode m);
/// Accepts "std", "pod", "pod_nodet", "advpod", "advpod_nodet".
TrainMode train_mode_from_string(const std::string& s);
const std::vector<TrainMode>& all_train_modes();

bool is_adversarial(TrainMode m) noexcept;
bool uses_augmentation(TrainMode m) noexcept;
bool emits_patch_labels(TrainMode m) noexcept;

/// New adversarial patch at epochs start, start + period, start + 2 * period, ...
struct AdvSchedule
{
    int start_epoch = 5;
    int period = 15;
};

bool is_generation_epoch(const AdvSchedule& schedule, int epoch) noexcept;

struct TrainConfig
{
    TrainMode mode = TrainMode::pod;
    int epochs = 30;
    int batch_size = 8;
    double learning_rate = 2e-3;
    double grad_clip = 10.0; ///< global L2 norm cap per batch, <= 0 disables
    double box_weight = kDefaultBoxWeight;
    ClassWeights class_weights;
    AugmentConfig augment;
    AdvSchedule adv_schedule;
    AttackConfig adv_attack = default_adv_attack();
    std::uint64_t seed = 0;

    static AttackConfig default_adv_attack()
    {
        AttackConfig a;
        a.kind = AttackKind::universal;
        a.steps = 200;
        a.batch_size = 32; // patch generation should dominate the extra training cost
        return a;
    }
};

void validate(const TrainConfig& config);

struct PatchHistory
{
    std::vector<PatchPixels> patches;
    std::vector<int> epochs; ///< generation epoch of each patch

    std::size_t size() const noexcept { return patches.size(); }
    bool empty() const noexcept { return patches.empty(); }
};

struct EpochLog
{
    int epoch = 0;
    double mean_loss = 0.0;
    double wall_time_s = 0.0; ///< cumulative
};

struct TrainResult
{
    DetectorModel model;
    PatchHistory history;
    double wall_time_s = 0.0;
    std::vector<EpochLog> log;
    std::size_t patch_targets_seen = 0; ///< patch-class targets fed to the loss over the run
};

struct TrainCallbacks
{
    std::function<void(const EpochLog&)> on_epoch;
    /// called after each adversarial patch generation
    std::function<void(int epoch, const PatchPixels&, double objective)> on_patch;
};

/// Mini-batch Adam training of the toy detector. Per mode:
///  std            no augmentation
///  pod/pod_nodet  random-patch augmentation on every sample (patch labels only for pod)
///  advpod*        one patch per sample drawn from the adversarial history, placed like the
///                 random patches; random patches until the first generation epoch
/// Throws DivergedError on a non-finite loss.
TrainResult train(const Dataset& dataset, const Architecture& arch, const TrainConfig& config,
                  const TrainCallbacks& callbacks = {});

} // namespace pod
