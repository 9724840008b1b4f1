#include "pod/train.hpp"

#include "pod/errors.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numeric>

namespace pod {

namespace {

struct Adam
{
    double lr;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
    long t = 0;
    std::vector<double> m, v;

    Adam(double learning_rate, std::size_t n) : lr(learning_rate), m(n, 0.0), v(n, 0.0) {}

    void step(ParamVector& params, const ParamVector& grad)
    {
        ++t;
        const double c1 = 1 - std::pow(beta1, static_cast<double>(t));
        const double c2 = 1 - std::pow(beta2, static_cast<double>(t));
        for (std::size_t i = 0; i < params.size(); ++i) {
            m[i] = beta1 * m[i] + (1 - beta1) * grad[i];
            v[i] = beta2 * v[i] + (1 - beta2) * grad[i] * grad[i];
            params[i] -= lr * (m[i] / c1) / (std::sqrt(v[i] / c2) + eps);
        }
    }
};

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0)
{
    return std::chrono::duration<double>(Clock::now() - t0).count();
}

} // namespace

std::string to_string(TrainMode m)
{
    switch (m) {
    case TrainMode::std_training: return "std";
    case TrainMode::pod: return "pod";
    case TrainMode::pod_nodet: return "pod_nodet";
    case TrainMode::advpod: return "advpod";
    case TrainMode::advpod_nodet: return "advpod_nodet";
    }
    return "?";
}

const std::vector<TrainMode>& all_train_modes()
{
    static const std::vector<TrainMode> modes{TrainMode::std_training, TrainMode::pod, TrainMode::pod_nodet,
                                              TrainMode::advpod, TrainMode::advpod_nodet};
    return modes;
}

TrainMode train_mode_from_string(const std::string& s)
{
    for (auto m : all_train_modes())
        if (to_string(m) == s)
            return m;
    throw ContractError("unknown training mode '" + s + "' (expected std, pod, pod_nodet, advpod or advpod_nodet)");
}

bool is_adversarial(TrainMode m) noexcept { return m == TrainMode::advpod || m == TrainMode::advpod_nodet; }
bool uses_augmentation(TrainMode m) noexcept { return m != TrainMode::std_training; }
bool emits_patch_labels(TrainMode m) noexcept { return m == TrainMode::pod || m == TrainMode::advpod; }

bool is_generation_epoch(const AdvSchedule& s, int epoch) noexcept
{
    return epoch >= s.start_epoch && s.period > 0 && (epoch - s.start_epoch) % s.period == 0;
}

void validate(const TrainConfig& c)
{
    if (c.epochs < 0)
        throw ContractError("epochs must be nonnegative");
    if (c.batch_size < 1)
        throw ContractError("batch_size must be positive");
    if (!(c.learning_rate > 0))
        throw ContractError("learning_rate must be positive");
    if (!(c.class_weights.human >= 0) || !(c.class_weights.patch >= 0))
        throw ContractError("class weights must be nonnegative");
    if (c.adv_schedule.start_epoch < 0 || c.adv_schedule.period < 1)
        throw ContractError("adversarial schedule needs start >= 0 and period >= 1");
    validate(c.augment);
    validate(c.adv_attack);
}

TrainResult train(const Dataset& dataset, const Architecture& arch, const TrainConfig& config,
                  const TrainCallbacks& callbacks)
{
    validate(config);
    if (dataset.empty())
        throw ContractError("training dataset is empty");
    const auto t0 = Clock::now();

    TrainResult result;
    result.model = init_model(arch, config.seed);
    DetectorModel& model = result.model;

    Dataset inputs;
    inputs.split_name = dataset.split_name;
    for (const auto& s : dataset.samples)
        inputs.samples.push_back({s.id, to_model_input(model, s.image), s.boxes});

    AugmentConfig random_cfg = config.augment;
    random_cfg.type_weights[static_cast<int>(PatchType::external)] = 0.0;
    random_cfg.emit_patch_labels = emits_patch_labels(config.mode);
    AugmentConfig history_cfg = random_cfg;
    history_cfg.count_min = history_cfg.count_max = 1;
    history_cfg.type_weights = {0.0, 0.0, 0.0, 1.0};

    Adam adam(config.learning_rate, model.params.size());
    Workspace ws;
    Matrix d_head;
    ParamVector grad(model.params.size());
    std::vector<std::size_t> order(inputs.size());
    const auto n = static_cast<std::uint64_t>(inputs.size());

    for (int epoch = 0; epoch < config.epochs; ++epoch) {
        if (is_adversarial(config.mode) && is_generation_epoch(config.adv_schedule, epoch)) {
            AttackConfig attack = config.adv_attack;
            attack.seed = derive_seed(config.seed, "advpod-patch", static_cast<std::uint64_t>(epoch));
            UniversalTrace trace;
            PatchPixels patch = optimize_universal_patch(model, inputs, attack, &trace);
            const double objective = trace.batch_objective.empty() ? 0.0 : trace.batch_objective.back();
            result.history.patches.push_back(patch);
            result.history.epochs.push_back(epoch);
            if (callbacks.on_patch)
                callbacks.on_patch(epoch, patch, objective);
        }

        std::iota(order.begin(), order.end(), std::size_t{0});
        Rng shuffle_rng = make_rng(config.seed, "shuffle", static_cast<std::uint64_t>(epoch));
        std::shuffle(order.begin(), order.end(), shuffle_rng);

        double epoch_loss = 0.0;
        int batch_index = 0;
        for (std::size_t start = 0; start < order.size(); start += config.batch_size, ++batch_index) {
            const std::size_t end = std::min(order.size(), start + static_cast<std::size_t>(config.batch_size));
            std::fill(grad.begin(), grad.end(), 0.0);
            double batch_loss = 0.0;
            for (std::size_t k = start; k < end; ++k) {
                const Sample& s = inputs.samples[order[k]];
                Rng rng = make_rng(config.seed, "augment", static_cast<std::uint64_t>(epoch) * n + k);
                Image image;
                std::vector<BBox> targets;
                if (!uses_augmentation(config.mode)) {
                    image = s.image;
                    targets = s.boxes;
                } else {
                    const bool from_history = is_adversarial(config.mode) && !result.history.empty();
                    AugmentResult aug = from_history
                                            ? pod_augment(s.image, s.boxes, history_cfg, rng, result.history.patches)
                                            : pod_augment(s.image, s.boxes, random_cfg, rng);
                    image = std::move(aug.image);
                    targets = std::move(aug.boxes);
                }

                const Matrix& raw = forward(model, image, ws);
                const LossBreakdown loss = detection_loss(raw, arch.grid_size, targets, config.class_weights, &d_head,
                                                          {}, config.box_weight);
                if (!std::isfinite(loss.total()))
                    throw DivergedError(epoch, batch_index, "non-finite loss");
                result.patch_targets_seen += static_cast<std::size_t>(loss.patch_targets);
                batch_loss += loss.total();
                backward(model, ws, d_head, grad, nullptr);
            }

            const double inv = 1.0 / static_cast<double>(end - start);
            double norm2 = 0.0;
            for (auto& g : grad) {
                g *= inv;
                norm2 += g * g;
            }
            if (!std::isfinite(norm2))
                throw DivergedError(epoch, batch_index, "non-finite gradient");
            if (config.grad_clip > 0 && norm2 > config.grad_clip * config.grad_clip) {
                const double scale = config.grad_clip / std::sqrt(norm2);
                for (auto& g : grad)
                    g *= scale;
            }
            adam.step(model.params, grad);
            epoch_loss += batch_loss;
        }

        EpochLog entry{epoch, epoch_loss / static_cast<double>(inputs.size()), seconds_since(t0)};
        result.log.push_back(entry);
        if (callbacks.on_epoch)
            callbacks.on_epoch(entry);
    }
    result.wall_time_s = seconds_since(t0);
    return result;
}

} // namespace pod
