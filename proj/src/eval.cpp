#include "pod/eval.hpp"

#include "pod/errors.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <thread>

namespace pod {

double iou(const Corners& a, const Corners& b) noexcept
{
    const double iw = std::min(a.x1, b.x1) - std::max(a.x0, b.x0);
    const double ih = std::min(a.y1, b.y1) - std::max(a.y0, b.y0);
    const double inter = (iw > 0 && ih > 0) ? iw * ih : 0.0;
    const double area_a = std::max(0.0, a.x1 - a.x0) * std::max(0.0, a.y1 - a.y0);
    const double area_b = std::max(0.0, b.x1 - b.x0) * std::max(0.0, b.y1 - b.y0);
    const double uni = area_a + area_b - inter;
    return uni > 0 ? inter / uni : 0.0;
}

std::vector<PRPoint> precision_recall_curve(std::span<const ScoredDetection> detections,
                                            std::span<const GroundTruth> gts, int class_id, double iou_threshold)
{
    std::vector<const ScoredDetection*> dets;
    for (const auto& d : detections)
        if (d.detection.box.class_id == class_id)
            dets.push_back(&d);
    std::stable_sort(dets.begin(), dets.end(), [](const ScoredDetection* a, const ScoredDetection* b) {
        return a->detection.confidence > b->detection.confidence;
    });

    std::vector<const GroundTruth*> truth;
    for (const auto& g : gts)
        if (g.box.class_id == class_id)
            truth.push_back(&g);
    std::vector<bool> matched(truth.size(), false);

    std::vector<PRPoint> curve;
    const double total = static_cast<double>(truth.size());
    std::size_t tp = 0;
    for (std::size_t i = 0; i < dets.size(); ++i) {
        const auto& d = *dets[i];
        double best = -1.0;
        std::size_t best_gt = truth.size();
        for (std::size_t g = 0; g < truth.size(); ++g) {
            if (matched[g] || truth[g]->image_id != d.image_id)
                continue;
            const double o = iou(d.detection.box, truth[g]->box);
            if (o > best) {
                best = o;
                best_gt = g;
            }
        }
        if (best_gt < truth.size() && best >= iou_threshold) {
            matched[best_gt] = true;
            ++tp;
        }
        const bool last_of_level =
            i + 1 == dets.size() || dets[i + 1]->detection.confidence != d.detection.confidence;
        if (last_of_level) {
            const double n = static_cast<double>(i + 1);
            curve.push_back({tp / n, total > 0 ? tp / total : 0.0, d.detection.confidence});
        }
    }
    return curve;
}

double average_precision(std::span<const ScoredDetection> detections, std::span<const GroundTruth> gts, int class_id,
                         double iou_threshold)
{
    const bool any_gt = std::any_of(gts.begin(), gts.end(), [&](const GroundTruth& g) { return g.box.class_id == class_id; });
    const bool any_det = std::any_of(detections.begin(), detections.end(),
                                     [&](const ScoredDetection& d) { return d.detection.box.class_id == class_id; });
    if (!any_gt)
        return any_det ? 0.0 : 1.0;
    if (!any_det)
        return 0.0;

    auto curve = precision_recall_curve(detections, gts, class_id, iou_threshold);
    // precision envelope, right to left
    for (std::size_t i = curve.size() - 1; i-- > 0;)
        curve[i].precision = std::max(curve[i].precision, curve[i + 1].precision);
    double ap = 0.0, prev_recall = 0.0;
    for (const auto& p : curve) {
        ap += (p.recall - prev_recall) * p.precision;
        prev_recall = p.recall;
    }
    return std::clamp(ap, 0.0, 1.0);
}

double dataset_ap(const DetectorModel& model, const Dataset& dataset, const EvalOptions& options)
{
    std::vector<std::vector<Detection>> per_image(dataset.size());
    const int threads = std::max(1, std::min<int>(options.threads, static_cast<int>(dataset.size())));
    auto work = [&](std::size_t begin, std::size_t step) {
        Workspace ws;
        for (std::size_t i = begin; i < dataset.size(); i += step)
            per_image[i] = predict(model, dataset.samples[i].image, options.conf_threshold, options.nms_iou, &ws);
    };
    if (threads == 1) {
        work(0, 1);
    } else {
        std::vector<std::thread> pool;
        for (int t = 0; t < threads; ++t)
            pool.emplace_back(work, static_cast<std::size_t>(t), static_cast<std::size_t>(threads));
        for (auto& t : pool)
            t.join();
    }

    std::vector<ScoredDetection> dets;
    std::vector<GroundTruth> gts;
    for (std::size_t i = 0; i < dataset.size(); ++i) {
        for (const auto& d : per_image[i])
            dets.push_back({d, i});
        for (const auto& b : dataset.samples[i].boxes)
            gts.push_back({b, i});
    }
    return average_precision(dets, gts, kHumanClass, options.iou_threshold);
}

const EvalCell* EvalReport::find(const std::string& mode, const std::string& scenario) const
{
    for (const auto& r : rows)
        if (r.mode == mode && r.scenario == scenario)
            return &r;
    return nullptr;
}

std::pair<double, double> mean_std(std::span<const double> values)
{
    if (values.empty())
        return {0.0, 0.0};
    const double n = static_cast<double>(values.size());
    const double mean = std::accumulate(values.begin(), values.end(), 0.0) / n;
    if (values.size() == 1)
        return {mean, 0.0};
    double ss = 0.0;
    for (double v : values)
        ss += (v - mean) * (v - mean);
    return {mean, std::sqrt(ss / (n - 1))};
}

AttackConfig repeat_attack_config(const Scenario& scenario, std::uint64_t eval_seed, int repeat)
{
    if (!scenario.attack)
        throw ContractError("clean scenario has no attack");
    AttackConfig attack = *scenario.attack;
    attack.seed = derive_seed(eval_seed ^ attack.seed, "attack/" + scenario.name, static_cast<std::uint64_t>(repeat));
    return attack;
}

Rng repeat_rng(const Scenario& scenario, std::uint64_t eval_seed, int repeat)
{
    return make_rng(eval_seed, "eval/" + scenario.name, static_cast<std::uint64_t>(repeat));
}

EvalReport evaluate_scenarios(std::span<const NamedModel> models, const Dataset& dataset,
                              std::span<const Scenario> scenarios, const EvalOptions& options)
{
    if (options.repeats < 1)
        throw ContractError("repeats must be at least 1");
    EvalReport report;
    for (const auto& named : models) {
        if (!named.model)
            throw ContractError("null model for mode " + named.mode);
        for (const auto& scenario : scenarios) {
            EvalCell cell{named.mode, scenario.name, 0.0, 0.0, options.repeats, {}, named.train_wall_time_s};
            const bool deterministic = !scenario.attack || scenario.attack->kind == AttackKind::hcb ||
                                       scenario.attack->kind == AttackKind::shapeloc;
            const int runs = deterministic ? 1 : options.repeats;
            for (int r = 0; r < runs; ++r) {
                if (!scenario.attack) {
                    cell.aps.push_back(dataset_ap(*named.model, dataset, options));
                    continue;
                }
                Rng rng = repeat_rng(scenario, options.seed, r);
                const AttackConfig attack = repeat_attack_config(scenario, options.seed, r);
                const ScenarioResult attacked = apply_attack_scenario(*named.model, dataset, attack, rng);
                cell.aps.push_back(dataset_ap(*named.model, attacked.dataset, options));
            }
            cell.aps.resize(static_cast<std::size_t>(options.repeats), cell.aps.front());
            std::tie(cell.ap_mean, cell.ap_std) = mean_std(cell.aps);
            report.rows.push_back(std::move(cell));
        }
    }
    return report;
}

std::vector<ThresholdOutcome> check_thresholds(const EvalReport& report, std::span<const Threshold> thresholds)
{
    std::vector<ThresholdOutcome> out;
    for (const auto& t : thresholds) {
        ThresholdOutcome o{t, std::nullopt, false};
        if (const EvalCell* cell = report.find(t.mode, t.scenario)) {
            o.value = cell->ap_mean;
            o.passed = (!t.min_ap || cell->ap_mean >= *t.min_ap) && (!t.max_ap || cell->ap_mean <= *t.max_ap);
        }
        out.push_back(o);
    }
    return out;
}

} // namespace pod
