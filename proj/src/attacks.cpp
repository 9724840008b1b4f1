#include "pod/attacks.hpp"

#include "pod/errors.hpp"
#include "pod/image_io.hpp"
#include "pod/iou.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <limits>
#include <sstream>

namespace pod {

namespace {

struct Placement
{
    int side = 1;
    int x0 = 0;
    int y0 = 0;
};

Placement place(LocationPolicy policy, std::span<const BBox> boxes, int h, int w, double fraction, int grid_positions,
                Rng& rng)
{
    const BBox* person = target_person(boxes);
    if (person && policy != LocationPolicy::random) {
        const int side = person_patch_side(*person, h, w, fraction);
        if (policy == LocationPolicy::fixed_on_person) {
            const auto [x0, y0] = centered_on(*person, side, h, w);
            return {side, x0, y0};
        }
        const auto candidates = candidate_positions(*person, side, h, w, grid_positions);
        const auto& [x0, y0] = candidates[static_cast<std::size_t>(
            uniform_int(rng, 0, static_cast<int>(candidates.size()) - 1))];
        return {side, x0, y0};
    }
    const int side = std::clamp(static_cast<int>(std::lround(fraction * std::min(h, w))), 1, std::min(h, w));
    const int x0 = uniform_int(rng, 0, w - side);
    const int y0 = uniform_int(rng, 0, h - side);
    return {side, x0, y0};
}

std::vector<BBox> human_targets(std::span<const BBox> boxes)
{
    std::vector<BBox> out;
    for (const auto& b : boxes)
        if (b.class_id == kHumanClass)
            out.push_back(b);
    return out;
}

const BBox& require_person(std::span<const BBox> gt)
{
    const BBox* person = target_person(gt);
    if (!person)
        throw ContractError("attack requires at least one human box in the ground truth");
    return *person;
}

PixelRect person_rect(const BBox& person, int h, int w)
{
    PixelRect r = bbox_to_rect(person, h, w);
    r.x0 = std::clamp(r.x0, 0, w - 1);
    r.y0 = std::clamp(r.y0, 0, h - 1);
    r.x1 = std::clamp(r.x1, r.x0 + 1, w);
    r.y1 = std::clamp(r.y1, r.y0 + 1, h);
    return r;
}

std::vector<int> spread(int lo, int hi, int n)
{
    std::vector<int> out;
    if (n <= 1 || hi <= lo) {
        out.assign(static_cast<std::size_t>(std::max(n, 1)), (lo + hi) / 2);
        return out;
    }
    for (int i = 0; i < n; ++i)
        out.push_back(lo + static_cast<int>(std::lround(static_cast<double>(hi - lo) * i / (n - 1))));
    return out;
}

} // namespace

std::string to_string(AttackKind k)
{
    switch (k) {
    case AttackKind::noise: return "noise";
    case AttackKind::universal: return "universal";
    case AttackKind::hcb: return "hcb";
    case AttackKind::shapeloc: return "shapeloc";
    }
    return "?";
}

std::string to_string(LocationPolicy p)
{
    switch (p) {
    case LocationPolicy::fixed_on_person: return "fixed_on_person";
    case LocationPolicy::grid_search: return "grid_search";
    case LocationPolicy::random: return "random";
    }
    return "?";
}

AttackKind attack_kind_from_string(const std::string& s)
{
    for (auto k : {AttackKind::noise, AttackKind::universal, AttackKind::hcb, AttackKind::shapeloc})
        if (to_string(k) == s)
            return k;
    throw ContractError("unknown attack kind '" + s + "' (expected noise, universal, hcb or shapeloc)");
}

LocationPolicy location_policy_from_string(const std::string& s)
{
    for (auto p : {LocationPolicy::fixed_on_person, LocationPolicy::grid_search, LocationPolicy::random})
        if (to_string(p) == s)
            return p;
    throw ContractError("unknown location policy '" + s + "'");
}

void validate(const AttackConfig& c)
{
    if (!(c.patch_fraction > 0) || c.patch_fraction > 1)
        throw ContractError("patch_fraction must lie in (0, 1]");
    if (c.steps < 0)
        throw ContractError("steps must be nonnegative");
    if (!(c.step_size >= 0))
        throw ContractError("step_size must be nonnegative");
    if (c.batch_size < 1 || c.patch_resolution < 1 || c.grid_positions < 1)
        throw ContractError("batch_size, patch_resolution and grid_positions must be positive");
    if (c.max_rects < 0)
        throw ContractError("max_rects must be nonnegative");
    if (!(c.area_budget > 0) || c.area_budget > 1)
        throw ContractError("area_budget must lie in (0, 1]");
}

const BBox* target_person(std::span<const BBox> boxes)
{
    const BBox* best = nullptr;
    for (const auto& b : boxes)
        if (b.class_id == kHumanClass && (!best || b.bw * b.bh > best->bw * best->bh))
            best = &b;
    return best;
}

int person_patch_side(const BBox& person, int image_height, int image_width, double fraction)
{
    const double side = fraction * std::sqrt(pixel_width(person, image_width) * pixel_height(person, image_height));
    return std::clamp(static_cast<int>(std::lround(side)), 1, std::min(image_height, image_width));
}

std::pair<int, int> centered_on(const BBox& person, int side, int image_height, int image_width)
{
    const int x0 = static_cast<int>(std::lround(person.cx * image_width - side / 2.0));
    const int y0 = static_cast<int>(std::lround(person.cy * image_height - side / 2.0));
    return {std::clamp(x0, 0, image_width - side), std::clamp(y0, 0, image_height - side)};
}

std::vector<std::pair<int, int>> candidate_positions(const BBox& person, int side, int image_height, int image_width,
                                                     int n)
{
    const PixelRect r = person_rect(person, image_height, image_width);
    const auto xs = spread(r.x0, std::max(r.x0, r.x1 - side), n);
    const auto ys = spread(r.y0, std::max(r.y0, r.y1 - side), n);
    std::vector<std::pair<int, int>> out;
    for (int y : ys)
        for (int x : xs)
            out.emplace_back(std::clamp(x, 0, image_width - side), std::clamp(y, 0, image_height - side));
    return out;
}

PatchPixels noise_patch(int side, Rng& rng) { return make_patch(PatchType::noise, side, std::nullopt, rng); }

double person_confidence(const DetectorModel& model, const Image& image, const BBox& person, Workspace& ws)
{
    const Image input = to_model_input(model, image);
    const Matrix& raw = forward(model, input, ws);
    double best = 0.0;
    for (const auto& d : decode(raw, model.arch.grid_size, 0.0))
        if (d.box.class_id == kHumanClass && iou(d.box, person) > 0)
            best = std::max(best, d.confidence);
    return best;
}

double confidence_drop(const DetectorModel& model, const Image& image, const BBox& person, const PlacedPatch& placed,
                       Workspace& ws)
{
    const double clean = person_confidence(model, image, person, ws);
    const Image patched = apply_patch(image, placed.patch, placed.x0, placed.y0);
    return clean - person_confidence(model, patched, person, ws);
}

PatchPixels optimize_universal_patch(const DetectorModel& model, const Dataset& dataset, const AttackConfig& config,
                                     UniversalTrace* trace)
{
    validate(config);
    Rng rng = make_rng(config.seed, "universal");
    PatchPixels patch = make_patch(PatchType::noise, config.patch_resolution, std::nullopt, rng);
    patch.type = PatchType::external;
    if (config.steps == 0 || dataset.empty())
        return patch;

    std::vector<Image> inputs;
    std::vector<std::vector<BBox>> targets;
    inputs.reserve(dataset.size());
    for (const auto& s : dataset.samples) {
        inputs.push_back(to_model_input(model, s.image));
        targets.push_back(human_targets(s.boxes));
    }

    const int n = model.arch.input_size;
    const int res = config.patch_resolution;
    Workspace ws;
    Matrix d_head, d_input;
    std::vector<double> grad(patch.values.size());
    for (int step = 0; step < config.steps; ++step) {
        std::fill(grad.begin(), grad.end(), 0.0);
        double objective = 0.0;
        for (int b = 0; b < config.batch_size; ++b) {
            const auto idx = static_cast<std::size_t>(uniform_int(rng, 0, static_cast<int>(inputs.size()) - 1));
            const Placement pl =
                place(config.location_policy, targets[idx], n, n, config.patch_fraction, config.grid_positions, rng);
            const PatchPixels scaled = resize_patch(patch, pl.side);
            const Image patched = apply_patch(inputs[idx], scaled, pl.x0, pl.y0);
            const Matrix& raw = forward(model, patched, ws);
            objective += detection_loss(raw, model.arch.grid_size, targets[idx], config.class_weights, &d_head).total();
            backward(model, ws, d_head, {}, &d_input);
            for (int y = 0; y < pl.side; ++y) {
                const int sy = nearest_source_index(y, pl.side, res);
                for (int x = 0; x < pl.side; ++x) {
                    const int sx = nearest_source_index(x, pl.side, res);
                    grad[static_cast<std::size_t>(sy) * res + sx] +=
                        d_input(0, static_cast<Eigen::Index>(pl.y0 + y) * n + pl.x0 + x);
                }
            }
        }
        if (trace)
            trace->batch_objective.push_back(objective / config.batch_size);

        double scale = 0.0;
        for (double g : grad) {
            if (!std::isfinite(g))
                throw EvalError("non-finite patch gradient at iteration " + std::to_string(step));
            scale = std::max(scale, std::abs(g));
        }
        if (scale == 0.0)
            continue;
        for (std::size_t i = 0; i < grad.size(); ++i)
            patch.values[i] = std::clamp(patch.values[i] + config.step_size * grad[i] / scale, 0.0, 1.0);
    }
    return patch;
}

double universal_objective(const DetectorModel& model, const Dataset& dataset, const PatchPixels& patch,
                           const AttackConfig& config)
{
    if (dataset.empty())
        return 0.0;
    Rng rng = make_rng(config.seed, "universal-objective");
    const int n = model.arch.input_size;
    Workspace ws;
    double total = 0.0;
    for (const auto& s : dataset.samples) {
        const auto targets = human_targets(s.boxes);
        const Placement pl =
            place(config.location_policy, targets, n, n, config.patch_fraction, config.grid_positions, rng);
        const Image patched = apply_patch(to_model_input(model, s.image), resize_patch(patch, pl.side), pl.x0, pl.y0);
        total += detection_loss(forward(model, patched, ws), model.arch.grid_size, targets, config.class_weights).total();
    }
    return total / static_cast<double>(dataset.size());
}

PatchPixels hcb_pattern_patch(int pattern, int side)
{
    if (pattern < 0 || pattern >= kHcbPatterns)
        throw ContractError("HCB pattern index out of range");
    if (side < 3)
        throw ContractError("HCB patch side must be at least 3");
    PatchPixels p{PatchType::external, side, std::vector<double>(static_cast<std::size_t>(side) * side), {}};
    for (int y = 0; y < side; ++y) {
        const int r = y * 3 / side;
        for (int x = 0; x < side; ++x) {
            const int c = x * 3 / side;
            p.values[static_cast<std::size_t>(y) * side + x] = (pattern >> (r * 3 + c)) & 1;
        }
    }
    return p;
}

PlacedPatch hcb_attack(const DetectorModel& model, const Image& image, std::span<const BBox> gt,
                       const AttackConfig& config, HcbTrace* trace)
{
    validate(config);
    const BBox& person = require_person(gt);
    const int h = image.height(), w = image.width();
    const int side = std::max(3, person_patch_side(person, h, w, config.patch_fraction));
    if (side > std::min(h, w))
        throw ContractError("image too small for an HCB patch");
    const auto positions = candidate_positions(person, side, h, w, config.grid_positions);

    std::vector<PatchPixels> patterns;
    patterns.reserve(kHcbPatterns);
    for (int p = 0; p < kHcbPatterns; ++p)
        patterns.push_back(hcb_pattern_patch(p, side));

    Workspace ws;
    const double clean = person_confidence(model, image, person, ws);
    PlacedPatch best;
    best.objective = -std::numeric_limits<double>::infinity();
    int best_pattern = -1;
    Image scratch = image;
    for (const auto& [x0, y0] : positions) {
        for (int p = 0; p < kHcbPatterns; ++p) {
            apply_patch_inplace(scratch, patterns[p], x0, y0);
            const double obj = clean - person_confidence(model, scratch, person, ws);
            if (obj > best.objective) {
                best = {patterns[p], x0, y0, true, obj};
                best_pattern = p;
            }
        }
        // restore the region before moving on
        for (int y = 0; y < side; ++y)
            for (int x = 0; x < side; ++x)
                scratch.at(y0 + y, x0 + x) = image.at(y0 + y, x0 + x);
    }
    if (trace) {
        trace->locations = static_cast<int>(positions.size());
        trace->patterns_per_location = kHcbPatterns;
        trace->best_pattern = best_pattern;
    }
    return best;
}

PlacedPatch shapeloc_attack(const DetectorModel& model, const Image& image, std::span<const BBox> gt,
                            const AttackConfig& config, ShapelocTrace* trace)
{
    validate(config);
    const BBox& person = require_person(gt);
    const int h = image.height(), w = image.width();
    const PixelRect pr = person_rect(person, h, w);
    const int budget = static_cast<int>(std::floor(config.area_budget * pr.width() * pr.height()));

    // painted value per pixel: -1 untouched, else 0/1
    std::vector<int> paint(static_cast<std::size_t>(h) * w, -1);
    int painted = 0;
    Workspace ws;
    const double clean = person_confidence(model, image, person, ws);
    double current = 0.0;
    if (trace) {
        trace->step_objective = {current};
        trace->area_budget_px = budget;
    }

    static constexpr std::array<double, 4> kFractions{0.2, 0.35, 0.5, 0.7};
    Image working = image;
    for (int step = 0; step < config.max_rects; ++step) {
        double best_obj = current;
        PixelRect best_rect{};
        int best_value = -1;
        int best_area = painted;
        for (double fw : kFractions) {
            for (double fh : kFractions) {
                const int rw = std::max(1, static_cast<int>(std::lround(fw * pr.width())));
                const int rh = std::max(1, static_cast<int>(std::lround(fh * pr.height())));
                for (int y0 : spread(pr.y0, std::max(pr.y0, pr.y1 - rh), config.grid_positions)) {
                    for (int x0 : spread(pr.x0, std::max(pr.x0, pr.x1 - rw), config.grid_positions)) {
                        const PixelRect rect{x0, y0, std::min(w, x0 + rw), std::min(h, y0 + rh)};
                        int area = painted;
                        for (int y = rect.y0; y < rect.y1; ++y)
                            for (int x = rect.x0; x < rect.x1; ++x)
                                area += paint[static_cast<std::size_t>(y) * w + x] < 0;
                        if (area > budget)
                            continue;
                        for (int value : {0, 1}) {
                            Image trial = working;
                            for (int y = rect.y0; y < rect.y1; ++y)
                                for (int x = rect.x0; x < rect.x1; ++x)
                                    trial.at(y, x) = value;
                            const double obj = clean - person_confidence(model, trial, person, ws);
                            if (obj > best_obj) {
                                best_obj = obj;
                                best_rect = rect;
                                best_value = value;
                                best_area = area;
                            }
                        }
                    }
                }
            }
        }
        if (best_value < 0)
            break;
        for (int y = best_rect.y0; y < best_rect.y1; ++y)
            for (int x = best_rect.x0; x < best_rect.x1; ++x) {
                paint[static_cast<std::size_t>(y) * w + x] = best_value;
                working.at(y, x) = best_value;
            }
        painted = best_area;
        current = best_obj;
        if (trace)
            trace->step_objective.push_back(current);
    }
    if (trace)
        trace->patched_area = painted;

    PlacedPatch out;
    out.per_image = true;
    out.objective = current;
    if (painted == 0) {
        out.patch = PatchPixels{PatchType::external, 1, {0.0}, {0}};
        out.x0 = pr.x0;
        out.y0 = pr.y0;
        return out;
    }
    int ux0 = w, uy0 = h, ux1 = 0, uy1 = 0;
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x)
            if (paint[static_cast<std::size_t>(y) * w + x] >= 0) {
                ux0 = std::min(ux0, x);
                uy0 = std::min(uy0, y);
                ux1 = std::max(ux1, x + 1);
                uy1 = std::max(uy1, y + 1);
            }
    const int side = std::max(ux1 - ux0, uy1 - uy0);
    out.x0 = std::clamp(ux0, 0, w - side);
    out.y0 = std::clamp(uy0, 0, h - side);
    const std::size_t n = static_cast<std::size_t>(side) * side;
    out.patch = PatchPixels{PatchType::external, side, std::vector<double>(n, 0.0), std::vector<std::uint8_t>(n, 0)};
    for (int y = 0; y < side; ++y)
        for (int x = 0; x < side; ++x) {
            const int v = paint[static_cast<std::size_t>(out.y0 + y) * w + out.x0 + x];
            if (v >= 0) {
                out.patch.values[static_cast<std::size_t>(y) * side + x] = v;
                out.patch.mask[static_cast<std::size_t>(y) * side + x] = 1;
            }
        }
    return out;
}

ScenarioResult apply_attack_scenario(const DetectorModel& model, const Dataset& dataset, const AttackConfig& attack,
                                     Rng& rng)
{
    validate(attack);
    ScenarioResult result;
    result.dataset.split_name = dataset.split_name;
    result.dataset.samples = dataset.samples;
    result.placements.resize(dataset.size());

    if (attack.kind == AttackKind::universal) {
        AttackConfig cfg = attack;
        cfg.seed = derive_seed(attack.seed, "scenario-universal", rng());
        result.universal = optimize_universal_patch(model, dataset, cfg);
    }

    for (std::size_t i = 0; i < dataset.size(); ++i) {
        auto& sample = result.dataset.samples[i];
        const int h = sample.image.height(), w = sample.image.width();
        std::optional<PlacedPatch> placed;
        switch (attack.kind) {
        case AttackKind::noise:
        case AttackKind::universal: {
            const Placement pl =
                place(attack.location_policy, sample.boxes, h, w, attack.patch_fraction, attack.grid_positions, rng);
            PatchPixels patch = attack.kind == AttackKind::noise ? noise_patch(pl.side, rng)
                                                                 : resize_patch(*result.universal, pl.side);
            placed = PlacedPatch{std::move(patch), pl.x0, pl.y0, attack.kind == AttackKind::noise, 0.0};
            break;
        }
        case AttackKind::hcb:
            if (target_person(sample.boxes))
                placed = hcb_attack(model, sample.image, sample.boxes, attack);
            break;
        case AttackKind::shapeloc:
            if (target_person(sample.boxes))
                placed = shapeloc_attack(model, sample.image, sample.boxes, attack);
            break;
        }
        if (placed)
            apply_patch_inplace(sample.image, placed->patch, placed->x0, placed->y0);
        result.placements[i] = std::move(placed);
    }
    return result;
}

namespace {

std::filesystem::path with_suffix(const std::filesystem::path& stem, const char* ext)
{
    return stem.parent_path() / (stem.filename().string() + ext);
}

} // namespace

void save_patch_archive(const std::filesystem::path& stem, const PatchPixels& patch, const PatchArchiveMeta& meta)
{
    if (!stem.parent_path().empty())
        std::filesystem::create_directories(stem.parent_path());
    Image img(patch.side, patch.side);
    for (int y = 0; y < patch.side; ++y)
        for (int x = 0; x < patch.side; ++x)
            img.at(y, x) = patch.at(y, x);
    write_png(with_suffix(stem, ".png"), img);

    std::ofstream out(with_suffix(stem, ".txt"));
    if (!out)
        throw LoadError("cannot write patch metadata for " + stem.string());
    out << "kind=" << meta.kind << '\n'
        << "size=" << meta.size << '\n'
        << "seed=" << meta.seed << '\n'
        << "objective=" << std::setprecision(17) << meta.objective << '\n'
        << "epoch=" << meta.epoch << '\n';
}

PatchArchive load_patch_archive(const std::filesystem::path& stem)
{
    PatchArchive archive;
    const Image img = read_image(with_suffix(stem, ".png"));
    if (img.height() != img.width())
        throw LoadError("patch image is not square: " + stem.string());
    archive.patch = external_patch({img.pixels().begin(), img.pixels().end()}, img.width());

    const auto meta_path = with_suffix(stem, ".txt");
    std::ifstream in(meta_path);
    if (!in)
        throw LoadError("cannot open " + meta_path.string());
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty())
            continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos)
            throw ParseError(meta_path.string(), line_no, "expected key=value");
        const std::string key = line.substr(0, eq);
        std::istringstream value(line.substr(eq + 1));
        if (key == "kind")
            value >> archive.meta.kind;
        else if (key == "size")
            value >> archive.meta.size;
        else if (key == "seed")
            value >> archive.meta.seed;
        else if (key == "objective")
            value >> archive.meta.objective;
        else if (key == "epoch")
            value >> archive.meta.epoch;
        if (value.fail())
            throw ParseError(meta_path.string(), line_no, "bad value for '" + key + "'");
    }
    return archive;
}

} // namespace pod
