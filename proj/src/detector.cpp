#include "pod/detector.hpp"

#include "pod/errors.hpp"
#include "pod/iou.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <numeric>

namespace pod {

namespace {

double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

double bce_with_logit(double z, double target)
{
    return std::max(z, 0.0) - z * target + std::log1p(std::exp(-std::abs(z)));
}

int cell_coord(double v, int grid) { return std::clamp(static_cast<int>(std::floor(v * grid)), 0, grid - 1); }

} // namespace

std::vector<int> assign_targets(std::span<const BBox> targets, int grid)
{
    std::vector<int> cells(targets.size(), -1);
    std::vector<bool> taken(static_cast<std::size_t>(grid) * grid, false);
    for (std::size_t i = 0; i < targets.size(); ++i) {
        const int cell = cell_coord(targets[i].cy, grid) * grid + cell_coord(targets[i].cx, grid);
        if (taken[cell])
            continue;
        taken[cell] = true;
        cells[i] = cell;
    }
    return cells;
}

LossBreakdown detection_loss(const Matrix& raw, int grid, std::span<const BBox> targets, const ClassWeights& weights,
                             Matrix* grad, const LossTerms& terms, double box_weight)
{
    const Eigen::Index cells = static_cast<Eigen::Index>(grid) * grid;
    if (raw.rows() != head::channels || raw.cols() != cells)
        throw ContractError("raw prediction shape does not match the grid");
    for (const auto& t : targets)
        if (t.class_id != kHumanClass && t.class_id != kPatchClass)
            throw ContractError("target class must be 0 (human) or 1 (patch)");

    if (grad)
        grad->setZero(raw.rows(), raw.cols());

    LossBreakdown loss;
    const auto assignment = assign_targets(targets, grid);
    std::vector<int> owner(cells, -1);
    for (std::size_t i = 0; i < targets.size(); ++i) {
        if (assignment[i] < 0) {
            ++loss.skipped;
            continue;
        }
        owner[assignment[i]] = static_cast<int>(i);
        ++loss.matched;
        if (targets[i].class_id == kPatchClass)
            ++loss.patch_targets;
    }

    for (Eigen::Index j = 0; j < cells; ++j) {
        const double o = raw(head::objectness, j);
        const double t = owner[j] >= 0 ? 1.0 : 0.0;
        if (terms.objectness) {
            loss.objectness += bce_with_logit(o, t);
            if (grad)
                (*grad)(head::objectness, j) = sigmoid(o) - t;
        }
        if (owner[j] < 0)
            continue;

        const BBox& target = targets[owner[j]];
        const int row = static_cast<int>(j) / grid;
        const int col = static_cast<int>(j) % grid;
        if (terms.box) {
            const double goal[4] = {target.cx * grid - col, target.cy * grid - row, target.bw, target.bh};
            for (int k = 0; k < 4; ++k) {
                const double s = sigmoid(raw(head::box_x + k, j));
                const double diff = s - goal[k];
                loss.box += box_weight * diff * diff;
                if (grad)
                    (*grad)(head::box_x + k, j) = box_weight * 2 * diff * s * (1 - s);
            }
        }
        if (terms.classification) {
            const double w = target.class_id == kHumanClass ? weights.human : weights.patch;
            const double l0 = raw(head::class_logit, j);
            const double l1 = raw(head::class_logit + 1, j);
            const double m = std::max(l0, l1);
            const double lse = m + std::log(std::exp(l0 - m) + std::exp(l1 - m));
            loss.classification += w * (lse - (target.class_id == kHumanClass ? l0 : l1));
            if (grad) {
                const double p0 = std::exp(l0 - lse);
                const double p1 = std::exp(l1 - lse);
                (*grad)(head::class_logit, j) = w * (p0 - (target.class_id == kHumanClass ? 1.0 : 0.0));
                (*grad)(head::class_logit + 1, j) = w * (p1 - (target.class_id == kPatchClass ? 1.0 : 0.0));
            }
        }
    }
    return loss;
}

std::vector<Detection> decode(const Matrix& raw, int grid, double conf_threshold)
{
    std::vector<Detection> out;
    const Eigen::Index cells = static_cast<Eigen::Index>(grid) * grid;
    for (Eigen::Index j = 0; j < cells; ++j) {
        for (Eigen::Index r = 0; r < raw.rows(); ++r)
            if (!std::isfinite(raw(r, j)))
                throw EvalError("non-finite detector output (diverged model?)");
        const int row = static_cast<int>(j) / grid;
        const int col = static_cast<int>(j) % grid;
        const double obj = sigmoid(raw(head::objectness, j));
        const double l0 = raw(head::class_logit, j);
        const double l1 = raw(head::class_logit + 1, j);
        const double m = std::max(l0, l1);
        const double e0 = std::exp(l0 - m), e1 = std::exp(l1 - m);
        const double probs[2] = {e0 / (e0 + e1), e1 / (e0 + e1)};
        const BBox geom{kHumanClass, (col + sigmoid(raw(head::box_x, j))) / grid,
                        (row + sigmoid(raw(head::box_y, j))) / grid, sigmoid(raw(head::box_w, j)),
                        sigmoid(raw(head::box_h, j))};
        for (int c = 0; c < head::num_classes; ++c) {
            const double conf = std::clamp(obj * probs[c], 0.0, 1.0);
            if (conf < conf_threshold)
                continue;
            BBox b = clamp_to_unit(geom);
            b.class_id = c;
            out.push_back({b, conf});
        }
    }
    return out;
}

std::vector<Detection> non_max_suppression(std::vector<Detection> detections, double iou_threshold)
{
    std::stable_sort(detections.begin(), detections.end(),
                     [](const Detection& a, const Detection& b) { return a.confidence > b.confidence; });
    std::vector<Detection> kept;
    for (const auto& d : detections) {
        const bool suppressed = std::any_of(kept.begin(), kept.end(), [&](const Detection& k) {
            return k.box.class_id == d.box.class_id && iou(k.box, d.box) > iou_threshold;
        });
        if (!suppressed)
            kept.push_back(d);
    }
    return kept;
}

std::vector<Detection> predict(const DetectorModel& model, const Image& image, double conf_threshold,
                               double nms_iou, Workspace* ws)
{
    Workspace local;
    Workspace& w = ws ? *ws : local;
    const Image input = to_model_input(model, image);
    const Matrix& raw = forward(model, input, w);
    return non_max_suppression(decode(raw, model.arch.grid_size, conf_threshold), nms_iou);
}

nlohmann::json to_json(const Architecture& arch)
{
    nlohmann::json layers = nlohmann::json::array();
    for (const auto& l : arch.layers)
        layers.push_back({{"in", l.in_channels},
                          {"out", l.out_channels},
                          {"kernel", l.kernel},
                          {"stride", l.stride},
                          {"padding", l.padding},
                          {"activation", l.activation ? "silu" : "linear"}});
    return {{"input_size", arch.input_size}, {"grid_size", arch.grid_size}, {"layers", layers}};
}

Architecture architecture_from_json(const nlohmann::json& j)
{
    Architecture arch;
    arch.input_size = j.at("input_size").get<int>();
    arch.grid_size = j.at("grid_size").get<int>();
    for (const auto& l : j.at("layers"))
        arch.layers.push_back({l.at("in").get<int>(), l.at("out").get<int>(), l.at("kernel").get<int>(),
                               l.at("stride").get<int>(), l.at("padding").get<int>(),
                               l.at("activation").get<std::string>() == "silu"});
    validate(arch);
    return arch;
}

void save_checkpoint(const std::filesystem::path& path, const DetectorModel& model, const nlohmann::json& metadata)
{
    std::ofstream out(path, std::ios::binary);
    if (!out)
        throw LoadError("cannot write checkpoint " + path.string());
    nlohmann::json header = {{"architecture", to_json(model.arch)},
                             {"param_count", model.params.size()},
                             {"metadata", metadata}};
    out << kCheckpointMagic << '\n' << header.dump() << '\n';
    out.write(reinterpret_cast<const char*>(model.params.data()),
              static_cast<std::streamsize>(model.params.size() * sizeof(double)));
    if (!out)
        throw LoadError("failed writing checkpoint " + path.string());
}

Checkpoint load_checkpoint(const std::filesystem::path& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in)
        throw LoadError("cannot open checkpoint " + path.string());
    std::string magic, header_line;
    std::getline(in, magic);
    if (magic != kCheckpointMagic)
        throw LoadError("not a " + std::string(kCheckpointMagic) + " checkpoint: " + path.string());
    std::getline(in, header_line);
    nlohmann::json header;
    try {
        header = nlohmann::json::parse(header_line);
    } catch (const nlohmann::json::exception& e) {
        throw LoadError("corrupt checkpoint header in " + path.string() + ": " + e.what());
    }
    Checkpoint ck;
    ck.model.arch = architecture_from_json(header.at("architecture"));
    const auto count = header.at("param_count").get<std::size_t>();
    if (count != ck.model.arch.parameter_count())
        throw LoadError("checkpoint parameter count does not match its architecture");
    ck.model.params.resize(count);
    in.read(reinterpret_cast<char*>(ck.model.params.data()), static_cast<std::streamsize>(count * sizeof(double)));
    if (in.gcount() != static_cast<std::streamsize>(count * sizeof(double)))
        throw LoadError("truncated checkpoint " + path.string());
    ck.metadata = header.value("metadata", nlohmann::json::object());
    return ck;
}

} // namespace pod
