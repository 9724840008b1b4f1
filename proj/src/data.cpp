#include "pod/data.hpp"

#include "pod/errors.hpp"
#include "pod/image_io.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iomanip>
#include <sstream>

namespace fs = std::filesystem;

namespace pod {

namespace {

bool is_image_file(const fs::path& p)
{
    auto ext = p.extension().string();
    std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return std::tolower(c); });
    return ext == ".png" || ext == ".pgm";
}

std::vector<BBox> read_labels(const fs::path& path)
{
    std::vector<BBox> boxes;
    if (!fs::exists(path))
        return boxes;
    std::ifstream in(path);
    if (!in)
        throw LoadError("cannot open " + path.string());
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.find_first_not_of(" \t\r") == std::string::npos)
            continue;
        const BBox raw = parse_label_line(line, path.string(), line_no);
        const BBox clamped = clamp_to_unit(raw);
        if (clamped.bw > 0 && clamped.bh > 0)
            boxes.push_back(clamped);
    }
    return boxes;
}

} // namespace

BBox parse_label_line(const std::string& line, const std::string& file, std::size_t line_no)
{
    std::istringstream ss(line);
    BBox b;
    std::string cls;
    if (!(ss >> cls >> b.cx >> b.cy >> b.bw >> b.bh))
        throw ParseError(file, line_no, "expected '<class_id> <cx> <cy> <bw> <bh>'");
    std::string extra;
    if (ss >> extra)
        throw ParseError(file, line_no, "trailing field '" + extra + "'");
    std::size_t used = 0;
    try {
        b.class_id = std::stoi(cls, &used);
    } catch (const std::exception&) {
        used = 0;
    }
    if (used != cls.size())
        throw ParseError(file, line_no, "class id '" + cls + "' is not an integer");
    if (b.class_id != kHumanClass && b.class_id != kPatchClass)
        throw ParseError(file, line_no, "class id must be 0 or 1");
    if (!std::isfinite(b.cx) || !std::isfinite(b.cy) || !(b.bw > 0) || !(b.bh > 0) || !std::isfinite(b.bw) ||
        !std::isfinite(b.bh))
        throw ParseError(file, line_no, "box size must be positive and finite");
    return b;
}

std::string format_label_line(const BBox& box)
{
    char buf[128];
    std::snprintf(buf, sizeof buf, "%d %.9f %.9f %.9f %.9f", box.class_id, box.cx, box.cy, box.bw, box.bh);
    return buf;
}

Dataset load_dataset(const fs::path& root, const std::string& split)
{
    const fs::path base = root / split;
    const fs::path images = base / "images";
    const fs::path labels = base / "labels";
    if (!fs::is_directory(images))
        throw LoadError("missing directory " + images.string());
    if (!fs::is_directory(labels))
        throw LoadError("missing directory " + labels.string());

    std::vector<fs::path> files;
    for (const auto& entry : fs::directory_iterator(images))
        if (entry.is_regular_file() && is_image_file(entry.path()))
            files.push_back(entry.path());
    std::sort(files.begin(), files.end());

    Dataset ds;
    ds.split_name = split;
    ds.samples.reserve(files.size());
    for (const auto& file : files) {
        Sample s;
        s.id = file.stem().string();
        s.image = read_image(file);
        s.boxes = read_labels(labels / (s.id + ".txt"));
        ds.samples.push_back(std::move(s));
    }
    return ds;
}

void save_dataset(const fs::path& root, const Dataset& dataset)
{
    const fs::path base = root / dataset.split_name;
    fs::create_directories(base / "images");
    fs::create_directories(base / "labels");
    for (const auto& s : dataset.samples) {
        write_png(base / "images" / (s.id + ".png"), s.image);
        std::ofstream out(base / "labels" / (s.id + ".txt"));
        if (!out)
            throw LoadError("cannot write labels for " + s.id);
        for (const auto& b : s.boxes)
            out << format_label_line(b) << '\n';
    }
}

FilterResult filter_persons(const Dataset& dataset, double min_size_px)
{
    if (min_size_px < 0)
        throw ContractError("min_size_px must be nonnegative");
    FilterResult result;
    result.dataset.split_name = dataset.split_name;
    for (const auto& s : dataset.samples) {
        Sample kept{s.id, s.image, {}};
        for (const auto& b : s.boxes) {
            if (b.class_id != kHumanClass)
                continue;
            const double pw = pixel_width(b, s.image.width());
            const double ph = pixel_height(b, s.image.height());
            if (pw > 0 && ph > 0 && std::max(pw, ph) > min_size_px)
                kept.boxes.push_back(b);
        }
        if (kept.boxes.empty())
            continue;
        result.kept_labels += kept.boxes.size();
        result.dataset.samples.push_back(std::move(kept));
    }
    result.kept_images = result.dataset.samples.size();
    return result;
}

void validate(const SynthConfig& c)
{
    if (c.image_size < 8)
        throw ContractError("synth image_size must be at least 8");
    if (c.persons_min < 0 || c.persons_max < c.persons_min)
        throw ContractError("synth persons range must be nonnegative and ordered");
    auto unit = [](double v) { return v >= 0 && v <= 1; };
    if (!unit(c.intensity_min) || !unit(c.intensity_max) || c.intensity_max < c.intensity_min)
        throw ContractError("synth intensity range must lie in [0,1]");
    if (!unit(c.background_level) || c.background_noise_level < 0)
        throw ContractError("synth background settings out of range");
    if (!(c.height_min > 0) || c.height_max > 1 || c.height_max < c.height_min)
        throw ContractError("synth height range must lie in (0,1]");
    if (!(c.aspect_min > 0) || c.aspect_max < c.aspect_min)
        throw ContractError("synth aspect range invalid");
    if (!(c.edge_softness > 0) || c.edge_softness > 1)
        throw ContractError("synth edge_softness must lie in (0,1]");
}

SynthScene synth_scene(const SynthConfig& config, Rng& rng)
{
    validate(config);
    const int n = config.image_size;
    SynthScene scene;
    scene.image = Image(n, n);
    for (auto& p : scene.image.pixels()) {
        const double noise = (2 * uniform01(rng) - 1) * config.background_noise_level;
        p = std::clamp(config.background_level + noise, 0.0, 1.0);
    }

    scene.requested = uniform_int(rng, config.persons_min, config.persons_max);
    std::vector<Corners> placed;
    for (int person = 0; person < scene.requested; ++person) {
        for (int attempt = 0; attempt < config.max_retries; ++attempt) {
            const double h = n * (config.height_min + (config.height_max - config.height_min) * uniform01(rng));
            const double aspect = config.aspect_min + (config.aspect_max - config.aspect_min) * uniform01(rng);
            const double w = std::min<double>(h * aspect, n);
            const double a = w / 2, b = h / 2;
            const double cx = a + (n - 2 * a) * uniform01(rng);
            const double cy = b + (n - 2 * b) * uniform01(rng);
            const Corners box{cx - a, cy - b, cx + a, cy + b};
            const bool overlaps = std::any_of(placed.begin(), placed.end(), [&](const Corners& o) {
                return box.x0 < o.x1 && o.x0 < box.x1 && box.y0 < o.y1 && o.y0 < box.y1;
            });
            if (overlaps)
                continue;

            const double intensity =
                config.intensity_min + (config.intensity_max - config.intensity_min) * uniform01(rng);
            const int ys = std::max(0, static_cast<int>(std::floor(box.y0)));
            const int ye = std::min(n, static_cast<int>(std::ceil(box.y1)));
            const int xs = std::max(0, static_cast<int>(std::floor(box.x0)));
            const int xe = std::min(n, static_cast<int>(std::ceil(box.x1)));
            for (int y = ys; y < ye; ++y) {
                for (int x = xs; x < xe; ++x) {
                    const double dx = (x + 0.5 - cx) / a;
                    const double dy = (y + 0.5 - cy) / b;
                    const double r = std::sqrt(dx * dx + dy * dy);
                    if (r >= 1)
                        continue;
                    const double t = std::min(1.0, (1 - r) / config.edge_softness);
                    const double f = t * t * (3 - 2 * t);
                    double& px = scene.image.at(y, x);
                    px = px * (1 - f) + intensity * f;
                }
            }
            placed.push_back(box);
            scene.boxes.push_back(from_corners(kHumanClass, {box.x0 / n, box.y0 / n, box.x1 / n, box.y1 / n}));
            break;
        }
    }
    scene.placed = static_cast<int>(placed.size());
    return scene;
}

Dataset synth_dataset(const SynthConfig& config, std::size_t count, const std::string& split)
{
    Dataset ds;
    ds.split_name = split;
    ds.samples.reserve(count);
    for (std::size_t i = 0; i < count; ++i) {
        Rng rng = make_rng(config.seed, split, i);
        SynthScene scene = synth_scene(config, rng);
        std::ostringstream id;
        id << split << '_' << std::setw(5) << std::setfill('0') << i;
        ds.samples.push_back({id.str(), std::move(scene.image), std::move(scene.boxes)});
    }
    return ds;
}

} // namespace pod
