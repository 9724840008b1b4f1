// Acceptance suite: one PASS/FAIL line per criterion, nonzero exit if any fails.

#include "pod/attacks.hpp"
#include "pod/augment.hpp"
#include "pod/cli.hpp"
#include "pod/data.hpp"
#include "pod/detector.hpp"
#include "pod/eval.hpp"
#include "pod/train.hpp"

#include "oracles.hpp"

#include "CLI11.hpp"
#include "json.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <set>
#include <sstream>

using namespace pod;
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

// ---- pinned tolerances and thresholds ----
constexpr int kApInstances = 50;
constexpr double kApTolerance = 1e-9;
constexpr int kIouPairs = 1000;
constexpr int kAugmentSamples = 10000;
constexpr int kGradParams = 20;
constexpr double kGradStep = 1e-5;
constexpr double kGradRelTol = 1e-4;
constexpr double kMinNoiseDrop = 0.15;      // AP(std, clean) - AP(std, noise)
constexpr double kMinUniversalGap = 0.10;   // AP(std, noise) - AP(std, universal)
constexpr double kMinPodNoiseGain = 0.20;   // AP(pod, noise) - AP(std, noise)
constexpr double kMaxPodCleanLoss = 0.02;   // AP(std, clean) - AP(pod, clean)
constexpr double kMinDetectionGain = 0.05;  // AP(pod, universal) - AP(pod_nodet, universal)
constexpr double kMaxTimeRatio = 0.5;       // wall(pod) / wall(advpod)
constexpr int kHcbRandomChecks = 100;

// ---- toy protocol shared by the ordering, timing and hcb criteria ----
// 64x64 scenes on a 16x16 grid; settled by a tuning pass over grid, width, epochs, patch size
// and box weight (the coarser 8x8 grid lets the patch's box swallow the person's cell).
struct Protocol
{
    int image_size = 64;
    int grid = 16;
    std::vector<int> widths{16, 32, 32};
    int train_count = 240;
    int test_count = 60;
    int persons_max = 3;
    int epochs = 40;
    int batch_size = 8;
    double learning_rate = 2e-3;
    double patch_fraction = 0.5;
    int universal_steps = 100;
    int seeds = 3;
};

struct Outcome
{
    bool pass = false;
    std::string detail;
};

std::string fmt(const char* f, auto... args)
{
    char buf[512];
    std::snprintf(buf, sizeof buf, f, args...);
    return buf;
}

double median(std::vector<double> v)
{
    std::sort(v.begin(), v.end());
    const std::size_t n = v.size();
    return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

double seconds_since(std::chrono::steady_clock::time_point t0)
{
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

// ---------------------------------------------------------------- 1
Outcome ap_oracle()
{
    Rng rng(20240601);
    double worst = 0.0;
    int nontrivial = 0;
    for (int t = 0; t < kApInstances; ++t) {
        const auto inst = oracle::random_instance(rng);
        const double got = average_precision(inst.dets, inst.gts, kHumanClass, 0.5);
        const double want = oracle::brute_force_ap(inst.dets, inst.gts, kHumanClass, 0.5);
        worst = std::max(worst, std::abs(got - want));
        nontrivial += want > 0.0 && want < 1.0;
    }
    return {worst <= kApTolerance,
            fmt("%d instances (%d with 0<AP<1), max |ap - oracle| = %.3g (tol %.0e)", kApInstances, nontrivial, worst,
                kApTolerance)};
}

// ---------------------------------------------------------------- 2
Outcome iou_exactness()
{
    Rng rng(77);
    int mismatches = 0, overlapping = 0;
    for (int t = 0; t < kIouPairs; ++t) {
        int c[8];
        for (int k = 0; k < 2; ++k) {
            const int x0 = uniform_int(rng, 0, 31), x1 = uniform_int(rng, 0, 32);
            const int y0 = uniform_int(rng, 0, 31), y1 = uniform_int(rng, 0, 32);
            c[4 * k] = std::min(x0, x1);
            c[4 * k + 1] = std::min(y0, y1);
            c[4 * k + 2] = std::max(x0, x1);
            c[4 * k + 3] = std::max(y0, y1);
        }
        const double want = oracle::raster_iou(c[0], c[1], c[2], c[3], c[4], c[5], c[6], c[7]);
        const double got = iou(Corners{double(c[0]), double(c[1]), double(c[2]), double(c[3])},
                               Corners{double(c[4]), double(c[5]), double(c[6]), double(c[7])});
        mismatches += got != want;
        overlapping += want > 0;
    }
    return {mismatches == 0, fmt("%d pairs (%d overlapping), %d inexact", kIouPairs, overlapping, mismatches)};
}

// ---------------------------------------------------------------- 3
// Pixel value just before patch k was pasted, when it can be derived without knowing the
// noise draws; nullopt otherwise.
std::optional<double> value_before(const Image& original, const std::vector<AppliedPatch>& patches, std::size_t k,
                                   int y, int x)
{
    for (std::size_t j = k; j-- > 0;) {
        const PixelRect& r = patches[j].rect;
        if (x < r.x0 || x >= r.x1 || y < r.y0 || y >= r.y1)
            continue;
        switch (patches[j].type) {
        case PatchType::erase: return 0.0;
        case PatchType::invert: {
            const auto v = value_before(original, patches, j, y, x);
            if (!v)
                return std::nullopt;
            return 1.0 - *v;
        }
        default: return std::nullopt;
        }
    }
    return original.at(y, x);
}

Outcome augmentation_invariants()
{
    SynthConfig sc;
    sc.image_size = 48;
    sc.seed = 5;
    const Dataset pool = synth_dataset(sc, 64, "augment");
    AugmentConfig cfg;
    int checked_pixels = 0, failures = 0, identity_runs = 0, patches_seen = 0;
    std::array<int, 3> type_counts{};
    std::string first_failure;
    auto fail = [&](const std::string& why) {
        if (failures++ == 0)
            first_failure = why;
    };

    for (int i = 0; i < kAugmentSamples; ++i) {
        const Sample& s = pool.samples[static_cast<std::size_t>(i) % pool.size()];
        Rng rng = make_rng(99, "acceptance-augment", static_cast<std::uint64_t>(i));
        AugmentConfig c = cfg;
        c.emit_patch_labels = i % 4 != 3;
        if (i % 10 == 9) {
            c.count_min = c.count_max = 0;
            ++identity_runs;
        }
        const AugmentResult r = pod_augment(s.image, s.boxes, c, rng);
        const int h = r.image.height(), w = r.image.width();

        for (double v : r.image.pixels())
            if (!(v >= 0.0 && v <= 1.0))
                fail(fmt("sample %d: pixel %.3f outside [0,1]", i, v));
        if (c.count_max == 0 && (!(r.image == s.image) || r.boxes != s.boxes || !r.patches.empty()))
            fail(fmt("sample %d: N=0 is not the identity", i));
        if (static_cast<int>(r.patches.size()) < c.count_min || static_cast<int>(r.patches.size()) > c.count_max)
            fail(fmt("sample %d: %zu patches outside count range", i, r.patches.size()));

        // labels: untouched prefix, then exactly one patch box per applied patch
        const std::size_t n_in = s.boxes.size();
        const std::size_t expected = n_in + (c.emit_patch_labels ? r.patches.size() : 0);
        if (r.boxes.size() != expected || !std::equal(s.boxes.begin(), s.boxes.end(), r.boxes.begin()))
            fail(fmt("sample %d: human labels altered or label count wrong", i));
        else if (c.emit_patch_labels)
            for (std::size_t k = 0; k < r.patches.size(); ++k) {
                const BBox& b = r.boxes[n_in + k];
                if (b.class_id != kPatchClass || bbox_to_rect(b, h, w) != r.patches[k].rect)
                    fail(fmt("sample %d: patch label %zu does not equal its rectangle", i, k));
            }

        for (std::size_t k = 0; k < r.patches.size(); ++k) {
            const AppliedPatch& p = r.patches[k];
            ++patches_seen;
            ++type_counts[static_cast<std::size_t>(p.type)];
            if (p.rect.x0 < 0 || p.rect.y0 < 0 || p.rect.x1 > w || p.rect.y1 > h || p.rect.width() < 1 ||
                p.rect.width() != p.rect.height())
                fail(fmt("sample %d: patch %zu rectangle out of bounds or not square", i, k));
            for (int y = p.rect.y0; y < p.rect.y1; ++y)
                for (int x = p.rect.x0; x < p.rect.x1; ++x) {
                    // only pixels that no later patch repainted keep this patch's value
                    bool covered_later = false;
                    for (std::size_t j = k + 1; j < r.patches.size() && !covered_later; ++j) {
                        const PixelRect& q = r.patches[j].rect;
                        covered_later = x >= q.x0 && x < q.x1 && y >= q.y0 && y < q.y1;
                    }
                    if (covered_later)
                        continue;
                    const double v = r.image.at(y, x);
                    if (p.type == PatchType::erase) {
                        ++checked_pixels;
                        if (v != 0.0)
                            fail(fmt("sample %d: erase pixel (%d,%d) = %.3f", i, x, y, v));
                    } else if (p.type == PatchType::invert) {
                        const auto before = value_before(s.image, r.patches, k, y, x);
                        if (before) {
                            ++checked_pixels;
                            if (std::abs(v - (1.0 - *before)) > 1e-12)
                                fail(fmt("sample %d: invert pixel (%d,%d) = %.3f, expected %.3f", i, x, y, v,
                                         1.0 - *before));
                        }
                    }
                }
        }
        // pixels outside every patch are untouched
        for (int y = 0; y < h; ++y)
            for (int x = 0; x < w; ++x) {
                bool inside = false;
                for (const auto& p : r.patches)
                    inside |= x >= p.rect.x0 && x < p.rect.x1 && y >= p.rect.y0 && y < p.rect.y1;
                if (!inside && r.image.at(y, x) != s.image.at(y, x))
                    fail(fmt("sample %d: pixel (%d,%d) outside patches changed", i, x, y));
            }
    }
    std::string detail = fmt("%d samples, %d patches (erase/invert/noise %d/%d/%d), %d identity runs, "
                             "%d erase/invert pixels verified, %d violations",
                             kAugmentSamples, patches_seen, type_counts[0], type_counts[1], type_counts[2],
                             identity_runs, checked_pixels, failures);
    if (failures)
        detail += "; first: " + first_failure;
    return {failures == 0, detail};
}

// ---------------------------------------------------------------- 4
Outcome gradient_check()
{
    const DetectorModel base = init_model(Architecture::toy(32, 4, {6, 8, 8}), 4242);
    Rng rng(4243);
    Image img(32, 32);
    for (auto& p : img.pixels())
        p = uniform01(rng);
    const std::vector<BBox> targets{{kHumanClass, 0.30, 0.40, 0.20, 0.50},
                                    {kPatchClass, 0.70, 0.65, 0.25, 0.25},
                                    {kHumanClass, 0.80, 0.15, 0.10, 0.20},
                                    {kPatchClass, 0.10, 0.90, 0.15, 0.15}};
    const ClassWeights weights{0.9, 0.1};

    auto loss_of = [&](const DetectorModel& m, const LossTerms& terms) {
        Workspace ws;
        return detection_loss(forward(m, img, ws), 4, targets, weights, nullptr, terms).total();
    };

    struct Term
    {
        const char* name;
        LossTerms terms;
    };
    const Term term_list[] = {{"objectness", {true, false, false}},
                              {"box", {false, true, false}},
                              {"class(0.9/0.1)", {false, false, true}},
                              {"total", {true, true, true}}};
    std::string detail;
    bool ok = true;
    for (const auto& term : term_list) {
        DetectorModel m = base;
        Workspace ws;
        Matrix d_head;
        detection_loss(forward(m, img, ws), 4, targets, weights, &d_head, term.terms);
        std::vector<double> grad(m.params.size(), 0.0);
        backward(m, ws, d_head, grad, nullptr);

        Rng pick(static_cast<std::uint64_t>(std::hash<std::string>{}(term.name)));
        double worst = 0.0;
        int checked = 0, attempts = 0;
        while (checked < kGradParams && attempts < 100000) {
            ++attempts;
            const auto i = static_cast<std::size_t>(uniform_int(pick, 0, static_cast<int>(m.params.size()) - 1));
            const double saved = m.params[i];
            m.params[i] = saved + kGradStep;
            const double up = loss_of(m, term.terms);
            m.params[i] = saved - kGradStep;
            const double down = loss_of(m, term.terms);
            m.params[i] = saved;
            const double numeric = (up - down) / (2 * kGradStep);
            const double scale = std::max(std::abs(numeric), std::abs(grad[i]));
            if (scale < 1e-6)
                continue; // parameter does not reach this term
            worst = std::max(worst, std::abs(numeric - grad[i]) / scale);
            ++checked;
        }
        ok &= checked == kGradParams && worst < kGradRelTol;
        detail += fmt("%s%s: %d params, max rel err %.2e", detail.empty() ? "" : "; ", term.name, checked, worst);
    }
    return {ok, detail};
}

// ---------------------------------------------------------------- 5-8
struct SeedRun
{
    std::map<std::pair<std::string, std::string>, double> ap;
};

struct Corpus
{
    Dataset train;
    Dataset test;
};

Corpus make_corpus(const Protocol& p, std::uint64_t seed)
{
    SynthConfig sc;
    sc.image_size = p.image_size;
    sc.persons_max = p.persons_max;
    sc.seed = derive_seed(seed, "synth");
    SynthConfig test = sc;
    test.persons_min = test.persons_max = 1;
    test.seed = derive_seed(seed, "synth-test");
    return {synth_dataset(sc, static_cast<std::size_t>(p.train_count), "train"),
            synth_dataset(test, static_cast<std::size_t>(p.test_count), "test")};
}

Architecture protocol_arch(const Protocol& p) { return Architecture::toy(p.image_size, p.grid, p.widths); }

TrainConfig train_config(const Protocol& p, TrainMode mode, std::uint64_t seed)
{
    TrainConfig tc;
    tc.mode = mode;
    tc.epochs = p.epochs;
    tc.batch_size = p.batch_size;
    tc.learning_rate = p.learning_rate;
    tc.seed = derive_seed(seed, "train"); // same init and shuffles for every mode
    return tc;
}

// Noise patches are model-independent and shared; the universal patch is optimized
// against each evaluated model on the test set (white-box).
SeedRun ordering_run(const Protocol& p, int index)
{
    const std::uint64_t seed = 1000 + static_cast<std::uint64_t>(index);
    const Corpus corpus = make_corpus(p, seed);
    const TrainMode modes[] = {TrainMode::std_training, TrainMode::pod, TrainMode::pod_nodet};
    std::vector<DetectorModel> models;
    for (TrainMode m : modes)
        models.push_back(train(corpus.train, protocol_arch(p), train_config(p, m, seed)).model);

    EvalOptions opt;
    opt.repeats = 1;
    opt.seed = 5 + static_cast<std::uint64_t>(index);
    AttackConfig noise;
    noise.kind = AttackKind::noise;
    noise.patch_fraction = p.patch_fraction;
    AttackConfig universal;
    universal.kind = AttackKind::universal;
    universal.patch_fraction = p.patch_fraction;
    universal.steps = p.universal_steps;

    Rng noise_rng = make_rng(9 + static_cast<std::uint64_t>(index), "n");
    const Dataset noised = apply_attack_scenario(models[0], corpus.test, noise, noise_rng).dataset;
    SeedRun run;
    for (std::size_t i = 0; i < models.size(); ++i) {
        const std::string name = to_string(modes[i]);
        Rng u_rng = make_rng(9 + static_cast<std::uint64_t>(index), "u");
        const Dataset patched = apply_attack_scenario(models[i], corpus.test, universal, u_rng).dataset;
        run.ap[{name, "clean"}] = dataset_ap(models[i], corpus.test, opt);
        run.ap[{name, "noise"}] = dataset_ap(models[i], noised, opt);
        run.ap[{name, "universal"}] = dataset_ap(models[i], patched, opt);
    }
    return run;
}

struct Margin
{
    std::string label;
    std::function<double(const SeedRun&)> value; // must be >= 0 to pass
};

Outcome median_margins(const std::vector<SeedRun>& runs, const std::vector<Margin>& margins)
{
    bool ok = true;
    std::string detail;
    for (const auto& m : margins) {
        std::vector<double> per_seed;
        for (const auto& r : runs)
            per_seed.push_back(m.value(r));
        const double med = median(per_seed);
        ok &= med >= 0.0;
        std::string seeds;
        for (double v : per_seed)
            seeds += fmt("%s%+.3f", seeds.empty() ? "" : ",", v);
        detail += fmt("%s%s: median margin %+.3f [%s]", detail.empty() ? "" : "; ", m.label.c_str(), med,
                      seeds.c_str());
    }
    return {ok, detail};
}

std::string ap_table(const std::vector<SeedRun>& runs)
{
    std::string out;
    for (std::size_t i = 0; i < runs.size(); ++i) {
        out += fmt("    seed %zu:", i);
        for (const auto& [key, v] : runs[i].ap)
            out += fmt(" %s/%s=%.3f", key.first.c_str(), key.second.c_str(), v);
        out += "\n";
    }
    return out;
}

Outcome time_ratio(const Protocol& p)
{
    const Corpus corpus = make_corpus(p, 1000);
    const Architecture arch = protocol_arch(p);
    const TrainConfig pod_cfg = train_config(p, TrainMode::pod, 1000);
    const TrainConfig adv_cfg = train_config(p, TrainMode::advpod, 1000);
    const TrainResult pod = train(corpus.train, arch, pod_cfg);
    const TrainResult adv = train(corpus.train, arch, adv_cfg);
    const double ratio = pod.wall_time_s / adv.wall_time_s;
    return {ratio <= kMaxTimeRatio,
            fmt("%d epochs: pod %.1f s, advpod %.1f s (%zu generations), ratio %.3f (max %.2f)", pod_cfg.epochs,
                pod.wall_time_s, adv.wall_time_s, adv.history.size(), ratio, kMaxTimeRatio)};
}

// ---------------------------------------------------------------- 9, 11
struct CliRun
{
    int code;
    std::string out, err;
};

CliRun cli(std::vector<std::string> args)
{
    args.insert(args.begin(), "pod");
    std::ostringstream out, err;
    const int code = cli::run(args, out, err);
    return {code, out.str(), err.str()};
}

std::string slurp(const fs::path& p)
{
    std::ifstream in(p, std::ios::binary);
    return {std::istreambuf_iterator<char>(in), {}};
}

fs::path write_config(const fs::path& dir, json j)
{
    fs::remove_all(dir);
    fs::create_directories(dir);
    j["out"] = (dir / "run").string();
    const fs::path cfg = dir / "config.json";
    std::ofstream(cfg) << j.dump(2);
    return cfg;
}

json small_run_config()
{
    return {{"seed", 2025},
            {"dataset", {{"train_count", 24}, {"test_count", 8}, {"synth", {{"image_size", 32}}}}},
            {"model", {{"input_size", 32}, {"grid_size", 4}, {"widths", {8, 16, 16}}}},
            {"train", {{"epochs", 40}, {"batch_size", 8}, {"adv_attack", {{"steps", 20}, {"batch_size", 4}}}}},
            {"eval", {{"repeats", 2}}}};
}

Outcome adv_schedule(const fs::path& work)
{
    json j = small_run_config();
    j["train"]["modes"] = {"advpod"};
    const fs::path cfg = write_config(work / "schedule", j);
    const fs::path out = cfg.parent_path() / "run";
    const CliRun prep = cli({"prepare", "--config", cfg.string()});
    const CliRun tr = cli({"train", "--config", cfg.string(), "--mode", "advpod"});
    if (prep.code != 0 || tr.code != 0)
        return {false, "cli failed: " + prep.err + tr.err};
    const Checkpoint ck = load_checkpoint(out / "models" / "advpod.podmodel");
    const auto epochs = ck.metadata["history_epochs"].get<std::vector<int>>();

    std::vector<std::string> archived;
    for (const auto& e : fs::directory_iterator(out / "patches" / "advpod"))
        archived.push_back(e.path().filename().string());
    std::sort(archived.begin(), archived.end());
    const std::vector<std::string> expected{"epoch_005.png", "epoch_005.txt", "epoch_020.png",
                                            "epoch_020.txt", "epoch_035.png", "epoch_035.txt"};
    bool meta_ok = true;
    for (int e : {5, 20, 35}) {
        const PatchArchive a = load_patch_archive(out / "patches" / "advpod" / fmt("epoch_%03d", e));
        meta_ok &= a.meta.epoch == e && a.meta.kind == "universal" && a.patch.side == a.meta.size;
    }
    std::string ep;
    for (int e : epochs)
        ep += fmt("%s%d", ep.empty() ? "" : ",", e);
    std::string files;
    for (const auto& f : archived)
        files += (files.empty() ? "" : " ") + f;
    return {epochs == std::vector<int>{5, 20, 35} && archived == expected && meta_ok,
            "40 epochs -> generations at {" + ep + "}; archive: " + files};
}

Outcome determinism(const fs::path& work)
{
    json j = small_run_config();
    j["train"]["epochs"] = 6;
    j["train"]["modes"] = {"std", "pod", "advpod"};
    j["train"]["adv_schedule"] = {{"start_epoch", 2}, {"period", 2}};
    j["attacks"] = {{{"kind", "noise"}, {"name", "noise"}},
                    {{"kind", "universal"}, {"name", "universal"}, {"steps", 10}, {"batch_size", 4}},
                    {{"kind", "hcb"}, {"name", "hcb"}, {"grid_positions", 2}},
                    {{"kind", "shapeloc"}, {"name", "shapeloc"}, {"grid_positions", 2}}};
    const fs::path cfg = write_config(work / "determinism", j);
    const fs::path out = cfg.parent_path() / "run";
    for (const char* cmd : {"prepare", "train", "evaluate"}) {
        const CliRun r = cli({cmd, "--config", cfg.string(), "--threads", "1"});
        if (r.code != 0)
            return {false, std::string(cmd) + " failed: " + r.err};
    }
    const std::string first = slurp(out / "report.csv");
    const fs::path lock = cfg.parent_path() / "replay.lock.json";
    fs::copy_file(out / "run.lock", lock, fs::copy_options::overwrite_existing);
    fs::remove(out / "report.csv");
    const CliRun replay = cli({"evaluate", "--config", lock.string(), "--threads", "1"});
    const std::string second = slurp(out / "report.csv");
    const auto lines = std::count(first.begin(), first.end(), '\n');
    return {replay.code == 0 && !first.empty() && first == second,
            fmt("report.csv %zu bytes, %ld rows; replay from run.lock %s", first.size(), lines - 1,
                first == second ? "byte-identical" : "DIFFERS")};
}

// ---------------------------------------------------------------- 10
Outcome hcb_exactness(const Protocol& p)
{
    const Corpus corpus = make_corpus(p, 1000);
    Protocol quick = p;
    quick.epochs = 10;
    const DetectorModel model =
        train(corpus.train, protocol_arch(p), train_config(quick, TrainMode::std_training, 1000)).model;

    AttackConfig cfg;
    cfg.kind = AttackKind::hcb;
    cfg.patch_fraction = p.patch_fraction;
    int images = 0, violations = 0, non_binary = 0, positive = 0, random_checked = 0;
    Rng rng(31337);
    Workspace ws;
    for (std::size_t i = 0; i < 4; ++i) {
        const Sample& s = corpus.test.samples[i];
        HcbTrace trace;
        const PlacedPatch best = hcb_attack(model, s.image, s.boxes, cfg, &trace);
        ++images;
        positive += best.objective > 0;
        const BBox& person = *target_person(s.boxes);
        for (int pattern = 0; pattern < kHcbPatterns; ++pattern) {
            const PlacedPatch other{hcb_pattern_patch(pattern, best.patch.side), best.x0, best.y0, true, 0.0};
            violations += confidence_drop(model, s.image, person, other, ws) > best.objective;
        }
        const auto positions =
            candidate_positions(person, best.patch.side, s.image.height(), s.image.width(), cfg.grid_positions);
        for (int k = 0; k < kHcbRandomChecks; ++k) {
            const auto& [x0, y0] = positions[static_cast<std::size_t>(
                uniform_int(rng, 0, static_cast<int>(positions.size()) - 1))];
            const PlacedPatch other{hcb_pattern_patch(uniform_int(rng, 0, kHcbPatterns - 1), best.patch.side), x0, y0,
                                    true, 0.0};
            violations += confidence_drop(model, s.image, person, other, ws) > best.objective;
            ++random_checked;
        }
        for (double v : best.patch.values)
            non_binary += v != 0.0 && v != 1.0;
    }
    AttackConfig sl;
    sl.kind = AttackKind::shapeloc;
    int shapeloc_patches = 0;
    for (std::size_t i = 0; i < 4; ++i) {
        const Sample& s = corpus.test.samples[i];
        const PlacedPatch pl = shapeloc_attack(model, s.image, s.boxes, sl);
        ++shapeloc_patches;
        for (int y = 0; y < pl.patch.side; ++y)
            for (int x = 0; x < pl.patch.side; ++x)
                non_binary += pl.patch.painted(y, x) && pl.patch.at(y, x) != 0.0 && pl.patch.at(y, x) != 1.0;
    }
    return {violations == 0 && non_binary == 0,
            fmt("%d images (%d with positive drop): 512-pattern re-enumeration + %d random (pattern, location) "
                "probes, %d beat the search; %d hcb + %d shapeloc patches, %d non-binary pixels",
                images, positive, random_checked, violations, images, shapeloc_patches, non_binary)};
}

} // namespace

int main(int argc, char** argv)
{
    CLI::App app{"acceptance criteria"};
    std::string work = (fs::temp_directory_path() / "pod_acceptance").string();
    std::vector<int> only;
    app.add_option("--work-dir", work, "scratch directory for CLI-driven criteria");
    app.add_option("--only", only, "run only these criteria (1-11)");
    CLI11_PARSE(app, argc, argv);
    auto wanted = [&](int n) { return only.empty() || std::find(only.begin(), only.end(), n) != only.end(); };

    const Protocol protocol;
    int failed = 0;
    auto report = [&](int n, const char* name, const std::function<Outcome()>& fn) {
        if (!wanted(n))
            return;
        const auto t0 = std::chrono::steady_clock::now();
        Outcome o;
        try {
            o = fn();
        } catch (const std::exception& e) {
            o = {false, std::string("exception: ") + e.what()};
        }
        failed += !o.pass;
        std::cout << (o.pass ? "PASS" : "FAIL") << " [" << n << "] " << name << " (" << fmt("%.1f", seconds_since(t0))
                  << " s): " << o.detail << std::endl;
    };

    report(1, "AP oracle equivalence", ap_oracle);
    report(2, "IoU exactness", iou_exactness);
    report(3, "augmentation invariants", augmentation_invariants);
    report(4, "gradient correctness", gradient_check);

    if (wanted(5) || wanted(6) || wanted(7)) {
        const auto t0 = std::chrono::steady_clock::now();
        std::vector<SeedRun> runs;
        for (int i = 0; i < protocol.seeds; ++i)
            runs.push_back(ordering_run(protocol, i));
        std::cout << fmt("  ordering runs: %zu seeds, %d epochs, %dx%d scenes, grid %d, patch fraction %.2f (%.0f s)\n",
                         runs.size(), protocol.epochs, protocol.image_size, protocol.image_size, protocol.grid,
                         protocol.patch_fraction, seconds_since(t0))
                  << ap_table(runs);
        auto ap = [](const SeedRun& r, const char* mode, const char* scenario) {
            return r.ap.at({mode, scenario});
        };
        report(5, "attack efficacy ordering (std)", [&] {
            return median_margins(
                runs, {{"clean-noise>=0.15",
                        [&](const SeedRun& r) { return ap(r, "std", "clean") - ap(r, "std", "noise") - kMinNoiseDrop; }},
                       {"noise-universal>=0.10", [&](const SeedRun& r) {
                            return ap(r, "std", "noise") - ap(r, "std", "universal") - kMinUniversalGap;
                        }}});
        });
        report(6, "defense efficacy ordering (pod)", [&] {
            return median_margins(
                runs, {{"pod.noise-std.noise>=0.20",
                        [&](const SeedRun& r) { return ap(r, "pod", "noise") - ap(r, "std", "noise") - kMinPodNoiseGain; }},
                       {"pod.clean>=std.clean-0.02", [&](const SeedRun& r) {
                            return ap(r, "pod", "clean") - ap(r, "std", "clean") + kMaxPodCleanLoss;
                        }}});
        });
        report(7, "patch-detection generalization (pod vs pod_nodet)", [&] {
            return median_margins(runs, {{"pod.universal-pod_nodet.universal>=0.05", [&](const SeedRun& r) {
                                              return ap(r, "pod", "universal") - ap(r, "pod_nodet", "universal") -
                                                     kMinDetectionGain;
                                          }}});
        });
    }
    report(8, "training-time ratio", [&] { return time_ratio(protocol); });
    report(9, "adv-pod schedule", [&] { return adv_schedule(work); });
    report(10, "hcb search exactness", [&] { return hcb_exactness(protocol); });
    report(11, "determinism", [&] { return determinism(work); });

    std::cout << (failed ? fmt("%d criteria FAILED", failed) : std::string("all criteria passed")) << std::endl;
    return failed ? 1 : 0;
}
