#include "pod/config.hpp"

#include "pod/errors.hpp"

#include <filesystem>
#include <fstream>
#include <set>

using nlohmann::json;

namespace pod {

namespace {

/// Reads keys of one JSON object, reporting errors with their full field path.
class Section
{
public:
    Section(const json& j, std::string path) : j_(j), path_(std::move(path))
    {
        if (!j_.is_object())
            throw ConfigError(display(), "expected an object");
    }

    ~Section() = default;

    template <typename T>
    void get(const char* key, T& out)
    {
        seen_.insert(key);
        if (!j_.contains(key) || j_.at(key).is_null())
            return;
        try {
            out = j_.at(key).get<T>();
        } catch (const json::exception& e) {
            throw ConfigError(field(key), e.what());
        }
    }

    const json* child(const char* key)
    {
        seen_.insert(key);
        if (!j_.contains(key) || j_.at(key).is_null())
            return nullptr;
        return &j_.at(key);
    }

    std::string field(const std::string& key) const { return path_.empty() ? key : path_ + "." + key; }

    void finish() const
    {
        for (const auto& [key, _] : j_.items())
            if (!seen_.count(key))
                throw ConfigError(field(key), "unknown key");
    }

private:
    std::string display() const { return path_.empty() ? "<root>" : path_; }

    const json& j_;
    std::string path_;
    std::set<std::string> seen_;
};

template <typename Fn>
void wrap(const std::string& field, Fn&& fn)
{
    try {
        fn();
    } catch (const ContractError& e) {
        throw ConfigError(field, e.what());
    }
}

void parse_synth(const json& j, const std::string& path, SynthConfig& s)
{
    Section sec(j, path);
    sec.get("image_size", s.image_size);
    sec.get("persons_min", s.persons_min);
    sec.get("persons_max", s.persons_max);
    sec.get("intensity_min", s.intensity_min);
    sec.get("intensity_max", s.intensity_max);
    sec.get("background_level", s.background_level);
    sec.get("background_noise_level", s.background_noise_level);
    sec.get("height_min", s.height_min);
    sec.get("height_max", s.height_max);
    sec.get("aspect_min", s.aspect_min);
    sec.get("aspect_max", s.aspect_max);
    sec.get("edge_softness", s.edge_softness);
    sec.get("max_retries", s.max_retries);
    sec.finish();
}

void parse_augment(const json& j, const std::string& path, AugmentConfig& a)
{
    Section sec(j, path);
    sec.get("count_min", a.count_min);
    sec.get("count_max", a.count_max);
    sec.get("size_fraction_min", a.size_fraction_min);
    sec.get("size_fraction_max", a.size_fraction_max);
    if (const json* w = sec.child("type_weights")) {
        Section ws(*w, sec.field("type_weights"));
        ws.get("erase", a.type_weights[0]);
        ws.get("invert", a.type_weights[1]);
        ws.get("noise", a.type_weights[2]);
        ws.get("external", a.type_weights[3]);
        ws.finish();
    }
    sec.finish();
}

void parse_class_weights(Section& sec, ClassWeights& w)
{
    if (const json* cw = sec.child("class_weights")) {
        Section s(*cw, sec.field("class_weights"));
        s.get("human", w.human);
        s.get("patch", w.patch);
        s.finish();
    }
}

AttackConfig parse_attack(const json& j, const std::string& path, std::string& name, AttackConfig a = {})
{
    Section sec(j, path);
    std::string kind = to_string(a.kind);
    sec.get("kind", kind);
    wrap(sec.field("kind"), [&] { a.kind = attack_kind_from_string(kind); });
    name = kind;
    sec.get("name", name);
    sec.get("patch_fraction", a.patch_fraction);
    sec.get("steps", a.steps);
    sec.get("step_size", a.step_size);
    std::string policy = to_string(a.location_policy);
    sec.get("location_policy", policy);
    wrap(sec.field("location_policy"), [&] { a.location_policy = location_policy_from_string(policy); });
    sec.get("seed", a.seed);
    sec.get("batch_size", a.batch_size);
    sec.get("patch_resolution", a.patch_resolution);
    sec.get("grid_positions", a.grid_positions);
    sec.get("max_rects", a.max_rects);
    sec.get("area_budget", a.area_budget);
    parse_class_weights(sec, a.class_weights);
    sec.finish();
    wrap(path, [&] { validate(a); });
    return a;
}

} // namespace

std::vector<Scenario> RunConfig::default_attacks()
{
    std::vector<Scenario> out;
    AttackConfig noise;
    noise.kind = AttackKind::noise;
    out.push_back({"noise", noise});
    AttackConfig universal;
    universal.kind = AttackKind::universal;
    out.push_back({"universal", universal});
    AttackConfig hcb;
    hcb.kind = AttackKind::hcb;
    out.push_back({"hcb", hcb});
    return out;
}

RunConfig parse_run_config(const json& j)
{
    RunConfig c;
    Section root(j, "");
    root.get("seed", c.seed);
    root.get("out", c.out);
    root.get("threads", c.threads);

    if (const json* d = root.child("dataset")) {
        Section sec(*d, "dataset");
        std::string r;
        sec.get("root", r);
        if (!r.empty())
            c.dataset.root = r;
        sec.get("train_split", c.dataset.train_split);
        sec.get("test_split", c.dataset.test_split);
        sec.get("filter_min_size_px", c.dataset.filter_min_size_px);
        sec.get("train_count", c.dataset.train_count);
        sec.get("test_count", c.dataset.test_count);
        sec.get("test_persons_min", c.dataset.test_persons_min);
        sec.get("test_persons_max", c.dataset.test_persons_max);
        if (const json* s = sec.child("synth"))
            parse_synth(*s, "dataset.synth", c.dataset.synth);
        sec.finish();
    }

    if (const json* m = root.child("model")) {
        Section sec(*m, "model");
        sec.get("input_size", c.model.input_size);
        sec.get("grid_size", c.model.grid_size);
        sec.get("widths", c.model.widths);
        sec.finish();
    }

    if (const json* t = root.child("train")) {
        Section sec(*t, "train");
        std::vector<std::string> modes;
        sec.get("modes", modes);
        if (sec.child("modes")) {
            c.train.modes.clear();
            for (const auto& m : modes)
                wrap("train.modes", [&] { c.train.modes.push_back(train_mode_from_string(m)); });
        }
        TrainConfig& b = c.train.base;
        sec.get("epochs", b.epochs);
        sec.get("batch_size", b.batch_size);
        sec.get("learning_rate", b.learning_rate);
        sec.get("grad_clip", b.grad_clip);
        sec.get("box_weight", b.box_weight);
        sec.get("dump_augmented", c.train.dump_augmented);
        parse_class_weights(sec, b.class_weights);
        if (const json* a = sec.child("augment"))
            parse_augment(*a, "train.augment", b.augment);
        if (const json* s = sec.child("adv_schedule")) {
            Section ss(*s, "train.adv_schedule");
            ss.get("start_epoch", b.adv_schedule.start_epoch);
            ss.get("period", b.adv_schedule.period);
            ss.finish();
        }
        if (const json* a = sec.child("adv_attack")) {
            std::string ignored;
            b.adv_attack = parse_attack(*a, "train.adv_attack", ignored, b.adv_attack);
        }
        sec.finish();
    }

    if (const json* a = root.child("attacks")) {
        if (!a->is_array())
            throw ConfigError("attacks", "expected an array");
        c.attacks.clear();
        for (std::size_t i = 0; i < a->size(); ++i) {
            std::string name;
            AttackConfig attack = parse_attack((*a)[i], "attacks[" + std::to_string(i) + "]", name);
            c.attacks.push_back({name, attack});
        }
    }

    if (const json* e = root.child("eval")) {
        Section sec(*e, "eval");
        sec.get("repeats", c.eval.repeats);
        sec.get("conf_threshold", c.eval.conf_threshold);
        sec.get("nms_iou", c.eval.nms_iou);
        sec.get("iou_threshold", c.eval.iou_threshold);
        sec.get("retrain_per_repeat", c.eval.retrain_per_repeat);
        if (const json* th = sec.child("thresholds")) {
            if (!th->is_array())
                throw ConfigError("eval.thresholds", "expected an array");
            for (std::size_t i = 0; i < th->size(); ++i) {
                const std::string path = "eval.thresholds[" + std::to_string(i) + "]";
                Section ts((*th)[i], path);
                Threshold t;
                ts.get("mode", t.mode);
                ts.get("scenario", t.scenario);
                double v = 0;
                if (ts.child("min_ap")) {
                    ts.get("min_ap", v);
                    t.min_ap = v;
                }
                if (ts.child("max_ap")) {
                    ts.get("max_ap", v);
                    t.max_ap = v;
                }
                ts.finish();
                if (t.mode.empty() || t.scenario.empty())
                    throw ConfigError(path, "mode and scenario are required");
                c.eval.thresholds.push_back(t);
            }
        }
        sec.finish();
    }
    root.finish();
    validate(c);
    return c;
}

RunConfig load_run_config(const std::filesystem::path& path)
{
    std::ifstream in(path);
    if (!in)
        throw ConfigError("config", "cannot open " + path.string());
    json j;
    try {
        j = json::parse(in, nullptr, true, true);
    } catch (const json::exception& e) {
        throw ConfigError("config", path.string() + ": " + e.what());
    }
    return parse_run_config(j);
}

void validate(const RunConfig& c)
{
    if (c.threads < 1)
        throw ConfigError("threads", "must be at least 1");
    if (c.out.empty())
        throw ConfigError("out", "must not be empty");
    if (c.dataset.root && !std::filesystem::is_directory(*c.dataset.root))
        throw ConfigError("dataset.root", "path does not exist: " + *c.dataset.root);
    wrap("dataset.synth", [&] { validate(c.dataset.synth); });
    if (c.dataset.train_count < 0 || c.dataset.test_count < 0)
        throw ConfigError("dataset", "sample counts must be nonnegative");
    if (c.dataset.test_persons_min < 0 || c.dataset.test_persons_max < c.dataset.test_persons_min)
        throw ConfigError("dataset.test_persons_min", "invalid test persons range");
    if (c.dataset.filter_min_size_px < 0)
        throw ConfigError("dataset.filter_min_size_px", "must be nonnegative");
    wrap("model", [&] { validate(c.model.architecture()); });
    wrap("train", [&] { validate(c.train.base); });
    if (c.train.modes.empty())
        throw ConfigError("train.modes", "at least one mode is required");
    if (c.eval.repeats < 1)
        throw ConfigError("eval.repeats", "must be at least 1");
    std::set<std::string> names{"clean"};
    for (const auto& s : c.attacks)
        if (!names.insert(s.name).second)
            throw ConfigError("attacks", "duplicate scenario name '" + s.name + "'");
}

json to_json(const AttackConfig& a)
{
    return {{"kind", to_string(a.kind)},
            {"patch_fraction", a.patch_fraction},
            {"steps", a.steps},
            {"step_size", a.step_size},
            {"location_policy", to_string(a.location_policy)},
            {"seed", a.seed},
            {"batch_size", a.batch_size},
            {"patch_resolution", a.patch_resolution},
            {"grid_positions", a.grid_positions},
            {"max_rects", a.max_rects},
            {"area_budget", a.area_budget},
            {"class_weights", {{"human", a.class_weights.human}, {"patch", a.class_weights.patch}}}};
}

json to_json(const TrainConfig& t)
{
    const auto& w = t.augment.type_weights;
    return {{"mode", to_string(t.mode)},
            {"epochs", t.epochs},
            {"batch_size", t.batch_size},
            {"learning_rate", t.learning_rate},
            {"grad_clip", t.grad_clip},
            {"box_weight", t.box_weight},
            {"class_weights", {{"human", t.class_weights.human}, {"patch", t.class_weights.patch}}},
            {"augment",
             {{"count_min", t.augment.count_min},
              {"count_max", t.augment.count_max},
              {"size_fraction_min", t.augment.size_fraction_min},
              {"size_fraction_max", t.augment.size_fraction_max},
              {"type_weights", {{"erase", w[0]}, {"invert", w[1]}, {"noise", w[2]}, {"external", w[3]}}}}},
            {"adv_schedule", {{"start_epoch", t.adv_schedule.start_epoch}, {"period", t.adv_schedule.period}}},
            {"adv_attack", to_json(t.adv_attack)},
            {"seed", t.seed}};
}

json to_json(const RunConfig& c)
{
    const auto& s = c.dataset.synth;
    json dataset = {{"root", c.dataset.root ? json(*c.dataset.root) : json(nullptr)},
                    {"train_split", c.dataset.train_split},
                    {"test_split", c.dataset.test_split},
                    {"filter_min_size_px", c.dataset.filter_min_size_px},
                    {"train_count", c.dataset.train_count},
                    {"test_count", c.dataset.test_count},
                    {"test_persons_min", c.dataset.test_persons_min},
                    {"test_persons_max", c.dataset.test_persons_max},
                    {"synth",
                     {{"image_size", s.image_size},
                      {"persons_min", s.persons_min},
                      {"persons_max", s.persons_max},
                      {"intensity_min", s.intensity_min},
                      {"intensity_max", s.intensity_max},
                      {"background_level", s.background_level},
                      {"background_noise_level", s.background_noise_level},
                      {"height_min", s.height_min},
                      {"height_max", s.height_max},
                      {"aspect_min", s.aspect_min},
                      {"aspect_max", s.aspect_max},
                      {"edge_softness", s.edge_softness},
                      {"max_retries", s.max_retries}}}};

    json modes = json::array();
    for (auto m : c.train.modes)
        modes.push_back(to_string(m));
    json train = to_json(c.train.base);
    train.erase("mode");
    train.erase("seed");
    train["modes"] = modes;
    train["dump_augmented"] = c.train.dump_augmented;

    json attacks = json::array();
    for (const auto& a : c.attacks) {
        json entry = to_json(*a.attack);
        entry["name"] = a.name;
        attacks.push_back(entry);
    }

    json thresholds = json::array();
    for (const auto& t : c.eval.thresholds) {
        json entry = {{"mode", t.mode}, {"scenario", t.scenario}};
        if (t.min_ap)
            entry["min_ap"] = *t.min_ap;
        if (t.max_ap)
            entry["max_ap"] = *t.max_ap;
        thresholds.push_back(entry);
    }

    return {{"seed", c.seed},
            {"out", c.out},
            {"threads", c.threads},
            {"dataset", dataset},
            {"model", {{"input_size", c.model.input_size}, {"grid_size", c.model.grid_size}, {"widths", c.model.widths}}},
            {"train", train},
            {"attacks", attacks},
            {"eval",
             {{"repeats", c.eval.repeats},
              {"conf_threshold", c.eval.conf_threshold},
              {"nms_iou", c.eval.nms_iou},
              {"iou_threshold", c.eval.iou_threshold},
              {"retrain_per_repeat", c.eval.retrain_per_repeat},
              {"thresholds", thresholds}}}};
}

} // namespace pod
