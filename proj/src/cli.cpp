#include "pod/cli.hpp"

#include "pod/config.hpp"
#include "pod/data.hpp"
#include "pod/errors.hpp"
#include "pod/eval.hpp"
#include "pod/train.hpp"

#include "CLI11.hpp"

#include <cstdlib>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <map>
#include <sstream>

namespace fs = std::filesystem;

namespace pod::cli {

namespace {

struct GlobalOptions
{
    std::string config_path;
    std::string out;
    std::optional<std::uint64_t> seed;
    std::optional<int> threads;
};

RunConfig resolve_config(const GlobalOptions& opts)
{
    RunConfig config = opts.config_path.empty() ? parse_run_config(nlohmann::json::object())
                                                : load_run_config(opts.config_path);
    if (const char* env = std::getenv("POD_SEED")) {
        try {
            config.seed = std::stoull(env);
        } catch (const std::exception&) {
            throw ConfigError("POD_SEED", std::string("not an unsigned integer: ") + env);
        }
    }
    if (opts.seed)
        config.seed = *opts.seed;
    if (!opts.out.empty())
        config.out = opts.out;
    if (opts.threads)
        config.threads = *opts.threads;
    validate(config);
    return config;
}

void write_text(const fs::path& path, const std::string& text)
{
    if (!path.parent_path().empty())
        fs::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary);
    if (!out)
        throw LoadError("cannot write " + path.string());
    out << text;
}

void write_lock(const RunConfig& config)
{
    write_text(fs::path(config.out) / "run.lock", to_json(config).dump(2) + "\n");
}

fs::path data_dir(const RunConfig& c) { return fs::path(c.out) / "data"; }
fs::path model_path(const RunConfig& c, TrainMode m) { return fs::path(c.out) / "models" / (to_string(m) + ".podmodel"); }

std::string padded(int v, int width)
{
    std::ostringstream s;
    s << std::setw(width) << std::setfill('0') << v;
    return s.str();
}

int cmd_prepare(const RunConfig& config, std::ostream& out)
{
    const auto& ds = config.dataset;
    const fs::path dest = data_dir(config);
    for (const auto& split : {ds.train_split, ds.test_split}) {
        Dataset dataset;
        if (ds.root) {
            if (!fs::exists(*ds.root))
                throw ConfigError("dataset.root", "path does not exist: " + *ds.root);
            FilterResult filtered = filter_persons(load_dataset(*ds.root, split), ds.filter_min_size_px);
            dataset = std::move(filtered.dataset);
        } else {
            SynthConfig synth = ds.synth;
            synth.seed = config.synth_seed();
            std::size_t count = static_cast<std::size_t>(ds.train_count);
            if (split == ds.test_split) {
                synth.persons_min = ds.test_persons_min;
                synth.persons_max = ds.test_persons_max;
                count = static_cast<std::size_t>(ds.test_count);
            }
            dataset = synth_dataset(synth, count, split);
        }
        if (fs::exists(dest / split))
            fs::remove_all(dest / split);
        save_dataset(dest, dataset);
        std::size_t labels = 0;
        for (const auto& s : dataset.samples)
            labels += s.boxes.size();
        out << split << ": kept_images=" << dataset.size() << " kept_labels=" << labels << '\n';
    }
    return kExitOk;
}

void dump_augmented(const RunConfig& config, const Dataset& train, const TrainConfig& tc, int count)
{
    AugmentConfig aug = tc.augment;
    aug.type_weights[static_cast<int>(PatchType::external)] = 0.0;
    aug.emit_patch_labels = emits_patch_labels(tc.mode);
    Dataset dump;
    dump.split_name = "augmented";
    for (int i = 0; i < count && i < static_cast<int>(train.size()); ++i) {
        const auto& s = train.samples[static_cast<std::size_t>(i)];
        Rng rng = make_rng(tc.seed, "dump-augment", static_cast<std::uint64_t>(i));
        AugmentResult r = pod_augment(s.image, s.boxes, aug, rng);
        dump.samples.push_back({s.id, std::move(r.image), std::move(r.boxes)});
    }
    save_dataset(fs::path(config.out) / "augmented" / to_string(tc.mode), dump);
}

int cmd_train(const RunConfig& config, const std::vector<std::string>& mode_names, std::ostream& out)
{
    std::vector<TrainMode> modes;
    if (mode_names.empty())
        modes = config.train.modes;
    for (const auto& name : mode_names) {
        try {
            modes.push_back(train_mode_from_string(name));
        } catch (const ContractError& e) {
            throw ConfigError("--mode", e.what());
        }
    }

    const Dataset train_set = load_dataset(data_dir(config), config.dataset.train_split);
    const Architecture arch = config.model.architecture();
    for (TrainMode mode : modes) {
        TrainConfig tc = config.train.base;
        tc.mode = mode;
        tc.seed = config.train_seed(mode);
        if (config.train.dump_augmented > 0 && uses_augmentation(mode))
            dump_augmented(config, train_set, tc, config.train.dump_augmented);

        const fs::path ckpt = model_path(config, mode);
        fs::create_directories(ckpt.parent_path());
        std::ofstream log(ckpt.parent_path() / (to_string(mode) + ".log"));
        const fs::path patch_dir = fs::path(config.out) / "patches" / to_string(mode);
        if (is_adversarial(mode) && fs::exists(patch_dir))
            fs::remove_all(patch_dir);

        TrainCallbacks callbacks;
        callbacks.on_epoch = [&](const EpochLog& e) {
            std::ostringstream line;
            line << "mode=" << to_string(mode) << " epoch=" << e.epoch << " loss=" << std::setprecision(8)
                 << e.mean_loss << " wall_s=" << std::setprecision(6) << e.wall_time_s;
            log << line.str() << '\n';
            out << line.str() << '\n';
        };
        callbacks.on_patch = [&](int epoch, const PatchPixels& patch, double objective) {
            const auto seed = derive_seed(tc.seed, "advpod-patch", static_cast<std::uint64_t>(epoch));
            save_patch_archive(patch_dir / ("epoch_" + padded(epoch, 3)), patch,
                               {"universal", patch.side, seed, objective, epoch});
        };

        const TrainResult result = train(train_set, arch, tc, callbacks);
        nlohmann::json meta = {{"mode", to_string(mode)},
                               {"train_config", to_json(tc)},
                               {"wall_time_s", result.wall_time_s},
                               {"history_epochs", result.history.epochs},
                               {"patch_targets_seen", result.patch_targets_seen},
                               {"train_images", train_set.size()}};
        save_checkpoint(ckpt, result.model, meta);
        out << "trained " << to_string(mode) << " in " << std::fixed << std::setprecision(2) << result.wall_time_s
            << " s -> " << ckpt.string() << '\n'
            << std::defaultfloat;
    }
    return kExitOk;
}

Scenario find_scenario(const RunConfig& config, const std::string& kind, const std::string& name)
{
    for (const auto& s : config.attacks)
        if ((!name.empty() && s.name == name) || (name.empty() && to_string(s.attack->kind) == kind))
            return s;
    if (!name.empty())
        throw ConfigError("--name", "no attack scenario named '" + name + "'");
    AttackConfig attack;
    try {
        attack.kind = attack_kind_from_string(kind);
    } catch (const ContractError& e) {
        throw ConfigError("--kind", e.what());
    }
    return {kind, attack};
}

int cmd_attack(const RunConfig& config, const std::string& kind, const std::string& name, const std::string& mode_name,
               std::ostream& out)
{
    TrainMode mode;
    try {
        mode = train_mode_from_string(mode_name);
    } catch (const ContractError& e) {
        throw ConfigError("--mode", e.what());
    }
    const Scenario scenario = find_scenario(config, kind, name);
    const Checkpoint ck = load_checkpoint(model_path(config, mode));
    const Dataset test_set = load_dataset(data_dir(config), config.dataset.test_split);

    Rng rng = repeat_rng(scenario, config.eval_seed(), 0);
    const AttackConfig attack = repeat_attack_config(scenario, config.eval_seed(), 0);
    const ScenarioResult result = apply_attack_scenario(ck.model, test_set, attack, rng);

    const fs::path dest = fs::path(config.out) / "attacked" / to_string(mode) / scenario.name;
    if (fs::exists(dest))
        fs::remove_all(dest);
    save_dataset(dest, result.dataset);
    if (result.universal)
        save_patch_archive(dest / "patch", *result.universal,
                           {to_string(attack.kind), result.universal->side, attack.seed,
                            universal_objective(ck.model, test_set, *result.universal, attack), -1});
    std::size_t patched = 0;
    for (const auto& p : result.placements)
        patched += p.has_value();
    out << "attack " << scenario.name << " on " << to_string(mode) << ": patched " << patched << "/"
        << result.dataset.size() << " images -> " << dest.string() << '\n';
    return kExitOk;
}

std::vector<Scenario> scenarios_of(const RunConfig& config)
{
    std::vector<Scenario> scenarios{{"clean", std::nullopt}};
    scenarios.insert(scenarios.end(), config.attacks.begin(), config.attacks.end());
    return scenarios;
}

int write_report_files(const RunConfig& config, const EvalReport& report, std::ostream& out)
{
    const fs::path base(config.out);
    write_text(base / "report.csv", report_csv(report));
    write_text(base / "report.md", report_markdown(report));
    out << report_markdown(report);

    int status = kExitOk;
    for (const auto& o : check_thresholds(report, config.eval.thresholds)) {
        std::ostringstream desc;
        desc << o.threshold.mode << "/" << o.threshold.scenario;
        if (o.threshold.min_ap)
            desc << " ap>=" << *o.threshold.min_ap;
        if (o.threshold.max_ap)
            desc << " ap<=" << *o.threshold.max_ap;
        out << (o.passed ? "PASS " : "FAIL ") << desc.str();
        if (o.value)
            out << " (ap=" << std::fixed << std::setprecision(4) << *o.value << std::defaultfloat << ")";
        else
            out << " (missing cell)";
        out << '\n';
        if (!o.passed)
            status = kExitThreshold;
    }
    return status;
}

int cmd_evaluate(const RunConfig& config, std::ostream& out)
{
    const Dataset test_set = load_dataset(data_dir(config), config.dataset.test_split);
    const auto scenarios = scenarios_of(config);
    EvalOptions options;
    options.repeats = config.eval.repeats;
    options.conf_threshold = config.eval.conf_threshold;
    options.nms_iou = config.eval.nms_iou;
    options.iou_threshold = config.eval.iou_threshold;
    options.seed = config.eval_seed();
    options.threads = config.threads;

    EvalReport report;
    if (!config.eval.retrain_per_repeat) {
        std::vector<Checkpoint> checkpoints;
        checkpoints.reserve(config.train.modes.size());
        for (TrainMode m : config.train.modes)
            checkpoints.push_back(load_checkpoint(model_path(config, m)));
        std::vector<NamedModel> models;
        for (std::size_t i = 0; i < checkpoints.size(); ++i)
            models.push_back({to_string(config.train.modes[i]), &checkpoints[i].model,
                              checkpoints[i].metadata.value("wall_time_s", 0.0)});
        report = evaluate_scenarios(models, test_set, scenarios, options);
    } else {
        // every repeat retrains each mode with its own seed and evaluates it once
        const Dataset train_set = load_dataset(data_dir(config), config.dataset.train_split);
        const Architecture arch = config.model.architecture();
        std::map<std::pair<std::string, std::string>, std::vector<double>> aps;
        std::map<std::string, std::vector<double>> walls;
        for (int r = 0; r < config.eval.repeats; ++r) {
            EvalOptions once = options;
            once.repeats = 1;
            once.seed = config.eval_seed(r);
            for (TrainMode m : config.train.modes) {
                TrainConfig tc = config.train.base;
                tc.mode = m;
                tc.seed = config.train_seed(m, r);
                const TrainResult trained = train(train_set, arch, tc);
                walls[to_string(m)].push_back(trained.wall_time_s);
                const NamedModel named{to_string(m), &trained.model, trained.wall_time_s};
                for (const auto& cell : evaluate_scenarios({&named, 1}, test_set, scenarios, once).rows)
                    aps[{cell.mode, cell.scenario}].push_back(cell.aps.front());
            }
        }
        for (TrainMode m : config.train.modes) {
            const std::string mode = to_string(m);
            for (const auto& s : scenarios) {
                EvalCell cell{mode, s.name, 0, 0, config.eval.repeats, aps[{mode, s.name}], 0.0};
                std::tie(cell.ap_mean, cell.ap_std) = mean_std(cell.aps);
                cell.train_wall_time_s = mean_std(walls[mode]).first;
                report.rows.push_back(cell);
            }
        }
    }
    report.metadata = {{"seed", config.seed},
                       {"eval_seed", options.seed},
                       {"repeats", options.repeats},
                       {"retrain_per_repeat", config.eval.retrain_per_repeat}};
    write_text(fs::path(config.out) / "eval.json", to_json(report).dump(2) + "\n");
    return write_report_files(config, report, out);
}

int cmd_report(const RunConfig& config, std::ostream& out)
{
    const fs::path path = fs::path(config.out) / "eval.json";
    std::ifstream in(path);
    if (!in)
        throw LoadError("no evaluation results at " + path.string() + " (run 'evaluate' first)");
    EvalReport report;
    try {
        report = report_from_json(nlohmann::json::parse(in));
    } catch (const nlohmann::json::exception& e) {
        throw LoadError("corrupt " + path.string() + ": " + e.what());
    }
    return write_report_files(config, report, out);
}

} // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err)
{
    CLI::App app{"Patch-based occlusion-aware detection: train, attack and evaluate toy infrared detectors"};
    app.require_subcommand(1);
    GlobalOptions global;
    std::uint64_t seed = 0;
    int threads = 1;
    std::vector<CLI::Option*> seed_opts, thread_opts;
    auto add_common = [&](CLI::App* a) {
        seed_opts.push_back(a->add_option("--seed", seed, "global seed (overrides POD_SEED and the config file)"));
        thread_opts.push_back(
            a->add_option("--threads", threads, "worker threads for evaluation")->check(CLI::PositiveNumber));
        a->add_option("--config", global.config_path, "run configuration (JSON)")->check(CLI::ExistingFile);
        a->add_option("--out", global.out, "output directory");
    };
    add_common(&app);

    auto* prepare = app.add_subcommand("prepare", "generate or ingest+filter the dataset");
    auto* train_cmd = app.add_subcommand("train", "train one or more modes");
    std::vector<std::string> modes;
    int dump_count = -1;
    train_cmd->add_option("--mode", modes, "std, pod, pod_nodet, advpod, advpod_nodet (default: config modes)");
    auto* attack = app.add_subcommand("attack", "write an attacked copy of the test split");
    std::string kind, name, attack_mode = "std";
    attack->add_option("--kind", kind, "noise, universal, hcb or shapeloc")->required();
    attack->add_option("--name", name, "scenario name from the config (default: first of that kind)");
    attack->add_option("--mode", attack_mode, "model to attack")->capture_default_str();
    auto* evaluate = app.add_subcommand("evaluate", "scenario matrix evaluation with thresholds");
    auto* report = app.add_subcommand("report", "re-render report files from eval.json");

    for (auto* sub : {prepare, train_cmd, attack, evaluate, report})
        add_common(sub);
    train_cmd->add_option("--dump-augmented", dump_count, "write this many augmented training images per mode");

    std::vector<std::string> reversed(args.rbegin(), args.rend() - (args.empty() ? 0 : 1));
    try {
        app.parse(reversed);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e, out, err);
        return code == 0 ? kExitOk : kExitUsage;
    }
    for (auto* o : seed_opts)
        if (o->count())
            global.seed = seed;
    for (auto* o : thread_opts)
        if (o->count())
            global.threads = threads;

    try {
        RunConfig config = resolve_config(global);
        if (dump_count >= 0)
            config.train.dump_augmented = dump_count;
        fs::create_directories(config.out);
        write_lock(config);
        if (prepare->parsed())
            return cmd_prepare(config, out);
        if (train_cmd->parsed())
            return cmd_train(config, modes, out);
        if (attack->parsed())
            return cmd_attack(config, kind, name, attack_mode, out);
        if (evaluate->parsed())
            return cmd_evaluate(config, out);
        if (report->parsed())
            return cmd_report(config, out);
    } catch (const ConfigError& e) {
        err << "error: " << e.what() << '\n';
        return kExitUsage;
    } catch (const DivergedError& e) {
        err << "error: " << e.what() << '\n';
        return kExitRuntime;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << '\n';
        return kExitRuntime;
    }
    return kExitUsage;
}

int run(int argc, char** argv)
{
    return run(std::vector<std::string>(argv, argv + argc), std::cout, std::cerr);
}

} // namespace pod::cli
