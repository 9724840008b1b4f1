#include "doctest.h"

#include "pod/config.hpp"
#include "pod/errors.hpp"

using namespace pod;
using nlohmann::json;

TEST_SUITE("config")
{
    TEST_CASE("defaults")
    {
        const RunConfig c = parse_run_config(json::object());
        CHECK(c.seed == 0);
        CHECK(c.threads == 1);
        CHECK(c.model.input_size == 128);
        CHECK(c.model.grid_size == 8);
        CHECK(c.train.modes.size() == 5);
        CHECK(c.train.base.class_weights.human == 0.9);
        CHECK(c.train.base.class_weights.patch == 0.1);
        CHECK(c.train.base.adv_schedule.start_epoch == 5);
        CHECK(c.train.base.adv_schedule.period == 15);
        CHECK(c.train.base.adv_attack.steps == 200);
        CHECK(c.train.base.adv_attack.batch_size == 32);
        CHECK(c.eval.repeats == 5);
        CHECK(c.dataset.filter_min_size_px == 120.0);
        CHECK(c.attacks.size() == 3);
    }

    TEST_CASE("partial adversarial attack section keeps the training defaults")
    {
        const RunConfig c = parse_run_config({{"train", {{"adv_attack", {{"step_size", 0.1}}}}}});
        CHECK(c.train.base.adv_attack.step_size == 0.1);
        CHECK(c.train.base.adv_attack.steps == 200);
        CHECK(c.train.base.adv_attack.batch_size == 32);
    }

    TEST_CASE("resolved snapshot parses back to the same snapshot")
    {
        const json in = {{"seed", 17},
                         {"out", "x"},
                         {"model", {{"input_size", 64}, {"widths", {8, 16}}}},
                         {"train", {{"modes", {"std", "advpod"}}, {"epochs", 3}}},
                         {"attacks", {{{"kind", "shapeloc"}, {"name", "sl"}, {"max_rects", 2}}}},
                         {"eval", {{"thresholds", {{{"mode", "std"}, {"scenario", "clean"}, {"min_ap", 0.5}}}}}}};
        const RunConfig c = parse_run_config(in);
        CHECK(c.seed == 17);
        CHECK(c.train.base.epochs == 3);
        CHECK(c.attacks.size() == 1);
        CHECK(c.attacks[0].attack->max_rects == 2);
        CHECK(c.eval.thresholds.size() == 1);
        const json snapshot = to_json(c);
        CHECK(to_json(parse_run_config(snapshot)) == snapshot);
    }

    TEST_CASE("errors name the field")
    {
        auto field_of = [](const json& j) -> std::string {
            try {
                parse_run_config(j);
            } catch (const ConfigError& e) {
                return e.field();
            }
            return "";
        };
        CHECK(field_of({{"train", {{"epochs", "many"}}}}) == "train.epochs");
        CHECK(field_of({{"train", {{"epoch", 3}}}}) == "train.epoch");
        CHECK(field_of({{"train", {{"modes", {"std", "yolo"}}}}}) == "train.modes");
        CHECK(field_of({{"attacks", {{{"kind", "pgd"}}}}}) == "attacks[0].kind");
        CHECK(field_of({{"bogus", 1}}) == "bogus");
    }

    TEST_CASE("seed fan-out is stream separated")
    {
        RunConfig c;
        c.seed = 3;
        CHECK(c.train_seed(TrainMode::pod) != c.train_seed(TrainMode::pod_nodet));
        CHECK(c.train_seed(TrainMode::pod, 0) != c.train_seed(TrainMode::pod, 1));
        CHECK(c.eval_seed(0) != c.synth_seed());
        RunConfig d = c;
        d.attacks.push_back({"extra", AttackConfig{}});
        CHECK(d.eval_seed(2) == c.eval_seed(2));
    }

    TEST_CASE("validation")
    {
        RunConfig c;
        c.dataset.root = "/definitely/not/here";
        CHECK_THROWS_AS(validate(c), ConfigError);
        c = RunConfig{};
        c.eval.repeats = 0;
        CHECK_THROWS_AS(validate(c), ConfigError);
        c = RunConfig{};
        c.attacks.push_back(c.attacks.front());
        CHECK_THROWS_AS(validate(c), ConfigError); // duplicate scenario names
    }
}
