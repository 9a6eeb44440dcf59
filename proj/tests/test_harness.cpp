#include <doctest.h>

#include <filesystem>

#include "deal/al_harness.hpp"
#include "test_util.hpp"

using namespace deal;

namespace {

ALConfig tiny_config(Strategy strategy)
{
    ALConfig cfg = al_config_from(KeyValueConfig::parse(R"(
        synthetic_train = 30
        synthetic_test = 6
        image_height = 32
        image_width = 32
        initial_fraction = 0.2
        budget = 3
        rounds = 3
        iterations = 4
        widths = 3,4,4
        attention_height = 8
        attention_width = 8
        mc_passes = 2
    )"));
    cfg.strategy = strategy;
    return cfg;
}

void check_same_ledger(const ALRunLedger& a, const ALRunLedger& b)
{
    REQUIRE(a.rounds.size() == b.rounds.size());
    CHECK(a.status == b.status);
    for (size_t i = 0; i < a.rounds.size(); ++i) {
        CHECK(a.rounds[i].selected == b.rounds[i].selected);
        CHECK(a.rounds[i].miou == b.rounds[i].miou);
        CHECK(a.rounds[i].labeled_count == b.rounds[i].labeled_count);
        CHECK(a.rounds[i].train_loss == b.rounds[i].train_loss);
    }
}

}  // namespace

TEST_SUITE("harness")
{
    TEST_CASE("IoU from a confusion matrix")
    {
        LabelMap truth(2, 3), pred(2, 3);
        truth << 0, 0, 1, 1, 2, 255;
        pred << 0, 1, 1, 1, 0, 2;
        const auto r = evaluate_predictions({pred}, {truth}, 4, 255);
        CHECK(r.confusion(0, 0) == 1);
        CHECK(r.confusion(0, 1) == 1);
        CHECK(r.confusion(2, 0) == 1);
        CHECK(r.class_iou[0] == doctest::Approx(1.0 / 3));  // tp 1, gt 2, pred 2
        CHECK(r.class_iou[1] == doctest::Approx(2.0 / 3));
        CHECK(r.class_iou[2] == 0.0);
        CHECK(std::isnan(r.class_iou[3]));
        CHECK(r.miou == doctest::Approx((1.0 / 3 + 2.0 / 3 + 0.0) / 3));
    }

    TEST_CASE("IoU matches a per-class loop oracle")
    {
        std::mt19937_64 rng(1);
        for (int trial = 0; trial < 30; ++trial) {
            std::vector<LabelMap> preds, truths;
            for (int i = 0; i < 3; ++i) {
                truths.push_back(testutil::random_labels(5, 6, 3, rng, 0.1));
                preds.push_back(testutil::random_labels(5, 6, 3, rng));
            }
            const auto r = evaluate_predictions(preds, truths, 3, 255);
            double sum = 0;
            int present = 0;
            for (int c = 0; c < 3; ++c) {
                long inter = 0, uni = 0, gt = 0;
                for (size_t i = 0; i < 3; ++i)
                    for (Eigen::Index k = 0; k < truths[i].size(); ++k) {
                        const int t = truths[i].data()[k], p = preds[i].data()[k];
                        if (t == 255)
                            continue;
                        inter += t == c && p == c;
                        uni += t == c || p == c;
                        gt += t == c;
                    }
                if (gt) {
                    sum += double(inter) / double(uni);
                    ++present;
                }
            }
            CHECK(std::abs(r.miou - sum / present) < 1e-12);
        }
    }

    TEST_CASE("class distribution entropy")
    {
        LabelMap a(1, 4);
        a << 0, 1, 0, 1;
        CHECK(class_distribution_entropy({&a}, 4, 255) == doctest::Approx(std::log(2.0)));
        LabelMap b = LabelMap::Constant(2, 2, 3);
        CHECK(class_distribution_entropy({&b}, 4, 255) == 0.0);
        LabelMap c(1, 4);
        c << 0, 1, 2, 3;
        LabelMap d = LabelMap::Constant(1, 3, 255);
        CHECK(class_distribution_entropy({&c, &d}, 4, 255) == doctest::Approx(std::log(4.0)));
        CHECK_THROWS_AS(class_distribution_entropy({}, 4, 255), ConfigError);
    }

    TEST_CASE("config parsing")
    {
        const ALConfig cfg = tiny_config(Strategy::random);
        CHECK(cfg.synthetic_train == 30);
        CHECK(cfg.model.net.widths == std::array<int, 3>{3, 4, 4});
        CHECK(cfg.budget_for(30) == 3);
        CHECK(cfg.subset_for(30) == 12);
        CHECK_THROWS_AS(al_config_from(KeyValueConfig::parse("not_a_key = 1")), ConfigError);
        CHECK_THROWS_AS(al_config_from(KeyValueConfig::parse("strategy = magic")), ConfigError);
        CHECK_THROWS_AS(al_config_from(KeyValueConfig::parse("rounds = 0")), ConfigError);
        CHECK(al_config_from(KeyValueConfig::parse("")).budget_for(200) == 10);
        for (const auto& name : strategy_names())
            CHECK(to_string(parse_strategy(name)) == name);
    }

    TEST_CASE("one round without budget trains once and leaves the pool alone")
    {
        ALConfig cfg = tiny_config(Strategy::ds);
        cfg.data.rounds = 1;
        cfg.budget = 0;
        const Dataset data = load_dataset(cfg);
        SamplePool pool = split_initial(data.train, cfg.data, 0);
        const auto before = pool.annotated();
        int calls = 0;
        RunOptions opts;
        opts.on_round = [&](const SamplePool& p, const RoundRecord& r) {
            ++calls;
            CHECK(p.annotated() == before);
            CHECK(r.selected.empty());
        };
        const auto ledger = run_active_learning(cfg, pool, data.test, 0, opts);
        CHECK(calls == 1);
        REQUIRE(ledger.rounds.size() == 1);
        CHECK(ledger.rounds[0].labeled_count == int(before.size()));
        CHECK(ledger.status == "complete");
    }

    TEST_CASE("every strategy keeps the pool consistent")
    {
        for (const auto& name : strategy_names()) {
            CAPTURE(name);
            const ALConfig cfg = tiny_config(parse_strategy(name));
            const Dataset data = load_dataset(cfg);
            int expected = static_cast<int>(split_initial(data.train, cfg.data, 1).annotated().size());
            RunOptions opts;
            opts.on_round = [&](const SamplePool& p, const RoundRecord& r) {
                CHECK(p.partition_ok());
                CHECK(r.labeled_count == expected);
                if (r.round + 1 < cfg.data.rounds) {
                    CHECK(r.selected.size() == 3);
                    expected += 3;
                }
                CHECK(int(p.annotated().size()) == expected);
                for (const auto& id : r.selected)
                    CHECK(p.is_annotated(id));
            };
            const auto ledger = run_active_learning(cfg, split_initial(data.train, cfg.data, 1), data.test, 1, opts);
            CHECK(ledger.rounds.size() == 3);
            CHECK(ledger.rounds.back().selected.empty());
        }
    }

    TEST_CASE("fixed seeds reproduce the ledger")
    {
        for (Strategy s : {Strategy::random, Strategy::de}) {
            const ALConfig cfg = tiny_config(s);
            const Dataset data = load_dataset(cfg);
            const auto a = run_active_learning(cfg, split_initial(data.train, cfg.data, 4), data.test, 4);
            const auto b = run_active_learning(cfg, split_initial(data.train, cfg.data, 4), data.test, 4);
            check_same_ledger(a, b);
        }
    }

    TEST_CASE("test samples must stay out of the pool")
    {
        const ALConfig cfg = tiny_config(Strategy::random);
        const Dataset data = load_dataset(cfg);
        for (const auto& t : data.test)
            for (const auto& s : data.train)
                CHECK(t.id != s.id);
        std::vector<SegSample> leaky = data.test;
        leaky.push_back(data.train.front());
        CHECK_THROWS_AS(run_active_learning(cfg, split_initial(data.train, cfg.data, 0), leaky, 0), ConfigError);
    }

    TEST_CASE("budget larger than the pool stops the run")
    {
        ALConfig cfg = tiny_config(Strategy::random);
        cfg.budget = 20;
        const Dataset data = load_dataset(cfg);
        const auto ledger = run_active_learning(cfg, split_initial(data.train, cfg.data, 0), data.test, 0);
        CHECK(ledger.status == "pool_exhausted");
        CHECK(ledger.rounds.size() == 2);
    }

    TEST_CASE("ledger, scores and checkpoint files round trip")
    {
        namespace fs = std::filesystem;
        const fs::path dir = fs::temp_directory_path() / "deal_harness_files";
        fs::remove_all(dir);
        const ALConfig cfg = tiny_config(Strategy::entropy);
        const Dataset data = load_dataset(cfg);
        RunOptions opts;
        opts.out_dir = dir;
        const auto ledger = run_active_learning(cfg, split_initial(data.train, cfg.data, 2), data.test, 2, opts);
        const auto back = read_ledger(dir / "ledger.jsonl");
        check_same_ledger(ledger, back);
        CHECK(back.strategy == "entropy");
        CHECK(back.budget == 3);
        CHECK(fs::exists(dir / "scores" / "round_0.tsv"));
        CHECK_FALSE(fs::exists(dir / "scores" / "round_2.tsv"));

        const DealNetwork<float> net(cfg.model);
        const auto params = load_checkpoint(dir / "checkpoints" / "round_2.json", cfg.model);
        CHECK(params.seg.size() == net.init_params(0).seg.size());
        ALConfig other = cfg;
        other.model.net.widths = {4, 4, 4};
        CHECK_THROWS_AS(load_checkpoint(dir / "checkpoints" / "round_2.json", other.model), ConfigError);
        fs::remove_all(dir);
    }

    TEST_CASE("seed derivation separates rounds and purposes")
    {
        CHECK(derive_seed(1, 0, 1) == derive_seed(1, 0, 1));
        CHECK(derive_seed(1, 0, 1) != derive_seed(1, 0, 2));
        CHECK(derive_seed(1, 0, 1) != derive_seed(1, 1, 1));
        CHECK(derive_seed(1, 0, 1) != derive_seed(2, 0, 1));
    }
}
