#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>

#include "deal/reporting.hpp"

using namespace deal;

namespace {

ALRunLedger make_ledger(const std::string& strategy, std::uint64_t seed, std::vector<double> miou,
                        bool pam = true)
{
    ALRunLedger l;
    l.strategy = strategy;
    l.seed = seed;
    l.pam_enabled = pam;
    l.pool_size = 100;
    l.initial_count = 10;
    l.budget = 5;
    l.num_classes = 2;
    l.status = "complete";
    for (size_t i = 0; i < miou.size(); ++i) {
        RoundRecord r;
        r.round = static_cast<int>(i);
        r.labeled_count = 10 + 5 * static_cast<int>(i);
        r.labeled_fraction = r.labeled_count / 100.0;
        r.miou = miou[i];
        r.class_iou = {miou[i] + 0.1, miou[i] - 0.1};
        r.class_entropy = 0.5 + 0.01 * double(seed);
        l.rounds.push_back(r);
    }
    return l;
}

}  // namespace

TEST_SUITE("reporting")
{
    TEST_CASE("stage statistics are mean and sample standard deviation over seeds")
    {
        std::mt19937_64 rng(5);
        std::uniform_real_distribution<double> u(0.2, 0.8);
        for (int trial = 0; trial < 20; ++trial) {
            const int seeds = 2 + trial % 4;
            std::vector<ALRunLedger> ledgers;
            std::vector<std::vector<double>> values(3);
            for (int s = 0; s < seeds; ++s) {
                std::vector<double> m{u(rng), u(rng), u(rng)};
                for (int k = 0; k < 3; ++k)
                    values[size_t(k)].push_back(m[size_t(k)]);
                ledgers.push_back(make_ledger("ds", std::uint64_t(s), m));
            }
            const auto summary = aggregate(ledgers);
            REQUIRE(summary.series.size() == 1);
            const auto& st = summary.series[0].stages;
            for (int k = 0; k < 3; ++k) {
                const auto& v = values[size_t(k)];
                double mean = 0, ss = 0;
                for (double x : v)
                    mean += x / double(v.size());
                for (double x : v)
                    ss += (x - mean) * (x - mean);
                CHECK(std::abs(st[size_t(k)].mean_miou - mean) < 1e-12);
                CHECK(std::abs(st[size_t(k)].std_miou - std::sqrt(ss / double(v.size() - 1))) < 1e-12);
            }
            CHECK(summary.series[0].final_class_iou[0] == doctest::Approx(st[2].mean_miou + 0.1));

            std::shuffle(ledgers.begin(), ledgers.end(), rng);
            const auto again = aggregate(ledgers);
            for (int k = 0; k < 3; ++k) {
                CHECK(again.series[0].stages[size_t(k)].mean_miou == st[size_t(k)].mean_miou);
                CHECK(again.series[0].stages[size_t(k)].std_miou == st[size_t(k)].std_miou);
            }
        }
    }

    TEST_CASE("single seed has zero spread")
    {
        const auto summary = aggregate({make_ledger("random", 0, {0.3, 0.4})});
        CHECK(summary.series[0].stages[1].std_miou == 0.0);
        CHECK(summary.series[0].stages[1].labeled_fraction == doctest::Approx(0.15));
    }

    TEST_CASE("aggregation errors")
    {
        CHECK_THROWS_AS(aggregate({}), AggregationError);
        CHECK_THROWS_AS(aggregate({make_ledger("ds", 0, {0.3, 0.4}), make_ledger("ds", 1, {0.3})}),
                        AggregationError);
        auto other = make_ledger("ds", 1, {0.3, 0.4});
        other.rounds[1].labeled_count = 16;
        CHECK_THROWS_AS(aggregate({make_ledger("ds", 0, {0.3, 0.4}), other}), AggregationError);
        other = make_ledger("ds", 1, {0.3, 0.4});
        other.num_classes = 3;
        CHECK_THROWS_AS(aggregate({make_ledger("ds", 0, {0.3, 0.4}), other}), AggregationError);
    }

    TEST_CASE("series grouping, qbc and PAM ablation")
    {
        const auto summary = aggregate({make_ledger("ds", 0, {0.3, 0.5}), make_ledger("ds", 0, {0.3, 0.4}, false),
                                        make_ledger("qbc-entropy", 0, {0.3, 0.45}),
                                        make_ledger("qbc-vr", 0, {0.3, 0.47})});
        REQUIRE(summary.find("qbc") != nullptr);
        CHECK(summary.find("qbc")->strategy == "qbc-vr");
        REQUIRE(summary.find("ds (no PAM)") != nullptr);
        REQUIRE(summary.pam_ablation.size() == 1);
        CHECK(summary.pam_ablation[0].strategy == "ds");
        CHECK(summary.pam_ablation[0].with_pam == 0.5);
        CHECK(summary.pam_ablation[0].without_pam == 0.4);
    }

    TEST_CASE("growth curve is deterministic and spans the labeled fractions")
    {
        const auto summary =
            aggregate({make_ledger("ds", 0, {0.3, 0.5, 0.55}), make_ledger("random", 0, {0.3, 0.45, 0.5})}, 0.7);
        const std::string a = growth_curve_svg(summary);
        CHECK(a == growth_curve_svg(summary));
        CHECK(a.rfind("<svg", 0) == 0);
        CHECK(a.find(">10.0%<") != std::string::npos);
        CHECK(a.find(">20.0%<") != std::string::npos);
        CHECK(a.find(">ds<") != std::string::npos);
        CHECK(a.find(">random<") != std::string::npos);
        CHECK(a.find("full data") != std::string::npos);

        const auto path = std::filesystem::temp_directory_path() / "deal_growth_test.svg";
        render_growth_curve(summary, path);
        std::ifstream in(path);
        std::stringstream buf;
        buf << in.rdbuf();
        CHECK(buf.str() == a);
        std::filesystem::remove(path);
        CHECK_THROWS_AS(growth_curve_svg(ExperimentSummary{}), AggregationError);
    }

    TEST_CASE("per-class table")
    {
        auto l = make_ledger("ds", 0, {0.3, 0.5});
        l.rounds.back().class_iou[1] = std::nan("");
        const std::string table = per_class_table(aggregate({l}), {"bg", "fg"});
        CHECK(table == "| Method | bg | fg | mIoU |\n|---|---|---|---|\n| ds | 60.00 | - | 50.00 |\n");
    }
}
