#include <doctest.h>

#include <array>
#include <filesystem>

#include "deal/data_pool.hpp"

using namespace deal;

namespace {

std::array<long, kSyntheticClasses> class_histogram(const std::vector<SegSample>& samples)
{
    std::array<long, kSyntheticClasses> h{};
    for (const auto& s : samples)
        for (Eigen::Index k = 0; k < s.label.size(); ++k)
            ++h[static_cast<size_t>(s.label.data()[k])];
    return h;
}

std::vector<SegSample> blank_samples(int n)
{
    std::vector<SegSample> out;
    for (int i = 0; i < n; ++i)
        out.push_back({"s" + std::to_string(10000 + i), FeatureMap<float>(3, 2, 2), LabelMap::Zero(2, 2)});
    return out;
}

}  // namespace

TEST_SUITE("data_pool")
{
    TEST_CASE("synthetic scenes are deterministic in the seed")
    {
        const auto a = generate_synthetic_dataset(5, 32, 48, 11);
        const auto b = generate_synthetic_dataset(5, 32, 48, 11);
        const auto c = generate_synthetic_dataset(5, 32, 48, 12);
        REQUIRE(a.size() == 5);
        for (size_t i = 0; i < a.size(); ++i) {
            CHECK(a[i].id == b[i].id);
            CHECK(a[i].image.data == b[i].image.data);
            CHECK(a[i].label == b[i].label);
            CHECK(a[i].image.height == 32);
            CHECK(a[i].image.width == 48);
        }
        CHECK(a[0].image.data != c[0].image.data);
    }

    TEST_CASE("synthetic generator rejects bad requests")
    {
        CHECK_THROWS_AS(generate_synthetic_dataset(0, 64, 64, 1), ConfigError);
        CHECK_THROWS_AS(generate_synthetic_dataset(3, 31, 64, 1), ConfigError);
        CHECK_THROWS_AS(generate_synthetic_dataset(3, 64, 16, 1), ConfigError);
    }

    TEST_CASE("synthetic class histogram fixture")
    {
        const auto samples = generate_synthetic_dataset(100, 64, 64, 7);
        REQUIRE(samples.size() == 100);
        const auto h = class_histogram(samples);
        CHECK(h[0] + h[1] + h[2] + h[3] == 100L * 64 * 64);
        CHECK(h == std::array<long, 4>{351546, 46513, 8469, 3072});
        // easy classes dominate, the thin and small ones are rare
        CHECK(h[kBackground] > h[kBlob]);
        CHECK(h[kBlob] > 4 * h[kThinLine]);
        CHECK(h[kThinLine] > h[kSmallSquare]);
        for (const auto& s : samples) {
            CHECK(s.image.data.minCoeff() >= 0.0f);
            CHECK(s.image.data.maxCoeff() <= 1.0f);
        }
    }

    TEST_CASE("initial split sizes")
    {
        DatasetConfig camvid;
        camvid.initial_fraction = 0.108;
        CHECK(camvid.initial_count(370) == 40);
        const SamplePool a = split_initial(blank_samples(370), camvid, 3);
        CHECK(a.annotated().size() == 40);
        CHECK(a.unlabeled().size() == 330);
        CHECK(a.partition_ok());

        DatasetConfig cityscapes;
        cityscapes.initial_fraction = 300.0 / 2675.0;
        cityscapes.budget_fraction = 150.0 / 2675.0;
        const SamplePool b = split_initial(blank_samples(2675), cityscapes, 3);
        CHECK(b.annotated().size() == 300);
        CHECK(b.unlabeled().size() == 2375);
        CHECK(cityscapes.budget_count(2675) == 150);

        DatasetConfig tiny;
        tiny.initial_fraction = 0.001;
        CHECK_THROWS_AS(split_initial(blank_samples(100), tiny, 3), ConfigError);
    }

    TEST_CASE("initial split is deterministic in the seed")
    {
        DatasetConfig cfg;
        const auto a = split_initial(blank_samples(200), cfg, 5);
        const auto b = split_initial(blank_samples(200), cfg, 5);
        const auto c = split_initial(blank_samples(200), cfg, 6);
        CHECK(a.annotated() == b.annotated());
        CHECK(a.annotated() != c.annotated());
    }

    TEST_CASE("oracle annotation")
    {
        DatasetConfig cfg;
        SamplePool pool = split_initial(blank_samples(50), cfg, 1);
        const auto before = pool.annotated();
        CHECK(oracle_annotate(pool, {}).annotated() == before);

        const std::string hidden = *pool.unlabeled().begin();
        CHECK_THROWS_AS(pool.label(hidden), InvalidQueryError);
        CHECK_NOTHROW(pool.image(hidden));

        std::vector<std::string> pick(pool.unlabeled().begin(), std::next(pool.unlabeled().begin(), 3));
        pool = oracle_annotate(std::move(pool), pick);
        CHECK(pool.annotated().size() == before.size() + 3);
        CHECK(pool.partition_ok());
        CHECK_NOTHROW(pool.label(hidden));

        const std::vector<std::string> again{pick[0]};
        CHECK_THROWS_AS(oracle_annotate(pool, again), InvalidQueryError);
        const std::vector<std::string> unknown{"nope"};
        CHECK_THROWS_AS(oracle_annotate(pool, unknown), InvalidQueryError);
        const std::string free = *pool.unlabeled().begin();
        const std::vector<std::string> twice{free, free};
        CHECK_THROWS_AS(oracle_annotate(pool, twice), InvalidQueryError);
        CHECK(pool.is_annotated(free) == false);
    }

    TEST_CASE("presampling clamps and repeats")
    {
        DatasetConfig cfg;
        const SamplePool pool = split_initial(blank_samples(60), cfg, 2);
        const auto all = presample_subset(pool, 1000, 1);
        CHECK(all == std::vector<std::string>(pool.unlabeled().begin(), pool.unlabeled().end()));
        CHECK_THROWS_AS(presample_subset(pool, 0, 1), ConfigError);
        const auto a = presample_subset(pool, 10, 9);
        CHECK(a == presample_subset(pool, 10, 9));
        CHECK(a.size() == 10);
        CHECK(std::set<std::string>(a.begin(), a.end()).size() == 10);
        for (const auto& id : a)
            CHECK(pool.unlabeled().count(id) == 1);
    }

    TEST_CASE("dataset config validation")
    {
        DatasetConfig cfg;
        CHECK_NOTHROW(cfg.validate(200));
        cfg.subset_size = 5;
        CHECK_THROWS_AS(cfg.validate(200), ConfigError);  // below the budget of 10
        cfg.subset_size = 0;
        CHECK(cfg.effective_subset_size(200) == 40);
        cfg.rounds = 0;
        CHECK_THROWS_AS(cfg.validate(200), ConfigError);
        cfg.rounds = 2;
        cfg.initial_fraction = 1.0;
        CHECK_THROWS_AS(cfg.validate(200), ConfigError);
    }

    TEST_CASE("png directory round trip")
    {
        namespace fs = std::filesystem;
        const fs::path root = fs::temp_directory_path() / "deal_png_roundtrip";
        fs::remove_all(root);
        auto samples = generate_synthetic_dataset(3, 32, 40, 4, "rt");
        samples[1].label(0, 0) = 255;
        save_dataset_dir(samples, root);
        const auto loaded = load_dataset_dir(root);
        REQUIRE(loaded.size() == 3);
        for (size_t i = 0; i < 3; ++i) {
            CHECK(loaded[i].id == samples[i].id);
            CHECK(loaded[i].label == samples[i].label);
            CHECK((loaded[i].image.data - samples[i].image.data).cwiseAbs().maxCoeff() <= 0.5f / 255.0f + 1e-6f);
        }
        CHECK_THROWS_AS(validate_sample(loaded[1], 4, 0), ConfigError);
        CHECK_NOTHROW(validate_sample(loaded[1], 4, 255));
        fs::remove_all(root);
        CHECK_THROWS_AS(load_dataset_dir(root), IoError);
    }
}
