// deal: command-line front end for difficulty-aware active learning runs.
//
//   deal gen-data --n 200 --height 64 --width 64 --seed 7 --out data/train
//   deal run      --config toy.cfg --strategy ds --seed 0 --out runs
//   deal score    --config toy.cfg --checkpoint runs/ds/seed_0/checkpoints/round_0.json --out scores.tsv
//   deal plot     --out report runs/*/seed_*/ledger.jsonl

#include <CLI11.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>

#ifdef __GLIBC__
#include <malloc.h>
#endif

#include "deal/al_harness.hpp"
#include "deal/reporting.hpp"

namespace fs = std::filesystem;

namespace {

deal::ALConfig load_config(const std::string& path)
{
    return path.empty() ? deal::al_config_from(deal::KeyValueConfig{})
                        : deal::al_config_from(deal::KeyValueConfig::load(path));
}

int cmd_gen_data(int n, int height, int width, std::uint64_t seed, const std::string& prefix, const fs::path& out)
{
    const auto samples = deal::generate_synthetic_dataset(n, height, width, seed, prefix);
    deal::save_dataset_dir(samples, out);
    std::vector<long> histogram(deal::kSyntheticClasses, 0);
    for (const auto& s : samples)
        for (Eigen::Index k = 0; k < s.label.size(); ++k)
            ++histogram[static_cast<size_t>(s.label.data()[k])];
    std::cout << "wrote " << samples.size() << " samples to " << out << "\nclass pixels:";
    for (long h : histogram)
        std::cout << ' ' << h;
    std::cout << '\n';
    return 0;
}

int cmd_run(const std::string& config_path, const std::string& strategy, std::optional<std::uint64_t> seed,
            const fs::path& out, bool quiet)
{
    deal::ALConfig cfg = load_config(config_path);
    if (!strategy.empty())
        cfg.strategy = deal::parse_strategy(strategy);
    if (seed)
        cfg.seeds = {*seed};
    const deal::Dataset data = load_dataset(cfg);
    const std::string label = deal::to_string(cfg.strategy) + (cfg.model.pam_enabled ? "" : "-nopam");
    for (std::uint64_t s : cfg.seeds) {
        deal::SamplePool pool = deal::split_initial(data.train, cfg.data, s);
        deal::RunOptions options;
        options.out_dir = out / label / ("seed_" + std::to_string(s));
        options.verbose = !quiet;
        const deal::ALRunLedger ledger = deal::run_active_learning(cfg, std::move(pool), data.test, s, options);
        std::cout << label << " seed " << s << ": " << ledger.status << ", final mIoU "
                  << ledger.rounds.back().miou << " -> " << (*options.out_dir / "ledger.jsonl").string() << '\n';
    }
    return 0;
}

int cmd_score(const std::string& config_path, const std::string& strategy, std::uint64_t seed,
              const fs::path& checkpoint, const fs::path& out, bool whole_pool)
{
    deal::ALConfig cfg = load_config(config_path);
    if (!strategy.empty())
        cfg.strategy = deal::parse_strategy(strategy);
    const deal::Dataset data = load_dataset(cfg);
    const deal::SamplePool pool = deal::split_initial(data.train, cfg.data, seed);
    const deal::DealNetwork<float> net(cfg.model);
    const deal::DealParams<float> params = deal::load_checkpoint(checkpoint, cfg.model);
    const std::vector<std::string> candidates =
        whole_pool ? std::vector<std::string>(pool.unlabeled().begin(), pool.unlabeled().end())
                   : deal::presample_subset(pool, cfg.subset_for(pool.size()), deal::derive_seed(seed, 0, 2));
    const auto scores = deal::score_candidates(cfg, net, params, pool, candidates, deal::derive_seed(seed, 0, 3));
    deal::write_scores(scores, out);
    std::cout << "scored " << scores.size() << " samples with " << deal::to_string(cfg.strategy) << " -> " << out
              << '\n';
    return 0;
}

int cmd_plot(const std::vector<std::string>& ledgers, const fs::path& out, std::optional<double> upper_bound)
{
    std::vector<deal::ALRunLedger> loaded;
    for (const std::string& path : ledgers)
        loaded.push_back(deal::read_ledger(path));
    const deal::ExperimentSummary summary = deal::aggregate(loaded, upper_bound);
    fs::create_directories(out);
    deal::render_growth_curve(summary, out / "growth.svg");
    std::ofstream table(out / "per_class_iou.md");
    table << deal::per_class_table(summary);
    for (const auto& pair : summary.pam_ablation)
        table << "\nPAM ablation (" << pair.strategy << "): with " << pair.with_pam << ", without "
              << pair.without_pam << '\n';
    std::cout << deal::per_class_table(summary);
    std::cout << "wrote " << (out / "growth.svg").string() << " and " << (out / "per_class_iou.md").string() << '\n';
    return 0;
}

}  // namespace

int main(int argc, char** argv)
{
#ifdef __GLIBC__
    // keep large activation buffers on the heap instead of fresh mmaps
    mallopt(M_MMAP_THRESHOLD, 256 << 20);
    mallopt(M_TRIM_THRESHOLD, 512 << 20);
#endif
    CLI::App app{"Difficulty-aware active learning for semantic segmentation"};
    app.require_subcommand(1);

    int n = 200, height = 64, width = 64;
    std::uint64_t gen_seed = 0;
    std::string prefix = "img";
    std::string gen_out;
    auto* gen = app.add_subcommand("gen-data", "Write a synthetic dataset (images/ and labels/ PNGs)");
    gen->add_option("--n", n, "Number of samples")->check(CLI::PositiveNumber);
    gen->add_option("--height", height, "Image height (>= 32)");
    gen->add_option("--width", width, "Image width (>= 32)");
    gen->add_option("--seed", gen_seed, "Generator seed");
    gen->add_option("--prefix", prefix, "Sample id prefix");
    gen->add_option("--out", gen_out, "Output directory")->required();

    std::string config_path, strategy, out;
    std::optional<std::uint64_t> run_seed;
    bool quiet = false;
    auto* run = app.add_subcommand("run", "Run active learning and write ledgers, scores and checkpoints");
    run->add_option("--config", config_path, "Flat key = value config file");
    run->add_option("--strategy", strategy, "Acquisition strategy (overrides the config)");
    run->add_option("--seed", run_seed, "Single run seed (overrides the config's seeds)");
    run->add_option("--out", out, "Output directory")->required();
    run->add_flag("--quiet", quiet, "No per-round progress");

    std::string score_config, score_strategy, checkpoint, score_out;
    std::uint64_t score_seed = 0;
    bool whole_pool = false;
    auto* score = app.add_subcommand("score", "Score the unlabeled pool with a saved checkpoint");
    score->add_option("--config", score_config, "Flat key = value config file");
    score->add_option("--strategy", score_strategy, "Acquisition strategy (overrides the config)");
    score->add_option("--seed", score_seed, "Split seed");
    score->add_option("--checkpoint", checkpoint, "Checkpoint JSON written by `run`")->required();
    score->add_option("--out", score_out, "Output TSV (id, strategy, score)")->required();
    score->add_flag("--all", whole_pool, "Score every unlabeled sample instead of a random subset");

    std::vector<std::string> ledgers;
    std::string plot_out;
    std::optional<double> upper_bound;
    auto* plot = app.add_subcommand("plot", "Aggregate ledgers into growth curves and a per-class table");
    plot->add_option("ledgers", ledgers, "ledger.jsonl files")->required();
    plot->add_option("--out", plot_out, "Output directory")->required();
    plot->add_option("--upper-bound", upper_bound, "Full-data mIoU drawn as a dashed line");

    CLI11_PARSE(app, argc, argv);
    try {
        if (*gen)
            return cmd_gen_data(n, height, width, gen_seed, prefix, gen_out);
        if (*run)
            return cmd_run(config_path, strategy, run_seed, out, quiet);
        if (*score)
            return cmd_score(score_config, score_strategy, score_seed, checkpoint, score_out, whole_pool);
        if (*plot)
            return cmd_plot(ledgers, plot_out, upper_bound);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
    return 0;
}
