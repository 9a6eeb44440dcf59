#pragma once

// Round loop of difficulty-aware active learning: train on the annotated
// set, evaluate, score a random subset of the unlabeled pool, annotate the
// top-m samples, repeat.

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "deal/acquisition.hpp"
#include "deal/config.hpp"
#include "deal/data_pool.hpp"
#include "deal/deal_model.hpp"

namespace deal {

enum class Strategy { random, entropy, lc, margin, ds, de, qbc_entropy, qbc_vr, coreset };

Strategy parse_strategy(const std::string& name);
std::string to_string(Strategy strategy);
const std::vector<std::string>& strategy_names();
/// Strategies whose scores need the difficulty branch.
bool uses_difficulty(Strategy strategy);

struct ALConfig {
    DatasetConfig data;
    ModelConfig model;
    TrainConfig train;
    Strategy strategy = Strategy::ds;
    int budget = -1;  // samples per round; negative derives it from data.budget_fraction
    int levels = 8;  // difficulty levels for DE
    UncertaintyKind uncertainty = UncertaintyKind::entropy;
    int mc_passes = 5;
    std::vector<std::uint64_t> seeds{0};

    // data source: dataset_root/{train,test}/{images,labels} or synthetic scenes
    std::string dataset_root;
    int synthetic_train = 200;
    int synthetic_test = 50;
    int image_height = 64;
    int image_width = 64;
    std::uint64_t data_seed = 2024;

    int budget_for(std::size_t pool_size) const;
    int subset_for(std::size_t pool_size) const;
    void validate() const;
};

/// Builds an ALConfig from flat keys; unknown keys are rejected.
ALConfig al_config_from(const KeyValueConfig& kv);
const std::set<std::string>& al_config_keys();

struct Dataset {
    std::vector<SegSample> train;
    std::vector<SegSample> test;
};

/// Loads the configured dataset (directory layout or synthetic scenes).
Dataset load_dataset(const ALConfig& cfg);

struct EvalResult {
    std::vector<double> class_iou;  // NaN where the class is absent from both GT and prediction
    double miou = 0;                // mean over classes present in the ground truth
    Eigen::Matrix<long, Eigen::Dynamic, Eigen::Dynamic> confusion;  // rows: GT, cols: prediction
};

/// Confusion-matrix IoU over a set of (prediction, ground truth) pairs.
EvalResult evaluate_predictions(const std::vector<LabelMap>& predictions, const std::vector<LabelMap>& truths,
                                int num_classes, int ignore_label);

/// Deterministic-mode predictions of `params` on `test`, scored by evaluate_predictions.
EvalResult evaluate(const DealNetwork<float>& net, const DealParams<float>& params,
                    const std::vector<SegSample>& test, int ignore_label);

/// Natural-log entropy of the pooled pixel-class frequencies.
double class_distribution_entropy(const std::vector<const LabelMap*>& labels, int num_classes, int ignore_label);

struct RoundRecord {
    int round = 0;
    int labeled_count = 0;
    double labeled_fraction = 0;
    std::vector<std::string> selected;
    std::vector<double> class_iou;
    double miou = 0;
    double class_entropy = 0;
    double train_loss = 0;
    double wall_seconds = 0;
    std::uint64_t seed = 0;
};

struct ALRunLedger {
    std::string strategy;
    std::uint64_t seed = 0;
    bool pam_enabled = true;
    int pool_size = 0;
    int initial_count = 0;
    int budget = 0;
    int num_classes = 0;
    std::string status = "running";  // complete | pool_exhausted
    std::vector<RoundRecord> rounds;
};

struct RunOptions {
    std::optional<std::filesystem::path> out_dir;  // ledger, per-round scores and checkpoints
    bool verbose = false;
    /// Called after every round with the pool as it enters the next round.
    std::function<void(const SamplePool&, const RoundRecord&)> on_round;
};

/// Runs cfg.data.rounds train/evaluate stages on `pool`; every stage but the
/// last is followed by selection and annotation of `budget` samples. Stops
/// early with status "pool_exhausted" when the budget exceeds the pool.
ALRunLedger run_active_learning(const ALConfig& cfg, SamplePool pool, const std::vector<SegSample>& test,
                                std::uint64_t seed, const RunOptions& options = {});

/// Scores `candidates` with a trained model (one AcquisitionScore per id).
std::vector<AcquisitionScore> score_candidates(const ALConfig& cfg, const DealNetwork<float>& net,
                                               const DealParams<float>& params, const SamplePool& pool,
                                               const std::vector<std::string>& candidates, std::uint64_t seed);

/// Selection for one round; core-set runs its own greedy instead of ranking.
std::vector<std::string> select_batch(const ALConfig& cfg, const DealNetwork<float>& net,
                                      const DealParams<float>& params, const SamplePool& pool,
                                      const std::vector<std::string>& candidates, int budget, std::uint64_t seed,
                                      std::vector<AcquisitionScore>* scores_out = nullptr);

/// Stable seed derivation for (run seed, round, purpose).
std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t round, std::uint64_t purpose);

// ledger and checkpoint files -----------------------------------------------

void write_ledger(const ALRunLedger& ledger, const std::filesystem::path& path);
ALRunLedger read_ledger(const std::filesystem::path& path);
void write_scores(const std::vector<AcquisitionScore>& scores, const std::filesystem::path& path);

void save_checkpoint(const DealParams<float>& params, const ModelConfig& model, int round, int labeled_count,
                     std::uint64_t seed, const std::filesystem::path& path);
DealParams<float> load_checkpoint(const std::filesystem::path& path, const ModelConfig& model);

}  // namespace deal
