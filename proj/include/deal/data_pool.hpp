#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <set>
#include <span>
#include <string>
#include <vector>

#include "deal/tensor.hpp"

namespace deal {

/// One image with its dense label map. `image` is 3 x (H*W) with values in [0, 1].
struct SegSample {
    std::string id;
    FeatureMap<float> image;
    LabelMap label;

    int height() const { return image.height; }
    int width() const { return image.width; }
};

/// Throws ShapeError / ConfigError when image and label disagree or a label is out of range.
void validate_sample(const SegSample& sample, int num_classes, int ignore_label);

struct DatasetConfig {
    int num_classes = 4;
    int ignore_label = 255;
    double initial_fraction = 0.1;
    double budget_fraction = 0.05;
    int rounds = 4;
    int subset_size = 0;  // 0 selects 4 x budget

    /// round(fraction * pool_size)
    int initial_count(std::size_t pool_size) const;
    int budget_count(std::size_t pool_size) const;
    int effective_subset_size(std::size_t pool_size) const;
    void validate(std::size_t pool_size) const;
};

/// Synthetic scene classes, ordered from easiest to hardest.
enum SyntheticClass : int {
    kBackground = 0,
    kBlob = 1,
    kThinLine = 2,
    kSmallSquare = 3,
};
inline constexpr int kSyntheticClasses = 4;

/// Procedural scenes: textured background, large blobs, 1-2 px lines and
/// squares of side <= 5 px. Per-image counts of the thin structures are
/// skewed so class frequencies are imbalanced. Deterministic in `seed`.
std::vector<SegSample> generate_synthetic_dataset(int n, int height, int width, std::uint64_t seed,
                                                  const std::string& id_prefix = "img");

/// Annotated / unlabeled partition over a shared sample store. Labels of
/// unlabeled ids are only released through oracle_annotate().
class SamplePool {
public:
    SamplePool() = default;
    /// Every sample starts unlabeled. Ids must be unique.
    explicit SamplePool(std::vector<SegSample> samples);

    const std::set<std::string>& annotated() const { return annotated_; }
    const std::set<std::string>& unlabeled() const { return unlabeled_; }
    std::size_t size() const { return store_ ? store_->size() : 0; }

    bool contains(const std::string& id) const;
    bool is_annotated(const std::string& id) const { return annotated_.count(id) != 0; }

    const FeatureMap<float>& image(const std::string& id) const;
    /// Throws InvalidQueryError unless `id` is annotated.
    const LabelMap& label(const std::string& id) const;
    /// Annotated sample with its label; throws InvalidQueryError otherwise.
    const SegSample& annotated_sample(const std::string& id) const;

    /// Checks annotated and unlabeled are disjoint and cover the store.
    bool partition_ok() const;

private:
    friend SamplePool oracle_annotate(SamplePool pool, std::span<const std::string> ids);
    friend SamplePool split_initial(std::vector<SegSample> samples, const DatasetConfig& cfg, std::uint64_t seed);

    const SegSample& lookup(const std::string& id) const;

    std::shared_ptr<const std::map<std::string, SegSample>> store_;
    std::set<std::string> annotated_;
    std::set<std::string> unlabeled_;
};

/// Random initial annotated set of round(initial_fraction * n) samples.
SamplePool split_initial(std::vector<SegSample> samples, const DatasetConfig& cfg, std::uint64_t seed);

/// Simulated annotator: moves `ids` from unlabeled to annotated.
SamplePool oracle_annotate(SamplePool pool, std::span<const std::string> ids);

/// Uniform subset of the unlabeled ids without replacement, returned in id
/// order; the whole pool when subset_size >= |unlabeled|.
std::vector<std::string> presample_subset(const SamplePool& pool, int subset_size, std::uint64_t seed);

/// Reads `<root>/images/*.png` (RGB) and `<root>/labels/*.png` (8-bit
/// indexed). Ids are file stems; every image needs a label of the same stem.
std::vector<SegSample> load_dataset_dir(const std::filesystem::path& root);
void save_dataset_dir(const std::vector<SegSample>& samples, const std::filesystem::path& root);

}  // namespace deal
