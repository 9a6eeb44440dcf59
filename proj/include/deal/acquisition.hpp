#pragma once

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "deal/difficulty_head.hpp"
#include "deal/resample.hpp"
#include "deal/tensor.hpp"

namespace deal {

/// Per-pixel uncertainty M^c >= 0, flat row-major.
struct UncertaintyMap {
    int height = 0;
    int width = 0;
    Eigen::VectorXd scores;

    Eigen::Index pixels() const { return scores.size(); }
};

/// Natural-log Shannon entropy of each pixel's class distribution (0 log 0 = 0).
template <typename Scalar>
UncertaintyMap entropy_map(const FeatureMap<Scalar>& probs)
{
    UncertaintyMap out{probs.height, probs.width, Eigen::VectorXd::Zero(probs.pixels())};
    for (Eigen::Index k = 0; k < probs.pixels(); ++k) {
        double h = 0.0;
        for (int c = 0; c < probs.channels(); ++c) {
            const double p = probs.data(c, k);
            if (p > 0.0)
                h -= p * std::log(p);
        }
        out.scores[k] = std::max(0.0, h);
    }
    return out;
}

/// Least confidence: 1 - max_c p_c.
template <typename Scalar>
UncertaintyMap lc_map(const FeatureMap<Scalar>& probs)
{
    UncertaintyMap out{probs.height, probs.width, Eigen::VectorXd::Zero(probs.pixels())};
    for (Eigen::Index k = 0; k < probs.pixels(); ++k)
        out.scores[k] = 1.0 - double(probs.data.col(k).maxCoeff());
    return out;
}

/// Margin: 1 - (p_(1) - p_(2)) over the two largest class probabilities.
template <typename Scalar>
UncertaintyMap margin_map(const FeatureMap<Scalar>& probs)
{
    if (probs.channels() < 2)
        throw ConfigError("margin_map: needs at least 2 classes");
    UncertaintyMap out{probs.height, probs.width, Eigen::VectorXd::Zero(probs.pixels())};
    for (Eigen::Index k = 0; k < probs.pixels(); ++k) {
        double first = -1.0, second = -1.0;
        for (int c = 0; c < probs.channels(); ++c) {
            const double p = probs.data(c, k);
            if (p > first) {
                second = first;
                first = p;
            } else if (p > second) {
                second = p;
            }
        }
        out.scores[k] = 1.0 - (first - second);
    }
    return out;
}

enum class UncertaintyKind { entropy, least_confidence, margin };

UncertaintyKind parse_uncertainty(const std::string& name);
std::string to_string(UncertaintyKind kind);

template <typename Scalar>
UncertaintyMap uncertainty_map(const FeatureMap<Scalar>& probs, UncertaintyKind kind)
{
    switch (kind) {
    case UncertaintyKind::entropy:
        return entropy_map(probs);
    case UncertaintyKind::least_confidence:
        return lc_map(probs);
    case UncertaintyKind::margin:
        return margin_map(probs);
    }
    throw ConfigError("unknown uncertainty kind");
}

/// Area-averages an uncertainty map onto an (h, w) grid.
UncertaintyMap downsample_uncertainty(const UncertaintyMap& map, int h, int w);

/// Mean of the pixel scores, restricted to `valid` pixels when given.
double mean_score(const UncertaintyMap& map, const LabelMap* valid = nullptr);

/// S_DS = (1/K) sum_k M^c_k * M^d_k over valid pixels (all pixels when `valid` is null).
template <typename Scalar>
double score_ds(const UncertaintyMap& uncertainty, const DifficultyMap<Scalar>& difficulty,
                const LabelMap* valid = nullptr)
{
    if (uncertainty.height != difficulty.height || uncertainty.width != difficulty.width ||
        uncertainty.pixels() != difficulty.pixels())
        throw ShapeError("score_ds: uncertainty and difficulty maps differ in size");
    if (valid && valid->size() != uncertainty.pixels())
        throw ShapeError("score_ds: validity mask differs in size");
    double total = 0.0;
    Eigen::Index count = 0;
    for (Eigen::Index k = 0; k < uncertainty.pixels(); ++k) {
        if (valid && valid->data()[k] == 0)
            continue;
        total += uncertainty.scores[k] * double(difficulty.scores[k]);
        ++count;
    }
    if (count == 0)
        throw UndefinedValueError("score_ds: no valid pixels");
    return total / double(count);
}

/// Pixel counts per difficulty level (level l covers [(l-1)/L, l/L), last level closed).
struct DifficultyHistogram {
    std::vector<long> counts;
    long total = 0;

    int levels() const { return static_cast<int>(counts.size()); }
};

/// 1-based level of a score: min(floor(score * L) + 1, L).
int difficulty_level(double score, int levels);

template <typename Scalar>
DifficultyHistogram quantize_difficulty(const DifficultyMap<Scalar>& difficulty, int levels)
{
    if (levels < 2)
        throw ConfigError("quantize_difficulty: need at least 2 levels");
    DifficultyHistogram hist{std::vector<long>(static_cast<size_t>(levels), 0), 0};
    for (Eigen::Index k = 0; k < difficulty.pixels(); ++k) {
        ++hist.counts[static_cast<size_t>(difficulty_level(double(difficulty.scores[k]), levels) - 1)];
        ++hist.total;
    }
    return hist;
}

/// S_DE = -sum_l (K_l/K) log(K_l/K), empty levels contribute 0.
double score_de(const DifficultyHistogram& hist);

enum class QbcMode { max_entropy, variation_ratio };

/// Committee disagreement over MC-dropout passes.
/// max_entropy: mean pixel entropy of the averaged distribution.
/// variation_ratio: mean over pixels of 1 - modal vote count / passes.
template <typename Scalar>
double score_qbc(const std::vector<ProbabilityMap<Scalar>>& passes, QbcMode mode)
{
    if (passes.size() < 2)
        throw ConfigError("score_qbc: need at least 2 passes");
    const FeatureMap<Scalar>& first = passes.front().probs;
    for (const auto& p : passes)
        if (p.probs.height != first.height || p.probs.width != first.width ||
            p.probs.channels() != first.channels())
            throw ShapeError("score_qbc: committee members differ in shape");
    const Eigen::Index pixels = first.pixels();
    if (pixels == 0)
        throw UndefinedValueError("score_qbc: empty map");
    if (mode == QbcMode::max_entropy) {
        FeatureMap<double> mean(first.channels(), first.height, first.width);
        for (const auto& p : passes)
            mean.data += p.probs.data.template cast<double>();
        mean.data /= double(passes.size());
        return mean_score(entropy_map(mean));
    }
    double total = 0.0;
    std::vector<int> votes(static_cast<size_t>(first.channels()));
    for (Eigen::Index k = 0; k < pixels; ++k) {
        std::fill(votes.begin(), votes.end(), 0);
        for (const auto& p : passes)
            ++votes[static_cast<size_t>(p.argmax.data()[k])];
        const int modal = *std::max_element(votes.begin(), votes.end());
        total += 1.0 - double(modal) / double(passes.size());
    }
    return total / double(pixels);
}

/// Feature vector of one sample, as consumed by the core-set selector.
struct FeaturePoint {
    std::string id;
    Eigen::VectorXd features;
};

/// k-Center-Greedy: m times, pick the unlabeled point whose distance to its
/// nearest labeled-or-selected point is largest (ties: smallest id). With no
/// labeled points the farthest unlabeled pair seeds the selection.
std::vector<std::string> select_coreset(const std::vector<Eigen::VectorXd>& labeled,
                                        const std::vector<FeaturePoint>& unlabeled, int m);

struct AcquisitionScore {
    std::string id;
    double score = 0;
    std::string strategy;
};

/// Top-m ids by descending score, ties by ascending id. m > |scores| selects
/// all and warns on stderr.
std::vector<std::string> rank_and_select(const std::vector<AcquisitionScore>& scores, int m);

}  // namespace deal
