#include "deal/acquisition.hpp"

#include <iostream>
#include <limits>

namespace deal {

UncertaintyKind parse_uncertainty(const std::string& name)
{
    if (name == "entropy")
        return UncertaintyKind::entropy;
    if (name == "lc")
        return UncertaintyKind::least_confidence;
    if (name == "margin")
        return UncertaintyKind::margin;
    throw ConfigError("unknown uncertainty map '" + name + "' (expected entropy, lc or margin)");
}

std::string to_string(UncertaintyKind kind)
{
    switch (kind) {
    case UncertaintyKind::entropy:
        return "entropy";
    case UncertaintyKind::least_confidence:
        return "lc";
    case UncertaintyKind::margin:
        return "margin";
    }
    return "?";
}

UncertaintyMap downsample_uncertainty(const UncertaintyMap& map, int h, int w)
{
    if (h == map.height && w == map.width)
        return map;
    const AreaResampler<double> resampler(map.height, map.width, h, w);
    const RowMatrixX<double> plane = Eigen::Map<const RowMatrixX<double>>(map.scores.data(), map.height, map.width);
    const RowMatrixX<double> small = resampler.apply(plane);
    return {h, w, Eigen::Map<const Eigen::VectorXd>(small.data(), small.size())};
}

double mean_score(const UncertaintyMap& map, const LabelMap* valid)
{
    double total = 0.0;
    Eigen::Index count = 0;
    for (Eigen::Index k = 0; k < map.pixels(); ++k) {
        if (valid && valid->data()[k] == 0)
            continue;
        total += map.scores[k];
        ++count;
    }
    if (count == 0)
        throw UndefinedValueError("mean_score: no valid pixels");
    return total / double(count);
}

int difficulty_level(double score, int levels)
{
    const double clamped = std::clamp(score, 0.0, 1.0);
    return std::min(static_cast<int>(std::floor(clamped * levels)) + 1, levels);
}

double score_de(const DifficultyHistogram& hist)
{
    if (hist.total <= 0)
        throw UndefinedValueError("score_de: empty histogram");
    double h = 0.0;
    for (long count : hist.counts) {
        if (count == 0)
            continue;
        const double p = double(count) / double(hist.total);
        h -= p * std::log(p);
    }
    return std::max(0.0, h);
}

std::vector<std::string> select_coreset(const std::vector<Eigen::VectorXd>& labeled,
                                        const std::vector<FeaturePoint>& unlabeled, int m)
{
    if (m < 0)
        throw ConfigError("select_coreset: m must be non-negative");
    if (static_cast<size_t>(m) > unlabeled.size())
        throw ConfigError("select_coreset: m exceeds the number of unlabeled points");
    const Eigen::Index dim = unlabeled.empty() ? 0 : unlabeled.front().features.size();
    for (const auto& p : unlabeled)
        if (p.features.size() != dim)
            throw ShapeError("select_coreset: feature lengths differ");
    for (const auto& f : labeled)
        if (f.size() != dim)
            throw ShapeError("select_coreset: feature lengths differ");

    // Work in id order so results do not depend on input ordering.
    std::vector<size_t> order(unlabeled.size());
    for (size_t i = 0; i < order.size(); ++i)
        order[i] = i;
    std::sort(order.begin(), order.end(), [&](size_t a, size_t b) { return unlabeled[a].id < unlabeled[b].id; });

    std::vector<double> nearest(order.size(), std::numeric_limits<double>::infinity());
    std::vector<bool> taken(order.size(), false);
    std::vector<std::string> picked;
    picked.reserve(static_cast<size_t>(m));

    const auto take = [&](size_t slot) {
        taken[slot] = true;
        picked.push_back(unlabeled[order[slot]].id);
        const Eigen::VectorXd& center = unlabeled[order[slot]].features;
        for (size_t j = 0; j < order.size(); ++j)
            nearest[j] = std::min(nearest[j], (unlabeled[order[j]].features - center).norm());
    };

    for (size_t j = 0; j < order.size(); ++j)
        for (const auto& f : labeled)
            nearest[j] = std::min(nearest[j], (unlabeled[order[j]].features - f).norm());

    if (labeled.empty() && m > 0) {
        size_t best_a = 0, best_b = 0;
        double best = -1.0;
        for (size_t a = 0; a < order.size(); ++a)
            for (size_t b = a + 1; b < order.size(); ++b) {
                const double d = (unlabeled[order[a]].features - unlabeled[order[b]].features).norm();
                if (d > best) {
                    best = d;
                    best_a = a;
                    best_b = b;
                }
            }
        take(best_a);
        if (m > 1 && best_b != best_a)
            take(best_b);
    }

    while (static_cast<int>(picked.size()) < m) {
        size_t best = order.size();
        for (size_t j = 0; j < order.size(); ++j) {
            if (taken[j])
                continue;
            if (best == order.size() || nearest[j] > nearest[best])
                best = j;
        }
        take(best);
    }
    return picked;
}

std::vector<std::string> rank_and_select(const std::vector<AcquisitionScore>& scores, int m)
{
    if (m < 0)
        throw ConfigError("rank_and_select: m must be non-negative");
    for (const auto& s : scores) {
        if (s.strategy != scores.front().strategy)
            throw ConfigError("rank_and_select: scores from different strategies are not comparable");
        if (!std::isfinite(s.score))
            throw NumericError("rank_and_select: non-finite score for " + s.id);
    }
    if (static_cast<size_t>(m) > scores.size()) {
        std::cerr << "warning: budget " << m << " exceeds " << scores.size() << " candidates; selecting all\n";
        m = static_cast<int>(scores.size());
    }
    std::vector<const AcquisitionScore*> ranked;
    ranked.reserve(scores.size());
    for (const auto& s : scores)
        ranked.push_back(&s);
    std::sort(ranked.begin(), ranked.end(), [](const AcquisitionScore* a, const AcquisitionScore* b) {
        if (a->score != b->score)
            return a->score > b->score;
        return a->id < b->id;
    });
    std::vector<std::string> out;
    out.reserve(static_cast<size_t>(m));
    for (int i = 0; i < m; ++i)
        out.push_back(ranked[static_cast<size_t>(i)]->id);
    return out;
}

}  // namespace deal
