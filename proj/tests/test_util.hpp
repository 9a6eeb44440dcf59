#pragma once

#include <algorithm>
#include <cmath>
#include <random>

#include "deal/tensor.hpp"

namespace testutil {

/// Random column-stochastic C x K matrix, strictly positive.
inline Eigen::MatrixXd random_probs(int c, int k, std::mt19937_64& rng)
{
    std::uniform_real_distribution<double> u(-2.0, 2.0);
    Eigen::MatrixXd m(c, k);
    for (Eigen::Index i = 0; i < m.size(); ++i)
        m.data()[i] = u(rng);
    deal::softmax_columns(m);
    return m;
}

inline deal::FeatureMap<double> random_prob_map(int c, int h, int w, std::mt19937_64& rng)
{
    return deal::FeatureMap<double>(h, w, random_probs(c, h * w, rng));
}

inline deal::LabelMap random_labels(int h, int w, int classes, std::mt19937_64& rng, double ignore_rate = 0.0,
                                    int ignore_label = 255)
{
    std::uniform_int_distribution<int> pick(0, classes - 1);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    deal::LabelMap out(h, w);
    for (Eigen::Index i = 0; i < out.size(); ++i)
        out.data()[i] = u(rng) < ignore_rate ? ignore_label : pick(rng);
    return out;
}

inline double rel_error(double a, double b)
{
    return std::abs(a - b) / std::max({1e-8, std::abs(a), std::abs(b)});
}

}  // namespace testutil
