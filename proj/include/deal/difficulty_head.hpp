#pragma once

// Semantic-difficulty branch: probability attention over softmax maps
// followed by a per-pixel logistic classifier.

#include <algorithm>

#include "deal/resample.hpp"
#include "deal/tensor.hpp"

namespace deal {

/// Pixel-pairwise attention over a C x K probability matrix.
/// Row j of `attention` is the softmax over i of <P_i, P_j>, and
/// Q_j = gamma * sum_i A_ji P_i + P_j.
template <typename Scalar>
struct AttentionState {
    Scalar gamma = 0;
    MatrixX<Scalar> input;         // P, C x K
    RowMatrixX<Scalar> attention;  // A, K x K
    MatrixX<Scalar> context;       // P A^T, C x K
    MatrixX<Scalar> output;        // Q, C x K
};

inline constexpr Eigen::Index kPamBlock = 64;  // attention rows per tile

template <typename Scalar>
AttentionState<Scalar> pam_forward(const MatrixX<Scalar>& probs, Scalar gamma)
{
    require_finite(probs, "pam_forward");
    if (!std::isfinite(static_cast<double>(gamma)))
        throw NumericError("pam_forward: non-finite gamma");
    const Eigen::Index k = probs.cols();
    AttentionState<Scalar> s;
    s.gamma = gamma;
    s.input = probs;
    s.attention.resize(k, k);
    s.context.resize(probs.rows(), k);
    for (Eigen::Index j0 = 0; j0 < k; j0 += kPamBlock) {
        const Eigen::Index n = std::min(kPamBlock, k - j0);
        auto rows = s.attention.middleRows(j0, n);
        rows.noalias() = probs.middleCols(j0, n).transpose() * probs;
        for (Eigen::Index j = 0; j < n; ++j) {
            auto row = rows.row(j);
            const Scalar peak = row.maxCoeff();
            row = (row.array() - peak).exp();
            row /= row.sum();
        }
        s.context.middleCols(j0, n).noalias() = probs * rows.transpose();
    }
    s.output = probs;
    if (gamma != Scalar(0))
        s.output += gamma * s.context;
    return s;
}

template <typename Scalar>
struct PamGradient {
    MatrixX<Scalar> d_input;  // dL/dP
    Scalar d_gamma = 0;
};

/// Gradients of a scalar loss through pam_forward given dL/dQ.
template <typename Scalar>
PamGradient<Scalar> pam_backward(const AttentionState<Scalar>& s, const MatrixX<Scalar>& d_output)
{
    if (d_output.rows() != s.output.rows() || d_output.cols() != s.output.cols())
        throw ShapeError("pam_backward: gradient shape does not match Q");
    const MatrixX<Scalar>& p = s.input;
    const RowMatrixX<Scalar>& a = s.attention;
    PamGradient<Scalar> g;
    g.d_gamma = (d_output.array() * s.context.array()).sum();
    g.d_input = d_output;
    if (s.gamma == Scalar(0))
        return g;

    // S = gamma dQ.  dP += S A + P D + P D^T  with  D = A .* (S^T P - inner)
    const MatrixX<Scalar> scaled = s.gamma * d_output;
    const Eigen::Matrix<Scalar, 1, Eigen::Dynamic> inner = (scaled.array() * s.context.array()).colwise().sum();
    RowMatrixX<Scalar> d;
    for (Eigen::Index j0 = 0; j0 < p.cols(); j0 += kPamBlock) {
        const Eigen::Index n = std::min(kPamBlock, p.cols() - j0);
        const auto rows = a.middleRows(j0, n);
        d.noalias() = scaled.middleCols(j0, n).transpose() * p;
        d = rows.array() * (d.colwise() - inner.segment(j0, n).transpose()).array();
        g.d_input.noalias() += scaled.middleCols(j0, n) * rows;
        g.d_input.noalias() += p.middleCols(j0, n) * d;
        g.d_input.middleCols(j0, n).noalias() += p * d.transpose();
    }
    return g;
}

/// Area-resamples a probability map to (h, w) and renormalizes each pixel.
template <typename Scalar>
FeatureMap<Scalar> downsample_probs(const FeatureMap<Scalar>& probs, int h, int w)
{
    if (h > probs.height || w > probs.width || h < 1 || w < 1)
        throw ConfigError("downsample_probs: target must be within [1, source] in each dimension");
    if (h == probs.height && w == probs.width)
        return probs;
    FeatureMap<Scalar> out = AreaResampler<Scalar>(probs.height, probs.width, h, w).apply(probs);
    out.data.array().rowwise() /= out.data.colwise().sum().array();
    return out;
}

template <typename Scalar>
ProbabilityMap<Scalar> downsample_probs(const ProbabilityMap<Scalar>& probs, int h, int w)
{
    return ProbabilityMap<Scalar>(downsample_probs(probs.probs, h, w));
}

/// Backward of downsample_probs (resample + renormalize) given dL/d(output).
template <typename Scalar>
FeatureMap<Scalar> downsample_probs_backward(const FeatureMap<Scalar>& probs, int h, int w,
                                             const FeatureMap<Scalar>& d_out)
{
    if (h == probs.height && w == probs.width)
        return d_out;
    const AreaResampler<Scalar> resampler(probs.height, probs.width, h, w);
    const FeatureMap<Scalar> raw = resampler.apply(probs);
    const Eigen::Matrix<Scalar, 1, Eigen::Dynamic> sums = raw.data.colwise().sum();
    // y = x / s(x): dx = (dy - <dy, y>) / s
    const MatrixX<Scalar> y = raw.data.array().rowwise() / sums.array();
    const Eigen::Matrix<Scalar, 1, Eigen::Dynamic> inner = (d_out.data.array() * y.array()).colwise().sum();
    MatrixX<Scalar> d_raw = d_out.data.rowwise() - inner;
    d_raw.array().rowwise() /= sums.array();
    return resampler.adjoint(FeatureMap<Scalar>(h, w, std::move(d_raw)));
}

/// Learned per-pixel difficulty scores, each in (0, 1).
template <typename Scalar>
struct DifficultyMap {
    int height = 0;
    int width = 0;
    VectorX<Scalar> scores;  // flat, row-major pixel order

    Eigen::Index pixels() const { return scores.size(); }
};

/// 1x1 logistic classifier over C attended channels plus the attention gain.
template <typename Scalar>
struct HeadParams {
    VectorX<Scalar> weights;
    Scalar bias = 0;
    Scalar gamma = 0;

    static HeadParams zeros(int classes) { return {VectorX<Scalar>::Zero(classes), Scalar(0), Scalar(0)}; }
    static constexpr int extra = 2;  // bias, gamma

    int classes() const { return static_cast<int>(weights.size()); }
};

template <typename Scalar>
struct HeadTrace {
    AttentionState<Scalar> pam;  // pam.output == classifier input (== P when PAM is off)
    DifficultyMap<Scalar> difficulty;
    bool pam_enabled = true;
};

template <typename Scalar>
HeadTrace<Scalar> difficulty_forward_trace(const FeatureMap<Scalar>& probs, const HeadParams<Scalar>& head,
                                           bool pam_enabled = true)
{
    if (probs.channels() != head.classes())
        throw ConfigError("difficulty_forward: head expects " + std::to_string(head.classes()) +
                          " channels, got " + std::to_string(probs.channels()));
    HeadTrace<Scalar> t;
    t.pam_enabled = pam_enabled;
    if (pam_enabled) {
        t.pam = pam_forward<Scalar>(probs.data, head.gamma);
    } else {
        require_finite(probs.data, "difficulty_forward");
        t.pam.input = probs.data;
        t.pam.output = probs.data;
    }
    t.difficulty.height = probs.height;
    t.difficulty.width = probs.width;
    VectorX<Scalar> logits = (head.weights.transpose() * t.pam.output).transpose();
    t.difficulty.scores = (Scalar(1) / (Scalar(1) + (-(logits.array() + head.bias)).exp())).matrix();
    return t;
}

template <typename Scalar>
DifficultyMap<Scalar> difficulty_forward(const ProbabilityMap<Scalar>& probs, const HeadParams<Scalar>& head,
                                         bool pam_enabled = true)
{
    return difficulty_forward_trace(probs.probs, head, pam_enabled).difficulty;
}

template <typename Scalar>
struct HeadGradient {
    HeadParams<Scalar> params;
    MatrixX<Scalar> d_probs;  // C x K, dL/dP at the head's input resolution
};

/// Backward through sigmoid, 1x1 classifier and (optionally) PAM given dL/dM^d.
template <typename Scalar>
HeadGradient<Scalar> difficulty_backward(const HeadTrace<Scalar>& t, const HeadParams<Scalar>& head,
                                         const VectorX<Scalar>& d_scores)
{
    const VectorX<Scalar>& m = t.difficulty.scores;
    const VectorX<Scalar> d_logit = (d_scores.array() * m.array() * (Scalar(1) - m.array())).matrix();
    HeadGradient<Scalar> g;
    g.params = HeadParams<Scalar>::zeros(head.classes());
    g.params.weights = t.pam.output * d_logit;
    g.params.bias = d_logit.sum();
    const MatrixX<Scalar> d_q = head.weights * d_logit.transpose();
    if (t.pam_enabled) {
        PamGradient<Scalar> pg = pam_backward(t.pam, d_q);
        g.params.gamma = pg.d_gamma;
        g.d_probs = std::move(pg.d_input);
    } else {
        g.d_probs = d_q;
    }
    return g;
}

}  // namespace deal
