#pragma once

#include <algorithm>
#include <cmath>

#include "deal/difficulty_head.hpp"
#include "deal/resample.hpp"
#include "deal/tensor.hpp"

namespace deal {

inline constexpr double kDefaultLogClamp = 1e-7;

/// Binary map of misclassified pixels; `valid` marks non-ignore pixels and
/// `mask` is zero wherever `valid` is zero.
struct ErrorMask {
    LabelMap mask;
    LabelMap valid;

    int height() const { return static_cast<int>(mask.rows()); }
    int width() const { return static_cast<int>(mask.cols()); }
    Eigen::Index valid_count() const { return valid.count(); }
};

inline LabelMap valid_pixels(const LabelMap& labels, int ignore_label)
{
    return (labels.array() != ignore_label).cast<int>();
}

inline ErrorMask compute_error_mask(const LabelMap& predicted, const LabelMap& truth, int ignore_label)
{
    if (predicted.rows() != truth.rows() || predicted.cols() != truth.cols())
        throw ShapeError("compute_error_mask: prediction and ground truth differ in size");
    ErrorMask out;
    out.valid = valid_pixels(truth, ignore_label);
    out.mask = ((predicted.array() != truth.array()).cast<int>() * out.valid.array()).matrix();
    return out;
}

/// Majority-vote downsampling of an error mask onto an (h, w) grid. A cell is
/// valid when at least half its area is valid, and erroneous when errors
/// cover at least half of its valid area.
inline ErrorMask downsample_error_mask(const ErrorMask& full, int h, int w)
{
    if (h == full.height() && w == full.width())
        return full;
    const AreaResampler<double> resampler(full.height(), full.width(), h, w);
    const RowMatrixX<double> valid_frac = resampler.apply(RowMatrixX<double>(full.valid.cast<double>()));
    const RowMatrixX<double> error_frac = resampler.apply(RowMatrixX<double>(full.mask.cast<double>()));
    ErrorMask out;
    out.valid = (valid_frac.array() >= 0.5).cast<int>();
    out.mask = ((error_frac.array() >= 0.5 * valid_frac.array()) && (error_frac.array() > 0.0) &&
                (out.valid.array() == 1))
                   .cast<int>();
    return out;
}

/// Half squared L2 norm scaled by the decay: gradient is weight_decay * theta.
template <typename Scalar>
Scalar l2_regularizer(const VectorX<Scalar>& theta, double weight_decay)
{
    return static_cast<Scalar>(0.5 * weight_decay) * theta.squaredNorm();
}

/// Mean pixel cross-entropy over non-ignore pixels plus the L2 term.
template <typename Scalar>
Scalar seg_loss(const FeatureMap<Scalar>& probs, const LabelMap& truth, int ignore_label, double weight_decay = 0.0,
                const VectorX<Scalar>* theta = nullptr, double clamp = kDefaultLogClamp)
{
    if (probs.height != truth.rows() || probs.width != truth.cols())
        throw ShapeError("seg_loss: probability map and labels differ in size");
    double total = 0.0;
    Eigen::Index count = 0;
    for (Eigen::Index k = 0; k < probs.pixels(); ++k) {
        const int label = truth.data()[k];
        if (label == ignore_label)
            continue;
        if (label < 0 || label >= probs.channels())
            throw ShapeError("seg_loss: label outside class range");
        total -= std::log(std::max<double>(probs.data(label, k), clamp));
        ++count;
    }
    if (count == 0)
        throw UndefinedValueError("seg_loss: every pixel is ignored");
    Scalar loss = static_cast<Scalar>(total / double(count));
    if (theta != nullptr)
        loss += l2_regularizer(*theta, weight_decay);
    return loss;
}

template <typename Scalar>
Scalar seg_loss(const ProbabilityMap<Scalar>& probs, const LabelMap& truth, int ignore_label,
                double weight_decay = 0.0, const VectorX<Scalar>* theta = nullptr)
{
    return seg_loss(probs.probs, truth, ignore_label, weight_decay, theta);
}

/// d(mean CE)/d(logits) = (softmax - onehot) / K_valid on valid pixels.
template <typename Scalar>
MatrixX<Scalar> seg_loss_grad_logits(const FeatureMap<Scalar>& probs, const LabelMap& truth, int ignore_label)
{
    MatrixX<Scalar> grad = MatrixX<Scalar>::Zero(probs.channels(), probs.pixels());
    Eigen::Index count = 0;
    for (Eigen::Index k = 0; k < probs.pixels(); ++k) {
        const int label = truth.data()[k];
        if (label == ignore_label)
            continue;
        grad.col(k) = probs.data.col(k);
        grad(label, k) -= Scalar(1);
        ++count;
    }
    if (count == 0)
        throw UndefinedValueError("seg_loss: every pixel is ignored");
    return grad / static_cast<Scalar>(count);
}

template <typename Scalar>
struct DifLoss {
    Scalar value = 0;
    double lambda1 = 0;  // share of correct pixels, weights the error term
    double lambda2 = 0;  // 1 - lambda1
};

/// Inverted-weighted binary cross-entropy between difficulty scores and an
/// error mask, averaged over valid pixels.
template <typename Scalar>
DifLoss<Scalar> dif_loss(const DifficultyMap<Scalar>& difficulty, const ErrorMask& errors,
                         double clamp = kDefaultLogClamp)
{
    if (difficulty.height != errors.height() || difficulty.width != errors.width() ||
        difficulty.pixels() != errors.mask.size())
        throw ShapeError("dif_loss: difficulty map and error mask differ in size");
    const Eigen::Index valid = errors.valid_count();
    if (valid == 0)
        throw UndefinedValueError("dif_loss: every pixel is ignored");
    Eigen::Index correct = 0;
    for (Eigen::Index k = 0; k < errors.mask.size(); ++k)
        if (errors.valid.data()[k] != 0 && errors.mask.data()[k] == 0)
            ++correct;
    DifLoss<Scalar> out;
    out.lambda1 = double(correct) / double(valid);
    out.lambda2 = 1.0 - out.lambda1;
    double total = 0.0;
    for (Eigen::Index k = 0; k < errors.mask.size(); ++k) {
        if (errors.valid.data()[k] == 0)
            continue;
        const double m = std::clamp<double>(difficulty.scores[k], clamp, 1.0 - clamp);
        if (errors.mask.data()[k] != 0)
            total += out.lambda1 * std::log(m);
        else
            total += out.lambda2 * std::log(1.0 - m);
    }
    out.value = static_cast<Scalar>(-total / double(valid));
    return out;
}

/// dL_dif / dM^d with the weights held fixed; zero where the clamp is active.
template <typename Scalar>
VectorX<Scalar> dif_loss_grad(const DifficultyMap<Scalar>& difficulty, const ErrorMask& errors, const DifLoss<Scalar>& loss,
                              double clamp = kDefaultLogClamp)
{
    const double valid = double(errors.valid_count());
    VectorX<Scalar> grad = VectorX<Scalar>::Zero(difficulty.pixels());
    for (Eigen::Index k = 0; k < grad.size(); ++k) {
        if (errors.valid.data()[k] == 0)
            continue;
        const double m = difficulty.scores[k];
        if (m < clamp || m > 1.0 - clamp)
            continue;
        const double g = errors.mask.data()[k] != 0 ? -loss.lambda1 / m : loss.lambda2 / (1.0 - m);
        grad[k] = static_cast<Scalar>(g / valid);
    }
    return grad;
}

template <typename Scalar>
Scalar total_loss(Scalar seg, Scalar dif, Scalar alpha = Scalar(1))
{
    return seg + alpha * dif;
}

/// Everything one training step reports about the objective.
template <typename Scalar>
struct LossBundle {
    Scalar seg_loss = 0;
    Scalar dif_loss = 0;
    Scalar total = 0;
    Scalar alpha = 1;
    double lambda1 = 0;
    double lambda2 = 0;
};

}  // namespace deal
