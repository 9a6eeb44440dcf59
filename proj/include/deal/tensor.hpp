#pragma once

#include <Eigen/Core>

#include <cmath>
#include <string>

#include "deal/errors.hpp"

namespace deal {

template <typename Scalar>
using MatrixX = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
template <typename Scalar>
using VectorX = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;
template <typename Scalar>
using RowMatrixX = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

/// H x W integer map (labels, predictions, binary masks). Row-major so that
/// the flat index of pixel (y, x) is y * W + x, matching FeatureMap columns.
using LabelMap = Eigen::Matrix<int, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

/// Multi-channel spatial map stored as channels x (height * width).
/// Column k holds the channel vector of pixel k = y * width + x.
template <typename Scalar>
struct FeatureMap {
    int height = 0;
    int width = 0;
    MatrixX<Scalar> data;

    FeatureMap() = default;
    FeatureMap(int channels, int h, int w) : height(h), width(w), data(MatrixX<Scalar>::Zero(channels, Eigen::Index(h) * w)) {}
    FeatureMap(int h, int w, MatrixX<Scalar> values) : height(h), width(w), data(std::move(values))
    {
        if (data.cols() != Eigen::Index(h) * w)
            throw ShapeError("feature map: column count does not match height*width");
    }

    int channels() const { return static_cast<int>(data.rows()); }
    Eigen::Index pixels() const { return data.cols(); }

    /// One channel as an H x W matrix (copy).
    RowMatrixX<Scalar> plane(int c) const
    {
        RowMatrixX<Scalar> out(height, width);
        for (Eigen::Index k = 0; k < pixels(); ++k)
            out.data()[k] = data(c, k);
        return out;
    }

    void set_plane(int c, const RowMatrixX<Scalar>& values)
    {
        for (Eigen::Index k = 0; k < pixels(); ++k)
            data(c, k) = values.data()[k];
    }

    template <typename Other>
    FeatureMap<Other> cast() const
    {
        return FeatureMap<Other>(height, width, data.template cast<Other>());
    }
};

/// Per-pixel argmax over channels; ties resolve to the lowest channel index.
template <typename Scalar>
LabelMap argmax_channels(const FeatureMap<Scalar>& map)
{
    LabelMap out(map.height, map.width);
    for (Eigen::Index k = 0; k < map.pixels(); ++k) {
        Eigen::Index best = 0;
        map.data.col(k).maxCoeff(&best);
        out.data()[k] = static_cast<int>(best);
    }
    return out;
}

/// Segmentation-branch softmax output together with its argmax.
template <typename Scalar>
struct ProbabilityMap {
    FeatureMap<Scalar> probs;
    LabelMap argmax;

    ProbabilityMap() = default;
    explicit ProbabilityMap(FeatureMap<Scalar> p) : probs(std::move(p)), argmax(argmax_channels(probs)) {}

    int classes() const { return probs.channels(); }
    int height() const { return probs.height; }
    int width() const { return probs.width; }
};

/// Column-wise softmax over channels, in place.
template <typename Scalar>
void softmax_columns(MatrixX<Scalar>& logits)
{
    for (Eigen::Index k = 0; k < logits.cols(); ++k) {
        auto col = logits.col(k);
        const Scalar peak = col.maxCoeff();
        col = (col.array() - peak).exp();
        col /= col.sum();
    }
}

/// Throws NumericError when any entry is NaN or infinite.
template <typename Derived>
void require_finite(const Eigen::DenseBase<Derived>& values, const std::string& what)
{
    if (!values.allFinite())
        throw NumericError(what + ": non-finite value");
}

}  // namespace deal
