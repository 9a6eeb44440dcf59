#pragma once

#include <algorithm>

#include "deal/tensor.hpp"

namespace deal {

/// Row-stochastic 1-D area-averaging operator mapping `in` samples onto
/// `out <= in` cells. Entry (i, j) is the fraction of output cell i covered
/// by input sample j.
template <typename Scalar>
MatrixX<Scalar> area_weights(int in, int out)
{
    if (out < 1 || out > in)
        throw ConfigError("area_weights: target size must be in [1, source size]");
    MatrixX<Scalar> weights = MatrixX<Scalar>::Zero(out, in);
    const double step = static_cast<double>(in) / out;
    for (int i = 0; i < out; ++i) {
        const double lo = i * step;
        const double hi = (i + 1) * step;
        for (int j = static_cast<int>(lo); j < in && j < hi; ++j) {
            const double overlap = std::min<double>(hi, j + 1) - std::max<double>(lo, j);
            if (overlap > 0)
                weights(i, j) = static_cast<Scalar>(overlap / step);
        }
    }
    return weights;
}

/// Separable area resampling of H x W planes to h x w: out = Ry * X * Rx^T.
template <typename Scalar>
class AreaResampler {
public:
    AreaResampler(int src_h, int src_w, int dst_h, int dst_w)
        : src_h_(src_h), src_w_(src_w), dst_h_(dst_h), dst_w_(dst_w),
          rows_(area_weights<Scalar>(src_h, dst_h)), cols_(area_weights<Scalar>(src_w, dst_w))
    {
    }

    int src_height() const { return src_h_; }
    int src_width() const { return src_w_; }
    int dst_height() const { return dst_h_; }
    int dst_width() const { return dst_w_; }
    bool identity() const { return src_h_ == dst_h_ && src_w_ == dst_w_; }

    RowMatrixX<Scalar> apply(const RowMatrixX<Scalar>& plane) const
    {
        if (identity())
            return plane;
        return rows_ * plane * cols_.transpose();
    }

    /// Adjoint of apply(); used to pull gradients back to the source grid.
    RowMatrixX<Scalar> adjoint(const RowMatrixX<Scalar>& grad) const
    {
        if (identity())
            return grad;
        return rows_.transpose() * grad * cols_;
    }

    FeatureMap<Scalar> apply(const FeatureMap<Scalar>& map) const
    {
        check(map.height, map.width, src_h_, src_w_);
        FeatureMap<Scalar> out(map.channels(), dst_h_, dst_w_);
        for (int c = 0; c < map.channels(); ++c)
            out.set_plane(c, apply(map.plane(c)));
        return out;
    }

    FeatureMap<Scalar> adjoint(const FeatureMap<Scalar>& grad) const
    {
        check(grad.height, grad.width, dst_h_, dst_w_);
        FeatureMap<Scalar> out(grad.channels(), src_h_, src_w_);
        for (int c = 0; c < grad.channels(); ++c)
            out.set_plane(c, adjoint(grad.plane(c)));
        return out;
    }

private:
    static void check(int h, int w, int eh, int ew)
    {
        if (h != eh || w != ew)
            throw ShapeError("AreaResampler: input grid does not match operator");
    }

    int src_h_, src_w_, dst_h_, dst_w_;
    MatrixX<Scalar> rows_;
    MatrixX<Scalar> cols_;
};

}  // namespace deal
