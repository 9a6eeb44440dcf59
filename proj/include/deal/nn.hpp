#pragma once

// Dense building blocks for the segmentation network. Activations are
// channels x pixels matrices (see FeatureMap); every op has a matching
// backward that maps an output gradient to an input gradient.

#include <algorithm>
#include <random>
#include <vector>

#include "deal/tensor.hpp"

namespace deal::nn {

/// Patch matrix for a k x k "same" convolution (k odd, zero padded).
/// Row (o * Cin + c) holds channel c sampled at kernel offset o.
template <typename Scalar>
MatrixX<Scalar> im2col(const MatrixX<Scalar>& in, int height, int width, int k)
{
    const Eigen::Index cin = in.rows();
    const int half = k / 2;
    MatrixX<Scalar> cols = MatrixX<Scalar>::Zero(cin * k * k, in.cols());
    int o = 0;
    for (int dy = -half; dy <= half; ++dy) {
        for (int dx = -half; dx <= half; ++dx, ++o) {
            const int x_lo = std::max(0, -dx);
            const int x_hi = std::min(width, width - dx);
            for (int y = std::max(0, -dy); y < std::min(height, height - dy); ++y) {
                const Eigen::Index dst = Eigen::Index(y) * width + x_lo;
                const Eigen::Index src = Eigen::Index(y + dy) * width + x_lo + dx;
                cols.block(o * cin, dst, cin, x_hi - x_lo) = in.middleCols(src, x_hi - x_lo);
            }
        }
    }
    return cols;
}

/// Adjoint of im2col: scatters patch gradients back onto the input grid.
template <typename Scalar>
MatrixX<Scalar> col2im(const MatrixX<Scalar>& cols, Eigen::Index cin, int height, int width, int k)
{
    const int half = k / 2;
    MatrixX<Scalar> out = MatrixX<Scalar>::Zero(cin, Eigen::Index(height) * width);
    int o = 0;
    for (int dy = -half; dy <= half; ++dy) {
        for (int dx = -half; dx <= half; ++dx, ++o) {
            const int x_lo = std::max(0, -dx);
            const int x_hi = std::min(width, width - dx);
            for (int y = std::max(0, -dy); y < std::min(height, height - dy); ++y) {
                const Eigen::Index dst = Eigen::Index(y) * width + x_lo;
                const Eigen::Index src = Eigen::Index(y + dy) * width + x_lo + dx;
                out.middleCols(src, x_hi - x_lo) += cols.block(o * cin, dst, cin, x_hi - x_lo);
            }
        }
    }
    return out;
}

/// 2x2 max pooling, stride 2. `argmax` records the winning source pixel.
template <typename Scalar>
MatrixX<Scalar> maxpool2(const MatrixX<Scalar>& in, int height, int width, std::vector<Eigen::Index>& argmax)
{
    const int oh = height / 2;
    const int ow = width / 2;
    const Eigen::Index channels = in.rows();
    MatrixX<Scalar> out(channels, Eigen::Index(oh) * ow);
    argmax.assign(static_cast<size_t>(out.size()), 0);
    for (int y = 0; y < oh; ++y) {
        for (int x = 0; x < ow; ++x) {
            const Eigen::Index dst = Eigen::Index(y) * ow + x;
            const Eigen::Index base = Eigen::Index(2 * y) * width + 2 * x;
            const Eigen::Index cand[4] = {base, base + 1, base + width, base + width + 1};
            for (Eigen::Index c = 0; c < channels; ++c) {
                Eigen::Index best = cand[0];
                for (int i = 1; i < 4; ++i)
                    if (in(c, cand[i]) > in(c, best))
                        best = cand[i];
                out(c, dst) = in(c, best);
                argmax[static_cast<size_t>(dst * channels + c)] = best;
            }
        }
    }
    return out;
}

template <typename Scalar>
MatrixX<Scalar> maxpool2_backward(const MatrixX<Scalar>& grad, const std::vector<Eigen::Index>& argmax,
                                  Eigen::Index src_pixels)
{
    MatrixX<Scalar> out = MatrixX<Scalar>::Zero(grad.rows(), src_pixels);
    for (Eigen::Index p = 0; p < grad.cols(); ++p)
        for (Eigen::Index c = 0; c < grad.rows(); ++c)
            out(c, argmax[static_cast<size_t>(p * grad.rows() + c)]) += grad(c, p);
    return out;
}

/// Nearest-neighbour 2x upsampling from (height, width) to (2h, 2w).
template <typename Scalar>
MatrixX<Scalar> upsample2(const MatrixX<Scalar>& in, int height, int width)
{
    const int ow = 2 * width;
    MatrixX<Scalar> out(in.rows(), Eigen::Index(4) * height * width);
    for (int y = 0; y < 2 * height; ++y)
        for (int x = 0; x < ow; ++x)
            out.col(Eigen::Index(y) * ow + x) = in.col(Eigen::Index(y / 2) * width + x / 2);
    return out;
}

template <typename Scalar>
MatrixX<Scalar> upsample2_backward(const MatrixX<Scalar>& grad, int height, int width)
{
    const int ow = 2 * width;
    MatrixX<Scalar> out = MatrixX<Scalar>::Zero(grad.rows(), Eigen::Index(height) * width);
    for (int y = 0; y < 2 * height; ++y)
        for (int x = 0; x < ow; ++x)
            out.col(Eigen::Index(y / 2) * width + x / 2) += grad.col(Eigen::Index(y) * ow + x);
    return out;
}

template <typename Scalar>
void relu_inplace(MatrixX<Scalar>& values)
{
    values = values.cwiseMax(Scalar(0));
}

/// Zeroes gradient entries where the forward activation was clipped.
template <typename Scalar>
void relu_backward_inplace(MatrixX<Scalar>& grad, const MatrixX<Scalar>& activation)
{
    grad = (activation.array() > Scalar(0)).select(grad, Scalar(0));
}

/// Inverted dropout mask: entries are 0 or 1/(1-rate).
template <typename Scalar, typename Rng>
MatrixX<Scalar> dropout_mask(Eigen::Index rows, Eigen::Index cols, double rate, Rng& rng)
{
    MatrixX<Scalar> mask(rows, cols);
    if (rate <= 0.0) {
        mask.setOnes();
        return mask;
    }
    std::bernoulli_distribution keep(1.0 - rate);
    const Scalar scale = static_cast<Scalar>(1.0 / (1.0 - rate));
    for (Eigen::Index i = 0; i < mask.size(); ++i)
        mask.data()[i] = keep(rng) ? scale : Scalar(0);
    return mask;
}

}  // namespace deal::nn
