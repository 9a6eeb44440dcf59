#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "deal/nn.hpp"
#include "deal/tensor.hpp"

namespace deal {

/// Architecture of the reference encoder-decoder: three 2x downsampling
/// stages, a bottleneck, three upsampling stages with skip concatenation,
/// one dropout site and a 1x1 classifier.
struct SegNetConfig {
    int in_channels = 3;
    int classes = 4;
    std::array<int, 3> widths{8, 16, 16};
    double dropout = 0.1;
    double input_mean = 0.5;  // inputs are standardized as (x - mean) / std
    double input_std = 0.25;

    /// Stride of the deepest feature map; input sides must be multiples of it.
    static constexpr int stride = 8;

    std::string descriptor() const
    {
        return "segnet/in" + std::to_string(in_channels) + "/w" + std::to_string(widths[0]) + "-" +
               std::to_string(widths[1]) + "-" + std::to_string(widths[2]) + "/c" + std::to_string(classes);
    }
};

template <typename Scalar>
struct ModelParams {
    VectorX<Scalar> theta;
    std::string architecture;

    Eigen::Index size() const { return theta.size(); }
};

enum class InferenceMode {
    deterministic,  ///< dropout off
    stochastic,     ///< dropout sampled (training and MC-dropout passes)
};

/// Activations cached by a forward pass for the backward pass.
template <typename Scalar>
struct SegTrace {
    static constexpr int kConvs = 8;

    int height = 0;
    int width = 0;
    std::array<MatrixX<Scalar>, kConvs> inputs;   // patch matrices (or raw input for 1x1)
    std::array<MatrixX<Scalar>, kConvs> outputs;  // post-activation outputs
    std::array<std::vector<Eigen::Index>, 3> pool_argmax;
    MatrixX<Scalar> dropout_mask;
    MatrixX<Scalar> logits;
    ProbabilityMap<Scalar> probs;
};

template <typename Scalar>
class SegNet {
public:
    struct Conv {
        int in = 0;
        int out = 0;
        int kernel = 3;
        Eigen::Index weight_offset = 0;
        Eigen::Index bias_offset = 0;
    };

    explicit SegNet(SegNetConfig cfg) : cfg_(cfg)
    {
        if (cfg_.in_channels < 1 || cfg_.classes < 2)
            throw ConfigError("SegNet: need >= 1 input channel and >= 2 classes");
        for (int w : cfg_.widths)
            if (w < 1)
                throw ConfigError("SegNet: channel widths must be positive");
        if (cfg_.dropout < 0.0 || cfg_.dropout >= 1.0)
            throw ConfigError("SegNet: dropout rate must lie in [0, 1)");
        if (!(cfg_.input_std > 0.0) || !std::isfinite(cfg_.input_mean))
            throw ConfigError("SegNet: input_std must be positive and input_mean finite");

        const auto [w0, w1, w2] = cfg_.widths;
        const std::array<std::array<int, 3>, SegTrace<Scalar>::kConvs> shapes{{
            {cfg_.in_channels, w0, 3},  // enc1
            {w0, w1, 3},                // enc2
            {w1, w2, 3},                // enc3
            {w2, w2, 3},                // bottleneck
            {w2 + w2, w1, 3},           // dec3
            {w1 + w1, w0, 3},           // dec2
            {w0 + w0, w0, 3},           // dec1
            {w0, cfg_.classes, 1},      // classifier
        }};
        Eigen::Index offset = 0;
        for (size_t i = 0; i < shapes.size(); ++i) {
            Conv& conv = convs_[i];
            conv.in = shapes[i][0];
            conv.out = shapes[i][1];
            conv.kernel = shapes[i][2];
            conv.weight_offset = offset;
            offset += Eigen::Index(conv.out) * conv.in * conv.kernel * conv.kernel;
            conv.bias_offset = offset;
            offset += conv.out;
        }
        param_count_ = offset;
    }

    const SegNetConfig& config() const { return cfg_; }
    Eigen::Index param_count() const { return param_count_; }
    int classes() const { return cfg_.classes; }
    int feature_length() const { return cfg_.widths[2]; }
    const std::array<Conv, SegTrace<Scalar>::kConvs>& convs() const { return convs_; }

    /// He-normal convolution weights, zero biases; the classifier starts near
    /// zero so the initial softmax is close to uniform over classes.
    ModelParams<Scalar> init_params(std::uint64_t seed) const
    {
        std::mt19937_64 rng(seed);
        ModelParams<Scalar> params{VectorX<Scalar>::Zero(param_count_), cfg_.descriptor()};
        for (size_t i = 0; i < convs_.size(); ++i) {
            const Conv& conv = convs_[i];
            const Eigen::Index fan_in = Eigen::Index(conv.in) * conv.kernel * conv.kernel;
            const bool classifier = i + 1 == convs_.size();
            std::normal_distribution<double> normal(0.0, classifier ? 0.01 : std::sqrt(2.0 / double(fan_in)));
            for (Eigen::Index j = 0; j < fan_in * conv.out; ++j)
                params.theta[conv.weight_offset + j] = static_cast<Scalar>(normal(rng));
        }
        return params;
    }

    SegTrace<Scalar> forward_trace(const ModelParams<Scalar>& params, const FeatureMap<Scalar>& image,
                                   InferenceMode mode, std::mt19937_64* rng = nullptr) const
    {
        check_input(params, image);
        SegTrace<Scalar> t;
        const int h = image.height;
        const int w = image.width;
        t.height = h;
        t.width = w;

        // encoder
        const MatrixX<Scalar> standardized = (image.data.array() - static_cast<Scalar>(cfg_.input_mean)) /
                                             static_cast<Scalar>(cfg_.input_std);
        conv_forward(params, 0, standardized, h, w, t);
        MatrixX<Scalar> x = nn::maxpool2(t.outputs[0], h, w, t.pool_argmax[0]);
        conv_forward(params, 1, x, h / 2, w / 2, t);
        x = nn::maxpool2(t.outputs[1], h / 2, w / 2, t.pool_argmax[1]);
        conv_forward(params, 2, x, h / 4, w / 4, t);
        x = nn::maxpool2(t.outputs[2], h / 4, w / 4, t.pool_argmax[2]);
        conv_forward(params, 3, x, h / 8, w / 8, t);

        // decoder
        conv_forward(params, 4, concat(nn::upsample2(t.outputs[3], h / 8, w / 8), t.outputs[2]), h / 4, w / 4, t);
        conv_forward(params, 5, concat(nn::upsample2(t.outputs[4], h / 4, w / 4), t.outputs[1]), h / 2, w / 2, t);
        conv_forward(params, 6, concat(nn::upsample2(t.outputs[5], h / 2, w / 2), t.outputs[0]), h, w, t);

        MatrixX<Scalar> features = t.outputs[6];
        if (mode == InferenceMode::stochastic && cfg_.dropout > 0.0) {
            if (rng == nullptr)
                throw ConfigError("SegNet: stochastic inference needs a random generator");
            t.dropout_mask = nn::dropout_mask<Scalar>(features.rows(), features.cols(), cfg_.dropout, *rng);
            features = features.cwiseProduct(t.dropout_mask);
        }
        t.inputs[7] = features;
        const Conv& cls = convs_[7];
        t.logits = weights(params, cls) * features;
        t.logits.colwise() += bias(params, cls);
        MatrixX<Scalar> probs = t.logits;
        softmax_columns(probs);
        t.probs = ProbabilityMap<Scalar>(FeatureMap<Scalar>(h, w, std::move(probs)));
        return t;
    }

    ProbabilityMap<Scalar> forward(const ModelParams<Scalar>& params, const FeatureMap<Scalar>& image) const
    {
        return forward_trace(params, image, InferenceMode::deterministic).probs;
    }

    /// `passes` dropout-active forward passes drawn from one generator seeded by `seed`.
    std::vector<ProbabilityMap<Scalar>> forward_mc_dropout(const ModelParams<Scalar>& params,
                                                           const FeatureMap<Scalar>& image, int passes,
                                                           std::uint64_t seed) const
    {
        if (passes < 2)
            throw ConfigError("forward_mc_dropout: need at least 2 passes");
        std::mt19937_64 rng(seed);
        std::vector<ProbabilityMap<Scalar>> out;
        out.reserve(static_cast<size_t>(passes));
        for (int i = 0; i < passes; ++i)
            out.push_back(forward_trace(params, image, InferenceMode::stochastic, &rng).probs);
        return out;
    }

    /// Channel-wise global average of the bottleneck feature map.
    VectorX<Scalar> encoder_features(const ModelParams<Scalar>& params, const FeatureMap<Scalar>& image) const
    {
        const SegTrace<Scalar> t = forward_trace(params, image, InferenceMode::deterministic);
        return t.outputs[3].rowwise().mean();
    }

    /// Accumulates dLoss/dtheta into `grad` given dLoss/dlogits (classes x pixels).
    void backward(const ModelParams<Scalar>& params, const SegTrace<Scalar>& t, const MatrixX<Scalar>& dlogits,
                  VectorX<Scalar>& grad) const
    {
        if (grad.size() != param_count_)
            throw ShapeError("SegNet::backward: gradient buffer has wrong size");
        const int h = t.height;
        const int w = t.width;
        const auto [w0, w1, w2] = cfg_.widths;

        MatrixX<Scalar> d = conv_backward(params, 7, dlogits, h, w, t, grad);
        if (t.dropout_mask.size() > 0)
            d = d.cwiseProduct(t.dropout_mask);

        // dec1 -> (up(dec2), enc1)
        nn::relu_backward_inplace(d, t.outputs[6]);
        MatrixX<Scalar> din = conv_backward(params, 6, d, h, w, t, grad);
        MatrixX<Scalar> d_enc1 = din.bottomRows(w0);
        MatrixX<Scalar> d_dec2 = nn::upsample2_backward<Scalar>(din.topRows(w0), h / 2, w / 2);

        nn::relu_backward_inplace(d_dec2, t.outputs[5]);
        din = conv_backward(params, 5, d_dec2, h / 2, w / 2, t, grad);
        MatrixX<Scalar> d_enc2 = din.bottomRows(w1);
        MatrixX<Scalar> d_dec3 = nn::upsample2_backward<Scalar>(din.topRows(w1), h / 4, w / 4);

        nn::relu_backward_inplace(d_dec3, t.outputs[4]);
        din = conv_backward(params, 4, d_dec3, h / 4, w / 4, t, grad);
        MatrixX<Scalar> d_enc3 = din.bottomRows(w2);
        MatrixX<Scalar> d_bott = nn::upsample2_backward<Scalar>(din.topRows(w2), h / 8, w / 8);

        nn::relu_backward_inplace(d_bott, t.outputs[3]);
        din = conv_backward(params, 3, d_bott, h / 8, w / 8, t, grad);
        d_enc3 += nn::maxpool2_backward(din, t.pool_argmax[2], Eigen::Index(h / 4) * (w / 4));

        nn::relu_backward_inplace(d_enc3, t.outputs[2]);
        din = conv_backward(params, 2, d_enc3, h / 4, w / 4, t, grad);
        d_enc2 += nn::maxpool2_backward(din, t.pool_argmax[1], Eigen::Index(h / 2) * (w / 2));

        nn::relu_backward_inplace(d_enc2, t.outputs[1]);
        din = conv_backward(params, 1, d_enc2, h / 2, w / 2, t, grad);
        d_enc1 += nn::maxpool2_backward(din, t.pool_argmax[0], Eigen::Index(h) * w);

        nn::relu_backward_inplace(d_enc1, t.outputs[0]);
        conv_backward(params, 0, d_enc1, h, w, t, grad, /*need_input_grad=*/false);
    }

private:
    void check_input(const ModelParams<Scalar>& params, const FeatureMap<Scalar>& image) const
    {
        if (params.theta.size() != param_count_)
            throw InferenceError("SegNet: parameter vector does not match architecture " + cfg_.descriptor());
        if (image.channels() != cfg_.in_channels)
            throw InferenceError("SegNet: image has " + std::to_string(image.channels()) + " channels, expected " +
                                 std::to_string(cfg_.in_channels));
        if (image.height < SegNetConfig::stride || image.width < SegNetConfig::stride ||
            image.height % SegNetConfig::stride != 0 || image.width % SegNetConfig::stride != 0)
            throw InferenceError("SegNet: image sides must be positive multiples of 8");
    }

    static MatrixX<Scalar> concat(const MatrixX<Scalar>& top, const MatrixX<Scalar>& bottom)
    {
        MatrixX<Scalar> out(top.rows() + bottom.rows(), top.cols());
        out << top, bottom;
        return out;
    }

    Eigen::Map<const MatrixX<Scalar>> weights(const ModelParams<Scalar>& p, const Conv& c) const
    {
        return {p.theta.data() + c.weight_offset, c.out, Eigen::Index(c.in) * c.kernel * c.kernel};
    }

    Eigen::Map<const VectorX<Scalar>> bias(const ModelParams<Scalar>& p, const Conv& c) const
    {
        return {p.theta.data() + c.bias_offset, c.out};
    }

    void conv_forward(const ModelParams<Scalar>& p, int index, const MatrixX<Scalar>& in, int h, int w,
                      SegTrace<Scalar>& t) const
    {
        const Conv& c = convs_[static_cast<size_t>(index)];
        t.inputs[static_cast<size_t>(index)] = c.kernel == 1 ? in : nn::im2col(in, h, w, c.kernel);
        MatrixX<Scalar> out = weights(p, c) * t.inputs[static_cast<size_t>(index)];
        out.colwise() += bias(p, c);
        nn::relu_inplace(out);
        t.outputs[static_cast<size_t>(index)] = std::move(out);
    }

    /// Returns the gradient with respect to the layer input.
    MatrixX<Scalar> conv_backward(const ModelParams<Scalar>& p, int index, const MatrixX<Scalar>& dout, int h,
                                  int w, const SegTrace<Scalar>& t, VectorX<Scalar>& grad,
                                  bool need_input_grad = true) const
    {
        const Conv& c = convs_[static_cast<size_t>(index)];
        const MatrixX<Scalar>& cols = t.inputs[static_cast<size_t>(index)];
        Eigen::Map<MatrixX<Scalar>> dw(grad.data() + c.weight_offset, c.out, cols.rows());
        Eigen::Map<VectorX<Scalar>> db(grad.data() + c.bias_offset, c.out);
        dw.noalias() += dout * cols.transpose();
        db += dout.rowwise().sum();
        if (!need_input_grad)
            return {};
        MatrixX<Scalar> dcols = weights(p, c).transpose() * dout;
        if (c.kernel == 1)
            return dcols;
        return nn::col2im(dcols, c.in, h, w, c.kernel);
    }

    SegNetConfig cfg_;
    std::array<Conv, SegTrace<Scalar>::kConvs> convs_{};
    Eigen::Index param_count_ = 0;
};

}  // namespace deal
