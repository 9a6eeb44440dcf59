#pragma once

// Two-branch difficulty-aware model: segmentation network plus difficulty
// head, trained jointly on L = L_seg + alpha * L_dif.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <random>
#include <vector>

#include "deal/data_pool.hpp"
#include "deal/difficulty_head.hpp"
#include "deal/losses.hpp"
#include "deal/seg_model.hpp"

namespace deal {

struct ModelConfig {
    SegNetConfig net;
    bool pam_enabled = true;
    int attention_height = 32;  // difficulty branch grid; capped at 86 x 86
    int attention_width = 32;
    bool stop_gradient_to_seg = false;
    double alpha = 1.0;
    double clamp = kDefaultLogClamp;
    int ignore_label = 255;

    static constexpr int kMaxAttentionSide = 86;

    void validate() const
    {
        if (attention_height < 1 || attention_width < 1 || attention_height > kMaxAttentionSide ||
            attention_width > kMaxAttentionSide)
            throw ConfigError("attention grid must lie within 1..86 on each side");
        if (!(alpha >= 0.0) || !std::isfinite(alpha))
            throw ConfigError("alpha must be finite and non-negative");
        if (!(clamp > 0.0 && clamp < 0.5))
            throw ConfigError("clamp epsilon must lie in (0, 0.5)");
    }
};

struct TrainConfig {
    double learning_rate = 0.01;
    double momentum = 0.9;
    double weight_decay = 5e-4;
    double poly_power = 0.9;
    int epochs = 100;
    int iterations = 0;  // overrides epochs when > 0
    int batch_size = 4;

    int total_iterations(std::size_t samples) const
    {
        if (iterations > 0)
            return iterations;
        const int per_epoch = static_cast<int>((samples + static_cast<size_t>(batch_size) - 1) /
                                               static_cast<size_t>(batch_size));
        return std::max(1, epochs * per_epoch);
    }

    /// "poly" schedule: lr * (1 - iter / max_iter)^power
    double learning_rate_at(int iter, int max_iter) const
    {
        return learning_rate * std::pow(1.0 - double(iter) / double(max_iter), poly_power);
    }
};

/// Parameters of both branches.
template <typename Scalar>
struct DealParams {
    ModelParams<Scalar> seg;
    HeadParams<Scalar> head;

    Eigen::Index size() const { return seg.size() + head.weights.size() + HeadParams<Scalar>::extra; }

    VectorX<Scalar> flat() const
    {
        VectorX<Scalar> out(size());
        out << seg.theta, head.weights, head.bias, head.gamma;
        return out;
    }

    void assign_flat(const VectorX<Scalar>& values)
    {
        if (values.size() != size())
            throw ShapeError("DealParams: flat vector has wrong length");
        const Eigen::Index n = seg.size();
        const Eigen::Index c = head.weights.size();
        seg.theta = values.head(n);
        head.weights = values.segment(n, c);
        head.bias = values[n + c];
        head.gamma = values[n + c + 1];
    }
};

/// Per-image outputs of both branches at inference time.
template <typename Scalar>
struct DealOutput {
    ProbabilityMap<Scalar> probs;        // full resolution S*
    FeatureMap<Scalar> attention_probs;  // S* on the difficulty grid
    DifficultyMap<Scalar> difficulty;    // M^d on the difficulty grid
};

/// softmax backward: dlogits = P .* (dP - sum_c P .* dP)
template <typename Scalar>
MatrixX<Scalar> softmax_backward(const MatrixX<Scalar>& probs, const MatrixX<Scalar>& d_probs)
{
    const Eigen::Matrix<Scalar, 1, Eigen::Dynamic> inner = (probs.array() * d_probs.array()).colwise().sum();
    return (probs.array() * (d_probs.rowwise() - inner).array()).matrix();
}

template <typename Scalar>
FeatureMap<Scalar> to_scalar(const FeatureMap<float>& image)
{
    if constexpr (std::is_same_v<Scalar, float>)
        return image;
    else
        return image.template cast<Scalar>();
}

template <typename Scalar>
class DealNetwork {
public:
    explicit DealNetwork(ModelConfig cfg) : cfg_(std::move(cfg)), seg_(cfg_.net) { cfg_.validate(); }

    const ModelConfig& config() const { return cfg_; }
    const SegNet<Scalar>& segmenter() const { return seg_; }
    int classes() const { return seg_.classes(); }

    DealParams<Scalar> init_params(std::uint64_t seed) const
    {
        return {seg_.init_params(seed), HeadParams<Scalar>::zeros(classes())};
    }

    /// Difficulty grid for an input of the given size.
    std::pair<int, int> attention_grid(int height, int width) const
    {
        return {std::min(height, cfg_.attention_height), std::min(width, cfg_.attention_width)};
    }

    template <typename ImageScalar>
    DealOutput<Scalar> forward(const DealParams<Scalar>& params, const FeatureMap<ImageScalar>& input) const
    {
        const FeatureMap<Scalar> image = input.template cast<Scalar>();
        DealOutput<Scalar> out;
        out.probs = seg_.forward(params.seg, image);
        const auto [ah, aw] = attention_grid(image.height, image.width);
        out.attention_probs = downsample_probs(out.probs.probs, ah, aw);
        out.difficulty = difficulty_forward_trace(out.attention_probs, params.head, cfg_.pam_enabled).difficulty;
        return out;
    }

    /// One image: both losses at the current parameters, with dL/dtheta
    /// accumulated into `seg_grad` / `head_grad`. The error mask is
    /// recomputed from this forward pass.
    LossBundle<Scalar> accumulate_gradient(const DealParams<Scalar>& params, const FeatureMap<Scalar>& image,
                                           const LabelMap& truth, std::mt19937_64& rng, VectorX<Scalar>& seg_grad,
                                           HeadParams<Scalar>& head_grad) const
    {
        const SegTrace<Scalar> trace = seg_.forward_trace(params.seg, image, InferenceMode::stochastic, &rng);
        const FeatureMap<Scalar>& probs = trace.probs.probs;
        const auto [ah, aw] = attention_grid(image.height, image.width);

        LossBundle<Scalar> bundle;
        bundle.alpha = static_cast<Scalar>(cfg_.alpha);
        bundle.seg_loss = seg_loss(probs, truth, cfg_.ignore_label);
        MatrixX<Scalar> d_logits = seg_loss_grad_logits(probs, truth, cfg_.ignore_label);

        const ErrorMask full_mask = compute_error_mask(trace.probs.argmax, truth, cfg_.ignore_label);
        const ErrorMask mask = downsample_error_mask(full_mask, ah, aw);
        if (mask.valid_count() > 0) {
            const FeatureMap<Scalar> small = downsample_probs(probs, ah, aw);
            const HeadTrace<Scalar> head_trace = difficulty_forward_trace(small, params.head, cfg_.pam_enabled);
            const DifLoss<Scalar> dif = dif_loss(head_trace.difficulty, mask, cfg_.clamp);
            bundle.dif_loss = dif.value;
            bundle.lambda1 = dif.lambda1;
            bundle.lambda2 = dif.lambda2;

            const VectorX<Scalar> d_scores =
                static_cast<Scalar>(cfg_.alpha) * dif_loss_grad(head_trace.difficulty, mask, dif, cfg_.clamp);
            const HeadGradient<Scalar> hg = difficulty_backward(head_trace, params.head, d_scores);
            head_grad.weights += hg.params.weights;
            head_grad.bias += hg.params.bias;
            head_grad.gamma += hg.params.gamma;
            if (!cfg_.stop_gradient_to_seg) {
                const FeatureMap<Scalar> d_full =
                    downsample_probs_backward(probs, ah, aw, FeatureMap<Scalar>(ah, aw, hg.d_probs));
                d_logits += softmax_backward(probs.data, d_full.data);
            }
        }
        bundle.total = total_loss(bundle.seg_loss, bundle.dif_loss, bundle.alpha);
        seg_.backward(params.seg, trace, d_logits, seg_grad);
        return bundle;
    }

private:
    ModelConfig cfg_;
    SegNet<Scalar> seg_;
};

/// Mini-batch SGD with momentum, weight decay and the poly schedule.
/// Parameters are freshly initialized from `seed`.
template <typename Scalar>
DealParams<Scalar> train_deal(const DealNetwork<Scalar>& net, std::span<const SegSample* const> data,
                              const TrainConfig& cfg, std::uint64_t seed,
                              std::vector<LossBundle<Scalar>>* history = nullptr)
{
    if (data.empty())
        throw ConfigError("train_deal: empty training set");
    if (cfg.batch_size < 1)
        throw ConfigError("train_deal: batch_size must be >= 1");
    std::mt19937_64 rng(seed);
    DealParams<Scalar> params = net.init_params(rng());

    std::vector<FeatureMap<Scalar>> images;
    images.reserve(data.size());
    for (const SegSample* s : data)
        images.push_back(to_scalar<Scalar>(s->image));

    const int total = cfg.total_iterations(data.size());
    VectorX<Scalar> velocity = VectorX<Scalar>::Zero(params.size());
    std::vector<size_t> order(data.size());
    std::iota(order.begin(), order.end(), size_t{0});
    size_t cursor = order.size();

    for (int iter = 0; iter < total; ++iter) {
        VectorX<Scalar> seg_grad = VectorX<Scalar>::Zero(params.seg.size());
        HeadParams<Scalar> head_grad = HeadParams<Scalar>::zeros(net.classes());
        LossBundle<Scalar> batch_loss;
        const int batch = std::min<int>(cfg.batch_size, static_cast<int>(data.size()));
        for (int b = 0; b < batch; ++b) {
            if (cursor == order.size()) {
                std::shuffle(order.begin(), order.end(), rng);
                cursor = 0;
            }
            const size_t i = order[cursor++];
            const LossBundle<Scalar> l =
                net.accumulate_gradient(params, images[i], data[i]->label, rng, seg_grad, head_grad);
            batch_loss.seg_loss += l.seg_loss / Scalar(batch);
            batch_loss.dif_loss += l.dif_loss / Scalar(batch);
            batch_loss.lambda1 += l.lambda1 / batch;
            batch_loss.lambda2 += l.lambda2 / batch;
        }
        const VectorX<Scalar> theta = params.flat();
        VectorX<Scalar> grad(theta.size());
        grad << seg_grad, head_grad.weights, head_grad.bias, head_grad.gamma;
        grad /= Scalar(batch);
        grad += static_cast<Scalar>(cfg.weight_decay) * theta;

        velocity = static_cast<Scalar>(cfg.momentum) * velocity + grad;
        const Scalar lr = static_cast<Scalar>(cfg.learning_rate_at(iter, total));
        params.assign_flat(theta - lr * velocity);

        if (history) {
            batch_loss.alpha = static_cast<Scalar>(net.config().alpha);
            batch_loss.seg_loss += l2_regularizer(theta, cfg.weight_decay);
            batch_loss.total = total_loss(batch_loss.seg_loss, batch_loss.dif_loss, batch_loss.alpha);
            history->push_back(batch_loss);
        }
    }
    return params;
}

}  // namespace deal
