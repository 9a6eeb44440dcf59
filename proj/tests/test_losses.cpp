#include <doctest.h>

#include "deal/losses.hpp"
#include "test_util.hpp"

using namespace deal;
using testutil::random_labels;
using testutil::random_prob_map;

namespace {

constexpr int kIgnore = 255;

double seg_loss_oracle(const FeatureMap<double>& p, const LabelMap& y)
{
    double total = 0;
    int n = 0;
    for (int r = 0; r < y.rows(); ++r)
        for (int c = 0; c < y.cols(); ++c) {
            if (y(r, c) == kIgnore)
                continue;
            total += -std::log(std::max(p.data(y(r, c), r * y.cols() + c), 1e-7));
            ++n;
        }
    return total / n;
}

double dif_loss_oracle(const Eigen::VectorXd& m, const LabelMap& e, const LabelMap& valid)
{
    int k = 0, zeros = 0;
    for (Eigen::Index i = 0; i < e.size(); ++i)
        if (valid.data()[i]) {
            ++k;
            zeros += e.data()[i] == 0;
        }
    const double l1 = double(zeros) / k, l2 = 1 - l1;
    double total = 0;
    for (Eigen::Index i = 0; i < e.size(); ++i) {
        if (!valid.data()[i])
            continue;
        const double v = std::min(std::max(m[i], 1e-7), 1 - 1e-7);
        total += e.data()[i] ? l1 * std::log(v) : l2 * std::log(1 - v);
    }
    return -total / k;
}

DifficultyMap<double> make_difficulty(int h, int w, Eigen::VectorXd scores)
{
    return DifficultyMap<double>{h, w, std::move(scores)};
}

}  // namespace

TEST_SUITE("losses")
{
    TEST_CASE("error mask marks misclassified valid pixels")
    {
        std::mt19937_64 rng(1);
        for (int trial = 0; trial < 100; ++trial) {
            const int h = 1 + trial % 9, w = 1 + trial % 7;
            const LabelMap truth = random_labels(h, w, 4, rng, 0.2);
            const LabelMap pred = random_labels(h, w, 4, rng);
            const ErrorMask m = compute_error_mask(pred, truth, kIgnore);
            for (int r = 0; r < h; ++r)
                for (int c = 0; c < w; ++c) {
                    const bool valid = truth(r, c) != kIgnore;
                    CHECK(m.valid(r, c) == int(valid));
                    CHECK(m.mask(r, c) == int(valid && pred(r, c) != truth(r, c)));
                }
        }
        CHECK_THROWS_AS(compute_error_mask(LabelMap::Zero(2, 3), LabelMap::Zero(3, 2), kIgnore), ShapeError);
    }

    TEST_CASE("segmentation loss matches the loop oracle")
    {
        std::mt19937_64 rng(2);
        for (int trial = 0; trial < 100; ++trial) {
            const int h = 1 + trial % 6, w = 2 + trial % 5, c = 2 + trial % 6;
            const auto p = random_prob_map(c, h, w, rng);
            LabelMap y = random_labels(h, w, c, rng, 0.3);
            y(0, 0) = 0;
            CHECK(std::abs(seg_loss(p, y, kIgnore) - seg_loss_oracle(p, y)) < 1e-6);
        }
    }

    TEST_CASE("uniform prediction costs log C")
    {
        const FeatureMap<double> p(4, 3, Eigen::MatrixXd::Constant(4, 12, 0.25));
        CHECK(seg_loss(p, LabelMap::Zero(4, 3), kIgnore) == doctest::Approx(std::log(4.0)).epsilon(1e-12));
        CHECK_THROWS_AS(seg_loss(p, LabelMap::Constant(4, 3, kIgnore), kIgnore), UndefinedValueError);
    }

    TEST_CASE("regularizer is half the scaled squared norm")
    {
        Eigen::VectorXd theta(3);
        theta << 1, -2, 2;
        CHECK(l2_regularizer(theta, 0.1) == doctest::Approx(0.45));
        const FeatureMap<double> p(1, 1, Eigen::MatrixXd::Constant(2, 1, 0.5));
        CHECK(seg_loss(p, LabelMap::Zero(1, 1), kIgnore, 0.1, &theta) == doctest::Approx(std::log(2.0) + 0.45));
    }

    TEST_CASE("segmentation gradient matches central differences in the logits")
    {
        std::mt19937_64 rng(3);
        Eigen::MatrixXd logits = Eigen::MatrixXd::Random(3, 12);
        const LabelMap y = random_labels(3, 4, 3, rng, 0.25);
        const auto loss = [&] {
            Eigen::MatrixXd p = logits;
            softmax_columns(p);
            return seg_loss(FeatureMap<double>(3, 4, p), y, kIgnore);
        };
        Eigen::MatrixXd p = logits;
        softmax_columns(p);
        const Eigen::MatrixXd grad = seg_loss_grad_logits(FeatureMap<double>(3, 4, p), y, kIgnore);
        for (Eigen::Index i = 0; i < logits.size(); ++i) {
            const double keep = logits.data()[i];
            logits.data()[i] = keep + 1e-6;
            const double fu = loss();
            logits.data()[i] = keep - 1e-6;
            const double fd = loss();
            logits.data()[i] = keep;
            CHECK(std::abs(grad.data()[i] - (fu - fd) / 2e-6) < 1e-8);
        }
    }

    TEST_CASE("difficulty loss matches the loop oracle")
    {
        std::mt19937_64 rng(4);
        std::uniform_real_distribution<double> u(0.0, 1.0);
        for (int trial = 0; trial < 150; ++trial) {
            const int h = 1 + trial % 8, w = 1 + trial % 5;
            Eigen::VectorXd m(h * w);
            for (auto& v : m)
                v = trial % 10 == 0 ? double(u(rng) < 0.5) : u(rng);  // hits the clamp too
            const LabelMap truth = random_labels(h, w, 3, rng, 0.2);
            LabelMap pred = random_labels(h, w, 3, rng);
            pred(0, 0) = truth(0, 0) == kIgnore ? 0 : truth(0, 0);
            ErrorMask e = compute_error_mask(pred, truth, kIgnore);
            if (e.valid_count() == 0)
                continue;
            const auto loss = dif_loss(make_difficulty(h, w, m), e);
            CHECK(std::abs(double(loss.value) - dif_loss_oracle(m, e.mask, e.valid)) < 1e-6);
            CHECK(loss.lambda1 + loss.lambda2 == 1.0);
        }
    }

    TEST_CASE("lambda weights invert the class balance")
    {
        LabelMap e(1, 4), valid = LabelMap::Ones(1, 4);
        e << 0, 0, 0, 1;
        const auto loss = dif_loss(make_difficulty(1, 4, Eigen::VectorXd::Constant(4, 0.3)), ErrorMask{e, valid});
        CHECK(loss.lambda1 == 0.75);
        CHECK(loss.lambda2 == 0.25);
        const double expected = -(0.75 * std::log(0.3) + 3 * 0.25 * std::log(0.7)) / 4;
        CHECK(double(loss.value) == doctest::Approx(expected).epsilon(1e-12));
    }

    TEST_CASE("an all-correct mask has zero difficulty loss")
    {
        std::mt19937_64 rng(5);
        std::uniform_real_distribution<double> u(0.0, 1.0);
        for (int trial = 0; trial < 20; ++trial) {
            Eigen::VectorXd m(30);
            for (auto& v : m)
                v = u(rng);
            const ErrorMask e{LabelMap::Zero(5, 6), LabelMap::Ones(5, 6)};
            const auto loss = dif_loss(make_difficulty(5, 6, m), e);
            CHECK(loss.value == 0.0);
            CHECK(loss.lambda1 == 1.0);
        }
    }

    TEST_CASE("difficulty gradient matches central differences")
    {
        std::mt19937_64 rng(6);
        std::uniform_real_distribution<double> u(0.05, 0.95);
        Eigen::VectorXd m(20);
        for (auto& v : m)
            v = u(rng);
        const ErrorMask e = compute_error_mask(random_labels(4, 5, 2, rng), random_labels(4, 5, 2, rng, 0.2), kIgnore);
        const auto base = dif_loss(make_difficulty(4, 5, m), e);
        const Eigen::VectorXd grad = dif_loss_grad(make_difficulty(4, 5, m), e, base);
        for (int i = 0; i < 20; ++i) {
            Eigen::VectorXd up = m, dn = m;
            up[i] += 1e-7;
            dn[i] -= 1e-7;
            // lambdas depend only on the mask, so they are constant here
            const double numeric =
                (dif_loss(make_difficulty(4, 5, up), e).value - dif_loss(make_difficulty(4, 5, dn), e).value) / 2e-7;
            CHECK(std::abs(grad[i] - numeric) < 1e-6);
        }
    }

    TEST_CASE("total loss is linear in alpha")
    {
        std::mt19937_64 rng(7);
        std::uniform_real_distribution<double> u(0.0, 5.0);
        for (int trial = 0; trial < 50; ++trial) {
            const double s = u(rng), d = u(rng), a = u(rng);
            CHECK(total_loss(s, d, 0.0) == s);
            CHECK(total_loss(s, d, 2 * a) - total_loss(s, d, a) == doctest::Approx(a * d));
        }
        CHECK(total_loss(1.5, 2.0) == 3.5);
    }

    TEST_CASE("error mask downsampling votes by majority")
    {
        LabelMap mask = LabelMap::Zero(4, 4), valid = LabelMap::Ones(4, 4);
        // cell (0,0): 2 of 4 wrong -> error (ties count); cell (0,1): 1 of 4 -> correct
        mask(0, 0) = mask(1, 1) = 1;
        mask(0, 2) = 1;
        // cell (1,0): 3 ignored -> invalid; cell (1,1): 2 valid, 1 wrong -> error
        valid(2, 0) = valid(2, 1) = valid(3, 0) = 0;
        valid(2, 2) = valid(2, 3) = 0;
        mask(3, 3) = 1;
        const ErrorMask small = downsample_error_mask(ErrorMask{mask, valid}, 2, 2);
        CHECK(small.mask(0, 0) == 1);
        CHECK(small.mask(0, 1) == 0);
        CHECK(small.valid(1, 0) == 0);
        CHECK(small.mask(1, 0) == 0);
        CHECK(small.valid(1, 1) == 1);
        CHECK(small.mask(1, 1) == 1);
        CHECK(small.valid(0, 0) == 1);
        const ErrorMask same = downsample_error_mask(ErrorMask{mask, valid}, 4, 4);
        CHECK(same.mask == mask);
    }
}
