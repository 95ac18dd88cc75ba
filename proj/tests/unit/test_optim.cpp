#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "gen.hpp"
#include "spikemem/optim.hpp"

using namespace spikemem;

TEST(CosineLr, Examples) {
    EXPECT_EQ(cosine_lr(0, 20, 1e-3), 1e-3);
    EXPECT_NEAR(cosine_lr(20, 20, 1e-3), 0.0, 1e-18);
    EXPECT_NEAR(cosine_lr(10, 20, 1e-3, 1e-4), (1e-3 + 1e-4) / 2.0, 1e-15);
    EXPECT_EQ(cosine_lr(25, 20, 1e-3, 1e-5), 1e-5);
    EXPECT_THROW(cosine_lr(1, 0, 1e-3), std::invalid_argument);
}

TEST(CosineLr, MonotoneNonIncreasing) {
    double prev = cosine_lr(0, 50, 1e-3);
    for (int t = 1; t <= 60; ++t) {
        const double lr = cosine_lr(t, 50, 1e-3);
        EXPECT_LE(lr, prev);
        prev = lr;
    }
}

TEST(Clip, Examples) {
    Tensor a = Tensor::from({3.0, 4.0});
    Tensor* grads[] = {&a};
    EXPECT_EQ(clip_gradients(grads, 1.0), 5.0);
    EXPECT_NEAR(a[0], 0.6, 1e-15);
    EXPECT_NEAR(a[1], 0.8, 1e-15);

    Tensor b = Tensor::from({0.3, 0.4});
    Tensor* small[] = {&b};
    EXPECT_NEAR(clip_gradients(small, 1.0), 0.5, 1e-15);
    EXPECT_EQ(b, Tensor::from({0.3, 0.4}));
}

TEST(ClipProperties, PostClipNormBounded) {
    for (auto seed : gen::seeds(100, 200)) {
        std::mt19937_64 rng(seed);
        Tensor x = gen::uniform({static_cast<std::size_t>(gen::integer(rng, 1, 50))}, rng, -10, 10);
        Tensor y = gen::uniform({3, 4}, rng, -10, 10);
        Tensor* grads[] = {&x, &y};
        const double before = clip_gradients(grads, 1.0);
        double sq = 0.0;
        for (double v : x.values()) sq += v * v;
        for (double v : y.values()) sq += v * v;
        EXPECT_LE(std::sqrt(sq), 1.0 + 1e-12);
        if (before <= 1.0) EXPECT_NEAR(std::sqrt(sq), before, 1e-12);
    }
}

TEST(Adam, ZeroGradZeroDecayIsNoOp) {
    Tensor p = Tensor::from({0.5, -2.0});
    auto m = AdamMoments::zeros(p.shape());
    AdamConfig c;
    c.weight_decay = 0.0;
    for (std::size_t t = 1; t <= 10; ++t) adam_step(p, Tensor({2}), m, c, t, 1e-3);
    EXPECT_EQ(p, Tensor::from({0.5, -2.0}));
}

TEST(Adam, ConstantGradientStepsAtLearningRate) {
    Tensor p = Tensor::from({0.0, 0.0});
    const Tensor g = Tensor::from({0.37, -5.0});
    auto m = AdamMoments::zeros(p.shape());
    AdamConfig c;
    c.weight_decay = 0.0;
    Tensor prev = p;
    for (std::size_t t = 1; t <= 1000; ++t) {
        prev = p;
        adam_step(p, g, m, c, t, 1e-3);
    }
    EXPECT_NEAR(prev[0] - p[0], 1e-3, 1e-5);
    EXPECT_NEAR(p[1] - prev[1], 1e-3, 1e-5);
}

TEST(Adam, DecayOnlyShrinksGeometrically) {
    Tensor p = Tensor::from({2.0});
    auto m = AdamMoments::zeros(p.shape());
    double expected = 2.0;
    for (std::size_t t = 1; t <= 100; ++t) {
        adam_step(p, Tensor({1}), m, {}, t, 1e-3);
        expected *= 1.0 - 1e-7;
    }
    // One rounding per step on a value near 2.
    EXPECT_NEAR(p[0], expected, 100 * 4.5e-16);
}

TEST(Adam, Validation) {
    Tensor p({2});
    auto m = AdamMoments::zeros(p.shape());
    EXPECT_THROW(adam_step(p, Tensor({3}), m, {}, 1, 1e-3), ShapeError);
    EXPECT_THROW(adam_step(p, Tensor({2}), m, {}, 0, 1e-3), std::invalid_argument);
    AdamConfig bad;
    bad.beta1 = 1.0;
    EXPECT_THROW(bad.validate(), std::invalid_argument);
}

TEST(Adam, OptimizerSkipsFrozenAndClearsGrads) {
    auto w = ad::Value::parameter(Tensor::from({1.0}));
    auto frozen = ad::Value::parameter(Tensor::from({1.0}));
    Adam opt({{"w", w, true}, {"frozen", frozen, false}});
    EXPECT_EQ(opt.params().size(), 1u);
    ad::backward(ad::sum(ad::mul(w, frozen)));
    opt.step(1e-2);
    EXPECT_LT(w.data()[0], 1.0);
    EXPECT_EQ(frozen.data()[0], 1.0);
    EXPECT_EQ(w.grad()[0], 0.0);
    EXPECT_EQ(opt.steps(), 1u);
}

TEST(EarlyStop, Boundaries) {
    const std::vector<double> improving{0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8};
    EXPECT_FALSE(early_stop(improving));
    std::vector<double> h{0.1, 0.2, 0.3, 0.9, 0.5, 0.5, 0.5, 0.5, 0.5};
    EXPECT_FALSE(early_stop(h));  // best at 3, now 8
    h.push_back(0.5);
    EXPECT_TRUE(early_stop(h));  // best at 3, now 9
    // Ties do not count as improvement.
    std::vector<double> tie{0.9, 0.9, 0.9, 0.9, 0.9, 0.9, 0.9};
    EXPECT_TRUE(early_stop(tie));
    EXPECT_FALSE(early_stop(std::vector<double>{}));
}
