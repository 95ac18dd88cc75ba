#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "gen.hpp"
#include "oracles.hpp"
#include "spikemem/scl.hpp"

using namespace spikemem;
namespace ad = spikemem::ad;

namespace {

oracle::Mat random_unit_rows(std::size_t n, std::size_t f, std::mt19937_64& rng) {
    oracle::Mat z = oracle::random_matrix(n, f, rng);
    for (auto& row : z) row = oracle::unit(row);
    return z;
}

Tensor to_tensor(const oracle::Mat& m) {
    Tensor t({m.size(), m.front().size()});
    for (std::size_t i = 0; i < m.size(); ++i) std::copy(m[i].begin(), m[i].end(), t.data() + i * m[i].size());
    return t;
}

double scl(const Tensor& z, const std::vector<int>& labels, double tau = 0.07,
           AnchorReduction r = AnchorReduction::sum) {
    return scl_loss({ad::Value::constant(z), labels, tau, {}}, r).item();
}

}  // namespace

TEST(Normalize, Examples) {
    auto h = ad::Value::constant(Tensor({3, 3}, {3, 4, 0, 0.6, 0.8, 0, 0, 0, 0}));
    const auto n = normalize_features(h);
    EXPECT_NEAR(n.z.data()[0], 0.6, 1e-15);
    EXPECT_NEAR(n.z.data()[1], 0.8, 1e-15);
    EXPECT_NEAR(n.z.data()[3], 0.6, 1e-15);
    EXPECT_NEAR(n.z.data()[4], 0.8, 1e-15);
    EXPECT_EQ(n.excluded, (std::vector<bool>{false, false, true}));
    for (std::size_t j = 6; j < 9; ++j) EXPECT_EQ(n.z.data()[j], 0.0);
}

TEST(Scl, MatchesBruteForceOracle) {
    for (auto seed : gen::seeds(50)) {
        std::mt19937_64 rng(seed);
        const auto z = random_unit_rows(16, 32, rng);
        const auto labels = gen::labels(16, 4, rng);
        const double expected = oracle::scl(z, labels, 0.07);
        EXPECT_NEAR(scl(to_tensor(z), labels), expected, 1e-10 * std::max(1.0, std::abs(expected)));
    }
}

TEST(Scl, FourSampleExample) {
    std::mt19937_64 rng(77);
    const auto z = random_unit_rows(4, 512, rng);
    const std::vector<int> labels{0, 0, 1, 1};
    EXPECT_NEAR(scl(to_tensor(z), labels), oracle::scl(z, labels, 0.07), 1e-10);
}

TEST(Scl, TwoSameLabelSamplesGiveZero) {
    std::mt19937_64 rng(1);
    const auto z = random_unit_rows(2, 8, rng);
    EXPECT_EQ(scl(to_tensor(z), {3, 3}), 0.0);
}

TEST(Scl, ClosedFormForOrthogonalClasses) {
    // Two classes of two identical vectors each, orthogonal across classes.
    Tensor z({4, 2}, {1, 0, 1, 0, 0, 1, 0, 1});
    const double tau = 0.07;
    const double expected = 4.0 * std::log(1.0 + 2.0 * std::exp(-1.0 / tau));
    EXPECT_NEAR(scl(z, {0, 0, 1, 1}, tau), expected, 1e-12);
    EXPECT_LT(expected, 1e-5);
}

TEST(Scl, AnchorsWithoutPositivesContributeZero) {
    std::mt19937_64 rng(8);
    const auto z = random_unit_rows(3, 4, rng);
    EXPECT_EQ(scl(to_tensor(z), {0, 1, 2}), 0.0);
}

TEST(Scl, MeanReductionDividesByN) {
    std::mt19937_64 rng(12);
    const auto z = random_unit_rows(8, 6, rng);
    const auto labels = gen::labels(8, 2, rng);
    const Tensor t = to_tensor(z);
    EXPECT_NEAR(scl(t, labels, 0.07, AnchorReduction::mean), scl(t, labels) / 8.0, 1e-12);
}

TEST(Scl, ExcludedRowsDropOut) {
    std::mt19937_64 rng(13);
    auto z = random_unit_rows(6, 5, rng);
    const std::vector<int> labels{0, 0, 1, 1, 0, 1};
    const double with_flags =
        scl_loss({ad::Value::constant(to_tensor(z)), labels, 0.07, {false, false, false, false, true, true}}).item();
    const oracle::Mat kept(z.begin(), z.begin() + 4);
    EXPECT_NEAR(with_flags, oracle::scl(kept, {0, 0, 1, 1}, 0.07), 1e-10);
}

TEST(Scl, RejectsDegenerateBatches) {
    EXPECT_THROW(scl(Tensor({1, 3}, {1, 0, 0}), {0}), std::invalid_argument);
    EXPECT_THROW(scl(Tensor({2, 1}, {1, 1}), {0, 0}, 0.0), std::invalid_argument);
    EXPECT_THROW(scl(Tensor({2, 1}, {1, 1}), {0}), ShapeError);
}

TEST(SclProperties, NonNegativeAndPermutationInvariant) {
    for (auto seed : gen::seeds(100, 50)) {
        std::mt19937_64 rng(seed);
        const std::size_t n = static_cast<std::size_t>(gen::integer(rng, 2, 20));
        const auto z = random_unit_rows(n, 16, rng);
        const auto labels = gen::labels(n, 3, rng);
        const double base = scl(to_tensor(z), labels);
        EXPECT_GE(base, 0.0);

        std::vector<std::size_t> perm(n);
        std::iota(perm.begin(), perm.end(), 0);
        std::shuffle(perm.begin(), perm.end(), rng);
        oracle::Mat pz(n);
        std::vector<int> pl(n);
        for (std::size_t i = 0; i < n; ++i) {
            pz[i] = z[perm[i]];
            pl[i] = labels[perm[i]];
        }
        EXPECT_NEAR(scl(to_tensor(pz), pl), base, 1e-9 * std::max(1.0, base));
    }
}

TEST(SclProperties, GradientMatchesFiniteDifferences) {
    for (auto seed : gen::seeds(20, 300)) {
        std::mt19937_64 rng(seed);
        const Tensor h0 = gen::uniform({8, 6}, rng, 0.05, 1.0);
        const auto labels = gen::labels(8, 3, rng);
        auto f = [&](const ad::Value& h) {
            const auto norm = normalize_features(h);
            return scl_loss({norm.z, labels, 0.5, norm.excluded});
        };
        EXPECT_LT(ad::finite_diff_check(f, h0), 1e-4) << "seed " << seed;
    }
}

TEST(CrossEntropy, RateExamples) {
    const std::vector<int> y{0};
    EXPECT_EQ(ce_loss(ad::Value::constant(Tensor({1, 3}, {1.0, 0.3, 0.0})), y).item(), 0.0);
    EXPECT_NEAR(ce_loss(ad::Value::constant(Tensor({1, 3}, {0.2, 0.9, 0.9})), y).item(), 1.6094379124341003, 1e-12);
    EXPECT_NEAR(ce_loss(ad::Value::constant(Tensor({1, 3}, {0.0, 0.1, 0.1})), y).item(), -std::log(1e-8), 1e-9);
}

TEST(CrossEntropy, IgnoresNonTargetRates) {
    const std::vector<int> y{1, 2};
    const double a = ce_loss(ad::Value::constant(Tensor({2, 3}, {0.1, 0.4, 0.9, 0.8, 0.2, 0.6})), y).item();
    const double b = ce_loss(ad::Value::constant(Tensor({2, 3}, {0.7, 0.4, 0.0, 0.0, 1.0, 0.6})), y).item();
    EXPECT_EQ(a, b);
}

TEST(CrossEntropy, GradientsMatchFiniteDifferences) {
    for (auto seed : gen::seeds(20, 500)) {
        std::mt19937_64 rng(seed);
        const Tensor logits = gen::uniform({5, 4}, rng, -3, 3);
        const Tensor rates = gen::uniform({5, 4}, rng, 0.05, 1.0);
        const auto labels = gen::labels(5, 4, rng);
        EXPECT_LT(ad::finite_diff_check([&](const ad::Value& x) { return softmax_ce_loss(x, labels); }, logits), 1e-4);
        EXPECT_LT(ad::finite_diff_check([&](const ad::Value& x) { return ce_loss(x, labels); }, rates), 1e-4);
    }
}

TEST(TotalLoss, Examples) {
    EXPECT_DOUBLE_EQ(total_loss(1.0, 2.0, 0.1), 1.2);
    EXPECT_EQ(total_loss(1.5, 7.0, 0.0), 1.5);
    EXPECT_EQ(total_loss(0.0, 0.0, 0.1), 0.0);
    EXPECT_THROW(total_loss(1.0, 1.0, -0.1), std::invalid_argument);
    auto ce = ad::Value::constant(Tensor::scalar(0.75));
    auto s = ad::Value::constant(Tensor::scalar(2.0));
    EXPECT_EQ(total_loss(ce, s, 0.0).item(), 0.75);
}
