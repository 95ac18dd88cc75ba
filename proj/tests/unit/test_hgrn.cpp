#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "gen.hpp"
#include "oracles.hpp"
#include "spikemem/hgrn.hpp"

using namespace spikemem;
namespace ad = spikemem::ad;

namespace {

oracle::Mat rows_of(const Tensor& t) {
    oracle::Mat m(t.shape()[0], oracle::Vec(t.shape()[1]));
    for (std::size_t i = 0; i < m.size(); ++i) {
        for (std::size_t j = 0; j < m[i].size(); ++j) m[i][j] = t[i * m[i].size() + j];
    }
    return m;
}

oracle::GateWeights weights_of(const GateParams& p) {
    auto vec = [](const ad::Value& v) { return oracle::Vec(v.data().values().begin(), v.data().values().end()); };
    return {rows_of(p.w_f.data()), rows_of(p.w_u.data()), rows_of(p.w_c.data()),
            vec(p.b_f),            vec(p.b_u),            vec(p.b_c)};
}

// Pointer-to-member list used to perturb one parameter at a time.
constexpr ad::Value GateParams::*kMembers[] = {&GateParams::w_f, &GateParams::b_f, &GateParams::w_u,
                                               &GateParams::b_u, &GateParams::w_c, &GateParams::b_c};

// Loss = sum(h_T * probe) so every output coordinate contributes a distinct weight.
ad::Value probe_loss(std::span<const ad::Value> xs, const GateParams& p, const Tensor& probe) {
    return ad::sum(ad::mul(hgrn_sequence(xs, p), ad::Value::constant(probe)));
}

}  // namespace

TEST(Hgrn, ZeroParamsHalveTheCell) {
    const auto p = GateParams::zeros(3, 2);
    GateState s{ad::Value::constant(Tensor({1, 3}, {1, 1, 1})), ad::Value::constant(Tensor({1, 3}))};
    const auto next = hgrn_step(s, ad::Value::constant(Tensor({1, 2}, {0.4, -0.2})), p);
    // f = u = 1/2 and the candidate is tanh(0) = 0.
    for (std::size_t k = 0; k < 3; ++k) {
        EXPECT_EQ(next.c.data()[k], 0.5);
        EXPECT_EQ(next.h.data()[k], std::tanh(0.5));
    }
}

TEST(Hgrn, SaturatedGatesHoldTheCell) {
    auto p = GateParams::zeros(2, 2);
    p.b_f.mutable_data().fill(60.0);
    p.b_u.mutable_data().fill(-60.0);
    p.b_c.mutable_data().fill(3.0);
    GateState s{ad::Value::constant(Tensor({1, 2}, {0.3, -0.8})), ad::Value::constant(Tensor({1, 2}))};
    for (int t = 0; t < 10; ++t) s = hgrn_step(s, ad::Value::constant(Tensor({1, 2}, {1.0, -1.0})), p);
    EXPECT_NEAR(s.c.data()[0], 0.3, 1e-12);
    EXPECT_NEAR(s.c.data()[1], -0.8, 1e-12);
}

TEST(Hgrn, MatchesScalarOracle) {
    for (auto seed : gen::seeds(20, 40)) {
        std::mt19937_64 rng(seed);
        const std::size_t hd = 5, in = 4, batch = 3;
        const auto p = GateParams::init(hd, in, rng);
        const auto w = weights_of(p);
        std::vector<ad::Value> xs;
        for (int t = 0; t < 25; ++t) xs.push_back(ad::Value::constant(gen::uniform({batch, in}, rng, 0.0, 1.0)));
        const Tensor h = hgrn_sequence(xs, p).data();
        for (std::size_t b = 0; b < batch; ++b) {
            oracle::Vec c(hd, 0.0), hh(hd, 0.0);
            for (const auto& x : xs) {
                const oracle::Vec row(x.data().data() + b * in, x.data().data() + (b + 1) * in);
                oracle::gate_step(c, hh, row, w);
            }
            for (std::size_t k = 0; k < hd; ++k) EXPECT_NEAR(h[b * hd + k], hh[k], 1e-12);
        }
    }
}

TEST(Hgrn, StateStaysBounded) {
    std::mt19937_64 rng(3);
    auto p = GateParams::init(8, 6, rng);
    GateState s = GateState::zeros(2, 8);
    for (int t = 0; t < 200; ++t) {
        s = hgrn_step(s, ad::Value::constant(gen::uniform({2, 6}, rng, -5.0, 5.0)), p);
        for (double v : s.h.data().values()) EXPECT_LT(std::abs(v), 1.0);
        // |c_t| <= |c_{t-1}| + 1, so the cell grows at most linearly.
        for (double v : s.c.data().values()) EXPECT_LE(std::abs(v), t + 1.0);
    }
}

TEST(Hgrn, RejectsBadInput) {
    const auto p = GateParams::zeros(3, 2);
    EXPECT_THROW(hgrn_sequence(std::span<const ad::Value>{}, p), std::invalid_argument);
    const auto x = ad::Value::constant(Tensor({1, 3}));
    EXPECT_THROW(hgrn_step(GateState::zeros(1, 3), x, p), ShapeError);
    EXPECT_THROW(hgrn_step(GateState::zeros(2, 3), ad::Value::constant(Tensor({1, 2})), p), ShapeError);
}

class HgrnGradient : public ::testing::TestWithParam<int> {};

TEST_P(HgrnGradient, MatchesFiniteDifferences) {
    const int steps = GetParam();
    for (auto seed : gen::seeds(20, 900)) {
        std::mt19937_64 rng(seed);
        const std::size_t hd = 4, in = 3, batch = 2;
        const auto base = GateParams::init(hd, in, rng);
        std::vector<ad::Value> xs;
        for (int t = 0; t < steps; ++t) xs.push_back(ad::Value::constant(gen::uniform({batch, in}, rng, 0.0, 1.0)));
        const Tensor probe = gen::uniform({batch, hd}, rng);

        for (auto member : kMembers) {
            auto f = [&](const ad::Value& v) {
                GateParams p = base;
                p.*member = v;
                return probe_loss(xs, p, probe);
            };
            EXPECT_LT(ad::finite_diff_check(f, (base.*member).data()), 1e-4) << "seed " << seed;
        }
        // Gradient with respect to the inputs as well.
        auto fx = [&](const ad::Value& v) {
            auto ys = xs;
            ys.front() = v;
            return probe_loss(ys, base, probe);
        };
        EXPECT_LT(ad::finite_diff_check(fx, xs.front().data()), 1e-4) << "seed " << seed;
    }
}

INSTANTIATE_TEST_SUITE_P(Steps, HgrnGradient, ::testing::Values(1, 25));
