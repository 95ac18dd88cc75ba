#include <gtest/gtest.h>

#include <algorithm>
#include <random>

#include "gen.hpp"
#include "oracles.hpp"
#include "spikemem/hopfield.hpp"

using namespace spikemem;
namespace ad = spikemem::ad;

namespace {

oracle::Mat weights_of(const HopfieldMemory& m) {
    const std::size_t n = m.dim();
    oracle::Mat w(n, oracle::Vec(n));
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < n; ++j) w[i][j] = m.weights()[i * n + j];
    }
    return w;
}

}  // namespace

TEST(Hopfield, StoreMatchesOuterProductRule) {
    std::mt19937_64 rng(1);
    for (std::size_t p = 1; p <= 6; ++p) {
        std::vector<Bipolar> patterns;
        for (std::size_t k = 0; k < p; ++k) patterns.push_back(gen::bipolar(64, rng));
        const auto mem = HopfieldMemory::store(patterns);
        EXPECT_EQ(weights_of(mem), oracle::hopfield_weights(patterns));
        for (std::size_t i = 0; i < 64; ++i) {
            EXPECT_EQ(mem.weights()[i * 64 + i], 0.0);
            for (std::size_t j = 0; j < 64; ++j) EXPECT_EQ(mem.weights()[i * 64 + j], mem.weights()[j * 64 + i]);
        }
    }
}

TEST(Hopfield, StoreRejectsBadPatterns) {
    EXPECT_THROW(HopfieldMemory::store(std::vector<Bipolar>{}), std::invalid_argument);
    EXPECT_THROW(HopfieldMemory::store(std::vector<Bipolar>{{1, 0, -1}}), std::invalid_argument);
    EXPECT_THROW(HopfieldMemory::store(std::vector<Bipolar>{{1, -1}, {1, -1, 1}}), ShapeError);
}

TEST(Hopfield, StoredPatternIsImmediateFixedPoint) {
    const Bipolar xi{1, -1, -1, 1};
    const auto mem = HopfieldMemory::store(std::vector<Bipolar>{xi});
    const auto trace = hopfield_update(mem, xi);
    EXPECT_TRUE(trace.converged);
    EXPECT_EQ(trace.iterations, 1u);
    EXPECT_EQ(trace.final_state(), xi);
}

TEST(Hopfield, ComplementIsSpuriousAttractor) {
    const Bipolar xi{1, -1, -1, 1, 1, 1, -1, -1};
    const auto mem = HopfieldMemory::store(std::vector<Bipolar>{xi});
    Bipolar neg(xi.size());
    for (std::size_t i = 0; i < xi.size(); ++i) neg[i] = -xi[i];
    EXPECT_EQ(hopfield_update(mem, neg).final_state(), neg);
}

TEST(Hopfield, OneBitCorruptionRetrieves) {
    std::mt19937_64 rng(2);
    const auto xi = gen::bipolar(64, rng);
    const auto mem = HopfieldMemory::store(std::vector<Bipolar>{xi});
    for (std::size_t flip = 0; flip < 64; ++flip) {
        auto h = xi;
        h[flip] = -h[flip];
        const auto trace = hopfield_update(mem, h);
        EXPECT_EQ(trace.final_state(), xi);
        EXPECT_EQ(trace.final_state(), oracle::hopfield_retrieve(oracle::hopfield_weights({xi}), h, 5));
    }
}

TEST(Hopfield, EnergyExamples) {
    const Bipolar xi{1, 1, 1, 1};
    const auto mem = HopfieldMemory::store(std::vector<Bipolar>{xi});
    EXPECT_EQ(energy(mem, xi), -6.0);
    const Bipolar orth{1, -1, 1, -1};
    EXPECT_EQ(energy(mem, orth), 2.0);
}

TEST(Hopfield, EnergyMatchesQuadraticFormOracle) {
    std::mt19937_64 rng(3);
    std::vector<Bipolar> patterns{gen::bipolar(64, rng), gen::bipolar(64, rng)};
    const auto mem = HopfieldMemory::store(patterns);
    const auto w = oracle::hopfield_weights(patterns);
    for (int trial = 0; trial < 20; ++trial) {
        const auto h = gen::bipolar(64, rng);
        EXPECT_NEAR(energy(mem, h), oracle::hopfield_energy(w, h), 1e-9);
    }
}

// For synchronous updates the quantity that provably never increases is the
// two-step form L_k = -h_k^T W h_{k-1}: L_{k+1} - L_k = -(h_{k+1} - h_{k-1})^T W h_k,
// and every unit that changes does so toward the sign of (W h_k)_i.
TEST(HopfieldProperties, TwoStepLyapunovNeverIncreasesAlongTraces) {
    std::mt19937_64 rng(4);
    for (int trial = 0; trial < 1000; ++trial) {
        const std::size_t n = static_cast<std::size_t>(gen::integer(rng, 8, 64));
        const std::size_t p = static_cast<std::size_t>(gen::integer(rng, 1, 6));
        std::vector<Bipolar> patterns;
        for (std::size_t k = 0; k < p; ++k) patterns.push_back(gen::bipolar(n, rng));
        const auto mem = HopfieldMemory::store(patterns);
        const auto w = weights_of(mem);
        const auto trace = hopfield_update(mem, gen::bipolar(n, rng));
        ASSERT_EQ(trace.energies.size(), trace.states.size());
        EXPECT_LE(trace.iterations, 5u);
        auto lyapunov = [&](std::size_t k) {
            double v = 0.0;
            for (std::size_t i = 0; i < n; ++i) v -= trace.states[k][i] * oracle::dot(w[i], trace.states[k - 1]);
            return v;
        };
        for (std::size_t k = 2; k < trace.states.size(); ++k) {
            EXPECT_LE(lyapunov(k), lyapunov(k - 1) + 1e-9) << "trial " << trial;
        }
    }
}

// The plain energy is only guaranteed to descend under one-unit-at-a-time
// updates. A synchronous step can raise it when several units flip together.
TEST(HopfieldProperties, SynchronousStepCanRaiseEnergy) {
    const std::vector<Bipolar> patterns{{1, -1, -1}, {1, 1, 1}, {-1, 1, -1}, {-1, 1, -1}, {-1, 1, 1}};
    const auto mem = HopfieldMemory::store(patterns);
    const auto trace = hopfield_update(mem, Bipolar{-1, -1, -1});
    ASSERT_GE(trace.states.size(), 2u);
    EXPECT_EQ(trace.states[1], (Bipolar{1, 1, -1}));
    EXPECT_EQ(trace.energies[0], 1.0);
    EXPECT_EQ(trace.energies[1], 5.0);
    EXPECT_EQ(trace.energies[1], oracle::hopfield_energy(weights_of(mem), trace.states[1]));
}

// Starting from a stored pattern with one unit flipped, the single corrective
// step lowers the energy, and the trace then stays put.
TEST(HopfieldProperties, EnergyDescendsFromOneBitCorruptions) {
    std::mt19937_64 rng(6);
    for (int trial = 0; trial < 100; ++trial) {
        const std::size_t p = static_cast<std::size_t>(gen::integer(rng, 1, 3));
        std::vector<Bipolar> patterns;
        for (std::size_t k = 0; k < p; ++k) patterns.push_back(gen::bipolar(64, rng));
        const auto mem = HopfieldMemory::store(patterns);
        for (const auto& xi : patterns) {
            for (std::size_t i = 0; i < 64; ++i) {
                Bipolar q = xi;
                q[i] = -q[i];
                const auto trace = hopfield_update(mem, q);
                EXPECT_EQ(trace.final_state(), xi);
                for (std::size_t k = 1; k < trace.energies.size(); ++k) {
                    EXPECT_LE(trace.energies[k], trace.energies[k - 1] + 1e-9) << "trial " << trial;
                }
            }
        }
    }
}

TEST(HopfieldProperties, StoredPatternsAreFixedPoints) {
    std::mt19937_64 rng(5);
    for (int trial = 0; trial < 100; ++trial) {
        for (std::size_t p = 1; p <= 3; ++p) {
            std::vector<Bipolar> patterns;
            for (std::size_t k = 0; k < p; ++k) patterns.push_back(gen::bipolar(64, rng));
            const auto mem = HopfieldMemory::store(patterns);
            for (const auto& xi : patterns) EXPECT_EQ(hopfield_update(mem, xi).final_state(), xi);
        }
    }
}

TEST(HopfieldProperties, MostStoredPatternsAreFixedPointsUpToTenPercentLoad) {
    // Crosstalk from random patterns can flip a unit at P = 6, N = 64 (about
    // 1% of patterns), so the larger loads are checked as a rate.
    std::mt19937_64 rng(15);
    for (std::size_t p = 4; p <= 6; ++p) {
        std::size_t fixed = 0, total = 0;
        for (int trial = 0; trial < 100; ++trial) {
            std::vector<Bipolar> patterns;
            for (std::size_t k = 0; k < p; ++k) patterns.push_back(gen::bipolar(64, rng));
            const auto mem = HopfieldMemory::store(patterns);
            for (const auto& xi : patterns) {
                fixed += hopfield_update(mem, xi).final_state() == xi ? 1 : 0;
                ++total;
            }
        }
        EXPECT_GE(static_cast<double>(fixed) / static_cast<double>(total), 0.95) << "P=" << p;
    }
}

TEST(HopfieldProperties, SignAntisymmetry) {
    std::mt19937_64 rng(6);
    for (int trial = 0; trial < 200; ++trial) {
        std::vector<Bipolar> patterns{gen::bipolar(32, rng), gen::bipolar(32, rng), gen::bipolar(32, rng)};
        const auto mem = HopfieldMemory::store(patterns);
        const auto h = gen::bipolar(32, rng);
        Bipolar neg(h.size());
        for (std::size_t i = 0; i < h.size(); ++i) neg[i] = -h[i];
        const auto a = hopfield_update(mem, h);
        const auto b = hopfield_update(mem, neg);
        // (W h)_i sums P terms of N - 1 entries each; with N even and P odd it is odd,
        // hence never zero, so sign(0) never breaks the symmetry.
        ASSERT_EQ(a.states.size(), b.states.size());
        for (std::size_t k = 0; k < a.states.size(); ++k) {
            for (std::size_t i = 0; i < h.size(); ++i) EXPECT_EQ(a.states[k][i], -b.states[k][i]);
        }
    }
}

TEST(HopfieldProperties, SynchronousRetrievalMatchesOracle) {
    std::mt19937_64 rng(7);
    for (int trial = 0; trial < 200; ++trial) {
        std::vector<Bipolar> patterns{gen::bipolar(40, rng), gen::bipolar(40, rng)};
        const auto mem = HopfieldMemory::store(patterns);
        const auto h = gen::bipolar(40, rng);
        EXPECT_EQ(hopfield_update(mem, h).final_state(),
                  oracle::hopfield_retrieve(oracle::hopfield_weights(patterns), h, 5));
    }
}

TEST(Binarize, Examples) {
    EXPECT_EQ(binarize(std::vector<double>{1, 2, 3, 4}), (Bipolar{-1, -1, 1, 1}));
    EXPECT_EQ(binarize(std::vector<double>{5, 5, 5}), (Bipolar{-1, -1, -1}));
}

TEST(Binarize, HalfPositiveWithoutTies) {
    std::mt19937_64 rng(8);
    for (int trial = 0; trial < 100; ++trial) {
        const std::size_t n = 2 * static_cast<std::size_t>(gen::integer(rng, 1, 256));
        const auto h = gen::uniform_vec(n, rng);
        const auto b = binarize(h);
        std::size_t pos = 0;
        for (double v : b) pos += v > 0 ? 1 : 0;
        EXPECT_EQ(pos, n / 2);
    }
}

TEST(HopfieldLayer, EmptyMemoryPassesThrough) {
    const HopfieldMemory mem(4);
    const std::vector<double> h{0.1, 0.5, 0.0, 0.9};
    const auto r = hopfield_layer_forward(h, mem);
    EXPECT_TRUE(r.passthrough);
    EXPECT_EQ(r.output, h);
}

TEST(HopfieldLayer, PreimageOfStoredPatternIsFixed) {
    // Median-split binarization recovers a pattern from its preimage only when
    // exactly half the units are active, so draw a random balanced pattern.
    std::mt19937_64 rng(9);
    Bipolar xi(64, -1.0);
    std::fill(xi.begin(), xi.begin() + 32, 1.0);
    std::shuffle(xi.begin(), xi.end(), rng);
    const auto mem = HopfieldMemory::store(std::vector<Bipolar>{xi, gen::bipolar(64, rng)});
    std::vector<double> h(64);
    for (std::size_t i = 0; i < 64; ++i) h[i] = xi[i] > 0 ? 0.8 : 0.0;
    const auto r = hopfield_layer_forward(h, mem);
    EXPECT_FALSE(r.passthrough);
    ASSERT_EQ(r.output.size(), h.size());
    for (std::size_t i = 0; i < h.size(); ++i) EXPECT_NEAR(r.output[i], h[i], 1e-12);
}

TEST(HopfieldLayer, CorruptedPreimageRetrievesCleanPattern) {
    // Balanced pattern so a flipped entry still sits on the right side of the median.
    Bipolar xi(64);
    for (std::size_t i = 0; i < 64; ++i) xi[i] = (i * 7) % 64 < 32 ? 1.0 : -1.0;
    const auto mem = HopfieldMemory::store(std::vector<Bipolar>{xi});
    std::vector<double> h(64);
    for (std::size_t i = 0; i < 64; ++i) h[i] = xi[i] > 0 ? 0.9 + 0.001 * static_cast<double>(i) : 0.0;
    // Raise one inactive unit and drop one active unit.
    std::size_t off = 0, on = 0;
    while (xi[off] > 0) ++off;
    while (xi[on] < 0) ++on;
    h[off] = 0.95;
    h[on] = 0.0;
    const auto r = hopfield_layer_forward(h, mem);
    double mass = 0.0;
    for (double v : h) mass += v;
    for (std::size_t i = 0; i < 64; ++i) EXPECT_NEAR(r.output[i], xi[i] > 0 ? mass / 32.0 : 0.0, 1e-12);
}

TEST(HopfieldLayer, BatchMatchesRowWise) {
    std::mt19937_64 rng(10);
    std::vector<Bipolar> patterns{gen::bipolar(32, rng), gen::bipolar(32, rng), gen::bipolar(32, rng)};
    const auto mem = HopfieldMemory::store(patterns);
    const Tensor h = gen::uniform({6, 32}, rng, 0.0, 1.0);
    const Tensor out = hopfield_layer_forward_batch(h, mem);
    for (std::size_t r = 0; r < 6; ++r) {
        const auto row = hopfield_layer_forward(std::span<const double>(h.data() + r * 32, 32), mem).output;
        for (std::size_t i = 0; i < 32; ++i) EXPECT_DOUBLE_EQ(out[r * 32 + i], row[i]);
    }
}

TEST(HopfieldLayer, ActivityIsPreserved) {
    std::mt19937_64 rng(11);
    const auto mem = HopfieldMemory::store(std::vector<Bipolar>{gen::bipolar(32, rng), gen::bipolar(32, rng)});
    const Tensor h = gen::uniform({4, 32}, rng, 0.0, 1.0);
    const Tensor out = hopfield_layer_forward_batch(h, mem);
    for (std::size_t r = 0; r < 4; ++r) {
        double a = 0.0, b = 0.0;
        for (std::size_t i = 0; i < 32; ++i) {
            a += h[r * 32 + i];
            b += out[r * 32 + i];
        }
        EXPECT_NEAR(a, b, 1e-12);
    }
}

TEST(HopfieldLayer, StraightThroughGradient) {
    std::mt19937_64 rng(12);
    const auto mem = HopfieldMemory::store(std::vector<Bipolar>{gen::bipolar(16, rng)});
    auto h = ad::Value::parameter(gen::uniform({2, 16}, rng, 0.0, 1.0));
    auto w = gen::uniform({2, 16}, rng);
    auto y = hopfield_layer(h, mem);
    ad::backward(ad::sum(ad::mul(y, ad::Value::constant(w))));
    EXPECT_EQ(h.grad(), w);
}

TEST(HopfieldLayer, SeparateQueryDrivesRetrieval) {
    std::mt19937_64 rng(13);
    const auto a = gen::bipolar(32, rng);
    // Balanced, so binarizing the +-1 query reproduces it exactly.
    Bipolar b(32);
    for (std::size_t i = 0; i < 32; ++i) b[i] = (i * 5) % 32 < 16 ? 1.0 : -1.0;
    const auto mem = HopfieldMemory::store(std::vector<Bipolar>{a, b});
    Tensor query({1, 32}), h({1, 32});
    for (std::size_t i = 0; i < 32; ++i) {
        query[i] = b[i] > 0 ? 1.0 : -1.0;
        h[i] = a[i] > 0 ? 0.5 : 0.0;
    }
    const Tensor out = hopfield_layer_forward_batch(query, h, mem);
    std::size_t active_b = 0;
    for (double v : b) active_b += v > 0 ? 1 : 0;
    double mass = 0.0;
    for (double v : h.values()) mass += v;
    for (std::size_t i = 0; i < 32; ++i) EXPECT_DOUBLE_EQ(out[i], b[i] > 0 ? mass / static_cast<double>(active_b) : 0.0);
}
