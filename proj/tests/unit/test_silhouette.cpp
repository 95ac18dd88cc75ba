#include <gtest/gtest.h>

#include <cmath>
#include <random>
#include <sstream>

#include "gen.hpp"
#include "oracles.hpp"
#include "spikemem/silhouette.hpp"

using namespace spikemem;

namespace {

LabeledEmbedding embed(const oracle::Mat& x, std::vector<int> labels) {
    Tensor t({x.size(), x.front().size()});
    for (std::size_t i = 0; i < x.size(); ++i) {
        for (std::size_t j = 0; j < x[i].size(); ++j) t[i * x[i].size() + j] = x[i][j];
    }
    return {std::move(t), std::move(labels)};
}

// Points scattered around one random center per class.
oracle::Mat clustered(const std::vector<int>& labels, std::size_t d, double spread, std::mt19937_64& rng) {
    int classes = 0;
    for (int y : labels) classes = std::max(classes, y + 1);
    const auto centers = oracle::random_matrix(static_cast<std::size_t>(classes), d, rng);
    oracle::Mat x(labels.size());
    for (std::size_t i = 0; i < labels.size(); ++i) {
        const auto noise = gen::uniform_vec(d, rng, -spread, spread);
        x[i] = centers[static_cast<std::size_t>(labels[i])];
        for (std::size_t k = 0; k < d; ++k) x[i][k] += noise[k];
    }
    return x;
}

}  // namespace

TEST(Silhouette, OneDimensionalExample) {
    const auto e = embed({{0}, {1}, {10}, {11}}, {0, 0, 1, 1});
    EXPECT_NEAR(silhouette_sample(0, e), 9.5 / 10.5, 1e-15);
    EXPECT_NEAR(silhouette_sample(0, e), 0.90476, 1e-5);
    EXPECT_NEAR(silhouette_sample(1, e), 8.5 / 9.5, 1e-15);
    // Outer points sit at 0.90476 and inner points at 0.89474, so the mean is below either outer value.
    const double expected = oracle::mean(oracle::silhouette({{0}, {1}, {10}, {11}}, {0, 0, 1, 1}));
    EXPECT_NEAR(silhouette_score(e), expected, 1e-15);
    EXPECT_NEAR(silhouette_score(e), (9.5 / 10.5 + 8.5 / 9.5) / 2.0, 1e-15);
}

TEST(Silhouette, CoincidentClustersScoreZero) {
    const auto e = embed({{1, 2}, {1, 2}, {1, 2}, {1, 2}}, {0, 0, 1, 1});
    for (std::size_t i = 0; i < 4; ++i) EXPECT_EQ(silhouette_sample(i, e), 0.0);
}

TEST(Silhouette, SingletonScoresZero) {
    const auto e = embed({{0}, {1}, {5}}, {0, 0, 1});
    EXPECT_EQ(silhouette_sample(2, e), 0.0);
    EXPECT_GT(silhouette_sample(0, e), 0.0);
}

TEST(Silhouette, MatchesBruteForceOracle) {
    std::mt19937_64 rng(2024);
    const auto labels = gen::labels(200, 5, rng);
    const auto x = clustered(labels, 512, 0.8, rng);
    const auto e = embed(x, labels);
    const auto expected = oracle::silhouette(x, labels);
    const auto got = silhouette_samples(e);
    ASSERT_EQ(got.size(), expected.size());
    for (std::size_t i = 0; i < got.size(); ++i) EXPECT_NEAR(got[i], expected[i], 1e-9);
    EXPECT_NEAR(silhouette_score(e), oracle::mean(expected), 1e-9);
}

TEST(Silhouette, FarClustersApproachOne) {
    std::mt19937_64 rng(5);
    const auto labels = gen::labels(60, 3, rng);
    auto x = clustered(labels, 8, 0.001, rng);
    EXPECT_GT(silhouette_score(embed(x, labels)), 0.99);
}

TEST(Silhouette, SplitBlobScoresNearZero) {
    std::mt19937_64 rng(6);
    oracle::Mat x(200);
    for (auto& row : x) row = gen::uniform_vec(16, rng);
    const auto labels = gen::labels(200, 2, rng);
    EXPECT_LE(silhouette_score(embed(x, labels)), 0.1);
}

TEST(Silhouette, Errors) {
    EXPECT_THROW(silhouette_score(embed({{0}, {1}, {2}}, {4, 4, 4})), UndefinedMetricError);
    EXPECT_THROW(silhouette_score(embed({{0}}, {0})), UndefinedMetricError);
    const auto e = embed({{0}, {1}}, {0, 1});
    EXPECT_THROW(silhouette_sample(2, e), std::out_of_range);
}

TEST(SilhouetteProperties, BoundedAndInvariantToRigidMotionAndScale) {
    for (auto seed : gen::seeds(30, 70)) {
        std::mt19937_64 rng(seed);
        const std::size_t n = static_cast<std::size_t>(gen::integer(rng, 4, 60));
        const std::size_t d = static_cast<std::size_t>(gen::integer(rng, 2, 12));
        auto labels = gen::labels(n, gen::integer(rng, 2, 4), rng);
        labels[0] = 0;
        labels[1] = 1;
        const auto x = clustered(labels, d, 0.7, rng);
        const auto base = silhouette_samples(embed(x, labels));
        for (double s : base) {
            EXPECT_GE(s, -1.0);
            EXPECT_LE(s, 1.0);
        }

        // Rotation in a random coordinate plane, then a translation.
        const std::size_t p = static_cast<std::size_t>(gen::integer(rng, 0, static_cast<int>(d) - 2));
        const double angle = gen::uniform_vec(1, rng, -3.0, 3.0)[0];
        const auto shift = gen::uniform_vec(d, rng, -10.0, 10.0);
        const double factor = gen::uniform_vec(1, rng, 0.01, 100.0)[0];
        oracle::Mat moved = x, scaled = x;
        for (std::size_t i = 0; i < n; ++i) {
            const double a = x[i][p], b = x[i][p + 1];
            moved[i][p] = std::cos(angle) * a - std::sin(angle) * b;
            moved[i][p + 1] = std::sin(angle) * a + std::cos(angle) * b;
            for (std::size_t k = 0; k < d; ++k) {
                moved[i][k] += shift[k];
                scaled[i][k] *= factor;
            }
        }
        const auto rigid = silhouette_samples(embed(moved, labels));
        const auto zoom = silhouette_samples(embed(scaled, labels));
        for (std::size_t i = 0; i < n; ++i) {
            EXPECT_NEAR(rigid[i], base[i], 1e-9);
            EXPECT_NEAR(zoom[i], base[i], 1e-9);
        }
    }
}

TEST(Interpret, Bands) {
    EXPECT_EQ(interpret(0.687), SilhouetteBand::good);
    EXPECT_EQ(interpret(0.715), SilhouetteBand::excellent);
    EXPECT_EQ(interpret(0.25), SilhouetteBand::fair);
    EXPECT_EQ(interpret(0.2499), SilhouetteBand::weak);
    EXPECT_EQ(interpret(0.5), SilhouetteBand::good);
    EXPECT_EQ(interpret(0.7), SilhouetteBand::excellent);
    EXPECT_EQ(interpret(-1.0), SilhouetteBand::weak);
    EXPECT_THROW(interpret(1.01), std::out_of_range);
    EXPECT_THROW(interpret(std::nan("")), std::out_of_range);
    EXPECT_EQ(band_name(SilhouetteBand::excellent), "excellent");
}

TEST(SilhouetteReport, PerClassBreakdownAndCsv) {
    const auto e = embed({{0}, {1}, {10}, {11}, {12}}, {0, 0, 1, 1, 1});
    const auto r = silhouette_report(e);
    ASSERT_EQ(r.per_class.size(), 2u);
    EXPECT_EQ(r.per_class[0].label, 0);
    EXPECT_EQ(r.per_class[1].count, 3u);
    const auto s = silhouette_samples(e);
    EXPECT_NEAR(r.per_class[0].mean, (s[0] + s[1]) / 2.0, 1e-15);
    EXPECT_EQ(r.samples, 5u);
    std::ostringstream os;
    write_silhouette_csv(os, r);
    EXPECT_EQ(os.str().rfind("label,count,mean_silhouette", 0), 0u);
    EXPECT_NE(os.str().find("overall"), std::string::npos);
}
