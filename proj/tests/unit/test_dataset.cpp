#include <gtest/gtest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <random>

#include "oracles.hpp"
#include "spikemem/dataset.hpp"

using namespace spikemem;
namespace fs = std::filesystem;

namespace {

oracle::Vec rate_vector(const SpikeTensor& s) {
    const std::size_t per_step = s.data.size() / s.timesteps();
    oracle::Vec r(per_step, 0.0);
    for (std::size_t i = 0; i < s.data.size(); ++i) r[i % per_step] += s.data[i];
    for (auto& v : r) v /= static_cast<double>(s.timesteps());
    return r;
}

// Nearest class-mean rate vector, fit on even indices and scored on odd ones.
double centroid_accuracy(std::size_t classes, std::size_t per_class, const SynthOptions& options) {
    std::vector<oracle::Vec> sums(classes);
    std::vector<std::size_t> counts(classes, 0);
    std::vector<std::pair<oracle::Vec, int>> held_out;
    for (std::size_t i = 0; i < classes * per_class; ++i) {
        const int y = static_cast<int>(i % classes);
        const auto r = rate_vector(synthesize(y, 5000 + i, options));
        if ((i / classes) % 2 == 0) {
            if (sums[y].empty()) sums[y].assign(r.size(), 0.0);
            for (std::size_t k = 0; k < r.size(); ++k) sums[y][k] += r[k];
            ++counts[y];
        } else {
            held_out.emplace_back(r, y);
        }
    }
    for (std::size_t c = 0; c < classes; ++c) {
        for (auto& v : sums[c]) v /= static_cast<double>(counts[c]);
    }
    std::size_t correct = 0;
    for (const auto& [r, y] : held_out) {
        std::size_t best = 0;
        for (std::size_t c = 1; c < classes; ++c) {
            if (oracle::dist(r, sums[c]) < oracle::dist(r, sums[best])) best = c;
        }
        correct += static_cast<int>(best) == y ? 1 : 0;
    }
    return static_cast<double>(correct) / static_cast<double>(held_out.size());
}

void write_events(const fs::path& file, const std::vector<DvsEvent>& events) {
    fs::create_directories(file.parent_path());
    std::ofstream out(file, std::ios::binary);
    const auto bytes = encode_events(events);
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
}

// Two files per digit in each split; digit d fires pixel (d, d).
fs::path fake_nmnist(const std::string& name) {
    const fs::path root = fs::temp_directory_path() / name;
    fs::remove_all(root);
    for (const char* split : {"Train", "Test"}) {
        for (int d = 0; d < 10; ++d) {
            for (int k = 0; k < 2; ++k) {
                const auto u = static_cast<std::uint8_t>(d);
                write_events(root / split / std::to_string(d) / (std::to_string(k) + ".bin"),
                             {{u, u, 0, 0}, {u, u, 1, static_cast<std::uint32_t>(1000 * (k + 1))}});
            }
        }
    }
    return root;
}

}  // namespace

TEST(Synthetic, ClassesAreSeparableByCentroid) {
    EXPECT_GT(centroid_accuracy(2, 100, {2, 0.01, true}), 0.95);
    EXPECT_GT(centroid_accuracy(4, 100, {}), 0.95);
}

TEST(Synthetic, NoiseOnlyIsChance) {
    const double acc = centroid_accuracy(4, 200, {4, 0.01, false});
    EXPECT_GT(acc, 0.15);
    EXPECT_LT(acc, 0.35);
}

TEST(Synthetic, SplitsHaveRequestedSizesAndCycleLabels) {
    const auto s = make_synthetic_splits({40, 12, 8, {}}, 3);
    EXPECT_EQ(s.train.size(), 40u);
    EXPECT_EQ(s.val.size(), 12u);
    EXPECT_EQ(s.test.size(), 8u);
    EXPECT_EQ(s.train.classes(), 4u);
    for (std::size_t i = 0; i < 8; ++i) EXPECT_EQ(s.train.label(i), static_cast<int>(i % 4));
    const auto again = make_synthetic_splits({40, 12, 8, {}}, 3);
    EXPECT_EQ(again.val.get(5).data, s.val.get(5).data);
    EXPECT_NE(s.train.get(0).data, s.val.get(0).data);
}

TEST(DatasetStore, PackedRoundTripAndSelect) {
    Dataset d(4);
    for (int y = 0; y < 4; ++y) {
        auto s = synthesize(y, 40 + static_cast<std::uint64_t>(y));
        s.label = y;
        d.add(s);
    }
    EXPECT_EQ(d.get(2).data, synthesize(2, 42).data);
    EXPECT_EQ(d.get(2).label, 2);
    const auto sub = d.select({3, 1});
    EXPECT_EQ(sub.labels(), (std::vector<int>{3, 1}));
    EXPECT_EQ(sub.get(0).data, d.get(3).data);
}

TEST(Nmnist, MissingRootNamesExpectedLayout) {
    const fs::path root = fs::temp_directory_path() / "spikemem_no_such_dataset";
    fs::remove_all(root);
    try {
        load_nmnist(root, {}, 0);
        FAIL();
    } catch (const DatasetMissingError& e) {
        EXPECT_EQ(e.path(), root);
        EXPECT_NE(std::string(e.what()).find("Train,Test"), std::string::npos);
    }
}

TEST(Nmnist, ResolveRootPrefersFlag) {
    ::setenv(kDatasetRootEnv, "/from/env", 1);
    EXPECT_EQ(resolve_dataset_root(fs::path("/from/flag")), fs::path("/from/flag"));
    EXPECT_EQ(resolve_dataset_root(std::nullopt), fs::path("/from/env"));
    ::unsetenv(kDatasetRootEnv);
    EXPECT_FALSE(resolve_dataset_root(std::nullopt).has_value());
}

TEST(Nmnist, LoadsLayoutAndCaches) {
    const auto root = fake_nmnist("spikemem_fake_nmnist");
    NmnistOptions opt;
    opt.val_fraction = 0.25;
    opt.cache_dir = root / "cache";
    const auto splits = load_nmnist(root, opt, 7);
    EXPECT_EQ(splits.train.size() + splits.val.size(), 20u);
    EXPECT_EQ(splits.val.size(), 5u);
    EXPECT_EQ(splits.test.size(), 20u);
    for (std::size_t i = 0; i < splits.test.size(); ++i) {
        const auto s = splits.test.get(i);
        const auto d = static_cast<std::size_t>(s.label);
        EXPECT_EQ(s.at(0, 0, d, d), 1.0);
        EXPECT_EQ(s.at(24, 1, d, d), 1.0);
        EXPECT_EQ(s.spike_count(), 2u);
    }
    // Second load reads the cache and must agree.
    const auto again = load_nmnist(root, opt, 7);
    for (std::size_t i = 0; i < again.train.size(); ++i) EXPECT_EQ(again.train.get(i).data, splits.train.get(i).data);
    EXPECT_TRUE(fs::exists(root / "cache"));
    fs::remove_all(root);
}
