#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "spikemem/events.hpp"
#include "spikemem/spike_tensor.hpp"

namespace spikemem {

inline constexpr const char* kDatasetRootEnv = "NMNIST_ROOT";

class DatasetMissingError : public std::runtime_error {
public:
    explicit DatasetMissingError(const std::filesystem::path& expected)
        : std::runtime_error("N-MNIST not found: expected " + expected.string() +
                             "/{Train,Test}/<digit>/*.bin (set --data-root or " + kDatasetRootEnv + ")"),
          path_(expected) {}
    const std::filesystem::path& path() const noexcept { return path_; }

private:
    std::filesystem::path path_;
};

// Samples kept bit-packed; expanded to SpikeTensor on access.
class Dataset {
public:
    Dataset() = default;
    explicit Dataset(std::size_t classes) : classes_(classes) {}

    void add(const SpikeTensor& sample);
    SpikeTensor get(std::size_t i) const;

    std::size_t size() const noexcept { return labels_.size(); }
    bool empty() const noexcept { return labels_.empty(); }
    std::size_t classes() const noexcept { return classes_; }
    const std::vector<int>& labels() const noexcept { return labels_; }
    int label(std::size_t i) const { return labels_.at(i); }

    // Subset in the given index order.
    Dataset select(const std::vector<std::size_t>& indices) const;

private:
    std::size_t classes_ = 0;
    Shape sample_shape_;
    std::vector<std::vector<std::uint8_t>> packed_;
    std::vector<int> labels_;
};

struct DatasetSplits {
    Dataset train;
    Dataset val;
    Dataset test;
};

struct SyntheticSpec {
    std::size_t train = 500;
    std::size_t val = 200;
    std::size_t test = 200;
    SynthOptions synth;
};

// Labels cycle through the classes; every sample has its own generator seed.
DatasetSplits make_synthetic_splits(const SyntheticSpec& spec, std::uint64_t seed);

// Explicit path wins over the environment variable.
std::optional<std::filesystem::path> resolve_dataset_root(const std::optional<std::filesystem::path>& flag);

struct NmnistOptions {
    std::size_t train_limit = 0;  // 0 = all
    std::size_t test_limit = 0;
    double val_fraction = 0.1;    // carved from the shuffled training split
    BinningOptions binning;
    std::optional<std::filesystem::path> cache_dir;  // NMT1 tensors keyed by split/digit/file
    std::size_t workers = 1;
};

// Files are discovered as <root>/<split>/<digit>/*.bin in sorted order.
Dataset load_nmnist_split(const std::filesystem::path& root, const std::string& split, std::size_t limit,
                          const NmnistOptions& options, std::uint64_t seed);
DatasetSplits load_nmnist(const std::filesystem::path& root, const NmnistOptions& options, std::uint64_t seed);

}  // namespace spikemem
