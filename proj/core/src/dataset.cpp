#include "spikemem/dataset.hpp"

#include <algorithm>
#include <cstdlib>
#include <fstream>
#include <future>
#include <numeric>
#include <random>

namespace spikemem {

namespace fs = std::filesystem;

void Dataset::add(const SpikeTensor& sample) {
    if (sample_shape_.empty()) sample_shape_ = sample.data.shape();
    if (sample.data.shape() != sample_shape_) throw ShapeError("dataset", sample_shape_, sample.data.shape());
    std::vector<std::uint8_t> bits((sample.data.size() + 7) / 8, 0);
    for (std::size_t i = 0; i < sample.data.size(); ++i) {
        if (sample.data[i] != 0.0) bits[i / 8] = static_cast<std::uint8_t>(bits[i / 8] | (1u << (i % 8)));
    }
    packed_.push_back(std::move(bits));
    labels_.push_back(sample.label);
}

SpikeTensor Dataset::get(std::size_t i) const {
    const auto& bits = packed_.at(i);
    SpikeTensor out{Tensor(sample_shape_), labels_[i]};
    for (std::size_t k = 0; k < out.data.size(); ++k) out.data[k] = (bits[k / 8] >> (k % 8)) & 1u ? 1.0 : 0.0;
    return out;
}

Dataset Dataset::select(const std::vector<std::size_t>& indices) const {
    Dataset out(classes_);
    out.sample_shape_ = sample_shape_;
    for (std::size_t i : indices) {
        out.packed_.push_back(packed_.at(i));
        out.labels_.push_back(labels_[i]);
    }
    return out;
}

DatasetSplits make_synthetic_splits(const SyntheticSpec& spec, std::uint64_t seed) {
    DatasetSplits splits{Dataset(spec.synth.classes), Dataset(spec.synth.classes), Dataset(spec.synth.classes)};
    std::mt19937_64 rng(seed);
    auto fill = [&](Dataset& ds, std::size_t n) {
        for (std::size_t i = 0; i < n; ++i) {
            const auto label = static_cast<int>(i % spec.synth.classes);
            ds.add(synthesize(label, rng(), spec.synth));
        }
    };
    fill(splits.train, spec.train);
    fill(splits.val, spec.val);
    fill(splits.test, spec.test);
    return splits;
}

std::optional<fs::path> resolve_dataset_root(const std::optional<fs::path>& flag) {
    if (flag && !flag->empty()) return flag;
    if (const char* env = std::getenv(kDatasetRootEnv); env != nullptr && *env != '\0') return fs::path(env);
    return std::nullopt;
}

namespace {

SpikeTensor load_one(const fs::path& file, int label, const NmnistOptions& options, const fs::path& cache_key) {
    if (options.cache_dir) {
        const fs::path cached = *options.cache_dir / cache_key;
        if (std::ifstream in(cached, std::ios::binary); in) return read_tensor_cache(in);
        auto binned = bin_events(read_event_file(file), options.binning).tensor;
        binned.label = label;
        fs::create_directories(cached.parent_path());
        std::ofstream out(cached, std::ios::binary);
        write_tensor_cache(out, binned);
        return binned;
    }
    auto binned = bin_events(read_event_file(file), options.binning).tensor;
    binned.label = label;
    return binned;
}

}  // namespace

Dataset load_nmnist_split(const fs::path& root, const std::string& split, std::size_t limit,
                          const NmnistOptions& options, std::uint64_t seed) {
    const fs::path dir = root / split;
    if (!fs::is_directory(dir)) throw DatasetMissingError(root);
    std::vector<std::pair<fs::path, int>> files;
    for (int digit = 0; digit < 10; ++digit) {
        const fs::path class_dir = dir / std::to_string(digit);
        if (!fs::is_directory(class_dir)) throw DatasetMissingError(root);
        std::vector<fs::path> class_files;
        for (const auto& entry : fs::directory_iterator(class_dir)) {
            if (entry.is_regular_file() && entry.path().extension() == ".bin") class_files.push_back(entry.path());
        }
        std::sort(class_files.begin(), class_files.end());
        for (auto& f : class_files) files.emplace_back(std::move(f), digit);
    }
    if (files.empty()) throw DatasetMissingError(root);
    if (limit > 0 && limit < files.size()) {
        std::mt19937_64 rng(seed);
        std::shuffle(files.begin(), files.end(), rng);
        files.resize(limit);
    }

    // Workers fill disjoint slots; the result order never depends on scheduling.
    std::vector<SpikeTensor> loaded(files.size());
    const std::size_t workers = std::max<std::size_t>(1, options.workers);
    std::vector<std::future<void>> jobs;
    for (std::size_t w = 0; w < workers; ++w) {
        jobs.push_back(std::async(std::launch::async, [&, w] {
            for (std::size_t i = w; i < files.size(); i += workers) {
                const auto& [path, label] = files[i];
                const fs::path key = fs::path(split) / std::to_string(label) / (path.stem().string() + ".nmt");
                loaded[i] = load_one(path, label, options, key);
            }
        }));
    }
    for (auto& job : jobs) job.get();

    Dataset ds(10);
    for (const auto& t : loaded) ds.add(t);
    return ds;
}

DatasetSplits load_nmnist(const fs::path& root, const NmnistOptions& options, std::uint64_t seed) {
    if (options.val_fraction < 0.0 || options.val_fraction >= 1.0) {
        throw std::invalid_argument("nmnist: validation fraction must lie in [0, 1)");
    }
    Dataset full_train = load_nmnist_split(root, "Train", options.train_limit, options, seed);
    Dataset test = load_nmnist_split(root, "Test", options.test_limit, options, seed + 1);

    std::vector<std::size_t> order(full_train.size());
    std::iota(order.begin(), order.end(), 0);
    std::mt19937_64 rng(seed ^ 0x9E3779B97F4A7C15ull);
    std::shuffle(order.begin(), order.end(), rng);
    const auto n_val = static_cast<std::size_t>(options.val_fraction * static_cast<double>(order.size()));
    std::vector<std::size_t> val_idx(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(n_val));
    std::vector<std::size_t> train_idx(order.begin() + static_cast<std::ptrdiff_t>(n_val), order.end());
    return {full_train.select(train_idx), full_train.select(val_idx), std::move(test)};
}

}  // namespace spikemem
