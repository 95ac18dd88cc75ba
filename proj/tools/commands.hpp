#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "spikemem/dataset.hpp"
#include "spikemem/train.hpp"

namespace spikemem::cli {

enum ExitCode : int { kOk = 0, kUsage = 2, kMissingResource = 3, kUndefinedMetric = 4 };

struct DataConfig {
    DatasetKind kind = DatasetKind::synthetic;
    std::optional<std::filesystem::path> root;
    std::uint64_t seed = 7;  // synthetic generation and N-MNIST subsampling
    SyntheticSpec synthetic;
    NmnistOptions nmnist;
};

// Values resolved from defaults, then the JSON file, then --quick, then flags.
struct CliConfig {
    TrainConfig train;
    DataConfig data;
    std::filesystem::path out = "runs";
    std::vector<std::uint64_t> seeds{0};
    std::vector<ModelId> models;
};

// Raw flag values; unset optionals leave the lower layers untouched.
struct CliFlags {
    std::optional<std::filesystem::path> config;
    std::optional<std::filesystem::path> out;
    std::optional<std::string> dataset;
    std::optional<std::filesystem::path> data_root;
    std::vector<std::uint64_t> seeds;
    std::vector<std::string> models;
    std::optional<std::size_t> epochs;
    std::optional<std::size_t> batch_size;
    std::optional<std::size_t> train_samples;
    std::optional<std::size_t> val_samples;
    std::optional<std::size_t> test_samples;
    bool quick = false;
    bool reference_encoder = false;
    bool no_pool = false;
};

// Small enough that all five configurations train in a few minutes on one core.
void apply_quick(CliConfig& config);
CliConfig resolve_config(const CliFlags& flags);
DataConfig data_config_from_json(const nlohmann::json& j, DataConfig base);

DatasetSplits load_data(const DataConfig& data);

std::filesystem::path run_dir(const std::filesystem::path& out, ModelId model, std::uint64_t seed);

int cmd_train(const CliConfig& config, std::ostream& log);
int cmd_ablate(const CliConfig& config, std::ostream& log);

struct ProfileFlags {
    bool golden = false;
    std::optional<std::filesystem::path> checkpoint;
};
int cmd_profile(const CliConfig& config, const ProfileFlags& flags, std::ostream& log);

struct ClusterFlags {
    std::optional<std::filesystem::path> checkpoint;
    std::size_t max_samples = 2000;
    std::string split = "val";
};
int cmd_cluster(const CliConfig& config, const ClusterFlags& flags, std::ostream& log);

}  // namespace spikemem::cli
