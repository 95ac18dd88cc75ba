#pragma once

// Checkpoint container, little-endian throughout:
//
//   bytes 0-7   magic "SPKMCKPT"
//   u32         format version (1)
//   u64         manifest length L
//   L bytes     UTF-8 JSON manifest
//   payload     concatenated f64 blobs in manifest order
//
// The manifest records the model id, seed, model configuration, free-form
// training hyperparameters and, per blob, its name, shape and payload offset
// (in doubles). Hopfield memories add "hopfield.patterns" [P, dim] and the
// query reference "hopfield.center" [dim] next to the "hopfield.weights"
// parameter blob.

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <stdexcept>
#include <string>

#include <nlohmann/json.hpp>

#include "spikemem/model.hpp"

namespace spikemem {

inline constexpr char kCheckpointMagic[8] = {'S', 'P', 'K', 'M', 'C', 'K', 'P', 'T'};
inline constexpr std::uint32_t kCheckpointVersion = 1;

class CheckpointError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

void save_checkpoint(std::ostream& os, HybridModel& model, const nlohmann::json& hyperparameters = {});
void save_checkpoint(const std::filesystem::path& path, HybridModel& model,
                     const nlohmann::json& hyperparameters = {});

struct LoadedCheckpoint {
    HybridModel model;
    nlohmann::json manifest;
};

LoadedCheckpoint load_checkpoint(std::istream& is);
LoadedCheckpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace spikemem
