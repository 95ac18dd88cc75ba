#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <iosfwd>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "spikemem/dataset.hpp"
#include "spikemem/energy.hpp"
#include "spikemem/events.hpp"
#include "spikemem/model.hpp"
#include "spikemem/silhouette.hpp"

namespace spikemem {

enum class DatasetKind { synthetic, nmnist };

struct TrainConfig {
    ModelId model_id = ModelId::M1;
    ModelConfig model;  // architecture, lambda_scl, tau, dropout (model.encoder.dropout)
    double lr_max = 1e-3;
    double lr_min = 0.0;
    double t_max = 30.0;  // cosine period in epochs
    double weight_decay = 1e-4;
    double clip_norm = 1.0;
    std::size_t patience = 5;
    bool early_stopping = true;
    std::size_t batch_size = 64;
    std::size_t epochs = 30;
    std::uint64_t seed = 0;
    DatasetKind dataset = DatasetKind::synthetic;
    bool augment = true;
    int jitter_ms = 2;
    int shift_px = 2;
    double bin_ms = 12.0;  // duration of one time bin, for converting jitter into bins
    // 2 puts every sample in its batch twice, independently augmented, so each
    // anchor has its other view as a positive. Only the contrastive models use it.
    std::size_t scl_views = 1;
    std::size_t silhouette_max_samples = 2000;

    void validate() const;
};

nlohmann::json to_json(const TrainConfig& config);
// Keys absent from `j` keep their value from `base`; unknown keys are rejected.
TrainConfig train_config_from_json(const nlohmann::json& j, TrainConfig base = {});

class NonFiniteLossError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct EpochRecord {
    std::size_t epoch = 0;  // 1-based
    double train_loss = 0.0;  // mean per-sample total loss
    double train_ce = 0.0;
    double train_scl = 0.0;
    double val_accuracy = 0.0;  // percent
    double lr = 0.0;
    double seconds = 0.0;
};

struct EvalResult {
    double accuracy = 0.0;  // percent
    std::vector<std::vector<std::size_t>> confusion;  // [true][predicted]
    LayerSpikeCounts counts;
    std::size_t samples = 0;
    LabeledEmbedding features;  // filled only when requested
};

struct RunRecord {
    std::string model;
    std::uint64_t seed = 0;
    std::vector<EpochRecord> epochs;
    double best_val_accuracy = 0.0;
    std::size_t best_epoch = 0;
    double test_accuracy = 0.0;
    std::vector<std::vector<std::size_t>> confusion;
    std::optional<SilhouetteReport> silhouette;
    EnergyReport energy;
    std::size_t parameters = 0;
    std::size_t trainable_parameters = 0;
    std::size_t hopfield_patterns = 0;
    bool straight_through = false;  // Hopfield sign path trained with a straight-through gradient
    bool early_stopped = false;
    double wall_seconds = 0.0;
};

nlohmann::json to_json(const RunRecord& record);
// Columns: epoch,train_loss,train_ce,train_scl,val_accuracy,lr,seconds
void write_epoch_csv(std::ostream& os, const RunRecord& record);

struct TrainHooks {
    std::function<void(const EpochRecord&)> on_epoch;
};

struct TrainResult {
    RunRecord record;
    HybridModel model;  // parameters and memory of the best validation epoch
};

EvalResult evaluate(HybridModel& model, const Dataset& data, std::size_t batch_size, bool collect_features = false);

// Feature rates of at most `max_samples` seeded-random samples of `data`.
LabeledEmbedding embed(HybridModel& model, const Dataset& data, std::size_t max_samples, std::uint64_t seed,
                       std::size_t batch_size = 64);

// Energy report for the spike counts of an evaluation pass.
EnergyReport energy_report(const HybridModel& model, const EvalResult& eval, const EnergyModel& energy = {});

TrainResult train(const TrainConfig& config, const DatasetSplits& data, const TrainHooks& hooks = {});

}  // namespace spikemem
