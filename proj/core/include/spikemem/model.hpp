#pragma once

// The five ablation configurations.
//   M1  encoder, classification loss only
//   M2  M1 + supervised contrastive term on the LIF3 rate features
//   M3  M2 + Hopfield retrieval on every step's LIF3 spikes before the readout,
//       queried with the LIF3 rate up to that step
//   M4  M2 + gated recurrence over the per-step LIF3 spikes, FC head on h_T
//   M5  M2 + Hopfield retrieval feeding the gated recurrence

#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <random>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "spikemem/autodiff.hpp"
#include "spikemem/encoder.hpp"
#include "spikemem/energy.hpp"
#include "spikemem/hgrn.hpp"
#include "spikemem/hopfield.hpp"
#include "spikemem/scl.hpp"

namespace spikemem {

enum class ModelId { M1, M2, M3, M4, M5 };

inline constexpr ModelId kAllModels[] = {ModelId::M1, ModelId::M2, ModelId::M3, ModelId::M4, ModelId::M5};

class UnknownModelError : public std::invalid_argument {
public:
    explicit UnknownModelError(const std::string& id)
        : std::invalid_argument("unknown model id '" + id + "'; valid ids: M1, M2, M3, M4, M5") {}
};

ModelId parse_model_id(const std::string& id);
std::string model_name(ModelId id);
std::string model_description(ModelId id);

struct ModelFeatures {
    bool scl = false;
    bool hopfield = false;
    bool hgrn = false;
};

ModelFeatures model_features(ModelId id);

// How spike-rate outputs become a classification loss.
//   rate           -sum log(max(rate_y, 1e-8)), target entries only
//   count_softmax  softmax cross-entropy with the output spike counts as logits
enum class CeMode { rate, count_softmax };

// What follows h_T in the recurrent models.
//   fc      logits = FC(h_T), softmax cross-entropy
//   fc_lif  FC(h_T) drives a LIF layer for T steps; its rates feed the CE mode above
enum class RecurrentHead { fc, fc_lif };

struct ModelConfig {
    EncoderConfig encoder = EncoderConfig::desk();
    std::size_t hgrn_hidden = 512;
    double lambda_scl = 0.1;
    double tau = 0.07;
    AnchorReduction scl_reduction = AnchorReduction::sum;
    CeMode ce_mode = CeMode::count_softmax;
    RecurrentHead recurrent_head = RecurrentHead::fc;
    std::size_t hopfield_k_max = kHopfieldMaxIterations;

    void validate() const;
};

nlohmann::json to_json(const ModelConfig& config);
ModelConfig model_config_from_json(const nlohmann::json& j, ModelConfig base = {});

struct ForwardOptions {
    bool training = false;
    std::mt19937_64* dropout_rng = nullptr;
    std::function<void(std::size_t, std::size_t, const Tensor&)> spike_hook;
};

struct ForwardResult {
    ad::Value scores;         // [B, classes]; argmax is the prediction
    bool scores_are_rates = false;  // rate code in [0, 1] rather than logits
    ad::Value feature_rates;  // [B, hidden], mean LIF3 spikes
    LayerSpikeCounts counts;  // encoder layers, lif_out replaced by the head LIF when present
    bool hopfield_passthrough = false;
};

struct LossParts {
    ad::Value total;
    ad::Value ce;
    ad::Value scl;  // empty when the model has no contrastive term
};

class HybridModel {
public:
    HybridModel(ModelId id, ModelConfig config, std::uint64_t seed);

    ModelId id() const noexcept { return id_; }
    const ModelConfig& config() const noexcept { return config_; }
    std::uint64_t seed() const noexcept { return seed_; }
    ModelFeatures features() const noexcept { return model_features(id_); }

    ForwardResult forward(std::span<const SpikeTensor> batch, const ForwardOptions& options = {});
    LossParts loss(const ForwardResult& result, std::span<const int> labels) const;

    // Every tensor that defines the model. The Hopfield weights appear as a
    // non-trainable entry for the memory models.
    std::vector<NamedParameter> parameters();
    std::vector<NamedParameter> trainable_parameters();
    std::size_t parameter_count(bool trainable_only = false);

    const HopfieldMemory& memory() const noexcept { return memory_; }
    // Per-neuron reference subtracted from features before binarization.
    // Empty means no centering.
    const std::vector<double>& memory_center() const noexcept { return memory_center_; }
    void set_memory(HopfieldMemory memory, std::vector<double> center = {});
    // Stores one pattern per class: the median-split binarization of the
    // class mean rate minus the mean over classes.
    void refresh_memory(std::span<const std::vector<double>> class_mean_rates);

    // Synapses driven by one spike of each reported layer, in counts order.
    std::vector<double> fan_outs() const;
    // Dense multiply-accumulates of one inference of the equivalent ANN.
    double ann_macs_per_inference() const;
    // Gate evaluations per inference (one per step) and the dense MACs behind them.
    std::optional<double> gate_ops_per_inference() const;
    std::optional<double> gate_dense_macs_per_inference() const;

private:
    ModelId id_;
    ModelConfig config_;
    std::uint64_t seed_;
    EncoderParams encoder_;
    std::optional<GateParams> gate_;
    ad::Value head_w_, head_b_;
    HopfieldMemory memory_;
    std::vector<double> memory_center_;
    ad::Value memory_weights_;  // mirrors memory_.weights() for parameter listings
};

HybridModel build_model(ModelId id, const ModelConfig& config, std::uint64_t seed);
HybridModel build_model(const std::string& id, const ModelConfig& config, std::uint64_t seed);

std::vector<int> predictions(const ad::Value& scores);

}  // namespace spikemem
