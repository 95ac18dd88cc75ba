#pragma once

// Convolutional spiking encoder:
//   conv(2->c1, 3x3, p1) -> LIF1 -> conv(c1->c2, 3x3, p1) -> LIF2 -> flatten
//   -> FC(hidden) -> LIF3 -> FC(classes) -> LIF_out
// run for every timestep with membrane state carried across steps.

#include <cstddef>
#include <functional>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "spikemem/autodiff.hpp"
#include "spikemem/lif.hpp"
#include "spikemem/spike_tensor.hpp"

namespace spikemem {

struct NamedParameter {
    std::string name;
    ad::Value value;
    bool trainable = true;
};

std::size_t parameter_count(std::span<const NamedParameter> params, bool trainable_only = false);

struct EncoderConfig {
    std::size_t timesteps = kTimesteps;
    std::size_t in_channels = kPolarities;
    std::size_t height = kSensorSize;
    std::size_t width = kSensorSize;
    std::size_t conv1_channels = 64;
    std::size_t conv2_channels = 128;
    std::size_t kernel = 3;
    std::size_t padding = 1;
    std::size_t hidden = 512;
    std::size_t classes = 10;
    // 2x2 average pool after LIF1 and LIF2. Off reproduces the literal block.
    bool pool = false;
    double dropout = 0.2;
    double init_gain = 1.0;
    LifParams lif;

    // Full-width network: 64/128 channels, no pooling.
    static EncoderConfig reference();
    // Narrow pooled variant that trains on one CPU core in minutes.
    static EncoderConfig desk();

    void validate() const;

    std::size_t conv1_out_h() const { return height + 2 * padding - kernel + 1; }
    std::size_t conv1_out_w() const { return width + 2 * padding - kernel + 1; }
    std::size_t conv2_in_h() const { return pool ? conv1_out_h() / 2 : conv1_out_h(); }
    std::size_t conv2_in_w() const { return pool ? conv1_out_w() / 2 : conv1_out_w(); }
    std::size_t conv2_out_h() const { return conv2_in_h() + 2 * padding - kernel + 1; }
    std::size_t conv2_out_w() const { return conv2_in_w() + 2 * padding - kernel + 1; }
    std::size_t flatten_h() const { return pool ? conv2_out_h() / 2 : conv2_out_h(); }
    std::size_t flatten_w() const { return pool ? conv2_out_w() / 2 : conv2_out_w(); }
    std::size_t flatten_size() const { return conv2_channels * flatten_h() * flatten_w(); }
};

struct EncoderParams {
    ad::Value conv1_w, conv1_b;
    ad::Value conv2_w, conv2_b;
    ad::Value fc_hidden_w, fc_hidden_b;
    ad::Value fc_out_w, fc_out_b;

    // Uniform(-g/sqrt(fan_in), g/sqrt(fan_in)) for weights and biases.
    static EncoderParams init(const EncoderConfig& config, std::mt19937_64& rng);

    std::vector<NamedParameter> named();
};

// Layer names used in spike accounting and energy reports.
inline const std::vector<std::string>& encoder_layer_names() {
    static const std::vector<std::string> names{"backbone.lif1", "backbone.lif2", "backbone.lif3",
                                                "backbone.lif_out"};
    return names;
}

struct LayerSpikeCounts {
    std::vector<std::string> layers;
    std::vector<double> spikes;   // summed over batch, neurons and timesteps
    std::vector<std::size_t> neurons;  // per sample

    double total() const;
};

struct EncoderOptions {
    bool training = false;
    std::mt19937_64* dropout_rng = nullptr;
    // Compute FC_out -> LIF_out. Disabled when another head consumes the features.
    bool readout = true;
    // Applied to the LIF3 spikes of each step before the readout layer.
    std::function<ad::Value(const ad::Value&)> feature_transform;
    // Observes every emitted spike tensor: (layer index, timestep, spikes).
    std::function<void(std::size_t, std::size_t, const Tensor&)> spike_hook;
};

struct EncoderOutput {
    std::vector<ad::Value> features;     // per step, [B, hidden] binary LIF3 spikes
    std::vector<ad::Value> transformed;  // per step, output of feature_transform (or features)
    std::vector<ad::Value> out_spikes;   // per step, [B, classes]; empty without readout
    LayerSpikeCounts counts;

    // Mean over steps of the LIF3 spikes, [B, hidden].
    ad::Value feature_rates() const;
};

EncoderOutput encoder_forward(std::span<const SpikeTensor> batch, EncoderParams& params,
                              const EncoderConfig& config, const EncoderOptions& options = {});

// Mean firing rate per class over the recorded steps.
ad::Value rate_output(std::span<const ad::Value> out_spikes);

}  // namespace spikemem
