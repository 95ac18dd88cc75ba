#pragma once

// Spike-driven energy accounting.
//
// SNN energy = sum over layers of SynOps * E_synop, where a layer's SynOps
// are its emitted spikes times the synapses each spike drives downstream.
// The dense-network comparison prices every multiply-accumulate at E_MAC.

#include <cstddef>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

namespace spikemem {

inline constexpr double kPicojoule = 1e-12;
inline constexpr double kJoulesToMicrojoules = 1e6;

struct EnergyModel {
    double e_synop_pj = 0.9;
    double e_mac_pj = 4.6;

    void validate() const;
};

struct LayerActivity {
    std::string layer;
    double spike_count = 0.0;    // over all samples, neurons and timesteps
    double fan_out = 0.0;        // synapses driven by one spike
    std::size_t neuron_count = 0;  // per sample
    std::size_t timestep_count = 0;
    std::size_t samples = 1;

    void validate() const;
};

double synops(const LayerActivity& activity);
double energy_total_uj(std::span<const double> synops_per_layer, const EnergyModel& model);
double ann_energy_uj(double mac_count, const EnergyModel& model);
// 100 * (1 - spikes / (neurons * timesteps * samples)) over all layers.
double sparsity_percent(std::span<const LayerActivity> activities);

struct ArchLayer {
    enum class Kind { conv, fc };
    Kind kind = Kind::fc;
    std::string name;
    std::size_t in_channels = 0;   // conv input channels or fc input features
    std::size_t out_channels = 0;  // conv output channels or fc output features
    std::size_t kernel = 1;
    std::size_t out_h = 1;
    std::size_t out_w = 1;

    static ArchLayer conv(std::string name, std::size_t in_c, std::size_t out_c, std::size_t k, std::size_t h,
                          std::size_t w);
    static ArchLayer fc(std::string name, std::size_t in, std::size_t out);
};

// conv: out_h * out_w * out_c * in_c * k^2; fc: in * out. Summed, for one frame.
double mac_count(std::span<const ArchLayer> architecture);
double mac_count(const ArchLayer& layer);

struct LayerEnergy {
    std::string layer;
    double spikes = 0.0;
    double synops = 0.0;
    double microjoules = 0.0;
    double percent = 0.0;
};

struct EnergyReport {
    std::vector<LayerEnergy> layers;
    std::size_t samples = 0;
    double total_synops = 0.0;
    double total_uj = 0.0;
    double uj_per_inference = 0.0;
    double sparsity_percent = 100.0;
    double ann_macs_per_inference = 0.0;
    double ann_uj_per_inference = 0.0;
    std::optional<double> reduction;  // ANN / SNN per inference; none when the SNN spent nothing
    // Gated-recurrence line item, priced at E_MAC; absent for models without it.
    std::optional<double> gate_ops;
    std::optional<double> gate_uj;
    std::optional<double> gate_dense_macs;
};

EnergyReport build_energy_report(std::span<const LayerActivity> activities, double ann_macs_per_inference,
                                 const EnergyModel& model = {}, std::optional<double> gate_ops = std::nullopt,
                                 std::optional<double> gate_dense_macs = std::nullopt);

// Columns: layer,spikes,synops,microjoules,percent
void write_energy_csv(std::ostream& os, const EnergyReport& report);
nlohmann::json energy_json(const EnergyReport& report);

// Published per-model SynOps totals and the shared dense-network MAC count.
struct GoldenEnergyRow {
    std::string model;
    double synops = 0.0;
    double ann_macs = 0.0;
};

const std::vector<GoldenEnergyRow>& golden_energy_rows();

// Published conv1 MAC figure. It does not follow from the conv formula above with
// the reference shapes (1,331,712 per frame, 33.3M over 25 frames), so reports
// carry both numbers side by side.
inline constexpr double kPublishedConv1Macs = 288e6;

struct GoldenEnergyResult {
    std::string model;
    double synops = 0.0;
    double snn_uj = 0.0;
    double ann_uj = 0.0;
    double reduction = 0.0;
};

GoldenEnergyResult evaluate_golden(const GoldenEnergyRow& row, const EnergyModel& model = {});

}  // namespace spikemem
