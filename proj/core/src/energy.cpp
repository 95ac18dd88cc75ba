#include "spikemem/energy.hpp"

#include <ostream>
#include <stdexcept>

#include "spikemem/csv.hpp"

namespace spikemem {

void EnergyModel::validate() const {
    if (!(e_synop_pj > 0.0) || !(e_mac_pj > 0.0)) throw std::invalid_argument("energy model: costs must be positive");
}

void LayerActivity::validate() const {
    if (spike_count < 0.0 || fan_out < 0.0) throw std::invalid_argument("layer activity: negative count");
    const double capacity =
        static_cast<double>(neuron_count) * static_cast<double>(timestep_count) * static_cast<double>(samples);
    if (spike_count > capacity) {
        throw std::invalid_argument("layer activity: " + layer + " reports more spikes than neuron-steps");
    }
}

double synops(const LayerActivity& activity) { return activity.spike_count * activity.fan_out; }

double energy_total_uj(std::span<const double> synops_per_layer, const EnergyModel& model) {
    model.validate();
    double joules = 0.0;
    for (double s : synops_per_layer) joules += s * model.e_synop_pj * kPicojoule;
    return joules * kJoulesToMicrojoules;
}

double ann_energy_uj(double mac_count, const EnergyModel& model) {
    model.validate();
    return mac_count * model.e_mac_pj * kPicojoule * kJoulesToMicrojoules;
}

double sparsity_percent(std::span<const LayerActivity> activities) {
    double spikes = 0.0;
    double capacity = 0.0;
    for (const auto& a : activities) {
        spikes += a.spike_count;
        capacity +=
            static_cast<double>(a.neuron_count) * static_cast<double>(a.timestep_count) * static_cast<double>(a.samples);
    }
    if (capacity == 0.0) return 100.0;
    return 100.0 * (1.0 - spikes / capacity);
}

ArchLayer ArchLayer::conv(std::string name, std::size_t in_c, std::size_t out_c, std::size_t k, std::size_t h,
                          std::size_t w) {
    return {Kind::conv, std::move(name), in_c, out_c, k, h, w};
}

ArchLayer ArchLayer::fc(std::string name, std::size_t in, std::size_t out) {
    return {Kind::fc, std::move(name), in, out, 1, 1, 1};
}

double mac_count(const ArchLayer& layer) {
    const auto in = static_cast<double>(layer.in_channels);
    const auto out = static_cast<double>(layer.out_channels);
    if (layer.kind == ArchLayer::Kind::fc) return in * out;
    return static_cast<double>(layer.out_h) * static_cast<double>(layer.out_w) * out * in *
           static_cast<double>(layer.kernel * layer.kernel);
}

double mac_count(std::span<const ArchLayer> architecture) {
    double total = 0.0;
    for (const auto& layer : architecture) total += mac_count(layer);
    return total;
}

EnergyReport build_energy_report(std::span<const LayerActivity> activities, double ann_macs_per_inference,
                                 const EnergyModel& model, std::optional<double> gate_ops,
                                 std::optional<double> gate_dense_macs) {
    model.validate();
    EnergyReport report;
    report.samples = activities.empty() ? 0 : activities.front().samples;
    std::vector<double> per_layer;
    for (const auto& a : activities) {
        a.validate();
        if (a.samples != report.samples) throw std::invalid_argument("energy report: layers disagree on samples");
        LayerEnergy le;
        le.layer = a.layer;
        le.spikes = a.spike_count;
        le.synops = synops(a);
        const double single = le.synops;
        le.microjoules = energy_total_uj(std::span<const double>(&single, 1), model);
        per_layer.push_back(le.synops);
        report.total_synops += le.synops;
        report.layers.push_back(std::move(le));
    }
    report.total_uj = energy_total_uj(per_layer, model);
    for (auto& le : report.layers) le.percent = report.total_uj > 0.0 ? 100.0 * le.microjoules / report.total_uj : 0.0;
    const double n = report.samples > 0 ? static_cast<double>(report.samples) : 1.0;
    report.uj_per_inference = report.total_uj / n;
    report.sparsity_percent = sparsity_percent(activities);
    report.ann_macs_per_inference = ann_macs_per_inference;
    report.ann_uj_per_inference = ann_energy_uj(ann_macs_per_inference, model);
    if (report.uj_per_inference > 0.0) report.reduction = report.ann_uj_per_inference / report.uj_per_inference;
    if (gate_ops) {
        report.gate_ops = *gate_ops;
        report.gate_uj = ann_energy_uj(*gate_ops, model);
    }
    report.gate_dense_macs = gate_dense_macs;
    return report;
}

void write_energy_csv(std::ostream& os, const EnergyReport& report) {
    os << "layer,spikes,synops,microjoules,percent\n";
    for (const auto& le : report.layers) {
        os << le.layer << ',' << csv::number(le.spikes) << ',' << csv::number(le.synops) << ','
           << csv::number(le.microjoules) << ',' << csv::number(le.percent) << '\n';
    }
}

nlohmann::json energy_json(const EnergyReport& report) {
    nlohmann::json layers = nlohmann::json::array();
    for (const auto& le : report.layers) {
        layers.push_back({{"layer", le.layer},
                          {"spikes", le.spikes},
                          {"synops", le.synops},
                          {"microjoules", le.microjoules},
                          {"percent", le.percent}});
    }
    nlohmann::json j{{"layers", layers},
                     {"samples", report.samples},
                     {"total_synops", report.total_synops},
                     {"total_uj", report.total_uj},
                     {"uj_per_inference", report.uj_per_inference},
                     {"sparsity_percent", report.sparsity_percent},
                     {"ann_macs_per_inference", report.ann_macs_per_inference},
                     {"ann_uj_per_inference", report.ann_uj_per_inference},
                     {"reduction", report.reduction ? nlohmann::json(*report.reduction) : nlohmann::json(nullptr)}};
    if (report.gate_ops) {
        const double share = report.total_uj > 0.0 ? 100.0 * *report.gate_uj / (report.total_uj + *report.gate_uj) : 0.0;
        j["gate"] = {{"ops", *report.gate_ops},
                     {"microjoules", *report.gate_uj},
                     {"percent_of_total", share},
                     {"dense_macs", report.gate_dense_macs ? nlohmann::json(*report.gate_dense_macs)
                                                           : nlohmann::json(nullptr)}};
    }
    return j;
}

const std::vector<GoldenEnergyRow>& golden_energy_rows() {
    static const std::vector<GoldenEnergyRow> rows{
        {"M1", 5.247e6, 413.84e6},
        {"M2", 6.438e6, 413.84e6},
        {"M3", 7.004e6, 413.84e6},
        {"M4", 3.503e6, 413.84e6},
    };
    return rows;
}

GoldenEnergyResult evaluate_golden(const GoldenEnergyRow& row, const EnergyModel& model) {
    GoldenEnergyResult r;
    r.model = row.model;
    r.synops = row.synops;
    const double s = row.synops;
    r.snn_uj = energy_total_uj(std::span<const double>(&s, 1), model);
    r.ann_uj = ann_energy_uj(row.ann_macs, model);
    r.reduction = r.ann_uj / r.snn_uj;
    return r;
}

}  // namespace spikemem
