#include "spikemem/model.hpp"

#include <algorithm>
#include <cmath>
#include <memory>

#include "spikemem/lif.hpp"

namespace spikemem {

ModelId parse_model_id(const std::string& id) {
    for (ModelId m : kAllModels) {
        if (model_name(m) == id) return m;
    }
    throw UnknownModelError(id);
}

std::string model_name(ModelId id) { return "M" + std::to_string(static_cast<int>(id) + 1); }

std::string model_description(ModelId id) {
    switch (id) {
        case ModelId::M1: return "Baseline (No SCL)";
        case ModelId::M2: return "+ SCL";
        case ModelId::M3: return "+ Hopfield";
        case ModelId::M4: return "+ HGRN";
        case ModelId::M5: return "Full Hybrid (All)";
    }
    return "";
}

ModelFeatures model_features(ModelId id) {
    switch (id) {
        case ModelId::M1: return {false, false, false};
        case ModelId::M2: return {true, false, false};
        case ModelId::M3: return {true, true, false};
        case ModelId::M4: return {true, false, true};
        case ModelId::M5: return {true, true, true};
    }
    return {};
}

void ModelConfig::validate() const {
    encoder.validate();
    if (hgrn_hidden == 0) throw std::invalid_argument("model: hgrn_hidden must be positive");
    if (lambda_scl < 0.0) throw std::invalid_argument("model: lambda_scl must be non-negative");
    if (!(tau > 0.0)) throw std::invalid_argument("model: tau must be positive");
    if (hopfield_k_max == 0) throw std::invalid_argument("model: hopfield_k_max must be at least 1");
}

nlohmann::json to_json(const ModelConfig& c) {
    const auto& e = c.encoder;
    return {{"encoder",
             {{"timesteps", e.timesteps},
              {"in_channels", e.in_channels},
              {"height", e.height},
              {"width", e.width},
              {"conv1_channels", e.conv1_channels},
              {"conv2_channels", e.conv2_channels},
              {"kernel", e.kernel},
              {"padding", e.padding},
              {"hidden", e.hidden},
              {"classes", e.classes},
              {"pool", e.pool},
              {"dropout", e.dropout},
              {"init_gain", e.init_gain},
              {"beta", e.lif.beta},
              {"theta", e.lif.theta},
              {"surrogate_slope", e.lif.surrogate_slope}}},
            {"hgrn_hidden", c.hgrn_hidden},
            {"lambda_scl", c.lambda_scl},
            {"tau", c.tau},
            {"scl_reduction", c.scl_reduction == AnchorReduction::sum ? "sum" : "mean"},
            {"ce_mode", c.ce_mode == CeMode::rate ? "rate" : "count_softmax"},
            {"recurrent_head", c.recurrent_head == RecurrentHead::fc ? "fc" : "fc_lif"},
            {"hopfield_k_max", c.hopfield_k_max}};
}

namespace {

template <typename T>
void take(const nlohmann::json& j, const char* key, T& out) {
    if (j.contains(key)) out = j.at(key).get<T>();
}

void reject_unknown(const nlohmann::json& j, std::initializer_list<const char*> known, const std::string& where) {
    for (const auto& [key, _] : j.items()) {
        if (std::none_of(known.begin(), known.end(), [&](const char* k) { return key == k; })) {
            throw std::invalid_argument("config: unknown key '" + key + "' in " + where);
        }
    }
}

}  // namespace

ModelConfig model_config_from_json(const nlohmann::json& j, ModelConfig c) {
    if (!j.is_object()) throw std::invalid_argument("config: model section must be an object");
    reject_unknown(j,
                   {"encoder", "hgrn_hidden", "lambda_scl", "tau", "scl_reduction", "ce_mode", "recurrent_head",
                    "hopfield_k_max"},
                   "model");
    if (j.contains("encoder")) {
        const auto& e = j.at("encoder");
        if (e.contains("preset")) {
            const auto preset = e.at("preset").get<std::string>();
            if (preset == "desk") c.encoder = EncoderConfig::desk();
            else if (preset == "reference") c.encoder = EncoderConfig::reference();
            else throw std::invalid_argument("config: encoder preset must be 'desk' or 'reference'");
        }
        reject_unknown(e,
                       {"preset", "timesteps", "in_channels", "height", "width", "conv1_channels", "conv2_channels",
                        "kernel", "padding", "hidden", "classes", "pool", "dropout", "init_gain", "beta", "theta",
                        "surrogate_slope"},
                       "model.encoder");
        auto& enc = c.encoder;
        take(e, "timesteps", enc.timesteps);
        take(e, "in_channels", enc.in_channels);
        take(e, "height", enc.height);
        take(e, "width", enc.width);
        take(e, "conv1_channels", enc.conv1_channels);
        take(e, "conv2_channels", enc.conv2_channels);
        take(e, "kernel", enc.kernel);
        take(e, "padding", enc.padding);
        take(e, "hidden", enc.hidden);
        take(e, "classes", enc.classes);
        take(e, "pool", enc.pool);
        take(e, "dropout", enc.dropout);
        take(e, "init_gain", enc.init_gain);
        take(e, "beta", enc.lif.beta);
        take(e, "theta", enc.lif.theta);
        take(e, "surrogate_slope", enc.lif.surrogate_slope);
    }
    take(j, "hgrn_hidden", c.hgrn_hidden);
    take(j, "lambda_scl", c.lambda_scl);
    take(j, "tau", c.tau);
    take(j, "hopfield_k_max", c.hopfield_k_max);
    if (j.contains("scl_reduction")) {
        const auto v = j.at("scl_reduction").get<std::string>();
        if (v != "sum" && v != "mean") throw std::invalid_argument("config: scl_reduction must be 'sum' or 'mean'");
        c.scl_reduction = v == "sum" ? AnchorReduction::sum : AnchorReduction::mean;
    }
    if (j.contains("ce_mode")) {
        const auto v = j.at("ce_mode").get<std::string>();
        if (v != "rate" && v != "count_softmax") {
            throw std::invalid_argument("config: ce_mode must be 'rate' or 'count_softmax'");
        }
        c.ce_mode = v == "rate" ? CeMode::rate : CeMode::count_softmax;
    }
    if (j.contains("recurrent_head")) {
        const auto v = j.at("recurrent_head").get<std::string>();
        if (v != "fc" && v != "fc_lif") throw std::invalid_argument("config: recurrent_head must be 'fc' or 'fc_lif'");
        c.recurrent_head = v == "fc" ? RecurrentHead::fc : RecurrentHead::fc_lif;
    }
    c.validate();
    return c;
}

HybridModel::HybridModel(ModelId id, ModelConfig config, std::uint64_t seed)
    : id_(id), config_(std::move(config)), seed_(seed), memory_(config_.encoder.hidden, config_.hopfield_k_max) {
    config_.validate();
    std::mt19937_64 rng(seed);
    encoder_ = EncoderParams::init(config_.encoder, rng);
    const auto f = model_features(id_);
    if (f.hgrn) {
        gate_ = GateParams::init(config_.hgrn_hidden, config_.encoder.hidden, rng);
        const double bound = config_.encoder.init_gain / std::sqrt(static_cast<double>(config_.hgrn_hidden));
        std::uniform_real_distribution<double> dist(-bound, bound);
        Tensor w({config_.encoder.classes, config_.hgrn_hidden});
        for (auto& v : w.values()) v = dist(rng);
        Tensor b({config_.encoder.classes});
        for (auto& v : b.values()) v = dist(rng);
        head_w_ = ad::Value::parameter(std::move(w));
        head_b_ = ad::Value::parameter(std::move(b));
    }
    if (f.hopfield) memory_weights_ = ad::Value::constant(memory_.weights());
}

ForwardResult HybridModel::forward(std::span<const SpikeTensor> batch, const ForwardOptions& options) {
    const auto f = model_features(id_);
    EncoderOptions eo;
    eo.training = options.training;
    eo.dropout_rng = options.dropout_rng;
    eo.spike_hook = options.spike_hook;
    eo.readout = !f.hgrn;
    ForwardResult result;
    if (f.hopfield) {
        result.hopfield_passthrough = memory_.empty();
        // Each step queries the memory with the LIF3 rate so far, which is
        // graded where a single step of spikes is mostly zeros.
        auto running = std::make_shared<Tensor>();
        auto steps = std::make_shared<std::size_t>(0);
        eo.feature_transform = [this, running, steps](const ad::Value& s) {
            if (memory_.empty()) return s;
            const Tensor& spikes = s.data();
            if (*steps == 0) *running = Tensor(spikes.shape());
            ++*steps;
            Tensor query(spikes.shape());
            const std::size_t n = spikes.dim(1);
            const double inv = 1.0 / static_cast<double>(*steps);
            for (std::size_t i = 0; i < spikes.size(); ++i) {
                (*running)[i] += spikes[i];
                query[i] = (*running)[i] * inv - (memory_center_.empty() ? 0.0 : memory_center_[i % n]);
            }
            return hopfield_layer(query, s, memory_);
        };
    }
    EncoderOutput enc = encoder_forward(batch, encoder_, config_.encoder, eo);
    result.feature_rates = enc.feature_rates();
    result.counts = std::move(enc.counts);

    if (!f.hgrn) {
        result.scores = rate_output(enc.out_spikes);
        result.scores_are_rates = true;
        return result;
    }

    ad::Value logits = ad::linear(hgrn_sequence(enc.transformed, *gate_), head_w_, head_b_);
    if (config_.recurrent_head == RecurrentHead::fc) {
        result.scores = logits;
        return result;
    }
    // Constant drive from the head over the same number of steps.
    const std::size_t out_layer = 3;
    LifState s = LifState::zeros(logits.shape());
    std::vector<ad::Value> spikes;
    for (std::size_t t = 0; t < config_.encoder.timesteps; ++t) {
        s = lif_step(s, logits, config_.encoder.lif);
        double n = 0.0;
        for (double v : s.spikes.data().storage()) n += v;
        result.counts.spikes[out_layer] += n;
        if (options.spike_hook) options.spike_hook(out_layer, t, s.spikes.data());
        spikes.push_back(s.spikes);
    }
    result.scores = rate_output(spikes);
    result.scores_are_rates = true;
    return result;
}

LossParts HybridModel::loss(const ForwardResult& result, std::span<const int> labels) const {
    LossParts parts;
    if (!result.scores_are_rates) {
        parts.ce = softmax_ce_loss(result.scores, labels);
    } else if (config_.ce_mode == CeMode::rate) {
        parts.ce = ce_loss(result.scores, labels);
    } else {
        parts.ce = softmax_ce_loss(ad::scale(result.scores, static_cast<double>(config_.encoder.timesteps)), labels);
    }
    if (!model_features(id_).scl || labels.size() < 2) {
        parts.total = parts.ce;
        return parts;
    }
    NormalizedFeatures norm = normalize_features(result.feature_rates);
    ContrastiveBatch cb{norm.z, std::vector<int>(labels.begin(), labels.end()), config_.tau, norm.excluded};
    parts.scl = scl_loss(cb, config_.scl_reduction);
    parts.total = total_loss(parts.ce, parts.scl, config_.lambda_scl);
    return parts;
}

std::vector<NamedParameter> HybridModel::parameters() {
    const auto f = model_features(id_);
    std::vector<NamedParameter> out;
    for (auto& p : encoder_.named()) {
        // The recurrent models replace the encoder readout with their own head.
        if (f.hgrn && p.name.rfind("encoder.fc_out", 0) == 0) continue;
        out.push_back(std::move(p));
    }
    if (gate_) {
        for (auto& p : gate_->named()) out.push_back(std::move(p));
        out.push_back({"head.weight", head_w_, true});
        out.push_back({"head.bias", head_b_, true});
    }
    if (f.hopfield) out.push_back({"hopfield.weights", memory_weights_, false});
    return out;
}

std::vector<NamedParameter> HybridModel::trainable_parameters() {
    auto all = parameters();
    std::erase_if(all, [](const NamedParameter& p) { return !p.trainable; });
    return all;
}

std::size_t HybridModel::parameter_count(bool trainable_only) {
    const auto params = parameters();
    return spikemem::parameter_count(params, trainable_only);
}

void HybridModel::set_memory(HopfieldMemory memory, std::vector<double> center) {
    if (memory.dim() != config_.encoder.hidden) {
        throw ShapeError("set_memory", Shape{config_.encoder.hidden}, Shape{memory.dim()});
    }
    if (!center.empty() && center.size() != memory.dim()) {
        throw ShapeError("set_memory", Shape{memory.dim()}, Shape{center.size()});
    }
    memory_ = std::move(memory);
    memory_center_ = std::move(center);
    if (memory_weights_) memory_weights_.mutable_data() = memory_.weights();
}

void HybridModel::refresh_memory(std::span<const std::vector<double>> class_mean_rates) {
    std::vector<const std::vector<double>*> present;
    for (const auto& rates : class_mean_rates) {
        if (rates.empty()) continue;
        if (rates.size() != config_.encoder.hidden) {
            throw ShapeError("refresh_memory", Shape{config_.encoder.hidden}, Shape{rates.size()});
        }
        present.push_back(&rates);
    }
    if (present.empty()) return;
    // Rates are nonnegative and mostly shared between classes; without the
    // reference every prototype is close to the same half-empty pattern.
    std::vector<double> center(config_.encoder.hidden, 0.0);
    for (const auto* rates : present) {
        for (std::size_t i = 0; i < center.size(); ++i) center[i] += (*rates)[i];
    }
    for (double& c : center) c /= static_cast<double>(present.size());
    std::vector<Bipolar> patterns;
    for (const auto* rates : present) {
        std::vector<double> d(center.size());
        for (std::size_t i = 0; i < d.size(); ++i) d[i] = (*rates)[i] - center[i];
        patterns.push_back(binarize(d));
    }
    set_memory(HopfieldMemory::store(patterns, config_.hopfield_k_max), std::move(center));
}

std::vector<double> HybridModel::fan_outs() const {
    const auto& e = config_.encoder;
    const double k2 = static_cast<double>(e.kernel * e.kernel);
    const double lif3 = model_features(id_).hgrn ? 3.0 * static_cast<double>(config_.hgrn_hidden)
                                                  : static_cast<double>(e.classes);
    // Output spikes are read out once each.
    return {static_cast<double>(e.conv2_channels) * k2, static_cast<double>(e.hidden), lif3, 1.0};
}

double HybridModel::ann_macs_per_inference() const {
    const auto& e = config_.encoder;
    const std::vector<ArchLayer> arch{
        ArchLayer::conv("conv1", e.in_channels, e.conv1_channels, e.kernel, e.conv1_out_h(), e.conv1_out_w()),
        ArchLayer::conv("conv2", e.conv1_channels, e.conv2_channels, e.kernel, e.conv2_out_h(), e.conv2_out_w()),
        ArchLayer::fc("fc_hidden", e.flatten_size(), e.hidden),
        ArchLayer::fc("fc_out", e.hidden, e.classes),
    };
    return mac_count(arch) * static_cast<double>(e.timesteps);
}

std::optional<double> HybridModel::gate_ops_per_inference() const {
    if (!gate_) return std::nullopt;
    return static_cast<double>(config_.encoder.timesteps);
}

std::optional<double> HybridModel::gate_dense_macs_per_inference() const {
    if (!gate_) return std::nullopt;
    const auto h = static_cast<double>(config_.hgrn_hidden);
    const auto in = static_cast<double>(config_.encoder.hidden);
    return static_cast<double>(config_.encoder.timesteps) * (2.0 * h * (h + in) + h * in);
}

HybridModel build_model(ModelId id, const ModelConfig& config, std::uint64_t seed) {
    return HybridModel(id, config, seed);
}

HybridModel build_model(const std::string& id, const ModelConfig& config, std::uint64_t seed) {
    return HybridModel(parse_model_id(id), config, seed);
}

std::vector<int> predictions(const ad::Value& scores) {
    const Tensor& s = scores.data();
    if (s.rank() != 2) throw ShapeError("predictions", Shape{0, 0}, s.shape());
    const std::size_t rows = s.dim(0);
    const std::size_t cols = s.dim(1);
    std::vector<int> out(rows);
    for (std::size_t r = 0; r < rows; ++r) {
        const double* row = s.data() + r * cols;
        out[r] = static_cast<int>(std::max_element(row, row + cols) - row);
    }
    return out;
}

}  // namespace spikemem
