#include "spikemem/encoder.hpp"

#include <cmath>
#include <numeric>
#include <stdexcept>

namespace spikemem {

namespace {

ad::Value uniform_parameter(Shape shape, double bound, std::mt19937_64& rng) {
    std::uniform_real_distribution<double> dist(-bound, bound);
    Tensor t(std::move(shape));
    for (auto& v : t.values()) v = dist(rng);
    return ad::Value::parameter(std::move(t));
}

double tensor_sum(const Tensor& t) { return std::accumulate(t.storage().begin(), t.storage().end(), 0.0); }

}  // namespace

std::size_t parameter_count(std::span<const NamedParameter> params, bool trainable_only) {
    std::size_t n = 0;
    for (const auto& p : params) {
        if (!trainable_only || p.trainable) n += p.value.data().size();
    }
    return n;
}

EncoderConfig EncoderConfig::reference() { return EncoderConfig{}; }

EncoderConfig EncoderConfig::desk() {
    EncoderConfig c;
    c.conv1_channels = 8;
    c.conv2_channels = 16;
    c.pool = true;
    // Narrow layers need a larger initial drive for LIF1-3 to fire in the first epoch.
    c.init_gain = 1.5;
    return c;
}

void EncoderConfig::validate() const {
    lif.validate();
    if (timesteps == 0 || in_channels == 0 || conv1_channels == 0 || conv2_channels == 0 || hidden == 0 ||
        classes == 0 || kernel == 0) {
        throw std::invalid_argument("encoder: all layer sizes must be positive");
    }
    if (height + 2 * padding < kernel || width + 2 * padding < kernel) {
        throw std::invalid_argument("encoder: kernel larger than padded input");
    }
    if (flatten_size() == 0) throw std::invalid_argument("encoder: input too small for the pooled layout");
    if (dropout < 0.0 || dropout >= 1.0) throw std::invalid_argument("encoder: dropout must lie in [0, 1)");
}

EncoderParams EncoderParams::init(const EncoderConfig& config, std::mt19937_64& rng) {
    config.validate();
    const double g = config.init_gain;
    const std::size_t k2 = config.kernel * config.kernel;
    EncoderParams p;
    const double b1 = g / std::sqrt(static_cast<double>(config.in_channels * k2));
    p.conv1_w = uniform_parameter({config.conv1_channels, config.in_channels, config.kernel, config.kernel}, b1, rng);
    p.conv1_b = uniform_parameter({config.conv1_channels}, b1, rng);
    const double b2 = g / std::sqrt(static_cast<double>(config.conv1_channels * k2));
    p.conv2_w =
        uniform_parameter({config.conv2_channels, config.conv1_channels, config.kernel, config.kernel}, b2, rng);
    p.conv2_b = uniform_parameter({config.conv2_channels}, b2, rng);
    const double b3 = g / std::sqrt(static_cast<double>(config.flatten_size()));
    p.fc_hidden_w = uniform_parameter({config.hidden, config.flatten_size()}, b3, rng);
    p.fc_hidden_b = uniform_parameter({config.hidden}, b3, rng);
    const double b4 = g / std::sqrt(static_cast<double>(config.hidden));
    p.fc_out_w = uniform_parameter({config.classes, config.hidden}, b4, rng);
    p.fc_out_b = uniform_parameter({config.classes}, b4, rng);
    return p;
}

std::vector<NamedParameter> EncoderParams::named() {
    return {{"encoder.conv1.weight", conv1_w},         {"encoder.conv1.bias", conv1_b},
            {"encoder.conv2.weight", conv2_w},         {"encoder.conv2.bias", conv2_b},
            {"encoder.fc_hidden.weight", fc_hidden_w}, {"encoder.fc_hidden.bias", fc_hidden_b},
            {"encoder.fc_out.weight", fc_out_w},       {"encoder.fc_out.bias", fc_out_b}};
}

double LayerSpikeCounts::total() const { return std::accumulate(spikes.begin(), spikes.end(), 0.0); }

ad::Value EncoderOutput::feature_rates() const {
    if (features.empty()) throw std::invalid_argument("feature_rates: no recorded steps");
    return ad::scale(ad::add_n(features), 1.0 / static_cast<double>(features.size()));
}

EncoderOutput encoder_forward(std::span<const SpikeTensor> batch, EncoderParams& params,
                              const EncoderConfig& config, const EncoderOptions& options) {
    config.validate();
    if (batch.empty()) throw std::invalid_argument("encoder_forward: empty batch");
    const Shape expected{config.timesteps, config.in_channels, config.height, config.width};
    for (const auto& sample : batch) {
        if (sample.data.shape() != expected) throw ShapeError("encoder_forward", expected, sample.data.shape());
    }
    if (options.training && config.dropout > 0.0 && options.dropout_rng == nullptr) {
        throw std::invalid_argument("encoder_forward: dropout in training mode needs an rng");
    }

    const std::size_t b = batch.size();
    const auto lif = config.lif;
    LifState s1 = LifState::zeros({b, config.conv1_channels, config.conv1_out_h(), config.conv1_out_w()});
    LifState s2 = LifState::zeros({b, config.conv2_channels, config.conv2_out_h(), config.conv2_out_w()});
    LifState s3 = LifState::zeros({b, config.hidden});
    LifState s4 = LifState::zeros({b, config.classes});

    EncoderOutput out;
    out.counts.layers = encoder_layer_names();
    out.counts.spikes.assign(4, 0.0);
    out.counts.neurons = {config.conv1_channels * config.conv1_out_h() * config.conv1_out_w(),
                          config.conv2_channels * config.conv2_out_h() * config.conv2_out_w(), config.hidden,
                          config.classes};

    auto observe = [&](std::size_t layer, std::size_t t, const ad::Value& spikes) {
        out.counts.spikes[layer] += tensor_sum(spikes.data());
        if (options.spike_hook) options.spike_hook(layer, t, spikes.data());
    };

    const double keep = 1.0 - config.dropout;
    std::bernoulli_distribution keep_dist(keep);

    for (std::size_t t = 0; t < config.timesteps; ++t) {
        ad::Value x = ad::Value::constant(gather_timestep(batch, t));
        s1 = lif_step(s1, ad::conv2d(x, params.conv1_w, params.conv1_b, config.padding), lif);
        observe(0, t, s1.spikes);
        ad::Value h1 = config.pool ? ad::avg_pool2d(s1.spikes, 2) : s1.spikes;

        s2 = lif_step(s2, ad::conv2d(h1, params.conv2_w, params.conv2_b, config.padding), lif);
        observe(1, t, s2.spikes);
        ad::Value h2 = config.pool ? ad::avg_pool2d(s2.spikes, 2) : s2.spikes;
        ad::Value flat = ad::reshape(h2, {b, config.flatten_size()});

        ad::Value current3 = ad::linear(flat, params.fc_hidden_w, params.fc_hidden_b);
        if (options.training && config.dropout > 0.0) {
            Tensor mask(current3.shape());
            for (auto& m : mask.values()) m = keep_dist(*options.dropout_rng) ? 1.0 / keep : 0.0;
            current3 = ad::mul(current3, ad::Value::constant(std::move(mask)));
        }
        s3 = lif_step(s3, current3, lif);
        observe(2, t, s3.spikes);
        out.features.push_back(s3.spikes);

        ad::Value memory_in = options.feature_transform ? options.feature_transform(s3.spikes) : s3.spikes;
        out.transformed.push_back(memory_in);

        if (options.readout) {
            s4 = lif_step(s4, ad::linear(memory_in, params.fc_out_w, params.fc_out_b), lif);
            observe(3, t, s4.spikes);
            out.out_spikes.push_back(s4.spikes);
        }
    }
    return out;
}

ad::Value rate_output(std::span<const ad::Value> out_spikes) {
    if (out_spikes.empty()) throw std::invalid_argument("rate_output: no recorded steps");
    return ad::scale(ad::add_n(out_spikes), 1.0 / static_cast<double>(out_spikes.size()));
}

}  // namespace spikemem
