#include "spikemem/train.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numeric>
#include <ostream>
#include <random>

#include "spikemem/csv.hpp"
#include "spikemem/optim.hpp"

namespace spikemem {

void TrainConfig::validate() const {
    model.validate();
    if (!(lr_max > 0.0) || lr_min < 0.0 || lr_min > lr_max) {
        throw std::invalid_argument("train: need lr_max > 0 and 0 <= lr_min <= lr_max");
    }
    if (!(t_max > 0.0)) throw std::invalid_argument("train: t_max must be positive");
    if (weight_decay < 0.0) throw std::invalid_argument("train: weight_decay must be non-negative");
    if (!(clip_norm > 0.0)) throw std::invalid_argument("train: clip_norm must be positive");
    if (batch_size == 0 || epochs == 0) throw std::invalid_argument("train: batch_size and epochs must be positive");
    if (jitter_ms < 0 || shift_px < 0) throw std::invalid_argument("train: augmentation ranges must be non-negative");
    if (!(bin_ms > 0.0)) throw std::invalid_argument("train: bin_ms must be positive");
    if (scl_views != 1 && scl_views != 2) throw std::invalid_argument("train: scl_views must be 1 or 2");
}

nlohmann::json to_json(const TrainConfig& c) {
    return {{"model", model_name(c.model_id)},
            {"architecture", to_json(c.model)},
            {"lr_max", c.lr_max},
            {"lr_min", c.lr_min},
            {"t_max", c.t_max},
            {"weight_decay", c.weight_decay},
            {"clip_norm", c.clip_norm},
            {"patience", c.patience},
            {"early_stopping", c.early_stopping},
            {"batch_size", c.batch_size},
            {"epochs", c.epochs},
            {"seed", c.seed},
            {"dataset", c.dataset == DatasetKind::synthetic ? "synthetic" : "nmnist"},
            {"augment", c.augment},
            {"jitter_ms", c.jitter_ms},
            {"shift_px", c.shift_px},
            {"bin_ms", c.bin_ms},
            {"scl_views", c.scl_views},
            {"silhouette_max_samples", c.silhouette_max_samples}};
}

namespace {

template <typename T>
void take(const nlohmann::json& j, const char* key, T& out) {
    if (j.contains(key)) out = j.at(key).get<T>();
}

}  // namespace

TrainConfig train_config_from_json(const nlohmann::json& j, TrainConfig c) {
    if (!j.is_object()) throw std::invalid_argument("config: train section must be an object");
    static const std::vector<std::string> known{
        "model",      "architecture", "lr_max",   "lr_min",    "t_max",     "weight_decay",
        "clip_norm",  "patience",     "early_stopping", "batch_size", "epochs", "seed",
        "dataset",    "augment",      "jitter_ms", "shift_px", "bin_ms",    "silhouette_max_samples",
        "dropout",    "lambda_scl",   "tau",       "scl_views"};
    for (const auto& [key, _] : j.items()) {
        if (std::find(known.begin(), known.end(), key) == known.end()) {
            throw std::invalid_argument("config: unknown key '" + key + "' in train");
        }
    }
    if (j.contains("model")) c.model_id = parse_model_id(j.at("model").get<std::string>());
    if (j.contains("architecture")) c.model = model_config_from_json(j.at("architecture"), c.model);
    take(j, "dropout", c.model.encoder.dropout);
    take(j, "lambda_scl", c.model.lambda_scl);
    take(j, "tau", c.model.tau);
    take(j, "lr_max", c.lr_max);
    take(j, "lr_min", c.lr_min);
    take(j, "t_max", c.t_max);
    take(j, "weight_decay", c.weight_decay);
    take(j, "clip_norm", c.clip_norm);
    take(j, "patience", c.patience);
    take(j, "early_stopping", c.early_stopping);
    take(j, "batch_size", c.batch_size);
    take(j, "epochs", c.epochs);
    take(j, "seed", c.seed);
    take(j, "augment", c.augment);
    take(j, "jitter_ms", c.jitter_ms);
    take(j, "shift_px", c.shift_px);
    take(j, "bin_ms", c.bin_ms);
    take(j, "silhouette_max_samples", c.silhouette_max_samples);
    take(j, "scl_views", c.scl_views);
    if (j.contains("dataset")) {
        const auto v = j.at("dataset").get<std::string>();
        if (v != "synthetic" && v != "nmnist") throw std::invalid_argument("config: dataset must be synthetic or nmnist");
        c.dataset = v == "synthetic" ? DatasetKind::synthetic : DatasetKind::nmnist;
    }
    c.validate();
    return c;
}

nlohmann::json to_json(const RunRecord& r) {
    nlohmann::json epochs = nlohmann::json::array();
    for (const auto& e : r.epochs) {
        epochs.push_back({{"epoch", e.epoch},
                          {"train_loss", e.train_loss},
                          {"train_ce", e.train_ce},
                          {"train_scl", e.train_scl},
                          {"val_accuracy", e.val_accuracy},
                          {"lr", e.lr},
                          {"seconds", e.seconds}});
    }
    nlohmann::json silhouette = nullptr;
    if (r.silhouette) {
        nlohmann::json per_class = nlohmann::json::array();
        for (const auto& c : r.silhouette->per_class) {
            per_class.push_back({{"label", c.label}, {"count", c.count}, {"mean", c.mean}});
        }
        silhouette = {{"score", r.silhouette->score},
                      {"band", band_name(r.silhouette->band)},
                      {"samples", r.silhouette->samples},
                      {"per_class", per_class}};
    }
    return {{"model", r.model},
            {"seed", r.seed},
            {"epochs", epochs},
            {"best_val_accuracy", r.best_val_accuracy},
            {"best_epoch", r.best_epoch},
            {"test_accuracy", r.test_accuracy},
            {"confusion", r.confusion},
            {"silhouette", silhouette},
            {"energy", energy_json(r.energy)},
            {"parameters", r.parameters},
            {"trainable_parameters", r.trainable_parameters},
            {"hopfield_patterns", r.hopfield_patterns},
            {"straight_through", r.straight_through},
            {"early_stopped", r.early_stopped},
            {"wall_seconds", r.wall_seconds}};
}

void write_epoch_csv(std::ostream& os, const RunRecord& r) {
    os << "epoch,train_loss,train_ce,train_scl,val_accuracy,lr,seconds\n";
    for (const auto& e : r.epochs) {
        os << e.epoch << ',' << csv::number(e.train_loss) << ',' << csv::number(e.train_ce) << ','
           << csv::number(e.train_scl) << ',' << csv::number(e.val_accuracy) << ',' << csv::number(e.lr) << ','
           << csv::number(e.seconds) << '\n';
    }
}

namespace {

std::vector<SpikeTensor> gather(const Dataset& data, std::span<const std::size_t> indices) {
    std::vector<SpikeTensor> out;
    out.reserve(indices.size());
    for (std::size_t i : indices) out.push_back(data.get(i));
    return out;
}

void add_counts(LayerSpikeCounts& into, const LayerSpikeCounts& from) {
    if (into.layers.empty()) {
        into = from;
        return;
    }
    for (std::size_t l = 0; l < into.spikes.size(); ++l) into.spikes[l] += from.spikes[l];
}

}  // namespace

EvalResult evaluate(HybridModel& model, const Dataset& data, std::size_t batch_size, bool collect_features) {
    if (data.empty()) throw std::invalid_argument("evaluate: empty dataset");
    if (batch_size == 0) throw std::invalid_argument("evaluate: batch_size must be positive");
    ad::NoGradGuard no_grad;
    const std::size_t classes = model.config().encoder.classes;
    const std::size_t hidden = model.config().encoder.hidden;
    EvalResult result;
    result.samples = data.size();
    result.confusion.assign(classes, std::vector<std::size_t>(classes, 0));
    if (collect_features) result.features.features = Tensor({data.size(), hidden});
    std::size_t correct = 0;
    std::vector<std::size_t> indices(data.size());
    std::iota(indices.begin(), indices.end(), 0);
    for (std::size_t start = 0; start < data.size(); start += batch_size) {
        const std::size_t end = std::min(start + batch_size, data.size());
        const auto batch = gather(data, std::span(indices).subspan(start, end - start));
        const ForwardResult fwd = model.forward(batch);
        const auto pred = predictions(fwd.scores);
        for (std::size_t i = 0; i < batch.size(); ++i) {
            const int y = batch[i].label;
            if (y == pred[i]) ++correct;
            if (y >= 0 && static_cast<std::size_t>(y) < classes) {
                ++result.confusion[static_cast<std::size_t>(y)][static_cast<std::size_t>(pred[i])];
            }
        }
        add_counts(result.counts, fwd.counts);
        if (collect_features) {
            const Tensor& f = fwd.feature_rates.data();
            std::copy(f.storage().begin(), f.storage().end(), result.features.features.data() + start * hidden);
        }
    }
    if (collect_features) result.features.labels = data.labels();
    result.accuracy = 100.0 * static_cast<double>(correct) / static_cast<double>(data.size());
    return result;
}

LabeledEmbedding embed(HybridModel& model, const Dataset& data, std::size_t max_samples, std::uint64_t seed,
                       std::size_t batch_size) {
    std::vector<std::size_t> indices(data.size());
    std::iota(indices.begin(), indices.end(), 0);
    if (max_samples > 0 && max_samples < data.size()) {
        std::mt19937_64 rng(seed);
        std::shuffle(indices.begin(), indices.end(), rng);
        indices.resize(max_samples);
        std::sort(indices.begin(), indices.end());
    }
    return evaluate(model, data.select(indices), batch_size, true).features;
}

EnergyReport energy_report(const HybridModel& model, const EvalResult& eval, const EnergyModel& energy) {
    const auto fan = model.fan_outs();
    const auto& counts = eval.counts;
    std::vector<LayerActivity> activities;
    for (std::size_t l = 0; l < counts.layers.size(); ++l) {
        activities.push_back({counts.layers[l], counts.spikes[l], fan.at(l), counts.neurons[l],
                              model.config().encoder.timesteps, eval.samples});
    }
    const auto n = static_cast<double>(eval.samples);
    std::optional<double> gate_ops;
    std::optional<double> gate_macs;
    if (auto g = model.gate_ops_per_inference()) gate_ops = *g * n;
    if (auto g = model.gate_dense_macs_per_inference()) gate_macs = *g * n;
    return build_energy_report(activities, model.ann_macs_per_inference(), energy, gate_ops, gate_macs);
}

TrainResult train(const TrainConfig& config, const DatasetSplits& data, const TrainHooks& hooks) {
    config.validate();
    if (data.train.empty() || data.val.empty() || data.test.empty()) {
        throw std::invalid_argument("train: train, validation and test splits must be non-empty");
    }
    using clock = std::chrono::steady_clock;
    const auto run_start = clock::now();

    HybridModel model(config.model_id, config.model, config.seed);
    const bool uses_memory = model.features().hopfield;
    const std::size_t classes = config.model.encoder.classes;
    const std::size_t hidden = config.model.encoder.hidden;
    const std::size_t views = model.features().scl ? config.scl_views : 1;

    // Shuffling, augmentation and dropout draw from one stream in a fixed order.
    std::mt19937_64 rng(config.seed ^ 0xA5A5A5A55A5A5A5Aull);
    Adam optimizer(model.trainable_parameters(), AdamConfig{0.9, 0.999, 1e-8, config.weight_decay});

    RunRecord record;
    record.model = model_name(config.model_id);
    record.seed = config.seed;
    record.parameters = model.parameter_count();
    record.trainable_parameters = model.parameter_count(true);
    record.straight_through = uses_memory;

    std::vector<Tensor> best_params;
    HopfieldMemory best_memory = model.memory();
    std::vector<double> best_center = model.memory_center();
    std::vector<double> history;
    std::vector<std::size_t> order(data.train.size());
    std::iota(order.begin(), order.end(), 0);

    for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
        const auto epoch_start = clock::now();
        const double lr = cosine_lr(static_cast<double>(epoch), config.t_max, config.lr_max, config.lr_min);
        std::shuffle(order.begin(), order.end(), rng);

        std::vector<std::vector<double>> class_sums(uses_memory ? classes : 0, std::vector<double>(hidden, 0.0));
        std::vector<std::size_t> class_counts(classes, 0);
        double loss_sum = 0.0, ce_sum = 0.0, scl_sum = 0.0;
        std::size_t rows = 0;

        for (std::size_t start = 0; start < order.size(); start += config.batch_size) {
            const std::size_t end = std::min(start + config.batch_size, order.size());
            auto batch = gather(data.train, std::span(order).subspan(start, end - start));
            if (views == 2) {
                const std::size_t b = batch.size();
                for (std::size_t i = 0; i < b; ++i) batch.push_back(batch[i]);
            }
            if (config.augment) {
                for (auto& sample : batch) {
                    AugmentSpec spec{config.jitter_ms, config.shift_px, rng()};
                    sample = augment(sample, spec, config.bin_ms);
                }
            }
            std::vector<int> labels;
            for (const auto& s : batch) labels.push_back(s.label);
            rows += batch.size();

            ForwardOptions fo;
            fo.training = true;
            fo.dropout_rng = &rng;
            const ForwardResult fwd = model.forward(batch, fo);
            const LossParts loss = model.loss(fwd, labels);
            const double total = loss.total.item();
            if (!std::isfinite(total)) {
                throw NonFiniteLossError("train: non-finite loss in epoch " + std::to_string(epoch + 1));
            }
            loss_sum += total;
            ce_sum += loss.ce.item();
            if (loss.scl) scl_sum += loss.scl.item();

            if (uses_memory) {
                const Tensor& f = fwd.feature_rates.data();
                for (std::size_t i = 0; i < labels.size(); ++i) {
                    const auto y = static_cast<std::size_t>(labels[i]);
                    for (std::size_t k = 0; k < hidden; ++k) class_sums[y][k] += f[i * hidden + k];
                    ++class_counts[y];
                }
            }

            ad::backward(loss.total, {.release_graph = true});
            clip_gradients(optimizer.params(), config.clip_norm);
            optimizer.step(lr);
        }

        if (uses_memory) {
            std::vector<std::vector<double>> means(classes);
            for (std::size_t c = 0; c < classes; ++c) {
                if (class_counts[c] == 0) continue;
                means[c] = class_sums[c];
                for (double& v : means[c]) v /= static_cast<double>(class_counts[c]);
            }
            model.refresh_memory(means);
        }

        const auto n = static_cast<double>(rows);
        EpochRecord er;
        er.epoch = epoch + 1;
        er.train_loss = loss_sum / n;
        er.train_ce = ce_sum / n;
        er.train_scl = scl_sum / n;
        er.lr = lr;
        er.val_accuracy = evaluate(model, data.val, config.batch_size).accuracy;
        er.seconds = std::chrono::duration<double>(clock::now() - epoch_start).count();
        record.epochs.push_back(er);
        history.push_back(er.val_accuracy);
        if (hooks.on_epoch) hooks.on_epoch(er);

        if (record.epochs.size() == 1 || er.val_accuracy > record.best_val_accuracy) {
            record.best_val_accuracy = er.val_accuracy;
            record.best_epoch = er.epoch;
            best_params.clear();
            for (const auto& p : model.trainable_parameters()) best_params.push_back(p.value.data());
            best_memory = model.memory();
            best_center = model.memory_center();
        }
        if (config.early_stopping && early_stop(history, config.patience)) {
            record.early_stopped = true;
            break;
        }
    }

    auto params = model.trainable_parameters();
    for (std::size_t i = 0; i < params.size(); ++i) params[i].value.mutable_data() = best_params[i];
    model.set_memory(best_memory, best_center);
    record.hopfield_patterns = model.memory().patterns().size();

    const EvalResult test = evaluate(model, data.test, config.batch_size);
    record.test_accuracy = test.accuracy;
    record.confusion = test.confusion;
    record.energy = energy_report(model, test);

    try {
        record.silhouette =
            silhouette_report(embed(model, data.val, config.silhouette_max_samples, config.seed, config.batch_size));
    } catch (const UndefinedMetricError&) {
        record.silhouette.reset();
    }
    record.wall_seconds = std::chrono::duration<double>(clock::now() - run_start).count();
    return {std::move(record), std::move(model)};
}

}  // namespace spikemem
