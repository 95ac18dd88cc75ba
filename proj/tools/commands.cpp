#include "commands.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <sstream>

#include "spikemem/checkpoint.hpp"
#include "spikemem/csv.hpp"
#include "spikemem/energy.hpp"
#include "spikemem/silhouette.hpp"

namespace spikemem::cli {

namespace fs = std::filesystem;

namespace {

template <typename T>
void take(const nlohmann::json& j, const char* key, T& out) {
    if (j.contains(key)) out = j.at(key).get<T>();
}

nlohmann::json read_json(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw std::invalid_argument("cannot read config file " + path.string());
    try {
        return nlohmann::json::parse(in);
    } catch (const nlohmann::json::parse_error& e) {
        throw std::invalid_argument("config " + path.string() + ": " + e.what());
    }
}

void write_text(const fs::path& path, const std::string& text) {
    // Written beside the target and renamed so a partial file is never mistaken for a finished one.
    const fs::path tmp = path.string() + ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary);
        if (!out) throw std::runtime_error("cannot write " + tmp.string());
        out << text;
    }
    fs::rename(tmp, path);
}

std::string fixed(double v, int digits) {
    std::ostringstream os;
    os << std::fixed << std::setprecision(digits) << v;
    return os.str();
}

}  // namespace

void apply_quick(CliConfig& c) {
    c.data.synthetic.train = 240;
    c.data.synthetic.val = 80;
    c.data.synthetic.test = 80;
    c.train.epochs = 4;
    c.train.t_max = 4.0;
    c.train.batch_size = 32;
    c.train.silhouette_max_samples = 80;
    c.data.nmnist.train_limit = 2000;
    c.data.nmnist.test_limit = 500;
}

DataConfig data_config_from_json(const nlohmann::json& j, DataConfig d) {
    static const std::vector<std::string> known{"dataset",     "root",       "seed",         "train",
                                                "val",         "test",       "classes",      "noise_rate",
                                                "motif",       "train_limit", "test_limit",  "val_fraction",
                                                "cache_dir",   "workers",    "fixed_window_us"};
    for (const auto& [key, _] : j.items()) {
        if (std::find(known.begin(), known.end(), key) == known.end()) {
            throw std::invalid_argument("config: unknown key '" + key + "' in data");
        }
    }
    if (j.contains("dataset")) {
        const auto v = j.at("dataset").get<std::string>();
        if (v != "synthetic" && v != "nmnist") throw std::invalid_argument("config: dataset must be synthetic or nmnist");
        d.kind = v == "synthetic" ? DatasetKind::synthetic : DatasetKind::nmnist;
    }
    if (j.contains("root")) d.root = fs::path(j.at("root").get<std::string>());
    take(j, "seed", d.seed);
    take(j, "train", d.synthetic.train);
    take(j, "val", d.synthetic.val);
    take(j, "test", d.synthetic.test);
    take(j, "classes", d.synthetic.synth.classes);
    take(j, "noise_rate", d.synthetic.synth.noise_rate);
    take(j, "motif", d.synthetic.synth.motif);
    take(j, "train_limit", d.nmnist.train_limit);
    take(j, "test_limit", d.nmnist.test_limit);
    take(j, "val_fraction", d.nmnist.val_fraction);
    take(j, "workers", d.nmnist.workers);
    if (j.contains("cache_dir")) d.nmnist.cache_dir = fs::path(j.at("cache_dir").get<std::string>());
    if (j.contains("fixed_window_us")) d.nmnist.binning.fixed_window_us = j.at("fixed_window_us").get<std::uint32_t>();
    return d;
}

CliConfig resolve_config(const CliFlags& flags) {
    CliConfig c;
    if (flags.config) {
        const auto j = read_json(*flags.config);
        if (!j.is_object()) throw std::invalid_argument("config: top level must be an object");
        for (const auto& [key, _] : j.items()) {
            if (key != "train" && key != "data" && key != "out" && key != "seeds" && key != "models") {
                throw std::invalid_argument("config: unknown top-level key '" + key + "'");
            }
        }
        if (j.contains("train")) c.train = train_config_from_json(j.at("train"), c.train);
        if (j.contains("data")) c.data = data_config_from_json(j.at("data"), c.data);
        if (j.contains("out")) c.out = j.at("out").get<std::string>();
        if (j.contains("seeds")) c.seeds = j.at("seeds").get<std::vector<std::uint64_t>>();
        if (j.contains("models")) {
            for (const auto& m : j.at("models")) c.models.push_back(parse_model_id(m.get<std::string>()));
        }
    }
    if (flags.quick) apply_quick(c);
    if (flags.reference_encoder) c.train.model.encoder = EncoderConfig::reference();
    if (flags.no_pool) c.train.model.encoder.pool = false;
    if (flags.out) c.out = *flags.out;
    if (flags.dataset) {
        if (*flags.dataset == "synthetic") c.data.kind = DatasetKind::synthetic;
        else if (*flags.dataset == "nmnist") c.data.kind = DatasetKind::nmnist;
        else throw std::invalid_argument("--dataset must be synthetic or nmnist");
    }
    if (flags.data_root) c.data.root = *flags.data_root;
    if (!flags.seeds.empty()) c.seeds = flags.seeds;
    if (!flags.models.empty()) {
        c.models.clear();
        for (const auto& m : flags.models) c.models.push_back(parse_model_id(m));
    }
    if (flags.epochs) {
        c.train.epochs = *flags.epochs;
        if (!flags.quick) c.train.t_max = std::max(c.train.t_max, static_cast<double>(*flags.epochs));
        else c.train.t_max = static_cast<double>(*flags.epochs);
    }
    if (flags.batch_size) c.train.batch_size = *flags.batch_size;
    if (flags.train_samples) c.data.synthetic.train = *flags.train_samples;
    if (flags.val_samples) c.data.synthetic.val = *flags.val_samples;
    if (flags.test_samples) c.data.synthetic.test = *flags.test_samples;

    c.train.dataset = c.data.kind;
    c.train.model.encoder.classes = c.data.kind == DatasetKind::synthetic ? c.data.synthetic.synth.classes : 10;
    if (c.seeds.empty()) throw std::invalid_argument("at least one seed is required");
    c.train.validate();
    return c;
}

DatasetSplits load_data(const DataConfig& data) {
    if (data.kind == DatasetKind::synthetic) return make_synthetic_splits(data.synthetic, data.seed);
    const auto root = resolve_dataset_root(data.root);
    if (!root) throw DatasetMissingError(fs::path("<unset>"));
    return load_nmnist(*root, data.nmnist, data.seed);
}

fs::path run_dir(const fs::path& out, ModelId model, std::uint64_t seed) {
    return out / model_name(model) / ("seed-" + std::to_string(seed));
}

namespace {

void write_energy_files(const fs::path& dir, const EnergyReport& report) {
    std::ostringstream csv_text;
    write_energy_csv(csv_text, report);
    write_text(dir / "energy.csv", csv_text.str());
    write_text(dir / "energy.json", energy_json(report).dump(2) + "\n");
}

void write_run(const fs::path& dir, TrainResult& result, const TrainConfig& config, const DataConfig& data) {
    fs::create_directories(dir);
    const nlohmann::json hyper = to_json(config);
    save_checkpoint(dir / "model.ckpt", result.model, hyper);
    std::ostringstream epochs;
    write_epoch_csv(epochs, result.record);
    write_text(dir / "epochs.csv", epochs.str());
    write_energy_files(dir, result.record.energy);
    if (result.record.silhouette) {
        std::ostringstream sil;
        write_silhouette_csv(sil, *result.record.silhouette);
        write_text(dir / "silhouette.csv", sil.str());
    }
    nlohmann::json run = to_json(result.record);
    run["config"] = hyper;
    run["data"] = {{"dataset", data.kind == DatasetKind::synthetic ? "synthetic" : "nmnist"}, {"seed", data.seed}};
    // run.json goes last: its presence marks a finished run.
    write_text(dir / "run.json", run.dump(2) + "\n");
}

void print_epoch(std::ostream& log, const std::string& tag, const EpochRecord& e) {
    log << tag << " epoch " << e.epoch << "  loss " << fixed(e.train_loss, 4) << "  val " << fixed(e.val_accuracy, 2)
        << "%  lr " << e.lr << "  " << fixed(e.seconds, 1) << "s\n"
        << std::flush;
}

nlohmann::json train_one(const CliConfig& c, ModelId model, std::uint64_t seed, const DatasetSplits& splits,
                         std::ostream& log) {
    TrainConfig cfg = c.train;
    cfg.model_id = model;
    cfg.seed = seed;
    const std::string tag = model_name(model) + "/seed-" + std::to_string(seed);
    TrainHooks hooks;
    hooks.on_epoch = [&](const EpochRecord& e) { print_epoch(log, tag, e); };
    TrainResult result = train(cfg, splits, hooks);
    const fs::path dir = run_dir(c.out, model, seed);
    write_run(dir, result, cfg, c.data);
    log << tag << " best val " << fixed(result.record.best_val_accuracy, 2) << "%  test "
        << fixed(result.record.test_accuracy, 2) << "%  " << fixed(result.record.energy.uj_per_inference, 4)
        << " uJ/inference" << (result.record.early_stopped ? "  (early stop)" : "") << "  -> " << dir.string()
        << "\n";
    return to_json(result.record);
}

struct Stat {
    double mean = 0.0;
    double std = 0.0;
    std::size_t n = 0;
};

Stat stat(const std::vector<double>& v) {
    Stat s;
    s.n = v.size();
    if (v.empty()) return s;
    for (double x : v) s.mean += x;
    s.mean /= static_cast<double>(v.size());
    if (v.size() > 1) {
        double sq = 0.0;
        for (double x : v) sq += (x - s.mean) * (x - s.mean);
        s.std = std::sqrt(sq / static_cast<double>(v.size() - 1));
    }
    return s;
}

std::string cell(const Stat& s, int digits) {
    if (s.n == 0) return "n/a";
    if (s.n == 1) return fixed(s.mean, digits);
    return fixed(s.mean, digits) + " ± " + fixed(s.std, digits);
}

}  // namespace

int cmd_train(const CliConfig& c, std::ostream& log) {
    const ModelId model = c.models.empty() ? c.train.model_id : c.models.front();
    const DatasetSplits splits = load_data(c.data);
    for (std::uint64_t seed : c.seeds) train_one(c, model, seed, splits, log);
    return kOk;
}

int cmd_ablate(const CliConfig& c, std::ostream& log) {
    std::vector<ModelId> models = c.models;
    if (models.empty()) models.assign(std::begin(kAllModels), std::end(kAllModels));
    std::optional<DatasetSplits> splits;

    struct Row {
        ModelId model;
        std::vector<double> val, test, silhouette, energy;
    };
    std::vector<Row> rows;
    for (ModelId model : models) {
        Row row{model, {}, {}, {}, {}};
        for (std::uint64_t seed : c.seeds) {
            const fs::path done = run_dir(c.out, model, seed) / "run.json";
            nlohmann::json record;
            if (fs::exists(done)) {
                log << model_name(model) << "/seed-" << seed << " already complete, skipping\n";
                std::ifstream in(done);
                record = nlohmann::json::parse(in);
            } else {
                if (!splits) splits = load_data(c.data);
                record = train_one(c, model, seed, *splits, log);
            }
            row.val.push_back(record.at("best_val_accuracy").get<double>());
            row.test.push_back(record.at("test_accuracy").get<double>());
            if (!record.at("silhouette").is_null()) row.silhouette.push_back(record["silhouette"]["score"].get<double>());
            row.energy.push_back(record.at("energy").at("uj_per_inference").get<double>());
        }
        rows.push_back(std::move(row));
    }

    std::ostringstream csv_text;
    csv_text << "model,val_acc,val_acc_std,test_acc,test_acc_std,silhouette,silhouette_std,energy_uj,energy_uj_std,"
                "seeds\n";
    std::ostringstream md;
    md << "| Model | Val Acc (%) | Test Acc (%) | Silhouette | Energy (µJ) |\n";
    md << "|---|---|---|---|---|\n";
    for (const auto& r : rows) {
        const Stat val = stat(r.val), test = stat(r.test), sil = stat(r.silhouette), en = stat(r.energy);
        const std::string label = model_name(r.model) + ": " + model_description(r.model);
        auto num = [](const Stat& s, bool mean) { return s.n == 0 ? std::string() : csv::number(mean ? s.mean : s.std); };
        csv_text << model_name(r.model) << ',' << num(val, true) << ',' << num(val, false) << ',' << num(test, true)
                 << ',' << num(test, false) << ',' << num(sil, true) << ',' << num(sil, false) << ','
                 << num(en, true) << ',' << num(en, false) << ',' << r.val.size() << '\n';
        md << "| " << label << " | " << cell(val, 2) << " | " << cell(test, 2) << " | " << cell(sil, 3) << " | "
           << cell(en, 4) << " |\n";
    }
    fs::create_directories(c.out);
    write_text(c.out / "ablation.csv", csv_text.str());
    write_text(c.out / "ablation.md", md.str());
    std::cout << md.str();
    return kOk;
}

int cmd_profile(const CliConfig& c, const ProfileFlags& flags, std::ostream& log) {
    fs::create_directories(c.out);
    if (flags.golden) {
        const EnergyModel model;
        nlohmann::json rows = nlohmann::json::array();
        std::ostringstream csv_text;
        csv_text << "model,synops,microjoules,ann_microjoules,reduction\n";
        std::cout << "| Model | SynOps (M) | Energy (µJ) | ANN (µJ) | Reduction |\n|---|---|---|---|---|\n";
        for (const auto& row : golden_energy_rows()) {
            const auto r = evaluate_golden(row, model);
            rows.push_back({{"model", r.model},
                            {"synops", r.synops},
                            {"microjoules", r.snn_uj},
                            {"ann_microjoules", r.ann_uj},
                            {"reduction", r.reduction}});
            csv_text << r.model << ',' << csv::number(r.synops) << ',' << csv::number(r.snn_uj) << ','
                     << csv::number(r.ann_uj) << ',' << csv::number(r.reduction) << '\n';
            std::cout << "| " << r.model << " | " << fixed(r.synops / 1e6, 3) << " | " << fixed(r.snn_uj, 2) << " | "
                      << fixed(r.ann_uj, 2) << " | " << fixed(r.reduction, 1) << "× |\n";
        }
        const auto ref = EncoderConfig::reference();
        const double conv1_frame = mac_count(ArchLayer::conv("conv1", ref.in_channels, ref.conv1_channels, ref.kernel,
                                                             ref.conv1_out_h(), ref.conv1_out_w()));
        const double conv1_total = conv1_frame * static_cast<double>(ref.timesteps);
        std::cout << "\nconv1 MACs: formula " << fixed(conv1_frame, 0) << " per frame, " << fixed(conv1_total / 1e6, 2)
                  << "M over " << ref.timesteps << " frames; published " << fixed(kPublishedConv1Macs / 1e6, 0) << "M\n";
        const nlohmann::json conv1{{"formula_per_frame", conv1_frame},
                                   {"formula_total", conv1_total},
                                   {"published", kPublishedConv1Macs}};
        write_text(c.out / "golden_energy.csv", csv_text.str());
        write_text(c.out / "golden_energy.json", nlohmann::json{{"e_synop_pj", model.e_synop_pj},
                                                                {"e_mac_pj", model.e_mac_pj},
                                                                {"rows", rows},
                                                                {"conv1_macs", conv1}}
                                                         .dump(2) +
                                                     "\n");
        return kOk;
    }
    if (!flags.checkpoint) throw std::invalid_argument("profile needs --golden or --checkpoint");
    if (!fs::exists(*flags.checkpoint)) {
        log << "error: checkpoint not found: " << flags.checkpoint->string() << "\n";
        return kMissingResource;
    }
    LoadedCheckpoint loaded = load_checkpoint(*flags.checkpoint);
    const DatasetSplits splits = load_data(c.data);
    const EvalResult eval = evaluate(loaded.model, splits.test, c.train.batch_size);
    const EnergyReport report = energy_report(loaded.model, eval);
    write_energy_files(c.out, report);
    std::cout << "| Layer | Spikes | SynOps | Energy (µJ) | Share (%) |\n|---|---|---|---|---|\n";
    for (const auto& l : report.layers) {
        std::cout << "| " << l.layer << " | " << csv::number(l.spikes) << " | " << csv::number(l.synops) << " | "
                  << fixed(l.microjoules, 4) << " | " << fixed(l.percent, 1) << " |\n";
    }
    std::cout << "\n" << report.samples << " samples, " << fixed(report.uj_per_inference, 4) << " µJ/inference, sparsity "
              << fixed(report.sparsity_percent, 2) << "%, ANN " << fixed(report.ann_uj_per_inference, 2) << " µJ";
    if (report.reduction) std::cout << ", reduction " << fixed(*report.reduction, 1) << "×";
    std::cout << "\n";
    return kOk;
}

int cmd_cluster(const CliConfig& c, const ClusterFlags& flags, std::ostream& log) {
    if (!flags.checkpoint) throw std::invalid_argument("cluster needs --checkpoint");
    if (!fs::exists(*flags.checkpoint)) {
        log << "error: checkpoint not found: " << flags.checkpoint->string() << "\n";
        return kMissingResource;
    }
    if (flags.split != "val" && flags.split != "test") throw std::invalid_argument("--split must be val or test");
    LoadedCheckpoint loaded = load_checkpoint(*flags.checkpoint);
    const DatasetSplits splits = load_data(c.data);
    const Dataset& data = flags.split == "val" ? splits.val : splits.test;
    const LabeledEmbedding emb = embed(loaded.model, data, flags.max_samples, c.seeds.front(), c.train.batch_size);
    const SilhouetteReport report = silhouette_report(emb);  // throws UndefinedMetricError on one class

    fs::create_directories(c.out);
    std::ostringstream sil, feats;
    write_silhouette_csv(sil, report);
    write_features_csv(feats, emb);
    write_text(c.out / "silhouette.csv", sil.str());
    write_text(c.out / "features.csv", feats.str());
    std::cout << "silhouette " << fixed(report.score, 4) << " (" << band_name(report.band) << ") over "
              << report.samples << " samples\n";
    for (const auto& pc : report.per_class) {
        std::cout << "  class " << pc.label << ": " << fixed(pc.mean, 4) << " (" << pc.count << ")\n";
    }
    return kOk;
}

}  // namespace spikemem::cli
