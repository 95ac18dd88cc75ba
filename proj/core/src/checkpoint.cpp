#include "spikemem/checkpoint.hpp"

#include <algorithm>
#include <array>
#include <bit>
#include <cstring>
#include <fstream>
#include <istream>
#include <ostream>

namespace spikemem {

namespace {

template <typename U>
void put_le(std::ostream& os, U v) {
    std::array<char, sizeof(U)> bytes{};
    for (std::size_t i = 0; i < sizeof(U); ++i) bytes[i] = static_cast<char>((v >> (8 * i)) & 0xFF);
    os.write(bytes.data(), bytes.size());
}

template <typename U>
U get_le(std::istream& is) {
    std::array<unsigned char, sizeof(U)> bytes{};
    if (!is.read(reinterpret_cast<char*>(bytes.data()), bytes.size())) {
        throw CheckpointError("checkpoint: truncated header");
    }
    U v = 0;
    for (std::size_t i = 0; i < sizeof(U); ++i) v |= static_cast<U>(bytes[i]) << (8 * i);
    return v;
}

void put_blob(std::ostream& os, const Tensor& t) {
    for (double v : t.storage()) put_le(os, std::bit_cast<std::uint64_t>(v));
}

Tensor get_blob(std::istream& is, const Shape& shape) {
    Tensor t(shape);
    for (double& v : t.values()) {
        std::uint64_t bits = 0;
        try {
            bits = get_le<std::uint64_t>(is);
        } catch (const CheckpointError&) {
            throw CheckpointError("checkpoint: truncated payload");
        }
        v = std::bit_cast<double>(bits);
    }
    return t;
}

Tensor pattern_matrix(const HopfieldMemory& memory) {
    Tensor t({memory.patterns().size(), memory.dim()});
    for (std::size_t p = 0; p < memory.patterns().size(); ++p) {
        std::copy(memory.patterns()[p].begin(), memory.patterns()[p].end(), t.data() + p * memory.dim());
    }
    return t;
}

}  // namespace

void save_checkpoint(std::ostream& os, HybridModel& model, const nlohmann::json& hyperparameters) {
    auto params = model.parameters();
    std::vector<std::pair<std::string, Tensor>> blobs;
    for (const auto& p : params) blobs.emplace_back(p.name, p.value.data());
    if (model.features().hopfield) {
        blobs.emplace_back("hopfield.patterns", pattern_matrix(model.memory()));
        const auto& center = model.memory_center();
        Tensor c({center.size()});
        std::copy(center.begin(), center.end(), c.data());
        blobs.emplace_back("hopfield.center", std::move(c));
    }

    nlohmann::json entries = nlohmann::json::array();
    std::size_t offset = 0;
    for (const auto& [name, t] : blobs) {
        entries.push_back({{"name", name}, {"shape", t.shape()}, {"offset", offset}});
        offset += t.size();
    }
    const nlohmann::json manifest{{"model", model_name(model.id())},
                                  {"seed", model.seed()},
                                  {"config", to_json(model.config())},
                                  {"hyperparameters", hyperparameters.is_null() ? nlohmann::json::object()
                                                                                : hyperparameters},
                                  {"blobs", entries},
                                  {"payload_doubles", offset}};
    const std::string text = manifest.dump();
    os.write(kCheckpointMagic, sizeof kCheckpointMagic);
    put_le<std::uint32_t>(os, kCheckpointVersion);
    put_le<std::uint64_t>(os, text.size());
    os.write(text.data(), static_cast<std::streamsize>(text.size()));
    for (const auto& [_, t] : blobs) put_blob(os, t);
    if (!os) throw CheckpointError("checkpoint: write failed");
}

void save_checkpoint(const std::filesystem::path& path, HybridModel& model, const nlohmann::json& hyperparameters) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw CheckpointError("checkpoint: cannot open " + path.string() + " for writing");
    save_checkpoint(os, model, hyperparameters);
}

LoadedCheckpoint load_checkpoint(std::istream& is) {
    char magic[sizeof kCheckpointMagic];
    if (!is.read(magic, sizeof magic) || std::memcmp(magic, kCheckpointMagic, sizeof magic) != 0) {
        throw CheckpointError("checkpoint: bad magic");
    }
    if (const auto version = get_le<std::uint32_t>(is); version != kCheckpointVersion) {
        throw CheckpointError("checkpoint: unsupported version " + std::to_string(version));
    }
    const auto length = get_le<std::uint64_t>(is);
    std::string text(length, '\0');
    if (!is.read(text.data(), static_cast<std::streamsize>(length))) throw CheckpointError("checkpoint: truncated manifest");
    nlohmann::json manifest;
    try {
        manifest = nlohmann::json::parse(text);
    } catch (const nlohmann::json::exception& e) {
        throw CheckpointError(std::string("checkpoint: bad manifest: ") + e.what());
    }

    const ModelId id = parse_model_id(manifest.at("model").get<std::string>());
    const ModelConfig config = model_config_from_json(manifest.at("config"));
    HybridModel model(id, config, manifest.at("seed").get<std::uint64_t>());
    auto params = model.parameters();

    Tensor stored_weights;
    std::vector<Bipolar> patterns;
    std::vector<double> center;
    std::size_t loaded = 0;
    for (const auto& entry : manifest.at("blobs")) {
        const auto name = entry.at("name").get<std::string>();
        const auto shape = entry.at("shape").get<Shape>();
        Tensor t = get_blob(is, shape);
        if (name == "hopfield.patterns") {
            patterns.resize(shape.at(0));
            for (std::size_t p = 0; p < patterns.size(); ++p) {
                patterns[p].assign(t.data() + p * shape.at(1), t.data() + (p + 1) * shape.at(1));
            }
            continue;
        }
        if (name == "hopfield.center") {
            center.assign(t.data(), t.data() + t.size());
            continue;
        }
        if (name == "hopfield.weights") {
            stored_weights = std::move(t);
            continue;
        }
        auto it = std::find_if(params.begin(), params.end(), [&](const NamedParameter& p) { return p.name == name; });
        if (it == params.end()) throw CheckpointError("checkpoint: unexpected blob " + name);
        if (it->value.shape() != shape) throw ShapeError("load_checkpoint:" + name, it->value.shape(), shape);
        it->value.mutable_data() = std::move(t);
        ++loaded;
    }
    const auto expected = static_cast<std::size_t>(
        std::count_if(params.begin(), params.end(), [](const NamedParameter& p) { return p.trainable; }));
    if (loaded != expected) throw CheckpointError("checkpoint: missing parameter blobs");
    if (!patterns.empty()) {
        model.set_memory(HopfieldMemory::store(patterns, config.hopfield_k_max), std::move(center));
    } else if (!center.empty()) {
        throw CheckpointError("checkpoint: Hopfield reference without patterns");
    }
    // The outer-product rule is deterministic, so the rebuilt matrix must match bit for bit.
    if (!stored_weights.empty() && !(stored_weights == model.memory().weights())) {
        throw CheckpointError("checkpoint: Hopfield weights disagree with stored patterns");
    }
    return {std::move(model), std::move(manifest)};
}

LoadedCheckpoint load_checkpoint(const std::filesystem::path& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw CheckpointError("checkpoint: cannot open " + path.string());
    return load_checkpoint(is);
}

}  // namespace spikemem
