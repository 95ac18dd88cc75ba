#include "spikemem/events.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <fstream>
#include <istream>
#include <iterator>
#include <numbers>
#include <ostream>

namespace spikemem {

namespace {

void put_u32(std::ostream& os, std::uint32_t v) {
    const std::array<char, 4> b{static_cast<char>(v & 0xFF), static_cast<char>((v >> 8) & 0xFF),
                                static_cast<char>((v >> 16) & 0xFF), static_cast<char>((v >> 24) & 0xFF)};
    os.write(b.data(), 4);
}

std::uint32_t get_u32(std::istream& is) {
    std::array<unsigned char, 4> b{};
    is.read(reinterpret_cast<char*>(b.data()), 4);
    if (!is) throw std::runtime_error("tensor cache: truncated header");
    return static_cast<std::uint32_t>(b[0]) | (static_cast<std::uint32_t>(b[1]) << 8) |
           (static_cast<std::uint32_t>(b[2]) << 16) | (static_cast<std::uint32_t>(b[3]) << 24);
}

}  // namespace

std::vector<DvsEvent> parse_events(std::span<const std::uint8_t> bytes) {
    if (bytes.size() % kEventRecordBytes != 0) {
        throw EventFormatError("truncated event record", bytes.size() - bytes.size() % kEventRecordBytes);
    }
    std::vector<DvsEvent> events;
    events.reserve(bytes.size() / kEventRecordBytes);
    for (std::size_t off = 0; off < bytes.size(); off += kEventRecordBytes) {
        DvsEvent e;
        e.x = bytes[off];
        e.y = bytes[off + 1];
        e.polarity = static_cast<std::uint8_t>(bytes[off + 2] >> 7);
        e.timestamp_us = (static_cast<std::uint32_t>(bytes[off + 2] & 0x7F) << 16) |
                         (static_cast<std::uint32_t>(bytes[off + 3]) << 8) | static_cast<std::uint32_t>(bytes[off + 4]);
        if (e.x >= kSensorSize || e.y >= kSensorSize) {
            throw EventFormatError("event coordinate (" + std::to_string(e.x) + "," + std::to_string(e.y) +
                                       ") outside the 34x34 sensor",
                                   off);
        }
        events.push_back(e);
    }
    return events;
}

std::vector<std::uint8_t> encode_events(std::span<const DvsEvent> events) {
    std::vector<std::uint8_t> bytes;
    bytes.reserve(events.size() * kEventRecordBytes);
    for (const auto& e : events) {
        if (e.x >= kSensorSize || e.y >= kSensorSize || e.polarity > 1 || e.timestamp_us > kMaxTimestamp) {
            throw std::invalid_argument("encode_events: event does not fit the 5-byte record");
        }
        bytes.push_back(e.x);
        bytes.push_back(e.y);
        bytes.push_back(static_cast<std::uint8_t>((e.polarity << 7) | ((e.timestamp_us >> 16) & 0x7F)));
        bytes.push_back(static_cast<std::uint8_t>((e.timestamp_us >> 8) & 0xFF));
        bytes.push_back(static_cast<std::uint8_t>(e.timestamp_us & 0xFF));
    }
    return bytes;
}

std::vector<DvsEvent> read_event_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open event file " + path.string());
    const std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    try {
        return parse_events(bytes);
    } catch (const EventFormatError& e) {
        throw EventFormatError(path.string() + ": " + e.what(), e.offset());
    }
}

BinnedSample bin_events(std::span<const DvsEvent> events, const BinningOptions& options) {
    if (options.timesteps == 0) throw std::invalid_argument("bin_events: timesteps must be positive");
    BinnedSample out{SpikeTensor::zeros(options.timesteps), events.empty()};
    if (events.empty()) return out;

    const std::uint64_t steps = options.timesteps;
    std::uint64_t span_us = 0;
    if (options.fixed_window_us) {
        if (*options.fixed_window_us == 0) throw std::invalid_argument("bin_events: window must be positive");
        span_us = *options.fixed_window_us;
    } else {
        for (const auto& e : events) span_us = std::max<std::uint64_t>(span_us, e.timestamp_us);
    }

    for (const auto& e : events) {
        if (e.x >= kSensorSize || e.y >= kSensorSize || e.polarity > 1) {
            throw std::invalid_argument("bin_events: event outside the sensor");
        }
        std::uint64_t bin = 0;
        if (options.fixed_window_us) {
            if (e.timestamp_us >= span_us) continue;
            bin = e.timestamp_us * steps / span_us;
        } else if (span_us > 0) {
            bin = std::min<std::uint64_t>(steps - 1, e.timestamp_us * steps / span_us);
        }
        out.tensor.at(bin, e.polarity, e.y, e.x) = 1.0;
    }
    return out;
}

void AugmentSpec::validate() const {
    if (jitter_ms < 0 || shift_px < 0) throw std::invalid_argument("augment: ranges must be non-negative");
}

std::vector<DvsEvent> augment_events(std::span<const DvsEvent> events, const AugmentSpec& spec) {
    spec.validate();
    std::mt19937_64 rng(spec.seed);
    std::uniform_int_distribution<int> shift(-spec.shift_px, spec.shift_px);
    const int dx = shift(rng);
    const int dy = shift(rng);
    std::uniform_int_distribution<int> jitter(-spec.jitter_ms * 1000, spec.jitter_ms * 1000);

    std::vector<DvsEvent> out;
    out.reserve(events.size());
    for (const auto& e : events) {
        const int x = static_cast<int>(e.x) + dx;
        const int y = static_cast<int>(e.y) + dy;
        const long long t = static_cast<long long>(e.timestamp_us) + (spec.jitter_ms > 0 ? jitter(rng) : 0);
        if (x < 0 || y < 0 || x >= static_cast<int>(kSensorSize) || y >= static_cast<int>(kSensorSize)) continue;
        DvsEvent moved = e;
        moved.x = static_cast<std::uint8_t>(x);
        moved.y = static_cast<std::uint8_t>(y);
        moved.timestamp_us = static_cast<std::uint32_t>(std::clamp<long long>(t, 0, kMaxTimestamp));
        out.push_back(moved);
    }
    std::stable_sort(out.begin(), out.end(),
                     [](const DvsEvent& a, const DvsEvent& b) { return a.timestamp_us < b.timestamp_us; });
    return out;
}

SpikeTensor shift_tensor(const SpikeTensor& x, int dx, int dy, int dt) {
    SpikeTensor out{Tensor(x.data.shape()), x.label};
    const auto steps = static_cast<int>(x.timesteps());
    const auto h = static_cast<int>(x.height());
    const auto w = static_cast<int>(x.width());
    for (int t = 0; t < steps; ++t) {
        const int st = t - dt;
        if (st < 0 || st >= steps) continue;
        for (std::size_t c = 0; c < x.channels(); ++c) {
            for (int yy = 0; yy < h; ++yy) {
                const int sy = yy - dy;
                if (sy < 0 || sy >= h) continue;
                for (int xx = 0; xx < w; ++xx) {
                    const int sx = xx - dx;
                    if (sx < 0 || sx >= w) continue;
                    out.at(static_cast<std::size_t>(t), c, static_cast<std::size_t>(yy), static_cast<std::size_t>(xx)) =
                        x.at(static_cast<std::size_t>(st), c, static_cast<std::size_t>(sy), static_cast<std::size_t>(sx));
                }
            }
        }
    }
    return out;
}

SpikeTensor augment(const SpikeTensor& x, const AugmentSpec& spec, double bin_ms) {
    spec.validate();
    if (!(bin_ms > 0.0)) throw std::invalid_argument("augment: bin duration must be positive");
    std::mt19937_64 rng(spec.seed);
    std::uniform_int_distribution<int> shift(-spec.shift_px, spec.shift_px);
    std::uniform_int_distribution<int> jitter(-spec.jitter_ms, spec.jitter_ms);
    const int dx = shift(rng);
    const int dy = shift(rng);
    const int jitter_ms = jitter(rng);
    const auto dt = static_cast<int>(std::lround(static_cast<double>(jitter_ms) / bin_ms));
    if (dx == 0 && dy == 0 && dt == 0) return x;
    return shift_tensor(x, dx, dy, dt);
}

SpikeTensor synthesize(int class_id, std::uint64_t seed, const SynthOptions& options) {
    if (options.classes == 0 || class_id < 0 || static_cast<std::size_t>(class_id) >= options.classes) {
        throw std::out_of_range("synthesize: class id " + std::to_string(class_id) + " outside [0," +
                                std::to_string(options.classes) + ")");
    }
    if (options.noise_rate < 0.0 || options.noise_rate > 1.0) {
        throw std::invalid_argument("synthesize: noise rate must lie in [0, 1]");
    }
    std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                      static_cast<std::uint32_t>(class_id)};
    std::mt19937_64 rng(seq);
    std::uniform_real_distribution<double> unit(0.0, 1.0);

    SpikeTensor out = SpikeTensor::zeros();
    out.label = class_id;
    const double angle = std::numbers::pi * static_cast<double>(class_id) / static_cast<double>(options.classes);
    const double nx = std::cos(angle);
    const double ny = std::sin(angle);
    const double centre = 0.5 * static_cast<double>(kSensorSize - 1);
    const double base_offset = 4.0 * unit(rng) - 2.0;
    const double phase = 2.0 * std::numbers::pi * unit(rng);
    constexpr double amplitude = 4.0;
    constexpr double half_width = 0.8;
    constexpr double half_length = 12.0;

    if (options.motif) {
        const auto steps = static_cast<double>(kTimesteps);
        for (std::size_t t = 0; t < kTimesteps; ++t) {
            const double arg = 2.0 * std::numbers::pi * static_cast<double>(t) / steps + phase;
            const double offset = base_offset + amplitude * std::sin(arg);
            // ON events while the bar moves along +n, OFF events on the way back.
            const std::size_t polarity = std::cos(arg) >= 0.0 ? 0 : 1;
            for (std::size_t y = 0; y < kSensorSize; ++y) {
                for (std::size_t x = 0; x < kSensorSize; ++x) {
                    const double px = static_cast<double>(x) - centre;
                    const double py = static_cast<double>(y) - centre;
                    const double across = px * nx + py * ny - offset;
                    const double along = -px * ny + py * nx;
                    if (std::abs(across) <= half_width && std::abs(along) <= half_length) {
                        out.at(t, polarity, y, x) = 1.0;
                    }
                }
            }
        }
    }
    if (options.noise_rate > 0.0) {
        for (auto& v : out.data.values()) {
            if (unit(rng) < options.noise_rate) v = 1.0;
        }
    }
    return out;
}

void write_tensor_cache(std::ostream& os, const SpikeTensor& tensor) {
    tensor.validate();
    os.write("NMT1", 4);
    for (std::size_t d : tensor.data.shape()) put_u32(os, static_cast<std::uint32_t>(d));
    put_u32(os, static_cast<std::uint32_t>(tensor.label));
    std::vector<char> packed((tensor.data.size() + 7) / 8, 0);
    for (std::size_t i = 0; i < tensor.data.size(); ++i) {
        if (tensor.data[i] != 0.0) packed[i / 8] = static_cast<char>(packed[i / 8] | (1 << (i % 8)));
    }
    os.write(packed.data(), static_cast<std::streamsize>(packed.size()));
    if (!os) throw std::runtime_error("tensor cache: write failed");
}

SpikeTensor read_tensor_cache(std::istream& is) {
    std::array<char, 4> magic{};
    is.read(magic.data(), 4);
    if (!is || std::string(magic.data(), 4) != "NMT1") throw std::runtime_error("tensor cache: bad magic");
    Shape shape(4);
    for (auto& d : shape) d = get_u32(is);
    const auto label = static_cast<std::int32_t>(get_u32(is));
    SpikeTensor out{Tensor(shape), label};
    std::vector<char> packed((out.data.size() + 7) / 8);
    is.read(packed.data(), static_cast<std::streamsize>(packed.size()));
    if (!is) throw std::runtime_error("tensor cache: truncated payload");
    for (std::size_t i = 0; i < out.data.size(); ++i) {
        out.data[i] = (static_cast<unsigned char>(packed[i / 8]) >> (i % 8)) & 1u ? 1.0 : 0.0;
    }
    return out;
}

}  // namespace spikemem
