#pragma once

// N-MNIST event ingestion.
//
// Each event is a 5-byte record:
//   byte 0      x address
//   byte 1      y address
//   byte 2 b7   polarity
//   bytes 2-4   remaining 23 bits, big-endian timestamp in microseconds

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <random>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "spikemem/spike_tensor.hpp"

namespace spikemem {

struct DvsEvent {
    std::uint8_t x = 0;
    std::uint8_t y = 0;
    std::uint8_t polarity = 0;
    std::uint32_t timestamp_us = 0;

    bool operator==(const DvsEvent&) const = default;
};

inline constexpr std::size_t kEventRecordBytes = 5;
inline constexpr std::uint32_t kMaxTimestamp = (1u << 23) - 1;

class EventFormatError : public std::runtime_error {
public:
    EventFormatError(const std::string& what, std::size_t offset)
        : std::runtime_error(what + " at byte " + std::to_string(offset)), offset_(offset) {}
    std::size_t offset() const noexcept { return offset_; }

private:
    std::size_t offset_;
};

std::vector<DvsEvent> parse_events(std::span<const std::uint8_t> bytes);
std::vector<std::uint8_t> encode_events(std::span<const DvsEvent> events);
std::vector<DvsEvent> read_event_file(const std::filesystem::path& path);

struct BinningOptions {
    std::size_t timesteps = kTimesteps;
    // When set, bins span [0, window) instead of [0, t_last]; later events are dropped.
    std::optional<std::uint32_t> fixed_window_us;
};

struct BinnedSample {
    SpikeTensor tensor;
    bool empty_input = false;  // no events; tensor is all zero
};

// Binary OR binning of events into (T, 2, 34, 34).
BinnedSample bin_events(std::span<const DvsEvent> events, const BinningOptions& options = {});

struct AugmentSpec {
    int jitter_ms = 2;  // timestamps move by a uniform integer in [-jitter_ms, +jitter_ms] ms
    int shift_px = 2;   // x and y move by a uniform integer in [-shift_px, +shift_px]
    std::uint64_t seed = 0;

    void validate() const;
};

// Per-event jitter and a per-sample shift; events leaving the sensor are dropped.
std::vector<DvsEvent> augment_events(std::span<const DvsEvent> events, const AugmentSpec& spec);

// Tensor-level augmentation: per-sample spatial shift with zero fill and a
// temporal roll of round(jitter / bin_ms) bins with zero fill.
SpikeTensor augment(const SpikeTensor& x, const AugmentSpec& spec, double bin_ms = 12.0);

// Deterministic shift by explicit offsets (dx right, dy down, dt later), zero fill.
SpikeTensor shift_tensor(const SpikeTensor& x, int dx, int dy, int dt);

struct SynthOptions {
    std::size_t classes = 4;
    double noise_rate = 0.01;
    bool motif = true;
};

// Class-specific oriented bar oscillating across the sensor, plus Bernoulli
// noise. Same (class, seed) always gives the same tensor.
SpikeTensor synthesize(int class_id, std::uint64_t seed, const SynthOptions& options = {});

// Cached tensor container (little-endian):
//   "NMT1" | u32 T | u32 C | u32 H | u32 W | i32 label | ceil(T*C*H*W / 8) bytes, LSB-first
void write_tensor_cache(std::ostream& os, const SpikeTensor& tensor);
SpikeTensor read_tensor_cache(std::istream& is);

}  // namespace spikemem
