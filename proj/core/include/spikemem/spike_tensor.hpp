#pragma once

#include <cstddef>
#include <span>

#include "spikemem/tensor.hpp"

namespace spikemem {

inline constexpr std::size_t kTimesteps = 25;
inline constexpr std::size_t kPolarities = 2;
inline constexpr std::size_t kSensorSize = 34;

// Binary spike volume (T, C, H, W) for one sample.
struct SpikeTensor {
    Tensor data;
    int label = -1;

    static SpikeTensor zeros(std::size_t t = kTimesteps, std::size_t c = kPolarities, std::size_t h = kSensorSize,
                             std::size_t w = kSensorSize);

    std::size_t timesteps() const { return data.dim(0); }
    std::size_t channels() const { return data.dim(1); }
    std::size_t height() const { return data.dim(2); }
    std::size_t width() const { return data.dim(3); }

    double& at(std::size_t t, std::size_t c, std::size_t y, std::size_t x);
    double at(std::size_t t, std::size_t c, std::size_t y, std::size_t x) const;

    std::size_t spike_count() const;
    // Throws unless rank 4 and every entry is 0 or 1.
    void validate() const;
};

// Stacks timestep `t` of each sample into a [B, C, H, W] tensor.
Tensor gather_timestep(std::span<const SpikeTensor> batch, std::size_t t);

}  // namespace spikemem
