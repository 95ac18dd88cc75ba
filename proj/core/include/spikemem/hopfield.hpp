#pragma once

// Classical Hopfield associative memory over bipolar patterns.
//
// Weights follow the outer-product rule W = sum_p xi_p xi_p^T - P I, so the
// diagonal is exactly zero. Retrieval applies synchronous sign(W h) updates,
// sign(0) = +1, until a fixed point or k_max updates.

#include <cstddef>
#include <span>
#include <vector>

#include "spikemem/autodiff.hpp"

namespace spikemem {

using Bipolar = std::vector<double>;  // entries in {-1, +1}

inline constexpr std::size_t kFeatureDim = 512;
inline constexpr std::size_t kHopfieldMaxIterations = 5;

class HopfieldMemory {
public:
    explicit HopfieldMemory(std::size_t dim = kFeatureDim, std::size_t k_max = kHopfieldMaxIterations);

    // Throws on any entry outside {-1, +1} or on a dimension mismatch.
    static HopfieldMemory store(std::span<const Bipolar> patterns, std::size_t k_max = kHopfieldMaxIterations);

    std::size_t dim() const noexcept { return dim_; }
    std::size_t k_max() const noexcept { return k_max_; }
    bool empty() const noexcept { return patterns_.empty(); }
    const std::vector<Bipolar>& patterns() const noexcept { return patterns_; }
    // [dim, dim], symmetric with zero diagonal.
    const Tensor& weights() const noexcept { return weights_; }

private:
    std::size_t dim_;
    std::size_t k_max_;
    std::vector<Bipolar> patterns_;
    Tensor weights_;
};

struct RetrievalTrace {
    std::vector<Bipolar> states;  // h0, h1, ... ; a repeated fixed point is not appended again
    std::vector<double> energies;
    bool converged = false;
    std::size_t iterations = 0;  // sign(W h) evaluations performed

    const Bipolar& final_state() const { return states.back(); }
};

RetrievalTrace hopfield_update(const HopfieldMemory& memory, const Bipolar& h0);

// E(h) = -1/2 h^T W h
double energy(const HopfieldMemory& memory, std::span<const double> h);

// +1 where h_i exceeds the median of h, -1 otherwise.
Bipolar binarize(std::span<const double> h);

bool is_bipolar(std::span<const double> h);

struct HopfieldLayerResult {
    std::vector<double> output;
    bool passthrough = false;  // memory was empty, output == input
};

// Binarizes h, retrieves from memory and maps the attractor back onto
// {0, s}, with s chosen so the output sums to sum(h). An empty memory passes h through unchanged.
HopfieldLayerResult hopfield_layer_forward(std::span<const double> h_real, const HopfieldMemory& memory);

// Row-wise hopfield_layer_forward for h [B, dim].
Tensor hopfield_layer_forward_batch(const Tensor& h, const HopfieldMemory& memory);
// Retrieves from binarize(query) and maps the attractor back onto the
// activity of h. query and h are both [B, dim].
Tensor hopfield_layer_forward_batch(const Tensor& query, const Tensor& h, const HopfieldMemory& memory);

// Differentiable wrapper: forward is the retrieval, backward is straight-through.
ad::Value hopfield_layer(const ad::Value& h, const HopfieldMemory& memory);
ad::Value hopfield_layer(const Tensor& query, const ad::Value& h, const HopfieldMemory& memory);

}  // namespace spikemem
