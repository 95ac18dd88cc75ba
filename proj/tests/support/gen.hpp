#pragma once

// Hand-rolled generators for property tests. Each property runs over a fixed
// list of seeds so failures reproduce.

#include <cstdint>
#include <random>
#include <vector>

#include "spikemem/tensor.hpp"

namespace gen {

inline std::vector<std::uint64_t> seeds(std::size_t n, std::uint64_t base = 1000) {
    std::vector<std::uint64_t> out(n);
    for (std::size_t i = 0; i < n; ++i) out[i] = base + i;
    return out;
}

inline spikemem::Tensor uniform(const spikemem::Shape& shape, std::mt19937_64& rng, double lo = -1.0,
                                double hi = 1.0) {
    std::uniform_real_distribution<double> d(lo, hi);
    spikemem::Tensor t(shape);
    for (auto& v : t.values()) v = d(rng);
    return t;
}

inline std::vector<double> uniform_vec(std::size_t n, std::mt19937_64& rng, double lo = -1.0, double hi = 1.0) {
    std::uniform_real_distribution<double> d(lo, hi);
    std::vector<double> v(n);
    for (auto& x : v) x = d(rng);
    return v;
}

inline std::vector<double> bipolar(std::size_t n, std::mt19937_64& rng) {
    std::bernoulli_distribution coin(0.5);
    std::vector<double> v(n);
    for (auto& x : v) x = coin(rng) ? 1.0 : -1.0;
    return v;
}

inline std::vector<int> labels(std::size_t n, int classes, std::mt19937_64& rng) {
    std::uniform_int_distribution<int> d(0, classes - 1);
    std::vector<int> out(n);
    for (auto& y : out) y = d(rng);
    return out;
}

inline int integer(std::mt19937_64& rng, int lo, int hi) { return std::uniform_int_distribution<int>(lo, hi)(rng); }

}  // namespace gen
