#pragma once

#include "spikemem/autodiff.hpp"

namespace spikemem {

struct LifParams {
    double beta = 0.9;   // leak decay per step
    double theta = 1.0;  // firing threshold
    double surrogate_slope = 0.9;

    void validate() const;
    ad::SurrogateSpec surrogate() const { return {surrogate_slope, theta}; }
};

struct LifState {
    ad::Value membrane;
    ad::Value spikes;

    // Zero membrane and no spikes for `shape`.
    static LifState zeros(const Shape& shape);
};

// One leaky integrate-and-fire step with soft reset:
//   U' = beta * U + I,  S = H(U' - theta),  U_next = U' - theta * S
LifState lif_step(const LifState& state, const ad::Value& input_current, const LifParams& params);

}  // namespace spikemem
