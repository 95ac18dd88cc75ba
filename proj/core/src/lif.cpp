#include "spikemem/lif.hpp"

#include <stdexcept>

namespace spikemem {

void LifParams::validate() const {
    if (!(beta > 0.0 && beta <= 1.0)) throw std::invalid_argument("lif: beta must lie in (0, 1]");
    if (!(theta > 0.0)) throw std::invalid_argument("lif: theta must be positive");
    surrogate().validate();
}

LifState LifState::zeros(const Shape& shape) {
    return {ad::Value::constant(Tensor(shape)), ad::Value::constant(Tensor(shape))};
}

LifState lif_step(const LifState& state, const ad::Value& input_current, const LifParams& params) {
    if (state.membrane.shape() != input_current.shape()) {
        throw ShapeError("lif_step", state.membrane.shape(), input_current.shape());
    }
    ad::Value charged = ad::add(ad::scale(state.membrane, params.beta), input_current);
    ad::Value spikes = ad::spike_threshold(charged, params.surrogate());
    ad::Value reset = ad::sub(charged, ad::scale(spikes, params.theta));
    return {std::move(reset), std::move(spikes)};
}

}  // namespace spikemem
