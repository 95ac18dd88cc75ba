#include "spikemem/hgrn.hpp"

#include <cmath>
#include <stdexcept>

namespace spikemem {

namespace {

ad::Value uniform(Shape shape, double bound, std::mt19937_64& rng) {
    std::uniform_real_distribution<double> dist(-bound, bound);
    Tensor t(std::move(shape));
    for (auto& v : t.values()) v = dist(rng);
    return ad::Value::parameter(std::move(t));
}

}  // namespace

GateParams GateParams::init(std::size_t hidden_dim, std::size_t input_dim, std::mt19937_64& rng) {
    GateParams p;
    p.hidden_dim = hidden_dim;
    p.input_dim = input_dim;
    const double gate_bound = 1.0 / std::sqrt(static_cast<double>(hidden_dim + input_dim));
    const double cand_bound = 1.0 / std::sqrt(static_cast<double>(input_dim));
    p.w_f = uniform({hidden_dim, hidden_dim + input_dim}, gate_bound, rng);
    p.b_f = uniform({hidden_dim}, gate_bound, rng);
    p.w_u = uniform({hidden_dim, hidden_dim + input_dim}, gate_bound, rng);
    p.b_u = uniform({hidden_dim}, gate_bound, rng);
    p.w_c = uniform({hidden_dim, input_dim}, cand_bound, rng);
    p.b_c = uniform({hidden_dim}, cand_bound, rng);
    p.validate();
    return p;
}

GateParams GateParams::zeros(std::size_t hidden_dim, std::size_t input_dim) {
    GateParams p;
    p.hidden_dim = hidden_dim;
    p.input_dim = input_dim;
    p.w_f = ad::Value::parameter(Tensor({hidden_dim, hidden_dim + input_dim}));
    p.b_f = ad::Value::parameter(Tensor({hidden_dim}));
    p.w_u = ad::Value::parameter(Tensor({hidden_dim, hidden_dim + input_dim}));
    p.b_u = ad::Value::parameter(Tensor({hidden_dim}));
    p.w_c = ad::Value::parameter(Tensor({hidden_dim, input_dim}));
    p.b_c = ad::Value::parameter(Tensor({hidden_dim}));
    return p;
}

void GateParams::validate() const {
    const Shape gate{hidden_dim, hidden_dim + input_dim};
    const Shape cand{hidden_dim, input_dim};
    const Shape bias{hidden_dim};
    if (w_f.shape() != gate) throw ShapeError("hgrn.w_f", gate, w_f.shape());
    if (w_u.shape() != gate) throw ShapeError("hgrn.w_u", gate, w_u.shape());
    if (w_c.shape() != cand) throw ShapeError("hgrn.w_c", cand, w_c.shape());
    if (b_f.shape() != bias) throw ShapeError("hgrn.b_f", bias, b_f.shape());
    if (b_u.shape() != bias) throw ShapeError("hgrn.b_u", bias, b_u.shape());
    if (b_c.shape() != bias) throw ShapeError("hgrn.b_c", bias, b_c.shape());
}

std::vector<NamedParameter> GateParams::named() {
    return {{"hgrn.w_f", w_f}, {"hgrn.b_f", b_f}, {"hgrn.w_u", w_u},
            {"hgrn.b_u", b_u}, {"hgrn.w_c", w_c}, {"hgrn.b_c", b_c}};
}

GateState GateState::zeros(std::size_t batch, std::size_t hidden_dim) {
    return {ad::Value::constant(Tensor({batch, hidden_dim})), ad::Value::constant(Tensor({batch, hidden_dim}))};
}

GateState hgrn_step(const GateState& state, const ad::Value& x_t, const GateParams& params) {
    if (x_t.data().rank() != 2 || x_t.shape()[1] != params.input_dim) {
        throw ShapeError("hgrn_step", Shape{0, params.input_dim}, x_t.shape());
    }
    const Shape state_shape{x_t.shape()[0], params.hidden_dim};
    if (state.c.shape() != state_shape) throw ShapeError("hgrn_step", state_shape, state.c.shape());
    if (state.h.shape() != state_shape) throw ShapeError("hgrn_step", state_shape, state.h.shape());

    ad::Value joint = ad::concat_cols(state.h, x_t);
    ad::Value forget = ad::sigmoid(ad::linear(joint, params.w_f, params.b_f));
    ad::Value update = ad::sigmoid(ad::linear(joint, params.w_u, params.b_u));
    ad::Value candidate = ad::tanh(ad::linear(x_t, params.w_c, params.b_c));
    ad::Value cell = ad::add(ad::mul(forget, state.c), ad::mul(update, candidate));
    ad::Value hidden = ad::tanh(cell);
    return {std::move(cell), std::move(hidden)};
}

ad::Value hgrn_sequence(std::span<const ad::Value> xs, const GateParams& params) {
    if (xs.empty()) throw std::invalid_argument("hgrn_sequence: empty sequence");
    GateState state = GateState::zeros(xs.front().shape().at(0), params.hidden_dim);
    for (const auto& x : xs) state = hgrn_step(state, x, params);
    return state.h;
}

}  // namespace spikemem
