#pragma once

// Gated temporal integration over per-step feature vectors.
//   f_t  = sigmoid(W_f [h_{t-1}; x_t] + b_f)
//   u_t  = sigmoid(W_u [h_{t-1}; x_t] + b_u)
//   c~_t = tanh(W_c x_t + b_c)
//   c_t  = f_t * c_{t-1} + u_t * c~_t
//   h_t  = tanh(c_t)

#include <cstddef>
#include <random>
#include <span>
#include <vector>

#include "spikemem/autodiff.hpp"
#include "spikemem/encoder.hpp"

namespace spikemem {

struct GateParams {
    std::size_t hidden_dim = 0;
    std::size_t input_dim = 0;
    ad::Value w_f, b_f;  // [hidden, hidden + input], [hidden]
    ad::Value w_u, b_u;  // [hidden, hidden + input], [hidden]
    ad::Value w_c, b_c;  // [hidden, input], [hidden]

    static GateParams init(std::size_t hidden_dim, std::size_t input_dim, std::mt19937_64& rng);
    static GateParams zeros(std::size_t hidden_dim, std::size_t input_dim);

    void validate() const;
    std::vector<NamedParameter> named();
};

struct GateState {
    ad::Value c;  // [B, hidden]
    ad::Value h;  // [B, hidden], tanh(c)

    static GateState zeros(std::size_t batch, std::size_t hidden_dim);
};

// x_t is [B, input_dim].
GateState hgrn_step(const GateState& state, const ad::Value& x_t, const GateParams& params);

// Folds hgrn_step over xs from a zero state and returns h_T.
ad::Value hgrn_sequence(std::span<const ad::Value> xs, const GateParams& params);

}  // namespace spikemem
