#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "spikemem/encoder.hpp"
#include "spikemem/tensor.hpp"

namespace spikemem {

// alpha_min + (alpha_max - alpha_min) (1 + cos(pi t / t_max)) / 2, held at alpha_min past t_max.
double cosine_lr(double t, double t_max, double lr_max, double lr_min = 0.0);

// Rescales every gradient by max_norm / norm when the global L2 norm exceeds
// max_norm. Returns the norm before clipping.
double clip_gradients(std::span<Tensor* const> grads, double max_norm = 1.0);
double clip_gradients(std::span<NamedParameter> params, double max_norm = 1.0);

struct AdamConfig {
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
    double weight_decay = 1e-4;  // decoupled: param -= lr * weight_decay * param

    void validate() const;
};

struct AdamMoments {
    Tensor m;
    Tensor v;

    static AdamMoments zeros(const Shape& shape) { return {Tensor(shape), Tensor(shape)}; }
};

// One bias-corrected Adam update at step t (1-based).
void adam_step(Tensor& param, const Tensor& grad, AdamMoments& moments, const AdamConfig& config, std::size_t t,
               double lr);

class Adam {
public:
    Adam(std::vector<NamedParameter> params, AdamConfig config = {});

    // Applies one update to every trainable parameter and clears its gradient.
    void step(double lr);
    void zero_grad();

    std::size_t steps() const noexcept { return t_; }
    std::vector<NamedParameter>& params() noexcept { return params_; }

private:
    std::vector<NamedParameter> params_;
    std::vector<AdamMoments> moments_;
    AdamConfig config_;
    std::size_t t_ = 0;
};

// True once the best entry of `history` lies more than `patience` epochs back.
// Later entries must strictly beat the best to reset the count.
bool early_stop(std::span<const double> history, std::size_t patience = 5);

}  // namespace spikemem
