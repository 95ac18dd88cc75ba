#include "spikemem/optim.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>

namespace spikemem {

double cosine_lr(double t, double t_max, double lr_max, double lr_min) {
    if (!(t_max > 0.0)) throw std::invalid_argument("cosine_lr: t_max must be positive");
    if (t >= t_max) return lr_min;
    t = std::max(t, 0.0);
    return lr_min + 0.5 * (lr_max - lr_min) * (1.0 + std::cos(std::numbers::pi * t / t_max));
}

double clip_gradients(std::span<Tensor* const> grads, double max_norm) {
    if (!(max_norm > 0.0)) throw std::invalid_argument("clip_gradients: max_norm must be positive");
    double sq = 0.0;
    for (const Tensor* g : grads) {
        for (double v : g->storage()) sq += v * v;
    }
    const double norm = std::sqrt(sq);
    if (norm > max_norm) {
        const double factor = max_norm / norm;
        for (Tensor* g : grads) {
            for (double& v : g->values()) v *= factor;
        }
    }
    return norm;
}

double clip_gradients(std::span<NamedParameter> params, double max_norm) {
    std::vector<Tensor*> grads;
    for (auto& p : params) {
        if (p.trainable) grads.push_back(&p.value.mutable_grad());
    }
    return clip_gradients(std::span<Tensor* const>(grads), max_norm);
}

void AdamConfig::validate() const {
    if (!(beta1 >= 0.0 && beta1 < 1.0) || !(beta2 >= 0.0 && beta2 < 1.0)) {
        throw std::invalid_argument("adam: betas must lie in [0, 1)");
    }
    if (!(eps > 0.0) || weight_decay < 0.0) throw std::invalid_argument("adam: eps > 0 and weight_decay >= 0");
}

void adam_step(Tensor& param, const Tensor& grad, AdamMoments& moments, const AdamConfig& config, std::size_t t,
               double lr) {
    if (grad.shape() != param.shape()) throw ShapeError("adam_step", param.shape(), grad.shape());
    if (t == 0) throw std::invalid_argument("adam_step: step index is 1-based");
    const double c1 = 1.0 - std::pow(config.beta1, static_cast<double>(t));
    const double c2 = 1.0 - std::pow(config.beta2, static_cast<double>(t));
    auto p = param.values();
    auto g = grad.values();
    auto m = moments.m.values();
    auto v = moments.v.values();
    for (std::size_t i = 0; i < p.size(); ++i) {
        m[i] = config.beta1 * m[i] + (1.0 - config.beta1) * g[i];
        v[i] = config.beta2 * v[i] + (1.0 - config.beta2) * g[i] * g[i];
        const double m_hat = m[i] / c1;
        const double v_hat = v[i] / c2;
        p[i] -= lr * config.weight_decay * p[i];
        p[i] -= lr * m_hat / (std::sqrt(v_hat) + config.eps);
    }
}

Adam::Adam(std::vector<NamedParameter> params, AdamConfig config) : config_(config) {
    config_.validate();
    for (auto& p : params) {
        if (!p.trainable) continue;
        moments_.push_back(AdamMoments::zeros(p.value.shape()));
        params_.push_back(std::move(p));
    }
}

void Adam::step(double lr) {
    ++t_;
    for (std::size_t i = 0; i < params_.size(); ++i) {
        auto& value = params_[i].value;
        adam_step(value.mutable_data(), value.grad(), moments_[i], config_, t_, lr);
    }
    zero_grad();
}

void Adam::zero_grad() {
    for (auto& p : params_) p.value.zero_grad();
}

bool early_stop(std::span<const double> history, std::size_t patience) {
    if (history.empty()) return false;
    std::size_t best = 0;
    for (std::size_t i = 1; i < history.size(); ++i) {
        if (history[i] > history[best]) best = i;
    }
    return history.size() - 1 - best > patience;
}

}  // namespace spikemem
