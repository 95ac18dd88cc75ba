#include "spikemem/scl.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace spikemem {

NormalizedFeatures normalize_features(const ad::Value& h) {
    if (h.data().rank() != 2) throw ShapeError("normalize_features", h.shape(), Shape{0, 0});
    NormalizedFeatures out;
    out.z = ad::l2_normalize_rows(h, kSilentNorm);
    const std::size_t rows = h.shape()[0];
    const std::size_t cols = h.shape()[1];
    out.excluded.assign(rows, false);
    for (std::size_t i = 0; i < rows; ++i) {
        double sq = 0.0;
        for (std::size_t j = 0; j < cols; ++j) sq += h.data()[i * cols + j] * h.data()[i * cols + j];
        out.excluded[i] = std::sqrt(sq) < kSilentNorm;
    }
    return out;
}

void ContrastiveBatch::validate() const {
    if (!z || z.data().rank() != 2) throw std::invalid_argument("scl: z must be a [N, F] matrix");
    const std::size_t n = z.shape()[0];
    if (n < 2) throw std::invalid_argument("scl: batch needs at least 2 samples, got " + std::to_string(n));
    if (labels.size() != n) throw ShapeError("scl", z.shape(), Shape{labels.size()});
    if (!excluded.empty() && excluded.size() != n) throw ShapeError("scl", z.shape(), Shape{excluded.size()});
    if (!(tau > 0.0)) throw std::invalid_argument("scl: temperature must be positive");
}

ad::Value scl_loss(const ContrastiveBatch& batch, AnchorReduction reduction) {
    batch.validate();
    const std::size_t n = batch.z.shape()[0];
    auto skip = [&](std::size_t i) { return !batch.excluded.empty() && batch.excluded[i]; };

    Tensor others(Shape{n, n});
    Tensor positives(Shape{n, n});
    Tensor anchor_weight(Shape{n});
    for (std::size_t i = 0; i < n; ++i) {
        if (skip(i)) continue;
        std::size_t n_pos = 0;
        for (std::size_t j = 0; j < n; ++j) {
            if (j == i || skip(j)) continue;
            others[i * n + j] = 1.0;
            if (batch.labels[j] == batch.labels[i]) ++n_pos;
        }
        if (n_pos == 0) continue;
        anchor_weight[i] = 1.0;
        for (std::size_t j = 0; j < n; ++j) {
            if (others[i * n + j] != 0.0 && batch.labels[j] == batch.labels[i]) {
                positives[i * n + j] = 1.0 / static_cast<double>(n_pos);
            }
        }
    }

    ad::Value logits = ad::scale(ad::matmul(batch.z, ad::transpose(batch.z)), 1.0 / batch.tau);
    ad::Value log_denominator = ad::masked_logsumexp_rows(logits, others);
    ad::Value loss = ad::sub(ad::sum(ad::mul(log_denominator, ad::Value::constant(std::move(anchor_weight)))),
                             ad::sum(ad::mul(logits, ad::Value::constant(std::move(positives)))));
    if (reduction == AnchorReduction::mean) loss = ad::scale(loss, 1.0 / static_cast<double>(n));
    return loss;
}

ad::Value ce_loss(const ad::Value& rates, std::span<const int> labels, double eps) {
    return ad::scale(ad::sum(ad::log(ad::clamp_min(ad::pick(rates, labels), eps))), -1.0);
}

ad::Value softmax_ce_loss(const ad::Value& logits, std::span<const int> labels) {
    return ad::scale(ad::sum(ad::pick(ad::log_softmax_rows(logits), labels)), -1.0);
}

ad::Value total_loss(const ad::Value& ce, const ad::Value& scl, double lambda) {
    if (lambda < 0.0) throw std::invalid_argument("total_loss: lambda must be non-negative");
    if (lambda == 0.0) return ce;
    return ad::add(ce, ad::scale(scl, lambda));
}

double total_loss(double ce, double scl, double lambda) {
    if (lambda < 0.0) throw std::invalid_argument("total_loss: lambda must be non-negative");
    return ce + lambda * scl;
}

}  // namespace spikemem
