#pragma once

#include <span>
#include <vector>

#include "spikemem/autodiff.hpp"

namespace spikemem {

struct NormalizedFeatures {
    ad::Value z;                 // [N, F], unit rows (zero rows for excluded samples)
    std::vector<bool> excluded;  // rows whose norm fell below 1e-12
};

inline constexpr double kSilentNorm = 1e-12;

// Row-wise L2 normalization of h [N, F]. Silent rows come back as zero and
// are flagged so the contrastive loss can skip them.
NormalizedFeatures normalize_features(const ad::Value& h);

struct ContrastiveBatch {
    ad::Value z;               // [N, F] unit rows
    std::vector<int> labels;   // N class ids
    double tau = 0.07;
    std::vector<bool> excluded;  // optional; empty means none excluded

    void validate() const;
};

enum class AnchorReduction { sum, mean };

// Supervised contrastive loss. For anchor i, positives are the other samples
// with the same label and the denominator runs over every other sample.
// Anchors without positives contribute zero. `sum` adds anchors, `mean`
// divides that sum by N.
ad::Value scl_loss(const ContrastiveBatch& batch, AnchorReduction reduction = AnchorReduction::sum);

inline constexpr double kRateFloor = 1e-8;

// -sum_i log(max(rate[i, y_i], eps)) over rate-coded outputs [N, C].
ad::Value ce_loss(const ad::Value& rates, std::span<const int> labels, double eps = kRateFloor);

// -sum_i log softmax(logits[i])[y_i].
ad::Value softmax_ce_loss(const ad::Value& logits, std::span<const int> labels);

ad::Value total_loss(const ad::Value& ce, const ad::Value& scl, double lambda);
double total_loss(double ce, double scl, double lambda);

}  // namespace spikemem
