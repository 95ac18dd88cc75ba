#pragma once

#include <cstddef>
#include <iosfwd>
#include <stdexcept>
#include <string_view>
#include <vector>

#include "spikemem/tensor.hpp"

namespace spikemem {

// Thrown when the silhouette is not defined (fewer than two clusters).
class UndefinedMetricError : public std::domain_error {
public:
    using std::domain_error::domain_error;
};

struct LabeledEmbedding {
    Tensor features;          // [N, D]
    std::vector<int> labels;  // N

    std::size_t size() const { return labels.size(); }
    void validate() const;
};

// Euclidean silhouette of sample i. Singleton clusters and a = b = 0 give 0.
double silhouette_sample(std::size_t i, const LabeledEmbedding& embedding);
std::vector<double> silhouette_samples(const LabeledEmbedding& embedding);
double silhouette_score(const LabeledEmbedding& embedding);

enum class SilhouetteBand { weak, fair, good, excellent };

// weak < 0.25 <= fair < 0.5 <= good < 0.7 <= excellent
SilhouetteBand interpret(double score);
std::string_view band_name(SilhouetteBand band);

struct ClassSilhouette {
    int label = 0;
    std::size_t count = 0;
    double mean = 0.0;
};

struct SilhouetteReport {
    double score = 0.0;
    SilhouetteBand band = SilhouetteBand::weak;
    std::size_t samples = 0;
    std::vector<ClassSilhouette> per_class;  // ascending label
};

SilhouetteReport silhouette_report(const LabeledEmbedding& embedding);

// Columns: label,count,mean_silhouette; followed by an "overall" row with the band.
void write_silhouette_csv(std::ostream& os, const SilhouetteReport& report);
// Columns: label,f0,...,f{D-1}
void write_features_csv(std::ostream& os, const LabeledEmbedding& embedding);

}  // namespace spikemem
