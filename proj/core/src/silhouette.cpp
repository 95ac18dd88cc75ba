#include "spikemem/silhouette.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <ostream>
#include <set>

#include "spikemem/csv.hpp"

namespace spikemem {

namespace {

double distance(const LabeledEmbedding& e, std::size_t i, std::size_t j) {
    const std::size_t d = e.features.dim(1);
    const double* a = e.features.data() + i * d;
    const double* b = e.features.data() + j * d;
    double acc = 0.0;
    for (std::size_t k = 0; k < d; ++k) {
        const double diff = a[k] - b[k];
        acc += diff * diff;
    }
    return std::sqrt(acc);
}

// Mean distance from sample i to every cluster, given a row of distances.
double silhouette_from_row(std::size_t i, const LabeledEmbedding& e, const std::vector<double>& row) {
    std::map<int, std::pair<double, std::size_t>> per_cluster;
    for (std::size_t j = 0; j < e.size(); ++j) {
        if (j == i) continue;
        auto& [total, count] = per_cluster[e.labels[j]];
        total += row[j];
        ++count;
    }
    const int own = e.labels[i];
    const auto own_it = per_cluster.find(own);
    if (own_it == per_cluster.end()) return 0.0;  // singleton cluster
    const double a = own_it->second.first / static_cast<double>(own_it->second.second);
    double b = std::numeric_limits<double>::infinity();
    for (const auto& [label, acc] : per_cluster) {
        if (label == own) continue;
        b = std::min(b, acc.first / static_cast<double>(acc.second));
    }
    const double denom = std::max(a, b);
    return denom == 0.0 ? 0.0 : (b - a) / denom;
}

}  // namespace

void LabeledEmbedding::validate() const {
    if (features.rank() != 2) throw ShapeError("silhouette", features.shape(), Shape{0, 0});
    if (features.dim(0) != labels.size()) throw ShapeError("silhouette", features.shape(), Shape{labels.size()});
    if (labels.size() < 2) throw UndefinedMetricError("silhouette: needs at least 2 samples");
    const std::set<int> distinct(labels.begin(), labels.end());
    if (distinct.size() < 2) throw UndefinedMetricError("silhouette: needs at least 2 distinct labels");
}

double silhouette_sample(std::size_t i, const LabeledEmbedding& embedding) {
    embedding.validate();
    if (i >= embedding.size()) throw std::out_of_range("silhouette_sample: index out of range");
    std::vector<double> row(embedding.size());
    for (std::size_t j = 0; j < embedding.size(); ++j) row[j] = j == i ? 0.0 : distance(embedding, i, j);
    return silhouette_from_row(i, embedding, row);
}

std::vector<double> silhouette_samples(const LabeledEmbedding& embedding) {
    embedding.validate();
    const std::size_t n = embedding.size();
    std::vector<double> dist(n * n, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = i + 1; j < n; ++j) {
            dist[i * n + j] = dist[j * n + i] = distance(embedding, i, j);
        }
    }
    std::vector<double> out(n);
    std::vector<double> row(n);
    for (std::size_t i = 0; i < n; ++i) {
        std::copy(dist.begin() + static_cast<std::ptrdiff_t>(i * n),
                  dist.begin() + static_cast<std::ptrdiff_t>((i + 1) * n), row.begin());
        out[i] = silhouette_from_row(i, embedding, row);
    }
    return out;
}

double silhouette_score(const LabeledEmbedding& embedding) {
    const auto s = silhouette_samples(embedding);
    double total = 0.0;
    for (double v : s) total += v;
    return total / static_cast<double>(s.size());
}

SilhouetteBand interpret(double score) {
    if (!(score >= -1.0 && score <= 1.0)) throw std::out_of_range("interpret: silhouette must lie in [-1, 1]");
    if (score < 0.25) return SilhouetteBand::weak;
    if (score < 0.5) return SilhouetteBand::fair;
    if (score < 0.7) return SilhouetteBand::good;
    return SilhouetteBand::excellent;
}

std::string_view band_name(SilhouetteBand band) {
    switch (band) {
        case SilhouetteBand::weak: return "weak";
        case SilhouetteBand::fair: return "fair";
        case SilhouetteBand::good: return "good";
        case SilhouetteBand::excellent: return "excellent";
    }
    return "unknown";
}

SilhouetteReport silhouette_report(const LabeledEmbedding& embedding) {
    const auto s = silhouette_samples(embedding);
    SilhouetteReport report;
    report.samples = s.size();
    std::map<int, ClassSilhouette> classes;
    double total = 0.0;
    for (std::size_t i = 0; i < s.size(); ++i) {
        auto& c = classes[embedding.labels[i]];
        c.label = embedding.labels[i];
        c.mean += s[i];
        ++c.count;
        total += s[i];
    }
    for (auto& [label, c] : classes) {
        c.mean /= static_cast<double>(c.count);
        report.per_class.push_back(c);
    }
    report.score = total / static_cast<double>(s.size());
    report.band = interpret(report.score);
    return report;
}

void write_silhouette_csv(std::ostream& os, const SilhouetteReport& report) {
    os << "label,count,mean_silhouette,band\n";
    for (const auto& c : report.per_class) {
        os << c.label << ',' << c.count << ',' << csv::number(c.mean) << ',' << band_name(interpret(c.mean)) << '\n';
    }
    os << "overall," << report.samples << ',' << csv::number(report.score) << ',' << band_name(report.band) << '\n';
}

void write_features_csv(std::ostream& os, const LabeledEmbedding& embedding) {
    const std::size_t d = embedding.features.dim(1);
    os << "label";
    for (std::size_t k = 0; k < d; ++k) os << ",f" << k;
    os << '\n';
    for (std::size_t i = 0; i < embedding.size(); ++i) {
        os << embedding.labels[i];
        for (std::size_t k = 0; k < d; ++k) os << ',' << csv::number(embedding.features[i * d + k]);
        os << '\n';
    }
}

}  // namespace spikemem
