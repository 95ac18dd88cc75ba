#include "spikemem/hopfield.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <stdexcept>
#include <string>

namespace spikemem {

namespace {

using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

Eigen::Map<const RowMat> weight_matrix(const HopfieldMemory& memory) {
    const auto n = static_cast<Eigen::Index>(memory.dim());
    return Eigen::Map<const RowMat>(memory.weights().data(), n, n);
}

void require_dim(const char* op, const HopfieldMemory& memory, std::size_t n) {
    if (n != memory.dim()) throw ShapeError(op, Shape{memory.dim()}, Shape{n});
}

double sign(double v) { return v >= 0.0 ? 1.0 : -1.0; }

double median(std::span<const double> h) {
    std::vector<double> sorted(h.begin(), h.end());
    std::sort(sorted.begin(), sorted.end());
    const std::size_t n = sorted.size();
    return n % 2 == 1 ? sorted[n / 2] : 0.5 * (sorted[n / 2 - 1] + sorted[n / 2]);
}

// Active units share the input's total activity, so sparse spike vectors stay
// sparse in magnitude after snapping to a half-active attractor.
template <typename State>
double active_level(const State& state, std::size_t n, std::span<const double> h_real) {
    double mass = 0.0;
    for (double v : h_real) mass += v;
    std::size_t active = 0;
    for (std::size_t i = 0; i < n; ++i) active += state(i) > 0.0 ? 1 : 0;
    return active == 0 ? 0.0 : std::max(0.0, mass / static_cast<double>(active));
}

std::vector<double> unbinarize(const Bipolar& state, std::span<const double> h_real) {
    const double level = active_level([&](std::size_t i) { return state[i]; }, state.size(), h_real);
    std::vector<double> out(state.size());
    for (std::size_t i = 0; i < state.size(); ++i) out[i] = state[i] > 0.0 ? level : 0.0;
    return out;
}

}  // namespace

HopfieldMemory::HopfieldMemory(std::size_t dim, std::size_t k_max)
    : dim_(dim), k_max_(k_max), weights_(Shape{dim, dim}) {
    if (dim == 0) throw std::invalid_argument("hopfield: dimension must be positive");
    if (k_max == 0) throw std::invalid_argument("hopfield: k_max must be at least 1");
}

HopfieldMemory HopfieldMemory::store(std::span<const Bipolar> patterns, std::size_t k_max) {
    if (patterns.empty()) throw std::invalid_argument("hopfield: at least one pattern is required");
    const std::size_t n = patterns.front().size();
    HopfieldMemory memory(n, k_max);
    Eigen::Map<RowMat> w(memory.weights_.data(), static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n));
    for (std::size_t p = 0; p < patterns.size(); ++p) {
        const auto& xi = patterns[p];
        if (xi.size() != n) throw ShapeError("store_patterns", Shape{n}, Shape{xi.size()});
        if (!is_bipolar(xi)) {
            throw std::invalid_argument("store_patterns: pattern " + std::to_string(p) + " has a non-bipolar entry");
        }
        Eigen::Map<const Eigen::VectorXd> v(xi.data(), static_cast<Eigen::Index>(n));
        w.noalias() += v * v.transpose();
    }
    w.diagonal().array() -= static_cast<double>(patterns.size());
    memory.patterns_.assign(patterns.begin(), patterns.end());
    return memory;
}

bool is_bipolar(std::span<const double> h) {
    return std::all_of(h.begin(), h.end(), [](double v) { return v == 1.0 || v == -1.0; });
}

double energy(const HopfieldMemory& memory, std::span<const double> h) {
    require_dim("energy", memory, h.size());
    Eigen::Map<const Eigen::VectorXd> v(h.data(), static_cast<Eigen::Index>(h.size()));
    return -0.5 * v.dot(weight_matrix(memory) * v);
}

RetrievalTrace hopfield_update(const HopfieldMemory& memory, const Bipolar& h0) {
    require_dim("hopfield_update", memory, h0.size());
    if (!is_bipolar(h0)) throw std::invalid_argument("hopfield_update: query must be bipolar");
    RetrievalTrace trace;
    trace.states.push_back(h0);
    trace.energies.push_back(energy(memory, h0));
    const auto w = weight_matrix(memory);
    Eigen::VectorXd field(static_cast<Eigen::Index>(memory.dim()));
    while (trace.iterations < memory.k_max()) {
        const Bipolar& current = trace.states.back();
        Eigen::Map<const Eigen::VectorXd> v(current.data(), static_cast<Eigen::Index>(current.size()));
        field.noalias() = w * v;
        Bipolar next(current.size());
        for (std::size_t i = 0; i < next.size(); ++i) next[i] = sign(field[static_cast<Eigen::Index>(i)]);
        ++trace.iterations;
        if (next == current) {
            trace.converged = true;
            break;
        }
        trace.energies.push_back(energy(memory, next));
        trace.states.push_back(std::move(next));
    }
    return trace;
}

Bipolar binarize(std::span<const double> h) {
    if (h.empty()) return {};
    const double m = median(h);
    Bipolar out(h.size());
    for (std::size_t i = 0; i < h.size(); ++i) out[i] = h[i] > m ? 1.0 : -1.0;
    return out;
}

HopfieldLayerResult hopfield_layer_forward(std::span<const double> h_real, const HopfieldMemory& memory) {
    if (memory.empty()) return {std::vector<double>(h_real.begin(), h_real.end()), true};
    require_dim("hopfield_layer_forward", memory, h_real.size());
    const RetrievalTrace trace = hopfield_update(memory, binarize(h_real));
    return {unbinarize(trace.final_state(), h_real), false};
}

Tensor hopfield_layer_forward_batch(const Tensor& h, const HopfieldMemory& memory) {
    return hopfield_layer_forward_batch(h, h, memory);
}

Tensor hopfield_layer_forward_batch(const Tensor& query, const Tensor& h, const HopfieldMemory& memory) {
    if (h.rank() != 2) throw ShapeError("hopfield_layer_forward_batch", h.shape(), Shape{0, memory.dim()});
    if (query.shape() != h.shape()) throw ShapeError("hopfield_layer_forward_batch", h.shape(), query.shape());
    if (memory.empty()) return h;
    const std::size_t rows = h.dim(0);
    const std::size_t n = h.dim(1);
    require_dim("hopfield_layer_forward_batch", memory, n);

    RowMat state(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(n));
    for (std::size_t r = 0; r < rows; ++r) {
        const Bipolar b = binarize(std::span<const double>(query.data() + r * n, n));
        for (std::size_t i = 0; i < n; ++i) state(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(i)) = b[i];
    }

    // Synchronous updates for all rows at once; W is symmetric so S W == (W S^T)^T.
    std::vector<bool> active(rows, true);
    const auto w = weight_matrix(memory);
    RowMat field;
    for (std::size_t k = 0; k < memory.k_max(); ++k) {
        field.noalias() = state * w;
        bool any = false;
        for (std::size_t r = 0; r < rows; ++r) {
            if (!active[r]) continue;
            const auto row = static_cast<Eigen::Index>(r);
            bool changed = false;
            for (Eigen::Index i = 0; i < static_cast<Eigen::Index>(n); ++i) {
                const double next = sign(field(row, i));
                if (next != state(row, i)) {
                    state(row, i) = next;
                    changed = true;
                }
            }
            active[r] = changed;
            any = any || changed;
        }
        if (!any) break;
    }

    Tensor out(h.shape());
    for (std::size_t r = 0; r < rows; ++r) {
        const auto row = static_cast<Eigen::Index>(r);
        const double level = active_level([&](std::size_t i) { return state(row, static_cast<Eigen::Index>(i)); }, n,
                                          std::span<const double>(h.data() + r * n, n));
        for (std::size_t i = 0; i < n; ++i) {
            out[r * n + i] = state(row, static_cast<Eigen::Index>(i)) > 0.0 ? level : 0.0;
        }
    }
    return out;
}

ad::Value hopfield_layer(const ad::Value& h, const HopfieldMemory& memory) {
    if (memory.empty()) return h;
    return ad::straight_through(h, hopfield_layer_forward_batch(h.data(), memory));
}

ad::Value hopfield_layer(const Tensor& query, const ad::Value& h, const HopfieldMemory& memory) {
    if (memory.empty()) return h;
    return ad::straight_through(h, hopfield_layer_forward_batch(query, h.data(), memory));
}

}  // namespace spikemem
