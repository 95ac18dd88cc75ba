#pragma once

// Reverse-mode differentiation over dense double arrays.
//
// Graphs are define-by-run: every op call records a node holding its output,
// its parents and a closure that pushes the upstream gradient into the
// parents. `backward` walks the recorded graph once in reverse topological
// order. The Heaviside spike nonlinearity is recorded with a fast-sigmoid
// surrogate in place of its true derivative.

#include <cstddef>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "spikemem/tensor.hpp"

namespace spikemem::ad {

struct Node;
using NodePtr = std::shared_ptr<Node>;
using BackwardFn = std::function<void(Node& self)>;

struct Node {
    Tensor data;
    Tensor grad;  // allocated on first accumulation
    std::vector<NodePtr> parents;
    BackwardFn backward;
    std::string op;
    bool requires_grad = false;
    bool leaf = true;

    Tensor& ensure_grad();
};

class Value {
public:
    Value() = default;
    explicit Value(NodePtr node) : node_(std::move(node)) {}

    // Trainable leaf: gradients accumulate into it.
    static Value parameter(Tensor t);
    // Leaf that never receives gradients.
    static Value constant(Tensor t);

    const Tensor& data() const { return node_->data; }
    Tensor& mutable_data() { return node_->data; }
    // Always data-shaped; zero until a backward pass reaches this node.
    const Tensor& grad() const { return node_->ensure_grad(); }
    Tensor& mutable_grad() { return node_->ensure_grad(); }
    const Shape& shape() const { return node_->data.shape(); }
    const std::string& op() const { return node_->op; }
    bool requires_grad() const { return node_ && node_->requires_grad; }
    double item() const { return node_->data.item(); }
    void zero_grad();

    const NodePtr& node() const noexcept { return node_; }
    explicit operator bool() const noexcept { return static_cast<bool>(node_); }

private:
    NodePtr node_;
};

// Disables graph recording on the current thread for its lifetime.
class NoGradGuard {
public:
    NoGradGuard();
    ~NoGradGuard();
    NoGradGuard(const NoGradGuard&) = delete;
    NoGradGuard& operator=(const NoGradGuard&) = delete;

    static bool active() noexcept;

private:
    bool previous_;
};

// Records a new node. `backward` receives the new node (whose grad holds the
// upstream gradient) and must push contributions into the parents through
// `accumulate`.
Value record(std::string op, std::vector<Value> inputs, Tensor out, BackwardFn backward);

// Adds `contribution` into the gradient of `parent` if it tracks gradients.
void accumulate(Node& parent, const Tensor& contribution);

struct BackwardOptions {
    // Free intermediate data and gradients as soon as they are consumed.
    // Leaves keep both. Outputs held by the caller become unusable.
    bool release_graph = false;
};

void backward(const Value& root, BackwardOptions options = {});

// ---------------------------------------------------------------------------
// Surrogate spike threshold

struct SurrogateSpec {
    double slope = 0.9;
    double threshold = 1.0;

    void validate() const;
};

// Forward: 1 where u >= threshold else 0.
// Backward: upstream * 1 / (1 + |slope * (u - threshold)|)^2.
Value spike_threshold(const Value& u, const SurrogateSpec& spec);
double surrogate_factor(double u, const SurrogateSpec& spec);

// ---------------------------------------------------------------------------
// Elementwise

Value add(const Value& a, const Value& b);
Value sub(const Value& a, const Value& b);
Value mul(const Value& a, const Value& b);
Value scale(const Value& a, double c);
Value add_n(std::span<const Value> terms);
// b has shape equal to the trailing dimension of x.
Value add_bias(const Value& x, const Value& b);
Value tanh(const Value& x);
Value sigmoid(const Value& x);
Value exp(const Value& x);
Value log(const Value& x);
// max(x, lo); gradient is zero where the clamp is active.
Value clamp_min(const Value& x, double lo);

// ---------------------------------------------------------------------------
// Reductions and reshaping

Value sum(const Value& x);
Value mean(const Value& x);
Value reshape(const Value& x, Shape shape);
Value transpose(const Value& x);
// [B,n] ++ [B,m] -> [B,n+m]
Value concat_cols(const Value& a, const Value& b);
// out[i] = x[i, index[i]]
Value pick(const Value& x, std::span<const int> index);

// ---------------------------------------------------------------------------
// Linear algebra

Value matmul(const Value& a, const Value& b);
// x[B,in] * W[out,in]^T + b[out]; `bias` may be empty.
Value linear(const Value& x, const Value& weight, const Value& bias);
// x[B,C,H,W], weight[O,C,k,k], bias[O]; stride 1, zero padding.
Value conv2d(const Value& x, const Value& weight, const Value& bias, std::size_t padding);
// Non-overlapping k x k mean pooling; trailing rows/cols that do not fill a window are dropped.
Value avg_pool2d(const Value& x, std::size_t k);

// ---------------------------------------------------------------------------
// Loss building blocks

Value log_softmax_rows(const Value& x);
// Rows with norm below `min_norm` map to zero and receive no gradient.
Value l2_normalize_rows(const Value& x, double min_norm = 1e-12);
// out[i] = log sum_j mask[i,j] * exp(x[i,j]); rows with an empty mask give 0.
Value masked_logsumexp_rows(const Value& x, const Tensor& mask);
// Forward value replaced by `forward`; gradient passes to x unchanged.
Value straight_through(const Value& x, Tensor forward);

// ---------------------------------------------------------------------------

// Max over coordinates of |analytic - central difference| / (|analytic| + eps_abs)
// for the scalar graph `f` evaluated at `x`.
double finite_diff_check(const std::function<Value(const Value&)>& f, const Tensor& x, double eps = 1e-5,
                         double eps_abs = 1e-6);

}  // namespace spikemem::ad
