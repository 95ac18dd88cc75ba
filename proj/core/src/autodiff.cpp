#include "spikemem/autodiff.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <unordered_set>
#include <utility>

namespace spikemem::ad {

namespace {

using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MatMap = Eigen::Map<RowMat>;
using ConstMatMap = Eigen::Map<const RowMat>;
using VecMap = Eigen::Map<Eigen::VectorXd>;
using ConstVecMap = Eigen::Map<const Eigen::VectorXd>;

thread_local bool g_no_grad = false;

ConstMatMap as_matrix(const Tensor& t, std::size_t rows, std::size_t cols) {
    return ConstMatMap(t.data(), static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
}

MatMap as_matrix(Tensor& t, std::size_t rows, std::size_t cols) {
    return MatMap(t.data(), static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
}

ConstVecMap as_vector(const Tensor& t) { return ConstVecMap(t.data(), static_cast<Eigen::Index>(t.size())); }

VecMap as_vector(Tensor& t) { return VecMap(t.data(), static_cast<Eigen::Index>(t.size())); }

void require_same_shape(const char* op, const Value& a, const Value& b) {
    if (a.shape() != b.shape()) throw ShapeError(op, a.shape(), b.shape());
}

void require_rank(const char* op, const Value& x, std::size_t rank) {
    if (x.data().rank() != rank) throw ShapeError(op, x.shape(), Shape(rank, 0));
}

// Elementwise unary op where the local derivative is a function of the input
// value x and the output value y.
template <typename Forward, typename Derivative>
Value unary(const char* op, const Value& x, Forward forward, Derivative derivative) {
    Tensor out(x.shape());
    const double* in = x.data().data();
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = forward(in[i]);
    return record(op, {x}, std::move(out), [derivative](Node& self) {
        Node& parent = *self.parents[0];
        if (!parent.requires_grad) return;
        Tensor& g = parent.ensure_grad();
        for (std::size_t i = 0; i < g.size(); ++i) {
            g[i] += self.grad[i] * derivative(parent.data[i], self.data[i]);
        }
    });
}

void im2col(const double* x, std::size_t channels, std::size_t height, std::size_t width, std::size_t k,
            std::size_t pad, std::size_t out_h, std::size_t out_w, double* cols) {
    const std::size_t plane = out_h * out_w;
    for (std::size_t c = 0; c < channels; ++c) {
        for (std::size_t ki = 0; ki < k; ++ki) {
            for (std::size_t kj = 0; kj < k; ++kj) {
                double* row = cols + ((c * k + ki) * k + kj) * plane;
                for (std::size_t oy = 0; oy < out_h; ++oy) {
                    const auto iy = static_cast<std::ptrdiff_t>(oy + ki) - static_cast<std::ptrdiff_t>(pad);
                    double* dst = row + oy * out_w;
                    if (iy < 0 || iy >= static_cast<std::ptrdiff_t>(height)) {
                        std::fill(dst, dst + out_w, 0.0);
                        continue;
                    }
                    const double* src = x + (c * height + static_cast<std::size_t>(iy)) * width;
                    for (std::size_t ox = 0; ox < out_w; ++ox) {
                        const auto ix = static_cast<std::ptrdiff_t>(ox + kj) - static_cast<std::ptrdiff_t>(pad);
                        dst[ox] = (ix < 0 || ix >= static_cast<std::ptrdiff_t>(width)) ? 0.0 : src[ix];
                    }
                }
            }
        }
    }
}

void col2im_add(const double* cols, std::size_t channels, std::size_t height, std::size_t width, std::size_t k,
                std::size_t pad, std::size_t out_h, std::size_t out_w, double* x) {
    const std::size_t plane = out_h * out_w;
    for (std::size_t c = 0; c < channels; ++c) {
        for (std::size_t ki = 0; ki < k; ++ki) {
            for (std::size_t kj = 0; kj < k; ++kj) {
                const double* row = cols + ((c * k + ki) * k + kj) * plane;
                for (std::size_t oy = 0; oy < out_h; ++oy) {
                    const auto iy = static_cast<std::ptrdiff_t>(oy + ki) - static_cast<std::ptrdiff_t>(pad);
                    if (iy < 0 || iy >= static_cast<std::ptrdiff_t>(height)) continue;
                    double* dst = x + (c * height + static_cast<std::size_t>(iy)) * width;
                    const double* src = row + oy * out_w;
                    for (std::size_t ox = 0; ox < out_w; ++ox) {
                        const auto ix = static_cast<std::ptrdiff_t>(ox + kj) - static_cast<std::ptrdiff_t>(pad);
                        if (ix >= 0 && ix < static_cast<std::ptrdiff_t>(width)) dst[ix] += src[ox];
                    }
                }
            }
        }
    }
}

}  // namespace

// ---------------------------------------------------------------------------

Tensor& Node::ensure_grad() {
    if (grad.size() != data.size() || grad.shape() != data.shape()) grad = Tensor(data.shape(), 0.0);
    return grad;
}

Value Value::parameter(Tensor t) {
    auto node = std::make_shared<Node>();
    node->data = std::move(t);
    node->op = "parameter";
    node->requires_grad = true;
    return Value(std::move(node));
}

Value Value::constant(Tensor t) {
    auto node = std::make_shared<Node>();
    node->data = std::move(t);
    node->op = "constant";
    return Value(std::move(node));
}

void Value::zero_grad() { node_->ensure_grad().fill(0.0); }

NoGradGuard::NoGradGuard() : previous_(g_no_grad) { g_no_grad = true; }
NoGradGuard::~NoGradGuard() { g_no_grad = previous_; }
bool NoGradGuard::active() noexcept { return g_no_grad; }

Value record(std::string op, std::vector<Value> inputs, Tensor out, BackwardFn backward) {
    auto node = std::make_shared<Node>();
    node->data = std::move(out);
    node->op = std::move(op);
    node->leaf = false;
    if (g_no_grad) return Value(std::move(node));
    const bool tracked = std::any_of(inputs.begin(), inputs.end(), [](const Value& v) { return v.requires_grad(); });
    if (!tracked) return Value(std::move(node));
    node->requires_grad = true;
    node->parents.reserve(inputs.size());
    for (auto& v : inputs) node->parents.push_back(v.node());
    node->backward = std::move(backward);
    return Value(std::move(node));
}

void accumulate(Node& parent, const Tensor& contribution) {
    if (!parent.requires_grad) return;
    Tensor& g = parent.ensure_grad();
    if (contribution.size() != g.size()) throw ShapeError("accumulate", g.shape(), contribution.shape());
    as_vector(g) += as_vector(contribution);
}

void backward(const Value& root, BackwardOptions options) {
    if (!root) throw std::invalid_argument("backward: empty value");
    if (root.data().size() != 1) {
        throw std::invalid_argument("backward: root must be scalar, got shape " + shape_str(root.shape()));
    }
    if (!root.requires_grad()) return;

    // Iterative post-order DFS gives a topological order (parents first).
    // `order` owns the nodes so releasing parent links cannot free one early.
    std::vector<NodePtr> order;
    std::unordered_set<Node*> visited;
    std::vector<std::pair<NodePtr, std::size_t>> stack;
    stack.emplace_back(root.node(), 0);
    visited.insert(root.node().get());
    while (!stack.empty()) {
        auto& [node, next] = stack.back();
        if (next < node->parents.size()) {
            const NodePtr& parent = node->parents[next++];
            if (parent->requires_grad && visited.insert(parent.get()).second) stack.emplace_back(parent, 0);
        } else {
            order.push_back(std::move(node));
            stack.pop_back();
        }
    }

    root.node()->ensure_grad()[0] += 1.0;
    for (auto it = order.rbegin(); it != order.rend(); ++it) {
        Node& node = **it;
        if (node.backward && !node.grad.empty()) node.backward(node);
        if (options.release_graph && !node.leaf) {
            node.grad.release();
            node.data.release();
            node.parents.clear();
            node.backward = nullptr;
        }
    }
}

// ---------------------------------------------------------------------------

void SurrogateSpec::validate() const {
    if (!(slope > 0.0)) throw std::invalid_argument("surrogate slope must be positive");
}

double surrogate_factor(double u, const SurrogateSpec& spec) {
    const double d = 1.0 + std::abs(spec.slope * (u - spec.threshold));
    return 1.0 / (d * d);
}

Value spike_threshold(const Value& u, const SurrogateSpec& spec) {
    spec.validate();
    Tensor out(u.shape());
    const Tensor& in = u.data();
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = in[i] >= spec.threshold ? 1.0 : 0.0;
    return record("spike_threshold", {u}, std::move(out), [spec](Node& self) {
        Node& parent = *self.parents[0];
        Tensor& g = parent.ensure_grad();
        for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i] * surrogate_factor(parent.data[i], spec);
    });
}

// ---------------------------------------------------------------------------

Value add(const Value& a, const Value& b) {
    require_same_shape("add", a, b);
    Tensor out(a.shape());
    as_vector(out) = as_vector(a.data()) + as_vector(b.data());
    return record("add", {a, b}, std::move(out), [](Node& self) {
        accumulate(*self.parents[0], self.grad);
        accumulate(*self.parents[1], self.grad);
    });
}

Value sub(const Value& a, const Value& b) {
    require_same_shape("sub", a, b);
    Tensor out(a.shape());
    as_vector(out) = as_vector(a.data()) - as_vector(b.data());
    return record("sub", {a, b}, std::move(out), [](Node& self) {
        accumulate(*self.parents[0], self.grad);
        Node& rhs = *self.parents[1];
        if (rhs.requires_grad) as_vector(rhs.ensure_grad()) -= as_vector(self.grad);
    });
}

Value mul(const Value& a, const Value& b) {
    require_same_shape("mul", a, b);
    Tensor out(a.shape());
    as_vector(out) = as_vector(a.data()).cwiseProduct(as_vector(b.data()));
    return record("mul", {a, b}, std::move(out), [](Node& self) {
        Node& lhs = *self.parents[0];
        Node& rhs = *self.parents[1];
        if (lhs.requires_grad) as_vector(lhs.ensure_grad()) += as_vector(self.grad).cwiseProduct(as_vector(rhs.data));
        if (rhs.requires_grad) as_vector(rhs.ensure_grad()) += as_vector(self.grad).cwiseProduct(as_vector(lhs.data));
    });
}

Value scale(const Value& a, double c) {
    Tensor out(a.shape());
    as_vector(out) = as_vector(a.data()) * c;
    return record("scale", {a}, std::move(out), [c](Node& self) {
        as_vector(self.parents[0]->ensure_grad()) += as_vector(self.grad) * c;
    });
}

Value add_n(std::span<const Value> terms) {
    if (terms.empty()) throw std::invalid_argument("add_n: no terms");
    Tensor out(terms.front().shape());
    for (const auto& t : terms) {
        require_same_shape("add_n", terms.front(), t);
        as_vector(out) += as_vector(t.data());
    }
    return record("add_n", std::vector<Value>(terms.begin(), terms.end()), std::move(out), [](Node& self) {
        for (auto& p : self.parents) accumulate(*p, self.grad);
    });
}

Value add_bias(const Value& x, const Value& b) {
    if (b.data().rank() != 1 || x.data().rank() == 0 || x.shape().back() != b.shape()[0]) {
        throw ShapeError("add_bias", x.shape(), b.shape());
    }
    const std::size_t cols = b.shape()[0];
    const std::size_t rows = x.data().size() / cols;
    Tensor out(x.shape());
    as_matrix(out, rows, cols) = as_matrix(x.data(), rows, cols).rowwise() + as_vector(b.data()).transpose();
    return record("add_bias", {x, b}, std::move(out), [rows, cols](Node& self) {
        accumulate(*self.parents[0], self.grad);
        Node& bias = *self.parents[1];
        if (bias.requires_grad) {
            as_vector(bias.ensure_grad()) += as_matrix(self.grad, rows, cols).colwise().sum().transpose();
        }
    });
}

Value tanh(const Value& x) {
    return unary(
        "tanh", x, [](double v) { return std::tanh(v); }, [](double, double y) { return 1.0 - y * y; });
}

Value sigmoid(const Value& x) {
    return unary(
        "sigmoid", x, [](double v) { return 1.0 / (1.0 + std::exp(-v)); },
        [](double, double y) { return y * (1.0 - y); });
}

Value exp(const Value& x) {
    return unary(
        "exp", x, [](double v) { return std::exp(v); }, [](double, double y) { return y; });
}

Value log(const Value& x) {
    return unary(
        "log", x, [](double v) { return std::log(v); }, [](double v, double) { return 1.0 / v; });
}

Value clamp_min(const Value& x, double lo) {
    return unary(
        "clamp_min", x, [lo](double v) { return std::max(v, lo); },
        [lo](double v, double) { return v >= lo ? 1.0 : 0.0; });
}

// ---------------------------------------------------------------------------

Value sum(const Value& x) {
    Tensor out = Tensor::scalar(as_vector(x.data()).sum());
    return record("sum", {x}, std::move(out), [](Node& self) {
        Node& parent = *self.parents[0];
        if (parent.requires_grad) as_vector(parent.ensure_grad()).array() += self.grad[0];
    });
}

Value mean(const Value& x) {
    const auto n = static_cast<double>(x.data().size());
    if (n == 0) throw std::invalid_argument("mean: empty input");
    Tensor out = Tensor::scalar(as_vector(x.data()).sum() / n);
    return record("mean", {x}, std::move(out), [n](Node& self) {
        Node& parent = *self.parents[0];
        if (parent.requires_grad) as_vector(parent.ensure_grad()).array() += self.grad[0] / n;
    });
}

Value reshape(const Value& x, Shape shape) {
    Tensor out = x.data().reshaped(std::move(shape));
    return record("reshape", {x}, std::move(out), [](Node& self) {
        Node& parent = *self.parents[0];
        if (parent.requires_grad) as_vector(parent.ensure_grad()) += as_vector(self.grad);
    });
}

Value transpose(const Value& x) {
    require_rank("transpose", x, 2);
    const std::size_t r = x.shape()[0];
    const std::size_t c = x.shape()[1];
    Tensor out(Shape{c, r});
    as_matrix(out, c, r) = as_matrix(x.data(), r, c).transpose();
    return record("transpose", {x}, std::move(out), [r, c](Node& self) {
        Node& parent = *self.parents[0];
        if (parent.requires_grad) as_matrix(parent.ensure_grad(), r, c) += as_matrix(self.grad, c, r).transpose();
    });
}

Value concat_cols(const Value& a, const Value& b) {
    require_rank("concat_cols", a, 2);
    require_rank("concat_cols", b, 2);
    if (a.shape()[0] != b.shape()[0]) throw ShapeError("concat_cols", a.shape(), b.shape());
    const std::size_t rows = a.shape()[0];
    const std::size_t n = a.shape()[1];
    const std::size_t m = b.shape()[1];
    Tensor out(Shape{rows, n + m});
    auto o = as_matrix(out, rows, n + m);
    o.leftCols(static_cast<Eigen::Index>(n)) = as_matrix(a.data(), rows, n);
    o.rightCols(static_cast<Eigen::Index>(m)) = as_matrix(b.data(), rows, m);
    return record("concat_cols", {a, b}, std::move(out), [rows, n, m](Node& self) {
        auto g = as_matrix(self.grad, rows, n + m);
        Node& lhs = *self.parents[0];
        Node& rhs = *self.parents[1];
        if (lhs.requires_grad) as_matrix(lhs.ensure_grad(), rows, n) += g.leftCols(static_cast<Eigen::Index>(n));
        if (rhs.requires_grad) as_matrix(rhs.ensure_grad(), rows, m) += g.rightCols(static_cast<Eigen::Index>(m));
    });
}

Value pick(const Value& x, std::span<const int> index) {
    require_rank("pick", x, 2);
    const std::size_t rows = x.shape()[0];
    const std::size_t cols = x.shape()[1];
    if (index.size() != rows) throw ShapeError("pick", x.shape(), Shape{index.size()});
    std::vector<std::size_t> idx(rows);
    Tensor out(Shape{rows});
    for (std::size_t i = 0; i < rows; ++i) {
        if (index[i] < 0 || static_cast<std::size_t>(index[i]) >= cols) {
            throw std::out_of_range("pick: index " + std::to_string(index[i]) + " outside [0," + std::to_string(cols) +
                                    ")");
        }
        idx[i] = static_cast<std::size_t>(index[i]);
        out[i] = x.data()[i * cols + idx[i]];
    }
    return record("pick", {x}, std::move(out), [idx = std::move(idx), cols](Node& self) {
        Node& parent = *self.parents[0];
        if (!parent.requires_grad) return;
        Tensor& g = parent.ensure_grad();
        for (std::size_t i = 0; i < idx.size(); ++i) g[i * cols + idx[i]] += self.grad[i];
    });
}

// ---------------------------------------------------------------------------

Value matmul(const Value& a, const Value& b) {
    require_rank("matmul", a, 2);
    require_rank("matmul", b, 2);
    const std::size_t m = a.shape()[0];
    const std::size_t k = a.shape()[1];
    const std::size_t n = b.shape()[1];
    if (b.shape()[0] != k) throw ShapeError("matmul", a.shape(), b.shape());
    Tensor out(Shape{m, n});
    as_matrix(out, m, n).noalias() = as_matrix(a.data(), m, k) * as_matrix(b.data(), k, n);
    return record("matmul", {a, b}, std::move(out), [m, k, n](Node& self) {
        Node& lhs = *self.parents[0];
        Node& rhs = *self.parents[1];
        auto g = as_matrix(self.grad, m, n);
        if (lhs.requires_grad) {
            as_matrix(lhs.ensure_grad(), m, k).noalias() += g * as_matrix(rhs.data, k, n).transpose();
        }
        if (rhs.requires_grad) {
            as_matrix(rhs.ensure_grad(), k, n).noalias() += as_matrix(lhs.data, m, k).transpose() * g;
        }
    });
}

Value linear(const Value& x, const Value& weight, const Value& bias) {
    require_rank("linear", x, 2);
    require_rank("linear", weight, 2);
    const std::size_t batch = x.shape()[0];
    const std::size_t in = x.shape()[1];
    const std::size_t out_features = weight.shape()[0];
    if (weight.shape()[1] != in) throw ShapeError("linear", x.shape(), weight.shape());
    if (bias && (bias.data().rank() != 1 || bias.shape()[0] != out_features)) {
        throw ShapeError("linear", weight.shape(), bias.shape());
    }
    Tensor out(Shape{batch, out_features});
    auto o = as_matrix(out, batch, out_features);
    o.noalias() = as_matrix(x.data(), batch, in) * as_matrix(weight.data(), out_features, in).transpose();
    if (bias) o.rowwise() += as_vector(bias.data()).transpose();
    std::vector<Value> inputs{x, weight};
    if (bias) inputs.push_back(bias);
    return record("linear", std::move(inputs), std::move(out), [batch, in, out_features](Node& self) {
        Node& xn = *self.parents[0];
        Node& wn = *self.parents[1];
        auto g = as_matrix(self.grad, batch, out_features);
        if (xn.requires_grad) {
            as_matrix(xn.ensure_grad(), batch, in).noalias() += g * as_matrix(wn.data, out_features, in);
        }
        if (wn.requires_grad) {
            as_matrix(wn.ensure_grad(), out_features, in).noalias() +=
                g.transpose() * as_matrix(xn.data, batch, in);
        }
        if (self.parents.size() > 2 && self.parents[2]->requires_grad) {
            as_vector(self.parents[2]->ensure_grad()) += g.colwise().sum().transpose();
        }
    });
}

Value conv2d(const Value& x, const Value& weight, const Value& bias, std::size_t padding) {
    require_rank("conv2d", x, 4);
    require_rank("conv2d", weight, 4);
    const std::size_t batch = x.shape()[0];
    const std::size_t channels = x.shape()[1];
    const std::size_t height = x.shape()[2];
    const std::size_t width = x.shape()[3];
    const std::size_t out_channels = weight.shape()[0];
    const std::size_t k = weight.shape()[2];
    if (weight.shape()[1] != channels || weight.shape()[3] != k || height + 2 * padding < k ||
        width + 2 * padding < k) {
        throw ShapeError("conv2d", x.shape(), weight.shape());
    }
    if (bias && (bias.data().rank() != 1 || bias.shape()[0] != out_channels)) {
        throw ShapeError("conv2d", weight.shape(), bias.shape());
    }
    const std::size_t out_h = height + 2 * padding - k + 1;
    const std::size_t out_w = width + 2 * padding - k + 1;
    const std::size_t plane = out_h * out_w;
    const std::size_t patch = channels * k * k;
    const std::size_t in_size = channels * height * width;

    Tensor out(Shape{batch, out_channels, out_h, out_w});
    Tensor cols(Shape{patch, plane});
    auto w = as_matrix(weight.data(), out_channels, patch);
    for (std::size_t b = 0; b < batch; ++b) {
        im2col(x.data().data() + b * in_size, channels, height, width, k, padding, out_h, out_w, cols.data());
        MatMap o(out.data() + b * out_channels * plane, static_cast<Eigen::Index>(out_channels),
                 static_cast<Eigen::Index>(plane));
        o.noalias() = w * as_matrix(cols, patch, plane);
        if (bias) o.colwise() += as_vector(bias.data());
    }

    std::vector<Value> inputs{x, weight};
    if (bias) inputs.push_back(bias);
    return record("conv2d", std::move(inputs), std::move(out), [=](Node& self) {
        Node& xn = *self.parents[0];
        Node& wn = *self.parents[1];
        Node* bn = self.parents.size() > 2 ? self.parents[2].get() : nullptr;
        Tensor cols_b(Shape{patch, plane});
        Tensor dcols(Shape{patch, plane});
        RowMat dw = RowMat::Zero(static_cast<Eigen::Index>(out_channels), static_cast<Eigen::Index>(patch));
        Eigen::VectorXd db = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(out_channels));
        auto wmat = as_matrix(wn.data, out_channels, patch);
        for (std::size_t b = 0; b < batch; ++b) {
            ConstMatMap g(self.grad.data() + b * out_channels * plane, static_cast<Eigen::Index>(out_channels),
                          static_cast<Eigen::Index>(plane));
            if (wn.requires_grad) {
                im2col(xn.data.data() + b * in_size, channels, height, width, k, padding, out_h, out_w,
                       cols_b.data());
                dw.noalias() += g * as_matrix(cols_b, patch, plane).transpose();
            }
            if (bn && bn->requires_grad) db += g.rowwise().sum();
            if (xn.requires_grad) {
                as_matrix(dcols, patch, plane).noalias() = wmat.transpose() * g;
                col2im_add(dcols.data(), channels, height, width, k, padding, out_h, out_w,
                           xn.ensure_grad().data() + b * in_size);
            }
        }
        if (wn.requires_grad) as_matrix(wn.ensure_grad(), out_channels, patch) += dw;
        if (bn && bn->requires_grad) as_vector(bn->ensure_grad()) += db;
    });
}

Value avg_pool2d(const Value& x, std::size_t k) {
    require_rank("avg_pool2d", x, 4);
    if (k == 0) throw std::invalid_argument("avg_pool2d: window must be positive");
    const std::size_t outer = x.shape()[0] * x.shape()[1];
    const std::size_t height = x.shape()[2];
    const std::size_t width = x.shape()[3];
    const std::size_t out_h = height / k;
    const std::size_t out_w = width / k;
    const double inv = 1.0 / static_cast<double>(k * k);
    Tensor out(Shape{x.shape()[0], x.shape()[1], out_h, out_w});
    const double* in = x.data().data();
    for (std::size_t p = 0; p < outer; ++p) {
        for (std::size_t oy = 0; oy < out_h; ++oy) {
            for (std::size_t ox = 0; ox < out_w; ++ox) {
                double acc = 0.0;
                for (std::size_t dy = 0; dy < k; ++dy) {
                    const double* row = in + (p * height + oy * k + dy) * width + ox * k;
                    for (std::size_t dx = 0; dx < k; ++dx) acc += row[dx];
                }
                out[(p * out_h + oy) * out_w + ox] = acc * inv;
            }
        }
    }
    return record("avg_pool2d", {x}, std::move(out), [=](Node& self) {
        Node& parent = *self.parents[0];
        if (!parent.requires_grad) return;
        double* g = parent.ensure_grad().data();
        for (std::size_t p = 0; p < outer; ++p) {
            for (std::size_t oy = 0; oy < out_h; ++oy) {
                for (std::size_t ox = 0; ox < out_w; ++ox) {
                    const double share = self.grad[(p * out_h + oy) * out_w + ox] * inv;
                    for (std::size_t dy = 0; dy < k; ++dy) {
                        double* row = g + (p * height + oy * k + dy) * width + ox * k;
                        for (std::size_t dx = 0; dx < k; ++dx) row[dx] += share;
                    }
                }
            }
        }
    });
}

// ---------------------------------------------------------------------------

Value log_softmax_rows(const Value& x) {
    require_rank("log_softmax_rows", x, 2);
    const std::size_t rows = x.shape()[0];
    const std::size_t cols = x.shape()[1];
    Tensor out(x.shape());
    auto in = as_matrix(x.data(), rows, cols);
    auto o = as_matrix(out, rows, cols);
    for (Eigen::Index i = 0; i < static_cast<Eigen::Index>(rows); ++i) {
        const double mx = in.row(i).maxCoeff();
        const double lse = mx + std::log((in.row(i).array() - mx).exp().sum());
        o.row(i) = in.row(i).array() - lse;
    }
    return record("log_softmax_rows", {x}, std::move(out), [rows, cols](Node& self) {
        Node& parent = *self.parents[0];
        auto g = as_matrix(self.grad, rows, cols);
        auto y = as_matrix(self.data, rows, cols);
        auto dx = as_matrix(parent.ensure_grad(), rows, cols);
        for (Eigen::Index i = 0; i < static_cast<Eigen::Index>(rows); ++i) {
            const double gsum = g.row(i).sum();
            dx.row(i).array() += g.row(i).array() - y.row(i).array().exp() * gsum;
        }
    });
}

Value l2_normalize_rows(const Value& x, double min_norm) {
    require_rank("l2_normalize_rows", x, 2);
    const std::size_t rows = x.shape()[0];
    const std::size_t cols = x.shape()[1];
    Tensor out(x.shape());
    std::vector<double> norms(rows);
    auto in = as_matrix(x.data(), rows, cols);
    auto o = as_matrix(out, rows, cols);
    for (std::size_t i = 0; i < rows; ++i) {
        const auto r = static_cast<Eigen::Index>(i);
        norms[i] = in.row(r).norm();
        if (norms[i] < min_norm) {
            o.row(r).setZero();
        } else {
            o.row(r) = in.row(r) / norms[i];
        }
    }
    return record("l2_normalize_rows", {x}, std::move(out),
                  [rows, cols, min_norm, norms = std::move(norms)](Node& self) {
                      Node& parent = *self.parents[0];
                      auto g = as_matrix(self.grad, rows, cols);
                      auto z = as_matrix(self.data, rows, cols);
                      auto dx = as_matrix(parent.ensure_grad(), rows, cols);
                      for (std::size_t i = 0; i < rows; ++i) {
                          if (norms[i] < min_norm) continue;
                          const auto r = static_cast<Eigen::Index>(i);
                          // d(x/|x|) = (I - z z^T) / |x|
                          const double proj = g.row(r).dot(z.row(r));
                          dx.row(r) += (g.row(r) - proj * z.row(r)) / norms[i];
                      }
                  });
}

Value masked_logsumexp_rows(const Value& x, const Tensor& mask) {
    require_rank("masked_logsumexp_rows", x, 2);
    if (mask.shape() != x.shape()) throw ShapeError("masked_logsumexp_rows", x.shape(), mask.shape());
    const std::size_t rows = x.shape()[0];
    const std::size_t cols = x.shape()[1];
    Tensor out(Shape{rows});
    // Softmax weights over the masked entries, kept for the backward pass.
    Tensor weights(x.shape());
    const Tensor& in = x.data();
    for (std::size_t i = 0; i < rows; ++i) {
        double mx = -std::numeric_limits<double>::infinity();
        for (std::size_t j = 0; j < cols; ++j) {
            if (mask[i * cols + j] != 0.0) mx = std::max(mx, in[i * cols + j]);
        }
        if (!std::isfinite(mx)) continue;
        double acc = 0.0;
        for (std::size_t j = 0; j < cols; ++j) {
            if (mask[i * cols + j] != 0.0) {
                weights[i * cols + j] = std::exp(in[i * cols + j] - mx);
                acc += weights[i * cols + j];
            }
        }
        out[i] = mx + std::log(acc);
        for (std::size_t j = 0; j < cols; ++j) weights[i * cols + j] /= acc;
    }
    return record("masked_logsumexp_rows", {x}, std::move(out),
                  [rows, cols, weights = std::move(weights)](Node& self) {
                      Node& parent = *self.parents[0];
                      Tensor& g = parent.ensure_grad();
                      for (std::size_t i = 0; i < rows; ++i) {
                          for (std::size_t j = 0; j < cols; ++j) g[i * cols + j] += self.grad[i] * weights[i * cols + j];
                      }
                  });
}

Value straight_through(const Value& x, Tensor forward) {
    if (forward.shape() != x.shape()) throw ShapeError("straight_through", x.shape(), forward.shape());
    return record("straight_through", {x}, std::move(forward), [](Node& self) {
        accumulate(*self.parents[0], self.grad);
    });
}

// ---------------------------------------------------------------------------

double finite_diff_check(const std::function<Value(const Value&)>& f, const Tensor& x, double eps, double eps_abs) {
    if (!(eps > 0.0)) throw std::invalid_argument("finite_diff_check: eps must be positive");
    Value param = Value::parameter(x);
    Value out = f(param);
    backward(out);
    const Tensor analytic = param.grad();

    double worst = 0.0;
    Tensor probe = x;
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double saved = probe[i];
        probe[i] = saved + eps;
        const double up = f(Value::constant(probe)).item();
        probe[i] = saved - eps;
        const double down = f(Value::constant(probe)).item();
        probe[i] = saved;
        const double numeric = (up - down) / (2.0 * eps);
        worst = std::max(worst, std::abs(analytic[i] - numeric) / (std::abs(analytic[i]) + eps_abs));
    }
    return worst;
}

}  // namespace spikemem::ad
