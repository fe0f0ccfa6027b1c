#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <cstddef>
#include <functional>
#include <memory>
#include <stdexcept>
#include <string>
#include <unordered_set>
#include <utility>
#include <vector>

namespace lc {

struct DimensionError : std::runtime_error {
    explicit DimensionError(const std::string& msg) : std::runtime_error(msg) {}
};

struct ContractError : std::runtime_error {
    explicit ContractError(const std::string& msg) : std::runtime_error(msg) {}
};

using Shape = std::vector<int>;

inline std::size_t shape_numel(const Shape& shape) {
    std::size_t n = 1;
    for (int d : shape) {
        if (d <= 0) throw DimensionError("non-positive dimension in shape");
        n *= static_cast<std::size_t>(d);
    }
    return n;
}

inline std::string shape_str(const Shape& shape) {
    std::string s = "[";
    for (std::size_t i = 0; i < shape.size(); ++i) {
        if (i) s += ",";
        s += std::to_string(shape[i]);
    }
    return s + "]";
}

// Graph recording is on by default; encode-for-mining and evaluation run
// under NoGradGuard so no tape is built.
inline bool& grad_mode_flag() {
    thread_local bool enabled = true;
    return enabled;
}

struct NoGradGuard {
    bool prev;
    NoGradGuard() : prev(grad_mode_flag()) { grad_mode_flag() = false; }
    ~NoGradGuard() { grad_mode_flag() = prev; }
    NoGradGuard(const NoGradGuard&) = delete;
    NoGradGuard& operator=(const NoGradGuard&) = delete;
};

namespace detail {

template <typename S>
struct Node {
    Shape shape;
    std::vector<S> data;
    std::vector<S> grad;            // allocated lazily, only when needs_grad
    bool requires_grad = false;     // leaf parameter flag
    bool needs_grad = false;        // requires_grad or depends on one
    std::vector<std::shared_ptr<Node>> parents;
    std::function<void()> backward_fn;

    S* grad_accum() {
        if (grad.empty()) grad.assign(data.size(), S(0));
        return grad.data();
    }
};

}  // namespace detail

// Dense row-major tensor with reverse-mode autodiff. Value-semantic handle
// over a shared graph node; copies alias the same storage.
template <typename S>
class Tensor {
public:
    using Node = detail::Node<S>;

    Tensor() = default;

    static Tensor zeros(Shape shape, bool requires_grad = false) {
        Tensor t;
        t.node_ = std::make_shared<Node>();
        t.node_->shape = std::move(shape);
        t.node_->data.assign(shape_numel(t.node_->shape), S(0));
        t.node_->requires_grad = requires_grad;
        t.node_->needs_grad = requires_grad;
        return t;
    }

    static Tensor from_data(Shape shape, std::vector<S> values, bool requires_grad = false) {
        if (values.size() != shape_numel(shape))
            throw DimensionError("data length does not match shape " + shape_str(shape));
        Tensor t = zeros(std::move(shape), requires_grad);
        t.node_->data = std::move(values);
        return t;
    }

    static Tensor scalar(S value, bool requires_grad = false) {
        return from_data({1}, {value}, requires_grad);
    }

    // Result node for an op: allocates output storage and wires parents.
    // Caller fills data() and attaches the backward closure.
    static Tensor op_result(Shape shape, std::vector<Tensor> inputs) {
        Tensor t = zeros(std::move(shape), false);
        bool needs = false;
        if (grad_mode_flag()) {
            for (const Tensor& in : inputs)
                if (in.node_ && in.node_->needs_grad) needs = true;
        }
        if (needs) {
            t.node_->needs_grad = true;
            t.node_->parents.reserve(inputs.size());
            for (Tensor& in : inputs) t.node_->parents.push_back(in.node_);
        }
        return t;
    }

    bool defined() const { return node_ != nullptr; }
    const Shape& shape() const { return node_->shape; }
    std::size_t size() const { return node_->data.size(); }
    S* data() { return node_->data.data(); }
    const S* data() const { return node_->data.data(); }
    S item() const {
        if (size() != 1) throw ContractError("item() on non-scalar tensor");
        return node_->data[0];
    }

    bool requires_grad() const { return node_->requires_grad; }
    bool needs_grad() const { return node_->needs_grad; }
    bool has_grad() const { return !node_->grad.empty(); }
    const S* grad() const { return node_->grad.data(); }
    S* grad_accum() { return node_->grad_accum(); }
    void zero_grad() {
        if (!node_->grad.empty()) std::fill(node_->grad.begin(), node_->grad.end(), S(0));
    }

    void set_backward(std::function<void()> fn) {
        if (node_->needs_grad) node_->backward_fn = std::move(fn);
    }

    std::shared_ptr<Node> node() const { return node_; }

    bool all_finite() const {
        for (S v : node_->data)
            if (!std::isfinite(static_cast<double>(v))) return false;
        return true;
    }

    // Eigen views over the flat buffer.
    using MatrixMap = Eigen::Map<Eigen::Matrix<S, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>;
    using ConstMatrixMap =
        Eigen::Map<const Eigen::Matrix<S, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>;
    using VectorMap = Eigen::Map<Eigen::Matrix<S, Eigen::Dynamic, 1>>;
    using ConstVectorMap = Eigen::Map<const Eigen::Matrix<S, Eigen::Dynamic, 1>>;

    MatrixMap mat(int rows, int cols) { return MatrixMap(data(), rows, cols); }
    ConstMatrixMap mat(int rows, int cols) const { return ConstMatrixMap(data(), rows, cols); }
    VectorMap vec() { return VectorMap(data(), static_cast<Eigen::Index>(size())); }
    ConstVectorMap vec() const { return ConstVectorMap(data(), static_cast<Eigen::Index>(size())); }

private:
    std::shared_ptr<Node> node_;
};

// Ordered op list for one backward pass, rebuilt from the graph reachable
// from the loss. Creation of the list is a postorder DFS, so parents always
// precede their consumers.
template <typename S>
class ComputationTape {
public:
    explicit ComputationTape(const Tensor<S>& root) {
        using NodePtr = std::shared_ptr<detail::Node<S>>;
        std::vector<std::pair<NodePtr, std::size_t>> stack;
        std::unordered_set<detail::Node<S>*> visited;
        if (!root.node()->needs_grad) return;
        stack.push_back({root.node(), 0});
        visited.insert(root.node().get());
        while (!stack.empty()) {
            auto& [node, next_child] = stack.back();
            if (next_child < node->parents.size()) {
                NodePtr child = node->parents[next_child++];
                if (child->needs_grad && visited.insert(child.get()).second)
                    stack.push_back({child, 0});
            } else {
                ops_.push_back(node);
                stack.pop_back();
            }
        }
    }

    // Reverse traversal: each op exactly once, consumers before producers.
    template <typename Fn>
    void for_each_reverse(Fn&& fn) const {
        for (auto it = ops_.rbegin(); it != ops_.rend(); ++it) fn(**it);
    }

    std::size_t size() const { return ops_.size(); }

private:
    std::vector<std::shared_ptr<detail::Node<S>>> ops_;
};

// Seeds d(loss)/d(loss)=1 and propagates through the recorded graph.
// Gradients accumulate additively across multiple uses of a tensor.
template <typename S>
void backward(Tensor<S> loss) {
    if (loss.size() != 1) throw ContractError("backward requires a scalar loss");
    if (!loss.needs_grad()) return;
    loss.grad_accum()[0] = S(1);
    ComputationTape<S> tape(loss);
    tape.for_each_reverse([](detail::Node<S>& node) {
        // a node no gradient reached contributes nothing downstream
        if (node.backward_fn && !node.grad.empty()) node.backward_fn();
        // each backward_fn captures its own node; dropping it breaks the
        // shared_ptr cycle so the graph can be reclaimed
        node.backward_fn = nullptr;
        node.parents.clear();
    });
}

// ---- elementwise and reduction ops ----

namespace detail {

template <typename S>
void check_same_shape(const Tensor<S>& a, const Tensor<S>& b, const char* op) {
    if (a.shape() != b.shape())
        throw DimensionError(std::string(op) + ": shape mismatch " + shape_str(a.shape()) +
                             " vs " + shape_str(b.shape()));
}

}  // namespace detail

template <typename S>
Tensor<S> add(Tensor<S> a, Tensor<S> b) {
    detail::check_same_shape(a, b, "add");
    Tensor<S> out = Tensor<S>::op_result(a.shape(), {a, b});
    out.vec() = a.vec() + b.vec();
    out.set_backward([a, b, out]() mutable {
        const S* g = out.grad();
        if (a.needs_grad()) {
            S* ga = a.grad_accum();
            for (std::size_t i = 0; i < a.size(); ++i) ga[i] += g[i];
        }
        if (b.needs_grad()) {
            S* gb = b.grad_accum();
            for (std::size_t i = 0; i < b.size(); ++i) gb[i] += g[i];
        }
    });
    return out;
}

template <typename S>
Tensor<S> sub(Tensor<S> a, Tensor<S> b) {
    detail::check_same_shape(a, b, "sub");
    Tensor<S> out = Tensor<S>::op_result(a.shape(), {a, b});
    out.vec() = a.vec() - b.vec();
    out.set_backward([a, b, out]() mutable {
        const S* g = out.grad();
        if (a.needs_grad()) {
            S* ga = a.grad_accum();
            for (std::size_t i = 0; i < a.size(); ++i) ga[i] += g[i];
        }
        if (b.needs_grad()) {
            S* gb = b.grad_accum();
            for (std::size_t i = 0; i < b.size(); ++i) gb[i] -= g[i];
        }
    });
    return out;
}

template <typename S>
Tensor<S> mul(Tensor<S> a, Tensor<S> b) {
    detail::check_same_shape(a, b, "mul");
    Tensor<S> out = Tensor<S>::op_result(a.shape(), {a, b});
    out.vec() = a.vec().cwiseProduct(b.vec());
    out.set_backward([a, b, out]() mutable {
        const S* g = out.grad();
        if (a.needs_grad()) {
            S* ga = a.grad_accum();
            const S* bd = b.data();
            for (std::size_t i = 0; i < a.size(); ++i) ga[i] += g[i] * bd[i];
        }
        if (b.needs_grad()) {
            S* gb = b.grad_accum();
            const S* ad = a.data();
            for (std::size_t i = 0; i < b.size(); ++i) gb[i] += g[i] * ad[i];
        }
    });
    return out;
}

template <typename S>
Tensor<S> scalar_mul(Tensor<S> a, S c) {
    Tensor<S> out = Tensor<S>::op_result(a.shape(), {a});
    out.vec() = a.vec() * c;
    out.set_backward([a, out, c]() mutable {
        if (!a.needs_grad()) return;
        const S* g = out.grad();
        S* ga = a.grad_accum();
        for (std::size_t i = 0; i < a.size(); ++i) ga[i] += g[i] * c;
    });
    return out;
}

template <typename S>
Tensor<S> add_scalar(Tensor<S> a, S c) {
    Tensor<S> out = Tensor<S>::op_result(a.shape(), {a});
    out.vec() = a.vec().array() + c;
    out.set_backward([a, out]() mutable {
        if (!a.needs_grad()) return;
        const S* g = out.grad();
        S* ga = a.grad_accum();
        for (std::size_t i = 0; i < a.size(); ++i) ga[i] += g[i];
    });
    return out;
}

template <typename S>
Tensor<S> relu(Tensor<S> a) {
    Tensor<S> out = Tensor<S>::op_result(a.shape(), {a});
    out.vec() = a.vec().cwiseMax(S(0));
    out.set_backward([a, out]() mutable {
        if (!a.needs_grad()) return;
        const S* g = out.grad();
        const S* x = a.data();
        S* ga = a.grad_accum();
        for (std::size_t i = 0; i < a.size(); ++i)
            if (x[i] > S(0)) ga[i] += g[i];
    });
    return out;
}

template <typename S>
Tensor<S> sigmoid(Tensor<S> a) {
    Tensor<S> out = Tensor<S>::op_result(a.shape(), {a});
    const S* x = a.data();
    S* y = out.data();
    for (std::size_t i = 0; i < a.size(); ++i) y[i] = S(1) / (S(1) + std::exp(-x[i]));
    out.set_backward([a, out]() mutable {
        if (!a.needs_grad()) return;
        const S* g = out.grad();
        const S* y = out.data();
        S* ga = a.grad_accum();
        for (std::size_t i = 0; i < a.size(); ++i) ga[i] += g[i] * y[i] * (S(1) - y[i]);
    });
    return out;
}

template <typename S>
Tensor<S> square(Tensor<S> a) {
    Tensor<S> out = Tensor<S>::op_result(a.shape(), {a});
    out.vec() = a.vec().cwiseProduct(a.vec());
    out.set_backward([a, out]() mutable {
        if (!a.needs_grad()) return;
        const S* g = out.grad();
        const S* x = a.data();
        S* ga = a.grad_accum();
        for (std::size_t i = 0; i < a.size(); ++i) ga[i] += g[i] * S(2) * x[i];
    });
    return out;
}

template <typename S>
Tensor<S> sqrt_elem(Tensor<S> a) {
    Tensor<S> out = Tensor<S>::op_result(a.shape(), {a});
    out.vec() = a.vec().cwiseSqrt();
    out.set_backward([a, out]() mutable {
        if (!a.needs_grad()) return;
        const S* g = out.grad();
        const S* y = out.data();
        S* ga = a.grad_accum();
        for (std::size_t i = 0; i < a.size(); ++i)
            if (y[i] > S(0)) ga[i] += g[i] / (S(2) * y[i]);
    });
    return out;
}

// Sequential accumulation in index order: bit-reproducible run to run.
template <typename S>
Tensor<S> sum(Tensor<S> a) {
    Tensor<S> out = Tensor<S>::op_result({1}, {a});
    S acc = S(0);
    const S* x = a.data();
    for (std::size_t i = 0; i < a.size(); ++i) acc += x[i];
    out.data()[0] = acc;
    out.set_backward([a, out]() mutable {
        if (!a.needs_grad()) return;
        const S g = out.grad()[0];
        S* ga = a.grad_accum();
        for (std::size_t i = 0; i < a.size(); ++i) ga[i] += g;
    });
    return out;
}

template <typename S>
Tensor<S> mean(Tensor<S> a) {
    const S inv = S(1) / static_cast<S>(a.size());
    Tensor<S> out = Tensor<S>::op_result({1}, {a});
    S acc = S(0);
    const S* x = a.data();
    for (std::size_t i = 0; i < a.size(); ++i) acc += x[i];
    out.data()[0] = acc * inv;
    out.set_backward([a, out, inv]() mutable {
        if (!a.needs_grad()) return;
        const S g = out.grad()[0] * inv;
        S* ga = a.grad_accum();
        for (std::size_t i = 0; i < a.size(); ++i) ga[i] += g;
    });
    return out;
}

// [N,D] -> [N], row sums.
template <typename S>
Tensor<S> sum_rows(Tensor<S> a) {
    if (a.shape().size() != 2) throw DimensionError("sum_rows expects a rank-2 tensor");
    const int n = a.shape()[0], d = a.shape()[1];
    Tensor<S> out = Tensor<S>::op_result({n}, {a});
    for (int i = 0; i < n; ++i) {
        S acc = S(0);
        const S* row = a.data() + static_cast<std::size_t>(i) * d;
        for (int j = 0; j < d; ++j) acc += row[j];
        out.data()[i] = acc;
    }
    out.set_backward([a, out, n, d]() mutable {
        if (!a.needs_grad()) return;
        const S* g = out.grad();
        S* ga = a.grad_accum();
        for (int i = 0; i < n; ++i)
            for (int j = 0; j < d; ++j) ga[static_cast<std::size_t>(i) * d + j] += g[i];
    });
    return out;
}

template <typename S>
Tensor<S> matmul(Tensor<S> a, Tensor<S> b) {
    if (a.shape().size() != 2 || b.shape().size() != 2)
        throw DimensionError("matmul expects rank-2 tensors");
    const int m = a.shape()[0], k = a.shape()[1];
    const int k2 = b.shape()[0], n = b.shape()[1];
    if (k != k2)
        throw DimensionError("matmul inner dims differ: " + shape_str(a.shape()) + " vs " +
                             shape_str(b.shape()));
    Tensor<S> out = Tensor<S>::op_result({m, n}, {a, b});
    out.mat(m, n).noalias() = a.mat(m, k) * b.mat(k, n);
    out.set_backward([a, b, out, m, k, n]() mutable {
        using Mat = Eigen::Matrix<S, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
        Eigen::Map<const Mat> g(out.grad(), m, n);
        if (a.needs_grad()) {
            Eigen::Map<Mat> ga(a.grad_accum(), m, k);
            ga.noalias() += g * b.mat(k, n).transpose();
        }
        if (b.needs_grad()) {
            Eigen::Map<Mat> gb(b.grad_accum(), k, n);
            gb.noalias() += a.mat(m, k).transpose() * g;
        }
    });
    return out;
}

// Same storage size, new dims. Copies (keeps nodes immutable after creation).
template <typename S>
Tensor<S> reshape(Tensor<S> a, Shape shape) {
    if (shape_numel(shape) != a.size())
        throw DimensionError("reshape: element count mismatch " + shape_str(a.shape()) + " -> " +
                             shape_str(shape));
    Tensor<S> out = Tensor<S>::op_result(std::move(shape), {a});
    out.vec() = a.vec();
    out.set_backward([a, out]() mutable {
        if (!a.needs_grad()) return;
        const S* g = out.grad();
        S* ga = a.grad_accum();
        for (std::size_t i = 0; i < a.size(); ++i) ga[i] += g[i];
    });
    return out;
}

}  // namespace lc
