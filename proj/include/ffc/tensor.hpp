#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <memory>
#include <numeric>
#include <span>
#include <unordered_set>
#include <vector>

#include "ffc/common.hpp"

namespace ffc {

// Thread-local autograd switch; eval-mode forwards run under NoGradGuard so
// no graph is recorded.
struct GradMode {
    static bool& enabled() {
        thread_local bool on = true;
        return on;
    }
};

struct NoGradGuard {
    bool prev;
    NoGradGuard() : prev(GradMode::enabled()) { GradMode::enabled() = false; }
    ~NoGradGuard() { GradMode::enabled() = prev; }
};

namespace detail {

template <typename T>
struct Node {
    std::vector<std::int64_t> shape;
    std::vector<T> data;
    std::vector<T> grad;  // empty until first accumulation
    bool requires_grad = false;
    // reverse-mode tape edges; cleared once backward has consumed them
    std::vector<std::shared_ptr<Node>> parents;
    std::function<void(Node&)> backward_fn;

    std::int64_t numel() const { return std::int64_t(data.size()); }
    void ensure_grad() {
        if (grad.empty()) grad.assign(data.size(), T(0));
    }
};

}  // namespace detail

// Dense tensor handle. Copies share the underlying node (the autograd graph
// needs stable identity); clone() makes an independent deep copy.
//
// T is float for training/inference and double for the gradient-check suite.
template <typename T>
class Tensor {
public:
    using Node = detail::Node<T>;

    Tensor() = default;

    static Tensor zeros(std::vector<std::int64_t> shape, bool requires_grad = false) {
        return filled(std::move(shape), T(0), requires_grad);
    }
    static Tensor filled(std::vector<std::int64_t> shape, T value, bool requires_grad = false) {
        Tensor t;
        t.node_ = std::make_shared<Node>();
        t.node_->shape = std::move(shape);
        std::int64_t n = 1;
        for (std::int64_t d : t.node_->shape) {
            if (d <= 0) throw UsageError("tensor dimensions must be positive, got " + shape_str(t.node_->shape));
            n *= d;
        }
        t.node_->data.assign(std::size_t(n), value);
        t.node_->requires_grad = requires_grad;
        return t;
    }
    static Tensor from(std::vector<std::int64_t> shape, std::vector<T> data, bool requires_grad = false) {
        Tensor t = zeros(shape, requires_grad);
        if (t.numel() != std::int64_t(data.size()))
            throw UsageError("tensor data length " + std::to_string(data.size()) +
                             " does not match shape " + shape_str(shape));
        t.node_->data = std::move(data);
        return t;
    }
    static Tensor scalar(T v, bool requires_grad = false) { return from({1}, {v}, requires_grad); }
    static Tensor uniform(std::vector<std::int64_t> shape, T lo, T hi, Rng& rng, bool requires_grad = false) {
        Tensor t = zeros(std::move(shape), requires_grad);
        for (T& x : t.node_->data) x = T(rng.uniform(double(lo), double(hi)));
        return t;
    }

    bool defined() const { return node_ != nullptr; }
    const std::vector<std::int64_t>& shape() const { return node_->shape; }
    int rank() const { return int(node_->shape.size()); }
    std::int64_t dim(int i) const { return node_->shape[std::size_t(i)]; }
    std::int64_t numel() const { return node_->numel(); }

    std::span<T> data() { return node_->data; }
    std::span<const T> data() const { return node_->data; }

    bool requires_grad() const { return node_->requires_grad; }
    Tensor& set_requires_grad(bool rg) {
        node_->requires_grad = rg;
        return *this;
    }

    bool has_grad() const { return defined() && !node_->grad.empty(); }
    std::span<T> grad() {
        node_->ensure_grad();
        return node_->grad;
    }
    std::span<const T> grad() const {
        if (!has_grad()) throw UsageError("tensor has no gradient buffer");
        return node_->grad;
    }
    void zero_grad() {
        if (!node_->grad.empty()) std::fill(node_->grad.begin(), node_->grad.end(), T(0));
    }

    T item() const {
        if (numel() != 1) throw UsageError("item() requires a scalar tensor, got shape " + shape_str(shape()));
        return node_->data[0];
    }

    // Deep copy; carries no graph edges.
    Tensor clone() const {
        Tensor t = zeros(shape(), node_->requires_grad);
        t.node_->data = node_->data;
        return t;
    }

    bool same_node(const Tensor& o) const { return node_ == o.node_; }

    // Reverse-mode sweep from a scalar. Gradients accumulate into every
    // requires_grad tensor reachable from this node; the recorded graph is
    // freed as it is consumed, so each forward pass records a fresh tape.
    void backward() {
        if (numel() != 1) throw UsageError("backward() requires a scalar loss, got shape " + shape_str(shape()));
        if (!node_->requires_grad)
            throw UsageError("backward() on a tensor that does not require grad (graph absent or already freed)");

        // order keeps owning pointers: interior nodes may have no handle
        // outside the graph and must outlive the sweep
        std::vector<std::shared_ptr<Node>> order;  // post-order: parents precede consumers
        std::unordered_set<Node*> seen;
        struct Frame {
            std::shared_ptr<Node> n;
            std::size_t next;
        };
        std::vector<Frame> stack{{node_, 0}};
        seen.insert(node_.get());
        while (!stack.empty()) {
            Frame& f = stack.back();
            if (f.next < f.n->parents.size()) {
                const std::shared_ptr<Node>& p = f.n->parents[f.next++];
                if (p->requires_grad && seen.insert(p.get()).second) stack.push_back({p, 0});
            } else {
                order.push_back(f.n);
                stack.pop_back();
            }
        }

        node_->ensure_grad();
        node_->grad[0] += T(1);
        for (auto it = order.rbegin(); it != order.rend(); ++it) {
            Node* n = it->get();
            if (n->backward_fn) {
                n->backward_fn(*n);
                n->backward_fn = nullptr;
                n->parents.clear();
                n->grad.clear();  // interior grads are fully consumed here
                n->grad.shrink_to_fit();
            }
        }
    }

    std::shared_ptr<Node> node() const { return node_; }

private:
    std::shared_ptr<Node> node_;
};

namespace detail {

// Registers op output on the tape when recording is active.
template <typename T>
void attach(Tensor<T>& out, std::vector<Tensor<T>> inputs, std::function<void(Node<T>&)> backward_fn) {
    bool any = false;
    for (const auto& in : inputs) any = any || in.requires_grad();
    if (!GradMode::enabled() || !any) return;
    out.set_requires_grad(true);
    auto n = out.node();
    n->parents.reserve(inputs.size());
    for (auto& in : inputs) n->parents.push_back(in.node());
    n->backward_fn = std::move(backward_fn);
}

template <typename T>
void accumulate(const std::shared_ptr<Node<T>>& dst, std::span<const T> contribution) {
    if (!dst->requires_grad) return;
    dst->ensure_grad();
    T* g = dst->grad.data();
    for (std::size_t i = 0; i < contribution.size(); ++i) g[i] += contribution[i];
}

}  // namespace detail

template <typename T>
void check_finite(const Tensor<T>& t, const char* what) {
    for (T v : t.data())
        if (!std::isfinite(double(v))) throw NumericError(std::string(what) + ": non-finite value encountered");
}

// ---------------------------------------------------------------------------
// Elementwise arithmetic. Binary ops require identical shapes; the only
// broadcast is scalar-with-tensor.

enum class EwKind { add, sub, mul, div, neg };

namespace detail {

template <typename T>
void require_same_shape(const Tensor<T>& a, const Tensor<T>& b, const char* op) {
    if (a.shape() != b.shape())
        throw UsageError(std::string(op) + ": shape mismatch " + shape_str(a.shape()) + " vs " + shape_str(b.shape()));
}

template <typename T>
bool is_scalar(const Tensor<T>& t) {
    return t.numel() == 1;
}

}  // namespace detail

template <typename T>
Tensor<T> elementwise(EwKind kind, const Tensor<T>& a, const Tensor<T>* b_opt = nullptr) {
    using detail::is_scalar;
    if (kind == EwKind::neg) {
        Tensor<T> out = Tensor<T>::zeros(a.shape());
        auto x = a.data();
        auto y = out.data();
        for (std::int64_t i = 0; i < a.numel(); ++i) y[i] = -x[i];
        detail::attach<T>(out, {a}, [an = a.node()](detail::Node<T>& self) {
            if (!an->requires_grad) return;
            an->ensure_grad();
            for (std::size_t i = 0; i < self.grad.size(); ++i) an->grad[i] -= self.grad[i];
        });
        return out;
    }
    if (!b_opt) throw UsageError("elementwise: binary op requires two operands");
    const Tensor<T>& b = *b_opt;

    // scalar-with-tensor broadcast keeps one shape; anything else must match
    bool a_scalar = is_scalar(a) && !is_scalar(b);
    bool b_scalar = is_scalar(b) && !is_scalar(a);
    if (!a_scalar && !b_scalar) detail::require_same_shape(a, b, "elementwise");

    const Tensor<T>& big = a_scalar ? b : a;
    Tensor<T> out = Tensor<T>::zeros(big.shape());
    auto xa = a.data();
    auto xb = b.data();
    auto y = out.data();
    std::int64_t n = big.numel();
    auto va = [&](std::int64_t i) { return a_scalar ? xa[0] : xa[i]; };
    auto vb = [&](std::int64_t i) { return b_scalar ? xb[0] : xb[i]; };
    switch (kind) {
        case EwKind::add:
            for (std::int64_t i = 0; i < n; ++i) y[i] = va(i) + vb(i);
            break;
        case EwKind::sub:
            for (std::int64_t i = 0; i < n; ++i) y[i] = va(i) - vb(i);
            break;
        case EwKind::mul:
            for (std::int64_t i = 0; i < n; ++i) y[i] = va(i) * vb(i);
            break;
        case EwKind::div:
            for (std::int64_t i = 0; i < n; ++i) y[i] = va(i) / vb(i);
            break;
        default:
            throw UsageError("elementwise: unknown op kind");
    }

    detail::attach<T>(out, {a, b},
                      [kind, an = a.node(), bn = b.node(), a_scalar, b_scalar](detail::Node<T>& self) {
                          const auto& g = self.grad;
                          std::int64_t n = std::int64_t(g.size());
                          auto scatter = [&](const std::shared_ptr<detail::Node<T>>& dst, bool scalar, auto per) {
                              if (!dst->requires_grad) return;
                              dst->ensure_grad();
                              if (scalar) {
                                  T acc = 0;
                                  for (std::int64_t i = 0; i < n; ++i) acc += per(i);
                                  dst->grad[0] += acc;
                              } else {
                                  for (std::int64_t i = 0; i < n; ++i) dst->grad[i] += per(i);
                              }
                          };
                          auto av = [&](std::int64_t i) { return an->data[a_scalar ? 0 : std::size_t(i)]; };
                          auto bv = [&](std::int64_t i) { return bn->data[b_scalar ? 0 : std::size_t(i)]; };
                          switch (kind) {
                              case EwKind::add:
                                  scatter(an, a_scalar, [&](std::int64_t i) { return g[i]; });
                                  scatter(bn, b_scalar, [&](std::int64_t i) { return g[i]; });
                                  break;
                              case EwKind::sub:
                                  scatter(an, a_scalar, [&](std::int64_t i) { return g[i]; });
                                  scatter(bn, b_scalar, [&](std::int64_t i) { return -g[i]; });
                                  break;
                              case EwKind::mul:
                                  scatter(an, a_scalar, [&](std::int64_t i) { return g[i] * bv(i); });
                                  scatter(bn, b_scalar, [&](std::int64_t i) { return g[i] * av(i); });
                                  break;
                              case EwKind::div:
                                  scatter(an, a_scalar, [&](std::int64_t i) { return g[i] / bv(i); });
                                  scatter(bn, b_scalar,
                                          [&](std::int64_t i) { return -g[i] * av(i) / (bv(i) * bv(i)); });
                                  break;
                              default:
                                  break;
                          }
                      });
    return out;
}

template <typename T>
Tensor<T> add(const Tensor<T>& a, const Tensor<T>& b) {
    return elementwise(EwKind::add, a, &b);
}
template <typename T>
Tensor<T> sub(const Tensor<T>& a, const Tensor<T>& b) {
    return elementwise(EwKind::sub, a, &b);
}
template <typename T>
Tensor<T> mul(const Tensor<T>& a, const Tensor<T>& b) {
    return elementwise(EwKind::mul, a, &b);
}
template <typename T>
Tensor<T> div(const Tensor<T>& a, const Tensor<T>& b) {
    return elementwise(EwKind::div, a, &b);
}
template <typename T>
Tensor<T> operator+(const Tensor<T>& a, const Tensor<T>& b) {
    return add(a, b);
}
template <typename T>
Tensor<T> operator-(const Tensor<T>& a, const Tensor<T>& b) {
    return sub(a, b);
}
template <typename T>
Tensor<T> operator*(const Tensor<T>& a, const Tensor<T>& b) {
    return mul(a, b);
}

template <typename T>
Tensor<T> sum(const Tensor<T>& a) {
    Tensor<T> out = Tensor<T>::zeros({1});
    T acc = 0;
    for (T v : a.data()) acc += v;
    out.data()[0] = acc;
    detail::attach<T>(out, {a}, [an = a.node()](detail::Node<T>& self) {
        if (!an->requires_grad) return;
        an->ensure_grad();
        T g = self.grad[0];
        for (T& gv : an->grad) gv += g;
    });
    return out;
}

template <typename T>
Tensor<T> mean(const Tensor<T>& a) {
    std::int64_t n = a.numel();
    Tensor<T> out = Tensor<T>::zeros({1});
    T acc = 0;
    for (T v : a.data()) acc += v;
    out.data()[0] = acc / T(n);
    detail::attach<T>(out, {a}, [an = a.node(), n](detail::Node<T>& self) {
        if (!an->requires_grad) return;
        an->ensure_grad();
        T g = self.grad[0] / T(n);
        for (T& gv : an->grad) gv += g;
    });
    return out;
}

// ---------------------------------------------------------------------------
// Adam. Moment buffers mirror the parameter; step counter advances once per
// update; bias correction per the standard recurrence.

template <typename T>
struct AdamState {
    std::vector<T> m, v;
    std::int64_t step = 0;
    T learning_rate = T(1e-3);
    T beta1 = T(0.9);
    T beta2 = T(0.999);
    T epsilon = T(1e-8);

    AdamState() = default;
    explicit AdamState(std::int64_t numel, T lr = T(1e-3))
        : m(std::size_t(numel), T(0)), v(std::size_t(numel), T(0)), learning_rate(lr) {}
};

template <typename T>
void adam_step(Tensor<T>& param, AdamState<T>& st) {
    if (!param.has_grad()) throw UsageError("adam_step: parameter has no gradient");
    if (st.m.empty()) {
        st.m.assign(std::size_t(param.numel()), T(0));
        st.v.assign(std::size_t(param.numel()), T(0));
    }
    if (std::int64_t(st.m.size()) != param.numel())
        throw UsageError("adam_step: state size does not match parameter");
    st.step += 1;
    const T b1 = st.beta1, b2 = st.beta2;
    const T corr1 = T(1) - T(std::pow(double(b1), double(st.step)));
    const T corr2 = T(1) - T(std::pow(double(b2), double(st.step)));
    auto g = param.grad();
    auto p = param.data();
    for (std::int64_t i = 0; i < param.numel(); ++i) {
        st.m[i] = b1 * st.m[i] + (T(1) - b1) * g[i];
        st.v[i] = b2 * st.v[i] + (T(1) - b2) * g[i] * g[i];
        T mhat = st.m[i] / corr1;
        T vhat = st.v[i] / corr2;
        p[i] -= st.learning_rate * mhat / (T(std::sqrt(double(vhat))) + st.epsilon);
    }
}

}  // namespace ffc
