#pragma once

#include <cmath>
#include <cstddef>
#include <functional>
#include <map>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "magcl/error.hpp"
#include "magcl/graph.hpp"
#include "magcl/matrix.hpp"

namespace magcl {

template <class T>
class Tape;

/// Handle to a value recorded on a Tape. Cheap to copy; valid until the tape is cleared.
template <class T>
class Tensor {
public:
    Tensor() = default;

    const Matrix<T>& value() const { return tape_->value(id_); }
    Eigen::Index rows() const { return value().rows(); }
    Eigen::Index cols() const { return value().cols(); }
    bool requires_grad() const { return tape_->requires_grad(id_); }
    std::size_t id() const { return id_; }
    Tape<T>& tape() const { return *tape_; }
    bool valid() const { return tape_ != nullptr; }

private:
    friend class Tape<T>;
    Tensor(Tape<T>* tape, std::size_t id) : tape_(tape), id_(id) {}

    Tape<T>* tape_ = nullptr;
    std::size_t id_ = 0;
};

/// A named trainable matrix. Tapes read it by reference during the forward pass.
template <class T>
struct Parameter {
    std::string name;
    Matrix<T> value;
};

/// Parameter name -> gradient of the loss, same shape as the parameter.
template <class T>
using Gradients = std::map<std::string, Matrix<T>>;

/// Passed to backward rules; routes contributions to the rule's inputs.
template <class T>
class GradSink {
public:
    GradSink(Tape<T>& tape, std::span<const std::size_t> inputs) : tape_(tape), inputs_(inputs) {}

    bool wants(std::size_t k) const { return tape_.requires_grad(inputs_[k]); }
    const Matrix<T>& input(std::size_t k) const { return tape_.value(inputs_[k]); }

    template <class Expr>
    void add(std::size_t k, const Expr& contribution) {
        if (wants(k)) tape_.accumulate(inputs_[k], contribution);
    }

private:
    Tape<T>& tape_;
    std::span<const std::size_t> inputs_;
};

template <class T>
using BackwardFn = std::function<void(const Matrix<T>& upstream, GradSink<T>& sink)>;

/// Append-only record of primitive applications for reverse-mode differentiation.
/// Inputs are always recorded before their consumers, so node order is a
/// topological order. A tape supports one backward pass, after which it is cleared.
template <class T>
class Tape {
public:
    Tape() = default;
    Tape(const Tape&) = delete;
    Tape& operator=(const Tape&) = delete;

    /// Leaf that reads `value` by reference; `value` must outlive the tape's use.
    Tensor<T> constant(const Matrix<T>& value) { return push_ref(&value, false, {}); }

    /// Leaf owning a copy of `value`.
    Tensor<T> constant_copy(Matrix<T> value) { return push_owned(std::move(value), false, {}, {}, "input"); }

    Tensor<T> parameter(const Parameter<T>& p) {
        auto t = push_ref(&p.value, true, p.name);
        return t;
    }

    /// Records a non-leaf value. `backward` may be empty when no input requires a gradient.
    Tensor<T> record(Matrix<T> value, std::vector<Tensor<T>> inputs, BackwardFn<T> backward, const char* op) {
        std::vector<std::size_t> ids;
        ids.reserve(inputs.size());
        bool needs = false;
        for (const auto& t : inputs) {
            if (t.tape_ != this) throw Error(std::string(op) + ": operand belongs to a different tape");
            ids.push_back(t.id_);
            needs = needs || nodes_[t.id_].requires_grad;
        }
        return push_owned(std::move(value), needs, std::move(ids), needs ? std::move(backward) : BackwardFn<T>{}, op);
    }

    const Matrix<T>& value(std::size_t id) const {
        const auto& n = nodes_[id];
        return n.ref ? *n.ref : n.owned;
    }

    bool requires_grad(std::size_t id) const { return nodes_[id].requires_grad; }
    std::size_t size() const { return nodes_.size(); }
    bool empty() const { return nodes_.empty(); }

    template <class Expr>
    void accumulate(std::size_t id, const Expr& g) {
        auto& acc = grads_[id];
        if (acc.size() == 0)
            acc = g;
        else
            acc += g;
    }

    /// Number of relu/prelu inputs that were exactly zero (subgradient points).
    std::size_t kink_count() const { return kinks_; }
    void note_kinks(std::size_t n) { kinks_ += n; }

    /// Keeps `obj` alive until the tape is cleared; for data that backward rules reference.
    template <class U>
    U& hold(std::shared_ptr<U> obj) {
        U& ref = *obj;
        held_.push_back(std::move(obj));
        return ref;
    }

    /// Dense buffers allocated by multi-step propagation, forward and backward.
    std::size_t propagation_buffers() const { return prop_buffers_; }
    void note_propagation_buffers(std::size_t n) { prop_buffers_ += n; }

    /// Reverse accumulation from a 1x1 loss. Returns one entry per parameter
    /// leaf (zero-filled when the loss does not depend on it) and clears the tape.
    Gradients<T> backward(const Tensor<T>& loss) {
        if (nodes_.empty()) throw Error("backward on an empty tape");
        if (loss.tape_ != this) throw Error("backward: loss belongs to a different tape");
        if (loss.rows() != 1 || loss.cols() != 1)
            throw ShapeError("backward: loss must be scalar, got " + shape_str(loss.rows(), loss.cols()));

        grads_.assign(nodes_.size(), Matrix<T>{});
        grads_[loss.id_] = Matrix<T>::Ones(1, 1);
        for (std::size_t i = loss.id_ + 1; i-- > 0;) {
            auto& node = nodes_[i];
            if (!node.backward || grads_[i].size() == 0) continue;
            GradSink<T> sink(*this, node.inputs);
            node.backward(grads_[i], sink);
            if (!node.is_param) grads_[i] = Matrix<T>{};
        }

        Gradients<T> out;
        for (std::size_t i = 0; i < nodes_.size(); ++i) {
            const auto& node = nodes_[i];
            if (!node.is_param) continue;
            auto& g = grads_[i];
            const auto& v = value(i);
            if (g.size() == 0) g = Matrix<T>::Zero(v.rows(), v.cols());
            if (auto it = out.find(node.name); it != out.end())
                it->second += g;
            else
                out.emplace(node.name, std::move(g));
        }
        for (const auto& [name, g] : out)
            if (!g.allFinite()) throw NumericError("non-finite gradient for parameter " + name);
        clear();
        return out;
    }

    void clear() {
        nodes_.clear();
        grads_.clear();
        held_.clear();
        kinks_ = 0;
    }

private:
    struct Node {
        Matrix<T> owned;
        const Matrix<T>* ref = nullptr;
        bool requires_grad = false;
        bool is_param = false;
        std::string name;
        std::vector<std::size_t> inputs;
        BackwardFn<T> backward;
    };

    Tensor<T> push_ref(const Matrix<T>* v, bool is_param, std::string name) {
        Node n;
        n.ref = v;
        n.requires_grad = is_param;
        n.is_param = is_param;
        n.name = std::move(name);
        nodes_.push_back(std::move(n));
        return Tensor<T>(this, nodes_.size() - 1);
    }

    Tensor<T> push_owned(Matrix<T> v, bool requires_grad, std::vector<std::size_t> inputs, BackwardFn<T> backward,
                         const char* op) {
        if (!v.allFinite()) throw NumericError(std::string("non-finite value produced by ") + op);
        Node n;
        n.owned = std::move(v);
        n.requires_grad = requires_grad;
        n.inputs = std::move(inputs);
        n.backward = std::move(backward);
        nodes_.push_back(std::move(n));
        return Tensor<T>(this, nodes_.size() - 1);
    }

    std::vector<Node> nodes_;
    std::vector<Matrix<T>> grads_;
    std::vector<std::shared_ptr<const void>> held_;
    std::size_t kinks_ = 0;
    std::size_t prop_buffers_ = 0;
};

// ---------------------------------------------------------------------------
// Primitives. Each computes its forward value and records a backward rule.

template <class T>
Tensor<T> matmul(const Tensor<T>& a, const Tensor<T>& b) {
    if (a.cols() != b.rows())
        throw ShapeError("matmul: " + shape_str(a.rows(), a.cols()) + " x " + shape_str(b.rows(), b.cols()));
    Matrix<T> out;
    out.noalias() = a.value() * b.value();
    return a.tape().record(std::move(out), {a, b}, [](const Matrix<T>& up, GradSink<T>& s) {
        if (s.wants(0)) s.add(0, (up * s.input(1).transpose()).eval());
        if (s.wants(1)) s.add(1, (s.input(0).transpose() * up).eval());
    }, "matmul");
}

/// One propagation step F * z. F is symmetric, so the backward rule is F * upstream.
template <class T>
Tensor<T> spmm_t(const GraphFilter& filter, const Tensor<T>& z) {
    Matrix<T> out = spmm(filter, z.value());
    return z.tape().record(std::move(out), {z}, [&filter](const Matrix<T>& up, GradSink<T>& s) {
        s.add(0, spmm(filter, up));
    }, "spmm");
}

namespace detail {

// F^steps * in via two ping-pong buffers; the result ends in `out`.
template <class T>
std::size_t propagate_into(const GraphFilter& filter, const Matrix<T>& in, int steps, Matrix<T>& out) {
    if (steps == 1) {
        spmm_into(filter, in, out);
        return 1;
    }
    Matrix<T> scratch;
    // Parity chosen so the last step writes into `out`.
    Matrix<T>* cur = (steps % 2 == 0) ? &scratch : &out;
    Matrix<T>* nxt = (steps % 2 == 0) ? &out : &scratch;
    spmm_into(filter, in, *cur);
    for (int s = 1; s < steps; ++s) {
        spmm_into(filter, *cur, *nxt);
        std::swap(cur, nxt);
    }
    return 2;
}

} // namespace detail

/// `steps` propagation operators fused into one tape node. Forward and backward
/// each use at most two dense buffers regardless of `steps`; steps == 0 is the identity.
template <class T>
Tensor<T> propagate(const GraphFilter& filter, const Tensor<T>& z, int steps) {
    if (steps < 0) throw ConfigError("propagate: negative step count");
    if (steps == 0) return z;
    if (z.rows() != static_cast<Eigen::Index>(filter.num_nodes()))
        throw ShapeError("propagate: filter has " + std::to_string(filter.num_nodes()) + " nodes, operand is " +
                         shape_str(z.rows(), z.cols()));
    auto& tape = z.tape();
    Matrix<T> out;
    tape.note_propagation_buffers(detail::propagate_into(filter, z.value(), steps, out));
    return tape.record(std::move(out), {z}, [&filter, &tape, steps](const Matrix<T>& up, GradSink<T>& s) {
        Matrix<T> g;
        tape.note_propagation_buffers(detail::propagate_into(filter, up, steps, g));
        s.add(0, g);
    }, "propagate");
}

/// Derivative at exactly 0 is taken as 0; such points are counted on the tape.
template <class T>
Tensor<T> relu(const Tensor<T>& x) {
    const auto& v = x.value();
    x.tape().note_kinks(static_cast<std::size_t>((v.array() == T(0)).count()));
    Matrix<T> out = v.cwiseMax(T(0));
    return x.tape().record(std::move(out), {x}, [](const Matrix<T>& up, GradSink<T>& s) {
        s.add(0, (s.input(0).array() > T(0)).select(up, T(0)).matrix().eval());
    }, "relu");
}

/// max(x, 0) + slope * min(x, 0) with a learnable 1x1 slope.
template <class T>
Tensor<T> prelu(const Tensor<T>& x, const Tensor<T>& slope) {
    if (slope.rows() != 1 || slope.cols() != 1) throw ShapeError("prelu: slope must be 1x1");
    const auto& v = x.value();
    x.tape().note_kinks(static_cast<std::size_t>((v.array() == T(0)).count()));
    const T a = slope.value()(0, 0);
    Matrix<T> out = (v.array() > T(0)).select(v, a * v);
    return x.tape().record(std::move(out), {x, slope}, [](const Matrix<T>& up, GradSink<T>& s) {
        const auto& in = s.input(0);
        const T a = s.input(1)(0, 0);
        if (s.wants(0)) s.add(0, (in.array() > T(0)).select(up, a * up).matrix().eval());
        if (s.wants(1)) {
            Matrix<T> g(1, 1);
            g(0, 0) = (in.array() > T(0)).select(T(0), in.array() * up.array()).sum();
            s.add(1, g);
        }
    }, "prelu");
}

template <class T>
Tensor<T> add(const Tensor<T>& a, const Tensor<T>& b) {
    require_same_shape(a.rows(), a.cols(), b.rows(), b.cols(), "add");
    Matrix<T> out = a.value() + b.value();
    return a.tape().record(std::move(out), {a, b}, [](const Matrix<T>& up, GradSink<T>& s) {
        s.add(0, up);
        s.add(1, up);
    }, "add");
}

template <class T>
Tensor<T> scale(const Tensor<T>& a, T c) {
    Matrix<T> out = c * a.value();
    return a.tape().record(std::move(out), {a}, [c](const Matrix<T>& up, GradSink<T>& s) {
        s.add(0, (c * up).eval());
    }, "scale");
}

/// Row-wise unit normalization. By default a zero row is an error. With
/// `allow_zero_rows`, zero rows stay zero (and receive zero gradient); only a
/// fully zero input is rejected.
template <class T>
Tensor<T> l2_normalize_rows(const Tensor<T>& x, bool allow_zero_rows = false) {
    const auto& v = x.value();
    Eigen::Matrix<T, Eigen::Dynamic, 1> norms = v.rowwise().norm();
    Eigen::Matrix<T, Eigen::Dynamic, 1> inv(norms.size());
    Eigen::Index zero_rows = 0;
    for (Eigen::Index i = 0; i < norms.size(); ++i) {
        if (norms(i) > T(0)) {
            inv(i) = T(1) / norms(i);
            continue;
        }
        if (!allow_zero_rows)
            throw NumericError("l2_normalize_rows: row " + std::to_string(i) +
                               " has zero norm (degenerate embedding)");
        inv(i) = T(0);
        ++zero_rows;
    }
    if (zero_rows > 0 && zero_rows == norms.size())
        throw NumericError("l2_normalize_rows: all " + std::to_string(zero_rows) +
                           " rows have zero norm (collapsed embedding)");
    Matrix<T> out = inv.asDiagonal() * v;
    Matrix<T> y = out;
    return x.tape().record(std::move(out), {x},
                           [y = std::move(y), inv = std::move(inv)](const Matrix<T>& up, GradSink<T>& s) {
        // d/dx (x/|x|) applied to g: (g - y (y.g)) / |x|
        Eigen::Matrix<T, Eigen::Dynamic, 1> dots = (y.array() * up.array()).rowwise().sum();
        Matrix<T> g = up - dots.asDiagonal() * y;
        s.add(0, (inv.asDiagonal() * g).eval());
    }, "l2_normalize_rows");
}

/// Sum of all entries, as a 1x1 tensor.
template <class T>
Tensor<T> sum(const Tensor<T>& x) {
    Matrix<T> out(1, 1);
    out(0, 0) = x.value().sum();
    const auto r = x.rows(), c = x.cols();
    return x.tape().record(std::move(out), {x}, [r, c](const Matrix<T>& up, GradSink<T>& s) {
        s.add(0, Matrix<T>::Constant(r, c, up(0, 0)));
    }, "sum");
}

/// Sum of squared entries, as a 1x1 tensor.
template <class T>
Tensor<T> sum_squares(const Tensor<T>& x) {
    Matrix<T> out(1, 1);
    out(0, 0) = x.value().squaredNorm();
    return x.tape().record(std::move(out), {x}, [](const Matrix<T>& up, GradSink<T>& s) {
        s.add(0, (T(2) * up(0, 0) * s.input(0)).eval());
    }, "sum_squares");
}

} // namespace magcl
