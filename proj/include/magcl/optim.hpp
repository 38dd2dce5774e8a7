#pragma once

#include <cmath>
#include <map>
#include <string>
#include <vector>

#include "magcl/error.hpp"
#include "magcl/matrix.hpp"
#include "magcl/tensor.hpp"

namespace magcl {

/// Adam moments for a set of named parameters.
template <class T>
struct AdamState {
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
    long step = 0;
    std::map<std::string, Matrix<T>> m;
    std::map<std::string, Matrix<T>> v;
};

/// One Adam update with bias correction. Weight decay is coupled: wd * param is
/// added to the gradient before the moment updates.
template <class T>
void adam_step(const std::vector<Parameter<T>*>& params, const Gradients<T>& grads, AdamState<T>& state, double lr,
               double weight_decay) {
    for (const auto* p : params) {
        auto it = grads.find(p->name);
        if (it == grads.end()) throw Error("adam_step: no gradient for parameter " + p->name);
        require_same_shape(it->second.rows(), it->second.cols(), p->value.rows(), p->value.cols(),
                           "adam_step(" + p->name + ")");
        if (!it->second.allFinite())
            throw NumericError("adam_step: non-finite gradient for parameter " + p->name + " at step " +
                               std::to_string(state.step + 1));
    }

    ++state.step;
    const double bc1 = 1.0 - std::pow(state.beta1, static_cast<double>(state.step));
    const double bc2 = 1.0 - std::pow(state.beta2, static_cast<double>(state.step));
    const T b1 = static_cast<T>(state.beta1), b2 = static_cast<T>(state.beta2);
    const T step_size = static_cast<T>(lr / bc1);
    const T inv_sqrt_bc2 = static_cast<T>(1.0 / std::sqrt(bc2));
    const T eps = static_cast<T>(state.eps);

    for (auto* p : params) {
        Matrix<T> g = grads.at(p->name);
        if (weight_decay != 0.0) g += static_cast<T>(weight_decay) * p->value;
        auto& m = state.m[p->name];
        auto& v = state.v[p->name];
        if (m.size() == 0) {
            m = Matrix<T>::Zero(g.rows(), g.cols());
            v = Matrix<T>::Zero(g.rows(), g.cols());
        }
        m = b1 * m + (T(1) - b1) * g;
        v = b2 * v + (T(1) - b2) * g.cwiseAbs2();
        // theta -= lr * m_hat / (sqrt(v_hat) + eps)
        p->value.array() -= step_size * m.array() / (v.array().sqrt() * inv_sqrt_bc2 + eps);
    }
}

} // namespace magcl
