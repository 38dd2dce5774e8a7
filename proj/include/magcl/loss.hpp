#pragma once

#include <cmath>
#include <string>

#include "magcl/error.hpp"
#include "magcl/matrix.hpp"
#include "magcl/tensor.hpp"

namespace magcl {

struct LossReport {
    double total = 0.0;
    /// Mean Euclidean distance between positive pairs.
    double mean_positive_distance = 0.0;
    std::size_t num_anchors = 0;
};

inline constexpr double kUnitNormTolerance = 1e-4;

namespace detail {

template <class T>
void require_unit_rows(const Matrix<T>& z, const char* which) {
    for (Eigen::Index i = 0; i < z.rows(); ++i) {
        const double norm = static_cast<double>(z.row(i).norm());
        if (norm == 0.0) continue; // dropped-out row from the projector
        const double dev = std::abs(norm - 1.0);
        if (dev > kUnitNormTolerance)
            throw NumericError(std::string("info_nce: row ") + std::to_string(i) + " of " + which +
                               " is not unit-norm (|norm - 1| = " + std::to_string(dev) + ")");
    }
}

} // namespace detail

/// InfoNCE with squared-distance similarities and intra-view negatives:
///
///   L = -sum_i log( e^{-|z1_i - z2_i|^2/2} / (e^{-|z1_i - z2_i|^2/2} + sum_{j != i} e^{-|z1_i - z1_j|^2/2}) )
///
/// Anchors and negatives come from `z1`, positives from `z2`. Rows must be unit
/// norm; exactly zero rows are tolerated.
template <class T>
Tensor<T> info_nce(const Tensor<T>& z1, const Tensor<T>& z2) {
    require_same_shape(z1.rows(), z1.cols(), z2.rows(), z2.cols(), "info_nce");
    const auto& a = z1.value();
    const auto& b = z2.value();
    detail::require_unit_rows(a, "view 1");
    detail::require_unit_rows(b, "view 2");

    const Eigen::Index n = a.rows();
    using Vec = Eigen::Matrix<T, Eigen::Dynamic, 1>;
    const Vec sq_a = a.rowwise().squaredNorm();
    const Vec sq_b = b.rowwise().squaredNorm();

    // Exponents: pos_i = -|a_i - b_i|^2 / 2, neg_ij = -|a_i - a_j|^2 / 2.
    Matrix<T> neg;
    neg.noalias() = a * a.transpose();
    for (Eigen::Index i = 0; i < n; ++i)
        for (Eigen::Index j = 0; j < n; ++j) neg(i, j) = neg(i, j) - T(0.5) * (sq_a(i) + sq_a(j));
    const Vec pos = (a.array() * b.array()).rowwise().sum().matrix() - T(0.5) * (sq_a + sq_b);

    // Softmax weights over {positive, negatives}, per anchor, max-shifted.
    Vec p_pos(n);
    Matrix<T> p_neg(n, n);
    double total = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) {
        T m = pos(i);
        for (Eigen::Index j = 0; j < n; ++j)
            if (j != i) m = std::max(m, neg(i, j));
        T denom = std::exp(pos(i) - m);
        for (Eigen::Index j = 0; j < n; ++j) {
            p_neg(i, j) = (j == i) ? T(0) : std::exp(neg(i, j) - m);
            denom += p_neg(i, j);
        }
        const T lse = m + std::log(denom);
        total += static_cast<double>(lse - pos(i));
        p_pos(i) = std::exp(pos(i) - lse);
        p_neg.row(i) /= denom;
    }

    Matrix<T> out(1, 1);
    out(0, 0) = static_cast<T>(total);
    return z1.tape().record(std::move(out), {z1, z2},
                            [p_pos = std::move(p_pos), p_neg = std::move(p_neg)](const Matrix<T>& up,
                                                                                  GradSink<T>& s) {
        const auto& a = s.input(0);
        const auto& b = s.input(1);
        const T u = up(0, 0);
        // dL/dpos_i = p_pos_i - 1; dL/dneg_ij = p_neg_ij.
        const Vec c = p_pos.array() - T(1);
        const Matrix<T> diff = a - b;
        if (s.wants(0)) {
            const Vec row = p_neg.rowwise().sum();
            const Vec col = p_neg.colwise().sum().transpose();
            Matrix<T> g = -(c.asDiagonal() * diff);
            g.noalias() += p_neg * a;
            g.noalias() += p_neg.transpose() * a;
            g -= (row + col).asDiagonal() * a;
            s.add(0, (u * g).eval());
        }
        if (s.wants(1)) s.add(1, (u * (c.asDiagonal() * diff)).eval());
    }, "info_nce");
}

/// 0.5 * (info_nce(z1, z2) + info_nce(z2, z1)).
template <class T>
Tensor<T> info_nce_symmetric(const Tensor<T>& z1, const Tensor<T>& z2) {
    return scale(add(info_nce(z1, z2), info_nce(z2, z1)), T(0.5));
}

/// Mean over rows of |z1_i - z2_i|_2. Diagnostic only, not differentiated.
template <class T>
double alignment_metric(const Matrix<T>& z1, const Matrix<T>& z2) {
    require_same_shape(z1.rows(), z1.cols(), z2.rows(), z2.cols(), "alignment_metric");
    if (z1.rows() == 0) return 0.0;
    return static_cast<double>((z1 - z2).rowwise().norm().template cast<double>().mean());
}

} // namespace magcl
