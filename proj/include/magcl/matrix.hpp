#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <string>

#include "magcl/error.hpp"

namespace magcl {

/// Dense row-major matrix; rows are nodes throughout the library.
template <class T>
using Matrix = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

using MatrixD = Matrix<double>;
using MatrixF = Matrix<float>;

template <class T>
bool all_finite(const Matrix<T>& m) {
    return m.allFinite();
}

template <class T>
void require_finite(const Matrix<T>& m, const std::string& where) {
    if (!m.allFinite()) throw NumericError("non-finite value produced by " + where);
}

inline void require_same_shape(long r1, long c1, long r2, long c2, const std::string& where) {
    if (r1 != r2 || c1 != c2)
        throw ShapeError(where + ": shape mismatch " + shape_str(r1, c1) + " vs " + shape_str(r2, c2));
}

} // namespace magcl
