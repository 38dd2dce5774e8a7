#pragma once

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <numeric>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Eigenvalues>

#include "magcl/error.hpp"
#include "magcl/graph.hpp"
#include "magcl/matrix.hpp"

namespace magcl {

/// Eigenpairs of a filter, eigenvalues descending, eigenvectors as columns.
struct SpectralDecomposition {
    Eigen::VectorXd eigenvalues;
    Eigen::MatrixXd eigenvectors;

    std::size_t size() const { return static_cast<std::size_t>(eigenvalues.size()); }
};

inline constexpr std::size_t kDenseEigenLimit = 20000;
inline constexpr std::size_t kDenseEigenWarn = 5000;

/// Dense symmetric eigendecomposition of an explicit symmetric matrix.
inline SpectralDecomposition eig_sym(const Eigen::MatrixXd& dense) {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(dense);
    if (solver.info() != Eigen::Success) throw NumericError("eig_sym: eigensolver did not converge");
    const auto n = dense.rows();
    SpectralDecomposition out;
    out.eigenvalues.resize(n);
    out.eigenvectors.resize(n, n);
    // Eigen returns ascending order.
    for (Eigen::Index k = 0; k < n; ++k) {
        out.eigenvalues(k) = solver.eigenvalues()(n - 1 - k);
        out.eigenvectors.col(k) = solver.eigenvectors().col(n - 1 - k);
    }
    const double scale = std::max(1.0, dense.cwiseAbs().maxCoeff());
    const double residual = (dense * out.eigenvectors - out.eigenvectors * out.eigenvalues.asDiagonal())
                                .colwise().norm().maxCoeff();
    if (n > 0 && !(residual <= 1e-8 * scale * std::sqrt(static_cast<double>(n))))
        throw NumericError("eig_sym: residual " + std::to_string(residual) + " too large");
    return out;
}

inline SpectralDecomposition eig_sym(const GraphFilter& filter) {
    if (filter.num_nodes() > kDenseEigenLimit)
        throw ConfigError("eig_sym: " + std::to_string(filter.num_nodes()) + " nodes exceeds the dense limit of " +
                          std::to_string(kDenseEigenLimit));
    if (filter.num_nodes() > kDenseEigenWarn)
        std::fprintf(stderr, "warning: dense eigendecomposition of %zu nodes may be slow\n", filter.num_nodes());
    return eig_sym(Eigen::MatrixXd(filter.to_dense()));
}

/// Columns of U kept by the closed-form optimum of the depth-asymmetric objective.
struct SelectionResult {
    std::vector<std::size_t> indices;  // ascending
    std::vector<double> scores;        // (lambda^L - lambda^L')^2 for each index
};

/// Score of eigenvalue lambda for depths L and L': (lambda^L - lambda^L')^2.
inline double depth_gap_score(double lambda, int depth1, int depth2) {
    const double d = std::pow(lambda, depth1) - std::pow(lambda, depth2);
    return d * d;
}

/// The d_out indices minimizing (lambda_k^L - lambda_k^L')^2. Equal scores
/// prefer the lower index, i.e. the larger eigenvalue.
inline SelectionResult depth_gap_select(const Eigen::VectorXd& eigenvalues, int depth1, int depth2,
                                       std::size_t d_out) {
    if (depth1 == depth2)
        throw ConfigError("depth_gap_select: L == L' makes every score zero and the selection vacuous");
    if (depth1 < 0 || depth2 < 0) throw ConfigError("depth_gap_select: depths must be >= 0");
    const auto n = static_cast<std::size_t>(eigenvalues.size());
    if (d_out > n) throw ConfigError("depth_gap_select: d_out exceeds the number of eigenvalues");

    std::vector<double> score(n);
    for (std::size_t k = 0; k < n; ++k) score[k] = depth_gap_score(eigenvalues(static_cast<Eigen::Index>(k)), depth1, depth2);
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return score[a] < score[b]; });
    order.resize(d_out);
    std::sort(order.begin(), order.end());

    SelectionResult r;
    r.indices = order;
    for (auto k : order) r.scores.push_back(score[k]);
    return r;
}

struct OracleResult {
    std::vector<std::size_t> subset; // ascending column indices of U
    double objective = 0.0;
};

inline constexpr std::size_t kOracleMaxNodes = 12;

/// Exhaustive search over every d_out-column subset S of the eigenvectors:
/// W = U[:, S], objective tr(M M^T) with M = (F^L - F^L') W, using one-hot
/// features. F^L is formed by repeated dense multiplication, so the objective
/// does not go through the eigenvalues. Exact ties keep the lexicographically
/// smallest subset.
inline OracleResult depth_gap_bruteforce_oracle(const GraphFilter& filter, int depth1, int depth2, std::size_t d_out) {
    const std::size_t n = filter.num_nodes();
    if (n > kOracleMaxNodes)
        throw ConfigError("depth_gap_bruteforce_oracle: " + std::to_string(n) + " nodes exceeds " +
                          std::to_string(kOracleMaxNodes));
    if (d_out < 1 || d_out > n) throw ConfigError("depth_gap_bruteforce_oracle: d_out must lie in [1, |V|]");
    if (depth1 < 0 || depth2 < 0) throw ConfigError("depth_gap_bruteforce_oracle: depths must be >= 0");

    const Eigen::MatrixXd f = filter.to_dense();
    auto power = [&](int p) {
        Eigen::MatrixXd r = Eigen::MatrixXd::Identity(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n));
        for (int i = 0; i < p; ++i) r = (r * f).eval();
        return r;
    };
    const Eigen::MatrixXd diff = power(depth1) - power(depth2);
    const auto spec = eig_sym(f);

    OracleResult best;
    best.objective = std::numeric_limits<double>::infinity();
    std::vector<std::size_t> subset(d_out);
    std::iota(subset.begin(), subset.end(), 0);
    while (true) {
        Eigen::MatrixXd w(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(d_out));
        for (std::size_t c = 0; c < d_out; ++c) w.col(static_cast<Eigen::Index>(c)) = spec.eigenvectors.col(static_cast<Eigen::Index>(subset[c]));
        const Eigen::MatrixXd m = diff * w;
        const double obj = (m * m.transpose()).trace();
        if (obj < best.objective) {
            best.objective = obj;
            best.subset = subset;
        }
        // next combination in lexicographic order
        std::size_t i = d_out;
        while (i > 0 && subset[i - 1] == n - d_out + i - 1) --i;
        if (i == 0) break;
        ++subset[i - 1];
        for (std::size_t j = i; j < d_out; ++j) subset[j] = subset[j - 1] + 1;
    }
    return best;
}

/// Exact and first-order change of lambda^L under lambda -> lambda + eps.
struct Perturbation {
    double exact = 0.0;
    double first_order = 0.0;
};

inline Perturbation perturbation_sensitivity(double lambda, int depth, double eps) {
    Perturbation p;
    p.exact = std::pow(lambda + eps, depth) - std::pow(lambda, depth);
    p.first_order = depth == 0 ? 0.0 : depth * eps * std::pow(lambda, depth - 1);
    return p;
}

struct SpectrumReport {
    std::size_t num_nodes = 0;
    double pi = 0.0;
    double lambda_1 = 0.0;
    std::optional<double> lambda_100;
    double lambda_min = 0.0;
    double fraction_above_099 = 0.0;
    double histogram_lo = 0.0, histogram_hi = 1.0;
    std::vector<std::size_t> histogram;
    Eigen::VectorXd eigenvalues;
};

inline SpectrumReport spectrum_report(const SpectralDecomposition& spec, double pi, std::size_t bins = 20) {
    SpectrumReport r;
    const auto& ev = spec.eigenvalues;
    r.num_nodes = spec.size();
    r.pi = pi;
    r.eigenvalues = ev;
    if (ev.size() == 0) return r;
    r.lambda_1 = ev(0);
    if (ev.size() >= 100) r.lambda_100 = ev(99);
    r.lambda_min = ev(ev.size() - 1);
    r.fraction_above_099 = static_cast<double>((ev.array() > 0.99).count()) / static_cast<double>(ev.size());
    r.histogram_lo = std::min(1.0 - 2.0 * pi, r.lambda_min);
    r.histogram_hi = 1.0;
    r.histogram.assign(bins, 0);
    const double width = (r.histogram_hi - r.histogram_lo) / static_cast<double>(bins);
    for (Eigen::Index k = 0; k < ev.size(); ++k) {
        auto b = static_cast<std::ptrdiff_t>((ev(k) - r.histogram_lo) / width);
        b = std::clamp<std::ptrdiff_t>(b, 0, static_cast<std::ptrdiff_t>(bins) - 1);
        ++r.histogram[static_cast<std::size_t>(b)];
    }
    return r;
}

inline SpectrumReport spectrum_report(const GraphFilter& filter, std::size_t bins = 20) {
    return spectrum_report(eig_sym(filter), filter.pi(), bins);
}

} // namespace magcl
