#pragma once

// Shared fixtures for the test suites: random graphs, random matrices and a
// small planted-partition dataset.

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "magcl/magcl.hpp"

namespace magcl::test {

/// Erdos-Renyi G(n, p) without self-loops, symmetric.
inline SparseGraph random_graph(std::size_t n, double p, Rng& rng) {
    std::vector<Edge> edges;
    for (std::size_t u = 0; u < n; ++u)
        for (std::size_t v = u + 1; v < n; ++v)
            if (rng.bernoulli(p)) edges.emplace_back(static_cast<NodeId>(u), static_cast<NodeId>(v));
    return SparseGraph::from_edges(n, edges, true);
}

template <class T = double>
Matrix<T> random_matrix(Eigen::Index rows, Eigen::Index cols, Rng& rng, double lo = -1.0, double hi = 1.0) {
    Matrix<T> m(rows, cols);
    for (Eigen::Index i = 0; i < rows; ++i)
        for (Eigen::Index j = 0; j < cols; ++j) m(i, j) = static_cast<T>(rng.uniform(lo, hi));
    return m;
}

template <class T = double>
Matrix<T> random_unit_rows(Eigen::Index rows, Eigen::Index cols, Rng& rng) {
    Matrix<T> m = random_matrix<T>(rows, cols, rng);
    for (Eigen::Index i = 0; i < rows; ++i) m.row(i).normalize();
    return m;
}

/// Planted partition: `classes` equal blocks, intra-block edge probability
/// p_in, inter-block p_out; features are a noisy class indicator spread over
/// `dim` columns. Split: 20 train nodes per class, then val/test halves.
inline Dataset planted_partition(std::size_t n, int classes, double p_in, double p_out, Eigen::Index dim,
                                 double noise, Rng& rng) {
    Dataset ds;
    ds.labels.resize(n);
    for (std::size_t i = 0; i < n; ++i) ds.labels[i] = static_cast<int>(i % static_cast<std::size_t>(classes));
    ds.num_classes = classes;
    std::vector<Edge> edges;
    for (std::size_t u = 0; u < n; ++u)
        for (std::size_t v = u + 1; v < n; ++v)
            if (rng.bernoulli(ds.labels[u] == ds.labels[v] ? p_in : p_out))
                edges.emplace_back(static_cast<NodeId>(u), static_cast<NodeId>(v));
    ds.graph = SparseGraph::from_edges(n, edges, true);

    ds.features = MatrixD::Zero(static_cast<Eigen::Index>(n), dim);
    for (std::size_t i = 0; i < n; ++i) {
        for (Eigen::Index j = 0; j < dim; ++j) {
            const bool signal = j % classes == ds.labels[i];
            const double p = signal ? 0.3 : noise;
            ds.features(static_cast<Eigen::Index>(i), j) = rng.bernoulli(p) ? 1.0 : 0.0;
        }
        ds.features(static_cast<Eigen::Index>(i), ds.labels[i] % dim) = 1.0;
    }

    std::vector<NodeId> perm(n);
    for (std::size_t i = 0; i < n; ++i) perm[i] = static_cast<NodeId>(i);
    rng.shuffle(perm);
    std::vector<int> per_class(static_cast<std::size_t>(classes), 0);
    std::vector<NodeId> rest;
    for (NodeId id : perm) {
        auto& c = per_class[static_cast<std::size_t>(ds.labels[id])];
        if (c < 20) {
            ds.splits.train.push_back(id);
            ++c;
        } else {
            rest.push_back(id);
        }
    }
    ds.splits.val.assign(rest.begin(), rest.begin() + static_cast<std::ptrdiff_t>(rest.size() / 3));
    ds.splits.test.assign(rest.begin() + static_cast<std::ptrdiff_t>(rest.size() / 3), rest.end());
    return ds;
}

/// Fresh empty directory under the system temp dir.
inline std::filesystem::path temp_dir(const std::string& name) {
    auto p = std::filesystem::temp_directory_path() / ("magcl_test_" + name);
    std::filesystem::remove_all(p);
    std::filesystem::create_directories(p);
    return p;
}

inline void write_file(const std::filesystem::path& p, const std::string& content) {
    std::ofstream os(p);
    os << content;
}

} // namespace magcl::test
