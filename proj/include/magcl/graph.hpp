#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "magcl/binary_io.hpp"
#include "magcl/error.hpp"
#include "magcl/matrix.hpp"

namespace magcl {

using NodeId = std::uint32_t;
using Edge = std::pair<NodeId, NodeId>;

/// CSR adjacency structure. Columns are sorted and unique within each row.
class SparseGraph {
public:
    SparseGraph() : row_ptr_(1, 0) {}

    /// Builds from an edge list. With `symmetrize`, every (u, v) also inserts (v, u).
    /// Duplicates are merged. Throws DataError on out-of-range ids.
    static SparseGraph from_edges(std::size_t num_nodes, std::span<const Edge> edges, bool symmetrize) {
        std::vector<Edge> all;
        all.reserve(symmetrize ? edges.size() * 2 : edges.size());
        for (const auto& [u, v] : edges) {
            if (u >= num_nodes || v >= num_nodes)
                throw DataError("edge (" + std::to_string(u) + ", " + std::to_string(v) +
                                ") out of range for " + std::to_string(num_nodes) + " nodes");
            all.emplace_back(u, v);
            if (symmetrize && u != v) all.emplace_back(v, u);
        }
        std::sort(all.begin(), all.end());
        all.erase(std::unique(all.begin(), all.end()), all.end());

        SparseGraph g;
        g.num_nodes_ = num_nodes;
        g.row_ptr_.assign(num_nodes + 1, 0);
        g.col_idx_.reserve(all.size());
        for (const auto& [u, v] : all) {
            ++g.row_ptr_[u + 1];
            g.col_idx_.push_back(v);
        }
        for (std::size_t i = 0; i < num_nodes; ++i) g.row_ptr_[i + 1] += g.row_ptr_[i];
        g.is_symmetric_ = g.check_symmetric();
        return g;
    }

    /// Adopts raw CSR arrays after validating every structural invariant.
    static SparseGraph from_csr(std::size_t num_nodes, std::vector<std::uint64_t> row_ptr,
                                std::vector<NodeId> col_idx) {
        SparseGraph g;
        g.num_nodes_ = num_nodes;
        g.row_ptr_ = std::move(row_ptr);
        g.col_idx_ = std::move(col_idx);
        g.validate();
        g.is_symmetric_ = g.check_symmetric();
        return g;
    }

    std::size_t num_nodes() const { return num_nodes_; }
    std::size_t num_entries() const { return col_idx_.size(); }
    bool is_symmetric() const { return is_symmetric_; }

    std::span<const std::uint64_t> row_ptr() const { return row_ptr_; }
    std::span<const NodeId> col_idx() const { return col_idx_; }

    std::span<const NodeId> neighbors(std::size_t row) const {
        return {col_idx_.data() + row_ptr_[row], col_idx_.data() + row_ptr_[row + 1]};
    }

    std::size_t degree(std::size_t row) const { return row_ptr_[row + 1] - row_ptr_[row]; }

    bool has_edge(std::size_t u, std::size_t v) const {
        auto nb = neighbors(u);
        return std::binary_search(nb.begin(), nb.end(), static_cast<NodeId>(v));
    }

    bool has_self_loops() const {
        for (std::size_t i = 0; i < num_nodes_; ++i)
            if (has_edge(i, i)) return true;
        return false;
    }

    /// Returns a copy where every node has a self-loop. Existing loops are kept once.
    SparseGraph with_self_loops() const {
        SparseGraph g;
        g.num_nodes_ = num_nodes_;
        g.row_ptr_.assign(num_nodes_ + 1, 0);
        g.col_idx_.reserve(col_idx_.size() + num_nodes_);
        for (std::size_t i = 0; i < num_nodes_; ++i) {
            const auto self = static_cast<NodeId>(i);
            bool inserted = false;
            for (NodeId c : neighbors(i)) {
                if (!inserted && c >= self) {
                    if (c != self) g.col_idx_.push_back(self);
                    inserted = true;
                }
                g.col_idx_.push_back(c);
            }
            if (!inserted) g.col_idx_.push_back(self);
            g.row_ptr_[i + 1] = g.col_idx_.size();
        }
        g.is_symmetric_ = is_symmetric_;
        return g;
    }

    /// Undirected edges (u < v), each listed once, in CSR order. Self-loops excluded.
    std::vector<Edge> undirected_edges() const {
        std::vector<Edge> out;
        for (std::size_t u = 0; u < num_nodes_; ++u)
            for (NodeId v : neighbors(u))
                if (u < v) out.emplace_back(static_cast<NodeId>(u), v);
        return out;
    }

    void validate() const {
        if (row_ptr_.size() != num_nodes_ + 1 || row_ptr_.front() != 0 || row_ptr_.back() != col_idx_.size())
            throw DataError("CSR row_ptr inconsistent with node/entry counts");
        for (std::size_t i = 0; i < num_nodes_; ++i) {
            if (row_ptr_[i] > row_ptr_[i + 1]) throw DataError("CSR row_ptr not nondecreasing");
            for (auto k = row_ptr_[i]; k < row_ptr_[i + 1]; ++k) {
                if (col_idx_[k] >= num_nodes_) throw DataError("CSR column index out of range");
                if (k > row_ptr_[i] && col_idx_[k - 1] >= col_idx_[k])
                    throw DataError("CSR columns unsorted or duplicated in row " + std::to_string(i));
            }
        }
    }

    friend bool operator==(const SparseGraph&, const SparseGraph&) = default;

private:
    bool check_symmetric() const {
        for (std::size_t u = 0; u < num_nodes_; ++u)
            for (NodeId v : neighbors(u))
                if (!has_edge(v, u)) return false;
        return true;
    }

    std::size_t num_nodes_ = 0;
    std::vector<std::uint64_t> row_ptr_;
    std::vector<NodeId> col_idx_;
    bool is_symmetric_ = true;
};

/// The propagation matrix F = (1 - pi) I + pi D^{-1/2} A D^{-1/2}, with A
/// including self-loops and D its degree matrix. Stored on A's sparsity pattern.
class GraphFilter {
public:
    GraphFilter() = default;
    GraphFilter(SparseGraph structure, std::vector<double> values, double pi)
        : structure_(std::move(structure)), values_(std::move(values)), pi_(pi) {
        if (values_.size() != structure_.num_entries())
            throw DataError("filter value count does not match structure");
    }

    const SparseGraph& structure() const { return structure_; }
    std::span<const double> values() const { return values_; }
    double pi() const { return pi_; }
    std::size_t num_nodes() const { return structure_.num_nodes(); }

    double value(std::size_t i, std::size_t j) const {
        auto nb = structure_.neighbors(i);
        auto it = std::lower_bound(nb.begin(), nb.end(), static_cast<NodeId>(j));
        if (it == nb.end() || *it != j) return 0.0;
        return values_[structure_.row_ptr()[i] + static_cast<std::size_t>(it - nb.begin())];
    }

    MatrixD to_dense() const {
        const auto n = static_cast<Eigen::Index>(num_nodes());
        MatrixD d = MatrixD::Zero(n, n);
        auto rp = structure_.row_ptr();
        auto ci = structure_.col_idx();
        for (Eigen::Index i = 0; i < n; ++i)
            for (auto k = rp[i]; k < rp[i + 1]; ++k) d(i, ci[k]) = values_[k];
        return d;
    }

    friend bool operator==(const GraphFilter&, const GraphFilter&) = default;

private:
    SparseGraph structure_;
    std::vector<double> values_;
    double pi_ = 0.5;
};

inline constexpr double kDefaultPi = 0.5;

inline GraphFilter build_filter(const SparseGraph& graph, double pi = kDefaultPi) {
    if (!(pi > 0.0 && pi < 1.0)) throw ConfigError("filter pi must lie in (0, 1), got " + std::to_string(pi));
    if (!graph.is_symmetric()) throw DataError("build_filter requires a symmetric graph");

    SparseGraph a = graph.with_self_loops();
    const std::size_t n = a.num_nodes();
    std::vector<double> inv_sqrt_deg(n);
    for (std::size_t i = 0; i < n; ++i) inv_sqrt_deg[i] = 1.0 / std::sqrt(static_cast<double>(a.degree(i)));

    std::vector<double> values(a.num_entries());
    auto rp = a.row_ptr();
    auto ci = a.col_idx();
    for (std::size_t i = 0; i < n; ++i) {
        for (auto k = rp[i]; k < rp[i + 1]; ++k) {
            const std::size_t j = ci[k];
            double v = pi * inv_sqrt_deg[i] * inv_sqrt_deg[j];
            if (i == j) v += 1.0 - pi;
            values[k] = v;
        }
    }
    return GraphFilter(std::move(a), std::move(values), pi);
}

/// out = F * in. Each output row is reduced over ascending column index, so
/// results are bitwise reproducible. `out` must not alias `in`.
template <class T>
void spmm_into(const GraphFilter& filter, const Matrix<T>& in, Matrix<T>& out) {
    const auto n = static_cast<Eigen::Index>(filter.num_nodes());
    if (in.rows() != n)
        throw ShapeError("spmm: filter has " + std::to_string(n) + " nodes but dense operand is " +
                         shape_str(in.rows(), in.cols()));
    out.resize(n, in.cols());
    auto rp = filter.structure().row_ptr();
    auto ci = filter.structure().col_idx();
    auto vals = filter.values();
    for (Eigen::Index i = 0; i < n; ++i) {
        auto row = out.row(i);
        row.setZero();
        for (auto k = rp[i]; k < rp[i + 1]; ++k) row += static_cast<T>(vals[k]) * in.row(ci[k]);
    }
}

template <class T>
Matrix<T> spmm(const GraphFilter& filter, const Matrix<T>& in) {
    Matrix<T> out;
    spmm_into(filter, in, out);
    return out;
}

/// Binary filter cache: "MAFL", u32 num_nodes, u64 nnz, row_ptr (u64), col_idx (u32),
/// values (f64), pi (f64); all little-endian.
inline void save_filter(const GraphFilter& f, const std::string& path) {
    auto os = io::open_out(path);
    os.write("MAFL", 4);
    io::write_le<std::uint32_t>(os, static_cast<std::uint32_t>(f.num_nodes()));
    io::write_le<std::uint64_t>(os, f.structure().num_entries());
    for (auto r : f.structure().row_ptr()) io::write_le<std::uint64_t>(os, r);
    for (auto c : f.structure().col_idx()) io::write_le<std::uint32_t>(os, c);
    for (auto v : f.values()) io::write_le<double>(os, v);
    io::write_le<double>(os, f.pi());
    if (!os) throw Error("failed writing " + path);
}

inline GraphFilter load_filter(const std::string& path) {
    auto is = io::open_in(path);
    io::Reader rd(is, path);
    rd.expect_magic("MAFL");
    const auto n = rd.read_le<std::uint32_t>();
    const auto nnz = rd.read_le<std::uint64_t>();
    std::vector<std::uint64_t> row_ptr(n + 1);
    for (auto& r : row_ptr) r = rd.read_le<std::uint64_t>();
    if (row_ptr.back() != nnz) throw DataError(path + ": row_ptr does not end at nnz");
    std::vector<NodeId> col_idx(nnz);
    for (auto& c : col_idx) c = rd.read_le<std::uint32_t>();
    std::vector<double> values(nnz);
    for (auto& v : values) v = rd.read_le<double>();
    const double pi = rd.read_le<double>();
    rd.expect_eof();
    return GraphFilter(SparseGraph::from_csr(n, std::move(row_ptr), std::move(col_idx)), std::move(values), pi);
}

} // namespace magcl
