#pragma once

#include <charconv>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"

#include "magcl/error.hpp"
#include "magcl/graph.hpp"
#include "magcl/matrix.hpp"

namespace magcl {

struct Splits {
    std::vector<NodeId> train;
    std::vector<NodeId> val;
    std::vector<NodeId> test;

    friend bool operator==(const Splits&, const Splits&) = default;
};

inline constexpr int kMissingLabel = -1;

/// A node-classification benchmark: symmetric loop-free graph, dense features,
/// labels (-1 = missing) and a train/val/test split.
struct Dataset {
    SparseGraph graph;
    MatrixD features;
    std::vector<int> labels;
    Splits splits;
    int num_classes = 0;

    std::size_t num_nodes() const { return graph.num_nodes(); }
};

struct LoadOptions {
    /// Scale every feature row to unit L1 norm (rows summing to zero are left alone).
    bool row_normalize_features = false;
};

namespace detail {

inline std::string_view trim(std::string_view s) {
    const auto b = s.find_first_not_of(" \t\r\n");
    if (b == std::string_view::npos) return {};
    const auto e = s.find_last_not_of(" \t\r\n");
    return s.substr(b, e - b + 1);
}

template <class T>
bool parse_number(std::string_view s, T& out) {
    s = trim(s);
    if (s.empty()) return false;
    if (s.front() == '+') s.remove_prefix(1);
    auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
    return ec == std::errc() && ptr == s.data() + s.size();
}

inline std::ifstream open_text(const std::filesystem::path& p) {
    std::ifstream is(p);
    if (!is) throw DataError("missing file: " + p.string());
    return is;
}

inline void check_split_ids(const std::vector<NodeId>& ids, std::size_t n, const std::string& name,
                            const std::string& file, std::set<NodeId>& seen) {
    for (NodeId id : ids) {
        if (id >= n)
            throw DataError(file + ": split \"" + name + "\" node id " + std::to_string(id) + " out of range");
        if (!seen.insert(id).second)
            throw DataError(file + ": split \"" + name + "\" node id " + std::to_string(id) +
                            " overlaps another split or repeats");
    }
}

} // namespace detail

inline void validate_splits(const Splits& s, std::size_t num_nodes, const std::string& origin = "splits") {
    std::set<NodeId> seen;
    detail::check_split_ids(s.train, num_nodes, "train", origin, seen);
    detail::check_split_ids(s.val, num_nodes, "val", origin, seen);
    detail::check_split_ids(s.test, num_nodes, "test", origin, seen);
}

/// Reads edges.tsv, features.csv, labels.txt and splits.json from `dir`.
/// Edges are symmetrized; self-loops are left out (build_filter adds them).
inline Dataset load_dataset(const std::filesystem::path& dir, const LoadOptions& opts = {}) {
    Dataset ds;

    // features.csv fixes the node count.
    {
        const auto path = dir / "features.csv";
        auto is = detail::open_text(path);
        std::vector<std::vector<double>> rows;
        std::string line;
        std::size_t lineno = 0;
        while (std::getline(is, line)) {
            ++lineno;
            auto t = detail::trim(line);
            if (t.empty()) continue;
            std::vector<double> row;
            std::size_t start = 0;
            while (true) {
                const auto comma = t.find(',', start);
                const auto tok = t.substr(start, comma == std::string_view::npos ? t.npos : comma - start);
                double v;
                if (!detail::parse_number(tok, v))
                    throw DataError(path.string(), lineno, "bad feature value \"" + std::string(tok) + "\"");
                row.push_back(v);
                if (comma == std::string_view::npos) break;
                start = comma + 1;
            }
            if (!rows.empty() && row.size() != rows.front().size())
                throw DataError(path.string(), lineno,
                                "ragged feature row: " + std::to_string(row.size()) + " columns, expected " +
                                    std::to_string(rows.front().size()));
            rows.push_back(std::move(row));
        }
        if (rows.empty()) throw DataError(path.string() + ": no feature rows");
        ds.features.resize(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(rows.front().size()));
        for (std::size_t i = 0; i < rows.size(); ++i)
            for (std::size_t j = 0; j < rows[i].size(); ++j)
                ds.features(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = rows[i][j];
    }
    const auto n = static_cast<std::size_t>(ds.features.rows());

    {
        const auto path = dir / "edges.tsv";
        auto is = detail::open_text(path);
        std::vector<Edge> edges;
        std::string line;
        std::size_t lineno = 0;
        while (std::getline(is, line)) {
            ++lineno;
            std::string_view t = line;
            if (auto hash = t.find('#'); hash != t.npos) t = t.substr(0, hash);
            t = detail::trim(t);
            if (t.empty()) continue;
            const auto tab = t.find_first_of("\t ");
            std::uint64_t u, v;
            if (tab == t.npos || !detail::parse_number(t.substr(0, tab), u) ||
                !detail::parse_number(t.substr(tab + 1), v))
                throw DataError(path.string(), lineno, "expected \"src<TAB>dst\"");
            if (u >= n || v >= n)
                throw DataError(path.string(), lineno,
                                "node id out of range (" + std::to_string(n) + " nodes)");
            if (u == v) continue;
            edges.emplace_back(static_cast<NodeId>(u), static_cast<NodeId>(v));
        }
        ds.graph = SparseGraph::from_edges(n, edges, /*symmetrize=*/true);
    }

    {
        const auto path = dir / "labels.txt";
        auto is = detail::open_text(path);
        std::string line;
        std::size_t lineno = 0;
        int max_label = -1;
        while (std::getline(is, line)) {
            ++lineno;
            auto t = detail::trim(line);
            if (t.empty()) continue;
            int v;
            if (!detail::parse_number(t, v) || v < kMissingLabel)
                throw DataError(path.string(), lineno, "bad label \"" + std::string(t) + "\"");
            ds.labels.push_back(v);
            max_label = std::max(max_label, v);
        }
        if (ds.labels.size() != n)
            throw DataError(path.string() + ": " + std::to_string(ds.labels.size()) + " labels for " +
                            std::to_string(n) + " nodes");
        ds.num_classes = max_label + 1;
    }

    {
        const auto path = dir / "splits.json";
        auto is = detail::open_text(path);
        nlohmann::json j;
        try {
            is >> j;
            ds.splits.train = j.at("train").get<std::vector<NodeId>>();
            ds.splits.val = j.at("val").get<std::vector<NodeId>>();
            ds.splits.test = j.at("test").get<std::vector<NodeId>>();
        } catch (const nlohmann::json::exception& e) {
            throw DataError(path.string() + ": " + e.what());
        }
        validate_splits(ds.splits, n, path.string());
    }

    if (opts.row_normalize_features) {
        for (Eigen::Index i = 0; i < ds.features.rows(); ++i) {
            const double s = ds.features.row(i).cwiseAbs().sum();
            if (s > 0) ds.features.row(i) /= s;
        }
    }
    return ds;
}

/// Writes `ds` in the layout load_dataset reads. Features use round-trip precision.
inline void save_dataset(const Dataset& ds, const std::filesystem::path& dir) {
    std::filesystem::create_directories(dir);
    {
        std::ofstream os(dir / "edges.tsv");
        os << "# src\tdst (undirected, listed once)\n";
        for (const auto& [u, v] : ds.graph.undirected_edges()) os << u << '\t' << v << '\n';
    }
    {
        std::ofstream os(dir / "features.csv");
        char buf[32];
        for (Eigen::Index i = 0; i < ds.features.rows(); ++i) {
            for (Eigen::Index j = 0; j < ds.features.cols(); ++j) {
                if (j) os << ',';
                auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, ds.features(i, j));
                os.write(buf, ptr - buf);
            }
            os << '\n';
        }
    }
    {
        std::ofstream os(dir / "labels.txt");
        for (int l : ds.labels) os << l << '\n';
    }
    {
        nlohmann::json j{{"train", ds.splits.train}, {"val", ds.splits.val}, {"test", ds.splits.test}};
        std::ofstream os(dir / "splits.json");
        os << j.dump() << '\n';
    }
}

/// FNV-1a over the dataset files, in a fixed order. Used for run manifests.
inline std::uint64_t dataset_fingerprint(const std::filesystem::path& dir) {
    std::uint64_t h = 0xCBF29CE484222325ULL;
    for (const char* name : {"edges.tsv", "features.csv", "labels.txt", "splits.json"}) {
        std::ifstream is(dir / name, std::ios::binary);
        if (!is) throw DataError("missing file: " + (dir / name).string());
        char buf[1 << 16];
        while (is.read(buf, sizeof buf) || is.gcount() > 0) {
            for (std::streamsize i = 0; i < is.gcount(); ++i) {
                h ^= static_cast<unsigned char>(buf[i]);
                h *= 0x100000001B3ULL;
            }
        }
    }
    return h;
}

} // namespace magcl
