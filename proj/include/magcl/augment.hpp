#pragma once

#include <algorithm>
#include <cstdint>
#include <numeric>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "magcl/error.hpp"
#include "magcl/graph.hpp"
#include "magcl/matrix.hpp"
#include "magcl/rng.hpp"

namespace magcl {

// ---------------------------------------------------------------------------
// Graph data augmentation

/// Edge-drop and feature-mask rates for the two views.
struct GdaConfig {
    double edr1 = 0.0, edr2 = 0.0;
    double fdr1 = 0.0, fdr2 = 0.0;

    void validate() const {
        for (auto [name, r] : {std::pair{"edr1", edr1}, {"edr2", edr2}, {"fdr1", fdr1}, {"fdr2", fdr2}})
            if (!(r >= 0.0 && r < 1.0))
                throw ConfigError(std::string("gda.") + name + " must lie in [0, 1), got " + std::to_string(r));
    }
};

/// Keeps each undirected edge with probability 1 - rate. Both directions of an
/// edge share one draw, so the result stays symmetric. Edges are visited in
/// (min, max) order, one uniform per edge.
inline SparseGraph drop_edges(const SparseGraph& graph, double rate, Rng& rng) {
    if (!(rate >= 0.0 && rate < 1.0)) throw ConfigError("drop_edges: rate must lie in [0, 1)");
    if (!graph.is_symmetric()) throw DataError("drop_edges: graph must be symmetric");
    const auto edges = graph.undirected_edges();
    std::vector<Edge> kept;
    kept.reserve(edges.size());
    for (const auto& e : edges)
        if (!rng.bernoulli(rate)) kept.push_back(e);
    return SparseGraph::from_edges(graph.num_nodes(), kept, /*symmetrize=*/true);
}

/// Column mask: true = feature kept. One Bernoulli(1 - rate) draw per column.
inline std::vector<bool> draw_feature_mask(Eigen::Index num_features, double rate, Rng& rng) {
    if (!(rate >= 0.0 && rate < 1.0)) throw ConfigError("mask_features: rate must lie in [0, 1)");
    std::vector<bool> keep(static_cast<std::size_t>(num_features));
    for (auto&& k : keep) k = !rng.bernoulli(rate);
    return keep;
}

/// Zeroes a random set of feature columns, the same set for every node.
template <class T>
Matrix<T> mask_features(const Matrix<T>& x, double rate, Rng& rng) {
    const auto keep = draw_feature_mask(x.cols(), rate, rng);
    Matrix<T> out = x;
    for (Eigen::Index j = 0; j < x.cols(); ++j)
        if (!keep[static_cast<std::size_t>(j)]) out.col(j).setZero();
    return out;
}

// ---------------------------------------------------------------------------
// Architecture sampling

/// Propagation counts (K_1, ..., K_N): K_i filter applications precede the i-th transformation.
struct EncoderArch {
    std::vector<int> k;

    int depth() const { return std::accumulate(k.begin(), k.end(), 0); }
    std::size_t size() const { return k.size(); }

    std::string str() const {
        std::string s = "(";
        for (std::size_t i = 0; i < k.size(); ++i) s += (i ? "," : "") + std::to_string(k[i]);
        return s + ")";
    }

    friend bool operator==(const EncoderArch&, const EncoderArch&) = default;
    friend auto operator<=>(const EncoderArch&, const EncoderArch&) = default;
};

using ArchPair = std::pair<EncoderArch, EncoderArch>;

/// Evaluation-time architecture: K repeated N times.
inline EncoderArch fixed_eval_arch(std::size_t n, int k_eval) {
    return EncoderArch{std::vector<int>(n, k_eval)};
}

struct Strategies {
    bool asymmetric = false;
    bool random = false;
    bool shuffling = false;

    bool none() const { return !asymmetric && !random && !shuffling; }

    /// "Base", "A", "R+S", "A+R+S", ...
    std::string label() const {
        if (none()) return "Base";
        std::string s;
        auto push = [&s](const char* t) { s += (s.empty() ? "" : "+") + std::string(t); };
        if (asymmetric) push("A");
        if (random) push("R");
        if (shuffling) push("S");
        return s;
    }

    friend bool operator==(const Strategies&, const Strategies&) = default;
};

struct ArchSamplerConfig {
    std::size_t n_transforms = 2;
    int low = 0, high = 0;   // view-1 bounds, inclusive
    int low2 = 0, high2 = 0; // view-2 bounds, inclusive
    Strategies strategies;
    int fixed_k = 1;         // used while the random strategy is off
};

inline constexpr int kMaxRejectionAttempts = 10000;

/// Draws encoder architecture pairs under the asymmetric (A), random (R) and
/// shuffling (S) strategies:
///
///   none   both views (fixed_k, ..., fixed_k)
///   A      fixed pair, sum k != sum k', k_i == k'_i for i < N
///   R      one arch per epoch, all k_i equal, drawn from view-1 bounds; shared
///   S      fixed pair, two compositions of fixed_k * N with k_i != k'_i for all i
///   A+R    per draw, sum k != sum k'
///   R+S    per draw, sum k == sum k' and k_i != k'_i for all i
///   A+S    fixed pair, sum k != sum k' and k_i != k'_i for all i
///   A+R+S  per draw, sum k != sum k' and k_i != k'_i for all i
///
/// Fixed pairs are the lexicographically smallest satisfying (k, k'). Per-draw
/// modes sample k from view-1 bounds and k' from view-2 bounds uniformly and
/// reject, which is uniform over the satisfying set. Satisfiability is checked
/// by enumeration when the sampler is constructed.
class ArchSampler {
public:
    explicit ArchSampler(ArchSamplerConfig cfg) : cfg_(std::move(cfg)) {
        const auto& st = cfg_.strategies;
        if (cfg_.n_transforms < 1) throw ConfigError("n_transforms must be >= 1");
        if (cfg_.fixed_k < 0) throw ConfigError("fixed_k must be >= 0");
        if (st.random || st.asymmetric) {
            if (cfg_.low < 0 || cfg_.low > cfg_.high)
                throw ConfigError("k_range must satisfy 0 <= low <= high");
            if (cfg_.low2 < 0 || cfg_.low2 > cfg_.high2)
                throw ConfigError("k2_range must satisfy 0 <= low <= high");
        }

        if (st.none()) {
            fixed_ = ArchPair{fixed_eval_arch(cfg_.n_transforms, cfg_.fixed_k),
                              fixed_eval_arch(cfg_.n_transforms, cfg_.fixed_k)};
        } else if (st.random && !st.asymmetric && !st.shuffling) {
            // R only: always satisfiable once bounds are valid.
        } else if (st.shuffling && !st.random && !st.asymmetric) {
            fixed_ = smallest_composition_pair();
        } else if (!st.random) {
            fixed_ = smallest_lattice_pair();
        } else {
            satisfying_ = enumerate_satisfying();
            if (satisfying_.empty()) throw unsatisfiable();
        }
    }

    const ArchSamplerConfig& config() const { return cfg_; }

    /// True when the same pair is returned by every draw.
    bool is_fixed() const { return fixed_.has_value(); }

    ArchPair sample(Rng& rng) const {
        if (fixed_) return *fixed_;
        const auto& st = cfg_.strategies;
        const auto n = cfg_.n_transforms;
        if (!st.asymmetric && !st.shuffling) {
            const int k = static_cast<int>(rng.uniform_int(cfg_.low, cfg_.high));
            return {fixed_eval_arch(n, k), fixed_eval_arch(n, k)};
        }
        for (int attempt = 0; attempt < kMaxRejectionAttempts; ++attempt) {
            ArchPair p{EncoderArch{std::vector<int>(n)}, EncoderArch{std::vector<int>(n)}};
            for (std::size_t i = 0; i < n; ++i) {
                p.first.k[i] = static_cast<int>(rng.uniform_int(cfg_.low, cfg_.high));
                p.second.k[i] = static_cast<int>(rng.uniform_int(cfg_.low2, cfg_.high2));
            }
            if (accepts(p)) return p;
        }
        throw Error("architecture rejection sampling exceeded " + std::to_string(kMaxRejectionAttempts) +
                    " attempts");
    }

    /// Constraint check for the per-draw and fixed-lattice modes.
    bool accepts(const ArchPair& p) const {
        const auto& st = cfg_.strategies;
        const auto& a = p.first.k;
        const auto& b = p.second.k;
        const bool sums_differ = p.first.depth() != p.second.depth();
        bool all_differ = true;
        bool prefix_equal = true;
        for (std::size_t i = 0; i < a.size(); ++i) {
            if (a[i] == b[i]) all_differ = false;
            if (i + 1 < a.size() && a[i] != b[i]) prefix_equal = false;
        }
        if (st.asymmetric && !sums_differ) return false;
        if (st.shuffling && !all_differ) return false;
        if (st.shuffling && !st.asymmetric && sums_differ) return false;
        if (st.asymmetric && !st.shuffling && !st.random && !prefix_equal) return false;
        return true;
    }

    /// Every (k, k') on the bounds lattice that a per-draw mode can return, in
    /// lexicographic order. Empty for modes that are not lattice-based.
    const std::vector<ArchPair>& satisfying_set() const { return satisfying_; }

    std::vector<ArchPair> enumerate_satisfying() const {
        std::vector<ArchPair> out;
        for_each_lattice_pair([&](const ArchPair& p) {
            if (accepts(p)) out.push_back(p);
            return true;
        });
        return out;
    }

private:
    static constexpr std::uint64_t kMaxLattice = 50'000'000;

    ConfigError unsatisfiable() const {
        return ConfigError("unsatisfiable architecture constraints for strategies " + cfg_.strategies.label() +
                           " with k_range [" + std::to_string(cfg_.low) + "," + std::to_string(cfg_.high) +
                           "], k2_range [" + std::to_string(cfg_.low2) + "," + std::to_string(cfg_.high2) +
                           "], n_transforms " + std::to_string(cfg_.n_transforms));
    }

    // Visits the lattice in lexicographic order of (k, k'); stops when fn returns false.
    template <class Fn>
    void for_each_lattice_pair(Fn&& fn) const {
        const auto n = cfg_.n_transforms;
        const std::uint64_t w1 = static_cast<std::uint64_t>(cfg_.high - cfg_.low + 1);
        const std::uint64_t w2 = static_cast<std::uint64_t>(cfg_.high2 - cfg_.low2 + 1);
        std::uint64_t total = 1;
        for (std::size_t i = 0; i < n; ++i) {
            total *= w1 * w2;
            if (total > kMaxLattice) throw ConfigError("architecture lattice too large to verify constraints");
        }
        std::vector<int> digits(2 * n, 0);
        ArchPair p{EncoderArch{std::vector<int>(n)}, EncoderArch{std::vector<int>(n)}};
        for (std::uint64_t idx = 0; idx < total; ++idx) {
            for (std::size_t i = 0; i < n; ++i) {
                p.first.k[i] = cfg_.low + digits[i];
                p.second.k[i] = cfg_.low2 + digits[n + i];
            }
            if (!fn(p)) return;
            for (std::size_t d = 2 * n; d-- > 0;) {
                const int width = static_cast<int>(d < n ? w1 : w2);
                if (++digits[d] < width) break;
                digits[d] = 0;
            }
        }
    }

    ArchPair smallest_lattice_pair() const {
        std::optional<ArchPair> found;
        for_each_lattice_pair([&](const ArchPair& p) {
            if (!accepts(p)) return true;
            found = p;
            return false;
        });
        if (!found) throw unsatisfiable();
        return *found;
    }

    // Shuffling alone: both views have depth fixed_k * N, split differently.
    ArchPair smallest_composition_pair() const {
        const auto n = cfg_.n_transforms;
        const int total = cfg_.fixed_k * static_cast<int>(n);
        std::vector<EncoderArch> comps;
        std::vector<int> cur(n, 0);
        auto rec = [&](auto&& self, std::size_t i, int remaining) -> void {
            if (i + 1 == n) {
                cur[i] = remaining;
                comps.push_back(EncoderArch{cur});
                return;
            }
            for (int v = 0; v <= remaining; ++v) {
                cur[i] = v;
                self(self, i + 1, remaining - v);
            }
        };
        rec(rec, 0, total);
        for (const auto& a : comps)
            for (const auto& b : comps) {
                bool all_differ = true;
                for (std::size_t i = 0; i < n; ++i) all_differ = all_differ && a.k[i] != b.k[i];
                if (all_differ) return {a, b};
            }
        throw unsatisfiable();
    }

    ArchSamplerConfig cfg_;
    std::optional<ArchPair> fixed_;
    std::vector<ArchPair> satisfying_;
};

} // namespace magcl
