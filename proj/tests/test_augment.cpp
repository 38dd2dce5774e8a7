#include <gtest/gtest.h>

#include <boost/math/special_functions/gamma.hpp>

#include <cmath>
#include <map>
#include <set>

#include "support.hpp"

using namespace magcl;
using magcl::test::random_graph;
using magcl::test::random_matrix;

namespace {

SparseGraph path_graph(std::size_t edges) {
    std::vector<Edge> e;
    for (std::size_t i = 0; i < edges; ++i) e.emplace_back(static_cast<NodeId>(i), static_cast<NodeId>(i + 1));
    return SparseGraph::from_edges(edges + 1, e, true);
}

ArchSamplerConfig full_cfg(int lo, int hi, int lo2, int hi2) {
    ArchSamplerConfig c;
    c.n_transforms = 2;
    c.low = lo;
    c.high = hi;
    c.low2 = lo2;
    c.high2 = hi2;
    c.strategies = {true, true, true};
    return c;
}

bool sums_differ(const ArchPair& p) { return p.first.depth() != p.second.depth(); }

bool all_differ(const ArchPair& p) {
    for (std::size_t i = 0; i < p.first.size(); ++i)
        if (p.first.k[i] == p.second.k[i]) return false;
    return true;
}

// Upper tail of the chi-square distribution with `dof` degrees of freedom.
double chi2_pvalue(double stat, double dof) { return boost::math::gamma_q(dof / 2.0, stat / 2.0); }

} // namespace

TEST(Rng, ReproducibleAndCounterBased) {
    Rng a(42), b(42);
    for (int i = 0; i < 100; ++i) ASSERT_EQ(a.next(), b.next());
    // n-th output is mix(key + n * golden gamma).
    Rng c(7);
    c.next();
    EXPECT_EQ(c.next(), Rng::mix(7 + 2 * 0x9E3779B97F4A7C15ULL));
}

TEST(Rng, SubstreamsIndependentOfParentPosition) {
    Rng a(1);
    const auto s1 = a.substream("gda.view1").next();
    a.next();
    a.next();
    Rng s2 = a.substream("gda.view1");
    EXPECT_EQ(s1, s2.next());
    EXPECT_NE(a.substream("gda.view1").key(), a.substream("gda.view2").key());
    EXPECT_NE(a.substream(std::uint64_t{0}).key(), a.substream(std::uint64_t{1}).key());
}

TEST(Rng, UniformIntRangeAndMean) {
    Rng r(3);
    std::map<std::int64_t, int> counts;
    for (int i = 0; i < 60000; ++i) ++counts[r.uniform_int(-2, 3)];
    ASSERT_EQ(counts.size(), 6u);
    EXPECT_EQ(counts.begin()->first, -2);
    EXPECT_EQ(counts.rbegin()->first, 3);
    double stat = 0;
    for (auto [k, c] : counts) stat += (c - 10000.0) * (c - 10000.0) / 10000.0;
    EXPECT_GT(chi2_pvalue(stat, 5), 0.001);
}

TEST(Rng, UniformInUnitInterval) {
    Rng r(9);
    double s = 0;
    for (int i = 0; i < 100000; ++i) {
        const double u = r.uniform();
        ASSERT_GE(u, 0.0);
        ASSERT_LT(u, 1.0);
        s += u;
    }
    EXPECT_NEAR(s / 100000, 0.5, 5 * std::sqrt(1.0 / 12 / 100000));
}

TEST(Rng, ShuffleIsPermutation) {
    Rng r(5);
    std::vector<int> v(50);
    std::iota(v.begin(), v.end(), 0);
    auto w = v;
    r.shuffle(w);
    EXPECT_NE(v, w);
    std::sort(w.begin(), w.end());
    EXPECT_EQ(v, w);
}

TEST(DropEdges, ZeroRateIsIdentity) {
    Rng rng(1);
    auto g = random_graph(30, 0.2, rng);
    EXPECT_EQ(drop_edges(g, 0.0, rng), g);
}

TEST(DropEdges, BinomialCount) {
    auto g = path_graph(10000);
    Rng rng(77);
    auto d = drop_edges(g, 0.5, rng);
    const double kept = static_cast<double>(d.undirected_edges().size());
    const double mean = 5000, sd = std::sqrt(10000 * 0.25);
    EXPECT_LT(std::abs(kept - mean), 3 * sd) << kept;
}

TEST(DropEdges, SymmetricLoopFreeSubset) {
    Rng rng(8);
    auto g = random_graph(60, 0.2, rng);
    for (int i = 0; i < 10; ++i) {
        auto d = drop_edges(g, 0.4, rng);
        EXPECT_TRUE(d.is_symmetric());
        EXPECT_FALSE(d.has_self_loops());
        for (const auto& [u, v] : d.undirected_edges()) EXPECT_TRUE(g.has_edge(u, v));
    }
}

TEST(DropEdges, DeterministicUnderSeed) {
    auto g = path_graph(1);
    std::vector<std::size_t> a, b;
    for (int trial = 0; trial < 2; ++trial) {
        Rng rng(123);
        auto& out = trial == 0 ? a : b;
        for (int i = 0; i < 50; ++i) out.push_back(drop_edges(g, 0.99, rng).num_entries());
    }
    EXPECT_EQ(a, b);
}

TEST(DropEdges, RateOneRejected) {
    Rng rng(1);
    EXPECT_THROW(drop_edges(path_graph(3), 1.0, rng), ConfigError);
}

TEST(MaskFeatures, ZeroRateIsIdentity) {
    Rng rng(2);
    MatrixD x = random_matrix(5, 7, rng);
    EXPECT_EQ(mask_features(x, 0.0, rng), x);
}

TEST(MaskFeatures, BinomialColumnCountAndConsistentColumns) {
    Rng rng(3);
    MatrixD x = random_matrix(4, 1000, rng, 0.5, 1.0);
    MatrixD m = mask_features(x, 0.3, rng);
    int masked = 0;
    for (Eigen::Index j = 0; j < 1000; ++j) {
        const bool zero = m.col(j).isZero(0);
        if (zero) ++masked;
        else EXPECT_EQ(m.col(j), x.col(j));
    }
    const double sd = std::sqrt(1000 * 0.3 * 0.7);
    EXPECT_LT(std::abs(masked - 300.0), 3 * sd) << masked;
}

TEST(MaskFeatures, AllColumnsMaskedAccepted) {
    Rng rng(4);
    MatrixD x = MatrixD::Ones(3, 2);
    bool saw_zero = false;
    for (int i = 0; i < 200 && !saw_zero; ++i) saw_zero = mask_features(x, 0.999, rng).isZero(0);
    EXPECT_TRUE(saw_zero);
}

TEST(FixedEvalArch, Examples) {
    EXPECT_EQ(fixed_eval_arch(2, 2).k, (std::vector<int>{2, 2}));
    EXPECT_EQ(fixed_eval_arch(2, 2).depth(), 4);
    EXPECT_EQ(fixed_eval_arch(2, 1).k, (std::vector<int>{1, 1}));
    EXPECT_EQ(fixed_eval_arch(1, 1).k, (std::vector<int>{1}));
}

TEST(ArchSampler, ConstraintExamples) {
    ArchSampler s(full_cfg(0, 2, 0, 2));
    EXPECT_TRUE(s.accepts({EncoderArch{{1, 2}}, EncoderArch{{0, 1}}}));
    EXPECT_FALSE(s.accepts({EncoderArch{{1, 1}}, EncoderArch{{2, 0}}}));
    EXPECT_FALSE(s.accepts({EncoderArch{{1, 2}}, EncoderArch{{1, 0}}}));
}

TEST(ArchSampler, BaseModelIsFixed) {
    ArchSamplerConfig c = full_cfg(0, 4, 1, 4);
    c.strategies = {};
    c.fixed_k = 2;
    ArchSampler s(c);
    Rng rng(1);
    EXPECT_TRUE(s.is_fixed());
    auto p = s.sample(rng);
    EXPECT_EQ(p.first.k, (std::vector<int>{2, 2}));
    EXPECT_EQ(p.first, p.second);
}

TEST(ArchSampler, AsymmetricOnlyForcesPrefixEquality) {
    ArchSamplerConfig c = full_cfg(0, 4, 1, 4);
    c.strategies = {true, false, false};
    ArchSampler s(c);
    ASSERT_TRUE(s.is_fixed());
    Rng rng(1);
    auto p = s.sample(rng);
    EXPECT_EQ(p.first.k[0], p.second.k[0]);
    EXPECT_NE(p.first.depth(), p.second.depth());
    // Smallest lattice pair: k = (1, 0), k' = (1, 1).
    EXPECT_EQ(p.first.k, (std::vector<int>{1, 0}));
    EXPECT_EQ(p.second.k, (std::vector<int>{1, 1}));
}

TEST(ArchSampler, RandomOnlySharesEqualArch) {
    ArchSamplerConfig c = full_cfg(0, 4, 1, 4);
    c.strategies = {false, true, false};
    ArchSampler s(c);
    Rng rng(2);
    std::set<int> seen;
    for (int i = 0; i < 500; ++i) {
        auto p = s.sample(rng);
        EXPECT_EQ(p.first, p.second);
        EXPECT_EQ(p.first.k[0], p.first.k[1]);
        seen.insert(p.first.k[0]);
    }
    EXPECT_EQ(seen, (std::set<int>{0, 1, 2, 3, 4}));
}

TEST(ArchSampler, ShufflingOnlyKeepsDepth) {
    ArchSamplerConfig c = full_cfg(0, 4, 1, 4);
    c.strategies = {false, false, true};
    c.fixed_k = 2;
    ArchSampler s(c);
    ASSERT_TRUE(s.is_fixed());
    Rng rng(1);
    auto p = s.sample(rng);
    EXPECT_EQ(p.first.depth(), 4);
    EXPECT_EQ(p.second.depth(), 4);
    EXPECT_TRUE(all_differ(p));
}

TEST(ArchSampler, PerModeConstraintsHold) {
    Rng rng(11);
    for (int mask = 0; mask < 8; ++mask) {
        ArchSamplerConfig c = full_cfg(0, 3, 0, 3);
        c.strategies = {bool(mask & 1), bool(mask & 2), bool(mask & 4)};
        c.fixed_k = 1;
        ArchSampler s(c);
        for (int i = 0; i < 300; ++i) {
            auto p = s.sample(rng);
            const auto& st = c.strategies;
            if (st.asymmetric) EXPECT_TRUE(sums_differ(p)) << st.label();
            if (st.shuffling) EXPECT_TRUE(all_differ(p)) << st.label();
            if (!st.asymmetric) EXPECT_FALSE(sums_differ(p)) << st.label();
            if (!st.shuffling && !(st.asymmetric && st.random)) EXPECT_EQ(p.first.k[0], p.second.k[0]) << st.label();
        }
    }
}

TEST(ArchSampler, FullModeUniformOverSatisfyingSet) {
    ArchSampler s(full_cfg(0, 2, 0, 2));
    // Oracle: enumerate the lattice directly.
    std::set<std::vector<int>> expect;
    for (int a = 0; a <= 2; ++a)
        for (int b = 0; b <= 2; ++b)
            for (int c = 0; c <= 2; ++c)
                for (int d = 0; d <= 2; ++d)
                    if (a + b != c + d && a != c && b != d) expect.insert({a, b, c, d});
    ASSERT_EQ(s.satisfying_set().size(), expect.size());

    Rng rng(2718);
    std::map<std::vector<int>, int> counts;
    const int draws = 10000;
    for (int i = 0; i < draws; ++i) {
        auto p = s.sample(rng);
        ASSERT_TRUE(sums_differ(p));
        ASSERT_TRUE(all_differ(p));
        ++counts[{p.first.k[0], p.first.k[1], p.second.k[0], p.second.k[1]}];
    }
    for (const auto& [key, c] : counts) EXPECT_TRUE(expect.count(key));
    const double e = static_cast<double>(draws) / static_cast<double>(expect.size());
    double stat = 0;
    for (const auto& key : expect) {
        const double c = counts.count(key) ? counts[key] : 0;
        stat += (c - e) * (c - e) / e;
    }
    EXPECT_GT(chi2_pvalue(stat, static_cast<double>(expect.size() - 1)), 0.01) << stat;
}

TEST(ArchSampler, UnsatisfiableIsConfigError) {
    auto c = full_cfg(2, 2, 2, 2);
    try {
        ArchSampler s(c);
        FAIL() << "expected ConfigError";
    } catch (const ConfigError& e) {
        EXPECT_NE(std::string(e.what()).find("unsatisfiable architecture constraints"), std::string::npos);
    }
    c.strategies = {true, false, false};
    EXPECT_THROW(ArchSampler{c}, ConfigError);
    c.strategies = {false, false, true};
    c.fixed_k = 0;
    EXPECT_THROW(ArchSampler{c}, ConfigError);
}

TEST(ArchSampler, BadBoundsRejected) {
    EXPECT_THROW(ArchSampler{full_cfg(3, 1, 0, 2)}, ConfigError);
    EXPECT_THROW(ArchSampler{full_cfg(-1, 1, 0, 2)}, ConfigError);
}

TEST(ArchSampler, StreamReproducible) {
    ArchSampler s(full_cfg(0, 4, 1, 4));
    Rng a(99), b(99);
    for (int i = 0; i < 200; ++i) ASSERT_EQ(s.sample(a), s.sample(b));
}

TEST(Strategies, Labels) {
    EXPECT_EQ(Strategies{}.label(), "Base");
    EXPECT_EQ((Strategies{true, false, true}).label(), "A+S");
    EXPECT_EQ((Strategies{true, true, true}).label(), "A+R+S");
}
