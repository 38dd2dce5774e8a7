#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>

#include "support.hpp"

using namespace magcl;
using magcl::test::random_graph;
using magcl::test::random_matrix;

namespace {

GraphFilter path2() {
    std::vector<Edge> e{{0, 1}};
    return build_filter(SparseGraph::from_edges(2, e, true), 0.5);
}

SparseGraph complete_graph(std::size_t n) {
    std::vector<Edge> e;
    for (std::size_t u = 0; u < n; ++u)
        for (std::size_t v = u + 1; v < n; ++v) e.emplace_back(static_cast<NodeId>(u), static_cast<NodeId>(v));
    return SparseGraph::from_edges(n, e, true);
}

// The oracle subset and the closed-form selection agree when their score
// multisets match, which allows exchanging indices with equal scores.
bool same_up_to_ties(const SelectionResult& sel, const OracleResult& orc, const Eigen::VectorXd& lam, int l1, int l2,
                     double tol) {
    std::vector<double> a = sel.scores, b;
    for (auto k : orc.subset) b.push_back(depth_gap_score(lam(static_cast<Eigen::Index>(k)), l1, l2));
    std::sort(a.begin(), a.end());
    std::sort(b.begin(), b.end());
    for (std::size_t i = 0; i < a.size(); ++i)
        if (std::abs(a[i] - b[i]) > tol) return false;
    return true;
}

} // namespace

TEST(EigSym, TwoNodePath) {
    auto s = eig_sym(path2());
    EXPECT_NEAR(s.eigenvalues(0), 1.0, 1e-14);
    EXPECT_NEAR(s.eigenvalues(1), 0.5, 1e-14);
    const double r = 1 / std::sqrt(2.0);
    EXPECT_NEAR(std::abs(s.eigenvectors(0, 0)), r, 1e-14);
    EXPECT_NEAR(s.eigenvectors(0, 0), s.eigenvectors(1, 0), 1e-14);
}

TEST(EigSym, TopEigenpairAndInvariants) {
    Rng rng(1);
    for (int trial = 0; trial < 10; ++trial) {
        auto g = random_graph(static_cast<std::size_t>(rng.uniform_int(2, 40)), 0.2, rng);
        auto f = build_filter(g);
        auto s = eig_sym(f);
        const auto n = static_cast<Eigen::Index>(g.num_nodes());
        EXPECT_NEAR(s.eigenvalues(0), 1.0, 1e-8);
        for (Eigen::Index k = 1; k < n; ++k) EXPECT_LE(s.eigenvalues(k), s.eigenvalues(k - 1));
        MatrixD dense = f.to_dense();
        EXPECT_LT((s.eigenvectors.transpose() * s.eigenvectors - Eigen::MatrixXd::Identity(n, n)).cwiseAbs().maxCoeff(),
                  1e-8);
        EXPECT_LT((s.eigenvectors * s.eigenvalues.asDiagonal() * s.eigenvectors.transpose() - dense)
                      .cwiseAbs()
                      .maxCoeff(),
                  1e-8);
        for (Eigen::Index k = 0; k < n; ++k)
            EXPECT_LE((dense * s.eigenvectors.col(k) - s.eigenvalues(k) * s.eigenvectors.col(k)).norm(),
                      1e-8 * dense.norm());
        // Top eigenvector of a connected graph is proportional to D^{1/2} 1; on
        // any graph, D^{1/2} 1 is an eigenvector for eigenvalue 1.
        Eigen::VectorXd v(n);
        for (Eigen::Index i = 0; i < n; ++i) v(i) = std::sqrt(static_cast<double>(g.degree(i) + 1));
        EXPECT_LT((dense * v - v).norm(), 1e-10 * v.norm());
    }
}

TEST(EigSym, PiSweepBand) {
    Rng rng(2);
    auto g = random_graph(12, 0.4, rng);
    for (double pi = 0.05; pi < 1.0; pi += 0.1) {
        auto s = eig_sym(build_filter(g, pi));
        EXPECT_LE(s.eigenvalues.maxCoeff(), 1.0 + 1e-12);
        EXPECT_GT(s.eigenvalues.minCoeff(), 1.0 - 2.0 * pi - 1e-12);
    }
}

TEST(Select, HandExample) {
    Eigen::VectorXd lam(4);
    lam << 1.0, 0.9, 0.5, 0.1;
    auto r = depth_gap_select(lam, 2, 4, 2);
    EXPECT_EQ(r.indices, (std::vector<std::size_t>{0, 3}));
    EXPECT_EQ(r.scores[0], 0.0);
    EXPECT_NEAR(r.scores[1], std::pow(0.01 - 0.0001, 2), 1e-18);
    EXPECT_NEAR(r.scores[1], 9.8e-5, 1e-6);
}

TEST(Select, TiesPreferLowerIndex) {
    Eigen::VectorXd lam = Eigen::VectorXd::Constant(6, 0.7);
    auto r = depth_gap_select(lam, 1, 3, 3);
    EXPECT_EQ(r.indices, (std::vector<std::size_t>{0, 1, 2}));
}

TEST(Select, UnitEigenvalueAlwaysFirst) {
    Eigen::VectorXd lam(5);
    lam << 1.0, 0.99, 0.3, 0.01, -0.2;
    for (auto [a, b] : {std::pair{1, 2}, {1, 5}, {2, 7}, {3, 4}}) {
        auto r = depth_gap_select(lam, a, b, 1);
        EXPECT_EQ(r.indices, std::vector<std::size_t>{0});
        EXPECT_EQ(r.scores[0], 0.0);
    }
}

TEST(Select, Errors) {
    Eigen::VectorXd lam = Eigen::VectorXd::Ones(3);
    EXPECT_THROW(depth_gap_select(lam, 2, 2, 1), ConfigError);
    EXPECT_THROW(depth_gap_select(lam, 1, 2, 4), ConfigError);
}

TEST(Oracle, AgreesWithClosedForm) {
    Rng rng(3);
    int compared = 0;
    for (int trial = 0; trial < 50; ++trial) {
        const auto n = static_cast<std::size_t>(rng.uniform_int(4, 10));
        auto f = build_filter(random_graph(n, 0.4, rng));
        auto spec = eig_sym(f);
        for (auto [l1, l2] : {std::pair{1, 2}, {1, 3}, {2, 4}}) {
            for (std::size_t d = 1; d <= 3; ++d) {
                auto sel = depth_gap_select(spec.eigenvalues, l1, l2, d);
                auto orc = depth_gap_bruteforce_oracle(f, l1, l2, d);
                double closed = 0;
                for (double s : sel.scores) closed += s;
                EXPECT_NEAR(orc.objective, closed, 1e-10);
                EXPECT_TRUE(same_up_to_ties(sel, orc, spec.eigenvalues, l1, l2, 1e-10));
                ++compared;
            }
        }
    }
    EXPECT_EQ(compared, 450);
}

TEST(Oracle, FullSubsetIsFullTrace) {
    Rng rng(4);
    auto f = build_filter(random_graph(7, 0.4, rng));
    auto spec = eig_sym(f);
    double full = 0;
    for (Eigen::Index k = 0; k < 7; ++k) full += depth_gap_score(spec.eigenvalues(k), 1, 3);
    auto orc = depth_gap_bruteforce_oracle(f, 1, 3, 7);
    EXPECT_NEAR(orc.objective, full, 1e-12);
    EXPECT_EQ(orc.subset.size(), 7u);
}

TEST(Oracle, IdentityFilterZeroObjective) {
    auto f = build_filter(SparseGraph::from_edges(5, {}, true));
    auto orc = depth_gap_bruteforce_oracle(f, 1, 2, 3);
    EXPECT_EQ(orc.objective, 0.0);
    EXPECT_EQ(orc.subset, (std::vector<std::size_t>{0, 1, 2}));
}

TEST(Oracle, TooLarge) {
    Rng rng(5);
    EXPECT_THROW(depth_gap_bruteforce_oracle(build_filter(random_graph(13, 0.3, rng)), 1, 2, 1), ConfigError);
}

TEST(Perturbation, HandValues) {
    auto p = perturbation_sensitivity(0.5, 2, 0.01);
    EXPECT_NEAR(p.exact, 0.0101, 1e-15);
    EXPECT_NEAR(p.first_order, 0.0100, 1e-15);
    auto z = perturbation_sensitivity(0.3, 4, 0.0);
    EXPECT_EQ(z.exact, 0.0);
    EXPECT_EQ(z.first_order, 0.0);
}

TEST(Perturbation, UnitEigenvalueBinomial) {
    for (int l = 1; l <= 10; ++l) {
        auto p = perturbation_sensitivity(1.0, l, 1e-3);
        EXPECT_NEAR(p.first_order, l * 1e-3, 1e-15);
        // Second-order remainder C(L,2) eps^2 bounds the gap up to higher terms.
        EXPECT_LE(std::abs(p.exact - p.first_order), (l * (l - 1) / 2.0) * 1e-6 * 1.1 + 1e-15);
    }
}

TEST(Spectrum, SingleNode) {
    auto r = spectrum_report(build_filter(SparseGraph::from_edges(1, {}, true)));
    EXPECT_EQ(r.num_nodes, 1u);
    EXPECT_DOUBLE_EQ(r.lambda_1, 1.0);
    EXPECT_DOUBLE_EQ(r.lambda_min, 1.0);
    EXPECT_FALSE(r.lambda_100.has_value());
}

TEST(Spectrum, CompleteGraphClosedForm) {
    // K_n with self-loops: A = J, D = nI, so F = (1-pi) I + (pi/n) J with
    // eigenvalues 1 (once) and 1 - pi (n - 1 times).
    for (std::size_t n : {3u, 6u, 10u}) {
        for (double pi : {0.2, 0.5, 0.8}) {
            auto r = spectrum_report(build_filter(complete_graph(n), pi));
            EXPECT_NEAR(r.lambda_1, 1.0, 1e-12);
            for (Eigen::Index k = 1; k < static_cast<Eigen::Index>(n); ++k) EXPECT_NEAR(r.eigenvalues(k), 1 - pi, 1e-12);
        }
    }
}

TEST(Spectrum, HistogramAndFractions) {
    Rng rng(6);
    auto f = build_filter(random_graph(150, 0.03, rng));
    auto r = spectrum_report(f, 10);
    ASSERT_TRUE(r.lambda_100.has_value());
    std::size_t total = 0;
    for (auto c : r.histogram) total += c;
    EXPECT_EQ(total, 150u);
    const double frac = static_cast<double>((r.eigenvalues.array() > 0.99).count()) / 150.0;
    EXPECT_EQ(r.fraction_above_099, frac);
    EXPECT_EQ(*r.lambda_100, r.eigenvalues(99));
}

TEST(Spectral, LinearEncoderMatchesSpectralForm) {
    // encode(F, I, (L), W) = U Lambda^L U^T W.
    Rng rng(7);
    for (int trial = 0; trial < 5; ++trial) {
        const auto n = static_cast<std::size_t>(rng.uniform_int(3, 8));
        auto f = build_filter(random_graph(n, 0.5, rng));
        auto spec = eig_sym(f);
        const auto ni = static_cast<Eigen::Index>(n);
        auto m = init_model<double>({ni, 3, 3, 1, Activation::identity}, rng);
        const int l = static_cast<int>(rng.uniform_int(1, 5));
        MatrixD z = embed(f, MatrixD(MatrixD::Identity(ni, ni)), EncoderArch{{l}}, m);
        Eigen::VectorXd pw = spec.eigenvalues.array().pow(l);
        MatrixD ref = spec.eigenvectors * pw.asDiagonal() * spec.eigenvectors.transpose() * m.encoder.w[0].value;
        EXPECT_LT((z - ref).cwiseAbs().maxCoeff(), 1e-8);
    }
}
