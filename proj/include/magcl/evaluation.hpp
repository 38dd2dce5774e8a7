#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "magcl/dataset.hpp"
#include "magcl/error.hpp"
#include "magcl/matrix.hpp"
#include "magcl/rng.hpp"

namespace magcl {

// ---------------------------------------------------------------------------
// Linear probe

struct ProbeConfig {
    double lr = 0.01;
    double weight_decay = 0.0;
    int max_steps = 1000;
    int num_runs = 5;
    /// Standardize each embedding column with train-split statistics.
    bool standardize = false;
};

struct EvalReport {
    double accuracy_mean = 0.0;
    double accuracy_std = 0.0;
    std::vector<double> per_seed;
    std::optional<double> nmi;
};

inline double mean_of(const std::vector<double>& v) {
    if (v.empty()) return 0.0;
    double s = 0.0;
    for (double x : v) s += x;
    return s / static_cast<double>(v.size());
}

/// Population standard deviation.
inline double std_of(const std::vector<double>& v) {
    if (v.size() < 2) return 0.0;
    const double m = mean_of(v);
    double s = 0.0;
    for (double x : v) s += (x - m) * (x - m);
    return std::sqrt(s / static_cast<double>(v.size()));
}

inline double median_of(std::vector<double> v) {
    if (v.empty()) return 0.0;
    std::sort(v.begin(), v.end());
    const auto n = v.size();
    return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

/// 10% / 10% / rest train/val/test partition of a random permutation
/// (floor for train and val, remainder to test).
inline Splits random_split(std::size_t num_nodes, Rng& rng) {
    if (num_nodes < 10) throw ConfigError("random_split needs at least 10 nodes");
    std::vector<NodeId> perm(num_nodes);
    for (std::size_t i = 0; i < num_nodes; ++i) perm[i] = static_cast<NodeId>(i);
    rng.shuffle(perm);
    const std::size_t n_train = num_nodes / 10;
    const std::size_t n_val = num_nodes / 10;
    Splits s;
    s.train.assign(perm.begin(), perm.begin() + static_cast<std::ptrdiff_t>(n_train));
    s.val.assign(perm.begin() + static_cast<std::ptrdiff_t>(n_train),
                 perm.begin() + static_cast<std::ptrdiff_t>(n_train + n_val));
    s.test.assign(perm.begin() + static_cast<std::ptrdiff_t>(n_train + n_val), perm.end());
    return s;
}

namespace detail {

inline MatrixD gather_rows(const MatrixD& x, const std::vector<NodeId>& ids) {
    MatrixD out(static_cast<Eigen::Index>(ids.size()), x.cols());
    for (std::size_t i = 0; i < ids.size(); ++i) out.row(static_cast<Eigen::Index>(i)) = x.row(ids[i]);
    return out;
}

inline std::vector<int> gather_labels(const std::vector<int>& labels, const std::vector<NodeId>& ids,
                                      const char* split) {
    std::vector<int> out;
    out.reserve(ids.size());
    for (NodeId id : ids) {
        if (labels[id] < 0)
            throw DataError(std::string("linear_probe: node ") + std::to_string(id) + " in " + split +
                            " split has no label");
        out.push_back(labels[id]);
    }
    return out;
}

inline double accuracy(const MatrixD& logits, const std::vector<int>& y) {
    std::size_t hit = 0;
    for (Eigen::Index i = 0; i < logits.rows(); ++i) {
        Eigen::Index arg;
        logits.row(i).maxCoeff(&arg);
        if (arg == y[static_cast<std::size_t>(i)]) ++hit;
    }
    return 100.0 * static_cast<double>(hit) / static_cast<double>(y.size());
}

} // namespace detail

/// Multinomial logistic regression on frozen embeddings, trained full-batch
/// with Adam from zero initialization. The weights at the step with the best
/// validation accuracy (earliest on ties) are scored on the test split.
/// Returns test accuracy in percent.
inline double linear_probe(const MatrixD& embeddings, const std::vector<int>& labels, const Splits& splits,
                           const ProbeConfig& cfg = {}) {
    if (static_cast<std::size_t>(embeddings.rows()) != labels.size())
        throw ShapeError("linear_probe: " + std::to_string(embeddings.rows()) + " embedding rows for " +
                         std::to_string(labels.size()) + " labels");
    if (splits.train.empty() || splits.val.empty() || splits.test.empty())
        throw DataError("linear_probe: empty train, val or test split");
    validate_splits(splits, labels.size());

    MatrixD x_train = detail::gather_rows(embeddings, splits.train);
    MatrixD x_val = detail::gather_rows(embeddings, splits.val);
    MatrixD x_test = detail::gather_rows(embeddings, splits.test);
    const auto y_train = detail::gather_labels(labels, splits.train, "train");
    const auto y_val = detail::gather_labels(labels, splits.val, "val");
    const auto y_test = detail::gather_labels(labels, splits.test, "test");

    if (std::set<int>(y_train.begin(), y_train.end()).size() < 2)
        throw DataError("linear_probe: train split contains a single class");
    int num_classes = 0;
    for (int l : labels) num_classes = std::max(num_classes, l + 1);

    if (cfg.standardize) {
        const Eigen::RowVectorXd mu = x_train.colwise().mean();
        Eigen::RowVectorXd sd = ((x_train.rowwise() - mu).cwiseAbs2().colwise().mean()).cwiseSqrt();
        for (Eigen::Index j = 0; j < sd.size(); ++j)
            if (!(sd(j) > 0)) sd(j) = 1.0;
        for (MatrixD* m : {&x_train, &x_val, &x_test}) *m = (m->rowwise() - mu).array().rowwise() / sd.array();
    }

    const Eigen::Index d = embeddings.cols();
    const Eigen::Index c = num_classes;
    const auto n = static_cast<double>(y_train.size());
    MatrixD onehot = MatrixD::Zero(x_train.rows(), c);
    for (std::size_t i = 0; i < y_train.size(); ++i) onehot(static_cast<Eigen::Index>(i), y_train[i]) = 1.0;

    MatrixD w = MatrixD::Zero(d, c);
    Eigen::RowVectorXd b = Eigen::RowVectorXd::Zero(c);
    MatrixD mw = MatrixD::Zero(d, c), vw = MatrixD::Zero(d, c);
    Eigen::RowVectorXd mb = Eigen::RowVectorXd::Zero(c), vb = Eigen::RowVectorXd::Zero(c);
    constexpr double beta1 = 0.9, beta2 = 0.999, eps = 1e-8;

    double best_val = -1.0;
    double test_at_best = 0.0;
    for (int step = 1; step <= cfg.max_steps; ++step) {
        MatrixD logits = x_train * w;
        logits.rowwise() += b;
        const Eigen::VectorXd mx = logits.rowwise().maxCoeff();
        MatrixD p = (logits.colwise() - mx).array().exp().matrix();
        const Eigen::VectorXd z = p.rowwise().sum();
        p = z.cwiseInverse().asDiagonal() * p;
        const MatrixD delta = (p - onehot) / n;
        MatrixD gw = x_train.transpose() * delta + cfg.weight_decay * w;
        const Eigen::RowVectorXd gb = delta.colwise().sum();

        const double bc1 = 1.0 - std::pow(beta1, step), bc2 = 1.0 - std::pow(beta2, step);
        mw = beta1 * mw + (1 - beta1) * gw;
        vw = beta2 * vw + (1 - beta2) * gw.cwiseAbs2();
        mb = beta1 * mb + (1 - beta1) * gb;
        vb = beta2 * vb + (1 - beta2) * gb.cwiseAbs2();
        w.array() -= cfg.lr * (mw.array() / bc1) / ((vw.array() / bc2).sqrt() + eps);
        b.array() -= cfg.lr * (mb.array() / bc1) / ((vb.array() / bc2).sqrt() + eps);

        MatrixD val_logits = x_val * w;
        val_logits.rowwise() += b;
        const double val_acc = detail::accuracy(val_logits, y_val);
        if (val_acc > best_val) {
            best_val = val_acc;
            MatrixD test_logits = x_test * w;
            test_logits.rowwise() += b;
            test_at_best = detail::accuracy(test_logits, y_test);
        }
    }
    return test_at_best;
}

// ---------------------------------------------------------------------------
// Clustering

/// Normalized mutual information with arithmetic-mean normalization,
/// 2 I(U;V) / (H(U) + H(V)). Returns 0 when both entropies vanish.
inline double nmi(const std::vector<int>& a, const std::vector<int>& b) {
    if (a.size() != b.size()) throw ShapeError("nmi: label vectors differ in length");
    if (a.empty()) return 0.0;
    std::map<int, double> ca, cb;
    std::map<std::pair<int, int>, double> joint;
    for (std::size_t i = 0; i < a.size(); ++i) {
        ca[a[i]] += 1;
        cb[b[i]] += 1;
        joint[{a[i], b[i]}] += 1;
    }
    const double n = static_cast<double>(a.size());
    auto entropy = [n](const std::map<int, double>& c) {
        double h = 0.0;
        for (const auto& [_, k] : c) h -= (k / n) * std::log(k / n);
        return h;
    };
    const double ha = entropy(ca), hb = entropy(cb);
    double mi = 0.0;
    for (const auto& [key, k] : joint) mi += (k / n) * std::log(k * n / (ca[key.first] * cb[key.second]));
    const double denom = ha + hb;
    if (denom <= 0.0) return 0.0;
    return std::clamp(2.0 * mi / denom, 0.0, 1.0);
}

struct KMeansResult {
    std::vector<int> assignment;
    MatrixD centroids;
    int iterations = 0;
};

inline constexpr int kKMeansMaxIter = 300;
inline constexpr double kKMeansTol = 1e-6;

/// Lloyd's algorithm from k-means++ seeding; stops when no centroid moves more
/// than 1e-6 or after 300 iterations. An empty cluster keeps its old centroid.
inline KMeansResult kmeans(const MatrixD& x, int k, Rng& rng) {
    const Eigen::Index n = x.rows();
    if (k < 1) throw ConfigError("kmeans: k must be >= 1");
    {
        std::set<std::vector<double>> distinct;
        for (Eigen::Index i = 0; i < n && distinct.size() < static_cast<std::size_t>(k); ++i)
            distinct.insert(std::vector<double>(x.row(i).data(), x.row(i).data() + x.cols()));
        if (distinct.size() < static_cast<std::size_t>(k))
            throw ConfigError("kmeans: k = " + std::to_string(k) + " exceeds the number of distinct points");
    }

    KMeansResult r;
    r.centroids.resize(k, x.cols());
    // k-means++ seeding
    r.centroids.row(0) = x.row(rng.uniform_int(0, n - 1));
    Eigen::VectorXd d2 = (x.rowwise() - r.centroids.row(0)).rowwise().squaredNorm();
    for (int c = 1; c < k; ++c) {
        const double total = d2.sum();
        Eigen::Index pick = n - 1;
        double target = rng.uniform() * total;
        for (Eigen::Index i = 0; i < n; ++i) {
            target -= d2(i);
            if (target < 0 && d2(i) > 0) {
                pick = i;
                break;
            }
        }
        r.centroids.row(c) = x.row(pick);
        d2 = d2.cwiseMin((x.rowwise() - r.centroids.row(c)).rowwise().squaredNorm());
    }

    r.assignment.assign(static_cast<std::size_t>(n), 0);
    const Eigen::VectorXd x_sq = x.rowwise().squaredNorm();
    for (r.iterations = 1; r.iterations <= kKMeansMaxIter; ++r.iterations) {
        const Eigen::VectorXd c_sq = r.centroids.rowwise().squaredNorm();
        const MatrixD cross = x * r.centroids.transpose();
        for (Eigen::Index i = 0; i < n; ++i) {
            Eigen::Index best = 0;
            double best_d = std::numeric_limits<double>::infinity();
            for (Eigen::Index c = 0; c < k; ++c) {
                const double dist = x_sq(i) + c_sq(c) - 2.0 * cross(i, c);
                if (dist < best_d) {
                    best_d = dist;
                    best = c;
                }
            }
            r.assignment[static_cast<std::size_t>(i)] = static_cast<int>(best);
        }
        MatrixD next = MatrixD::Zero(k, x.cols());
        std::vector<Eigen::Index> count(static_cast<std::size_t>(k), 0);
        for (Eigen::Index i = 0; i < n; ++i) {
            const int a = r.assignment[static_cast<std::size_t>(i)];
            next.row(a) += x.row(i);
            ++count[static_cast<std::size_t>(a)];
        }
        double shift = 0.0;
        for (int c = 0; c < k; ++c) {
            if (count[static_cast<std::size_t>(c)] == 0)
                next.row(c) = r.centroids.row(c);
            else
                next.row(c) /= static_cast<double>(count[static_cast<std::size_t>(c)]);
            shift = std::max(shift, (next.row(c) - r.centroids.row(c)).norm());
        }
        r.centroids = std::move(next);
        if (shift < kKMeansTol) break;
    }
    r.iterations = std::min(r.iterations, kKMeansMaxIter);
    return r;
}

/// Median NMI over `runs` independently seeded k-means runs. Nodes with
/// missing labels are excluded.
inline double kmeans_nmi(const MatrixD& embeddings, const std::vector<int>& labels, int k, int runs, Rng& rng) {
    if (k < 2) throw ConfigError("kmeans_nmi: k must be >= 2");
    if (static_cast<std::size_t>(embeddings.rows()) != labels.size())
        throw ShapeError("kmeans_nmi: " + std::to_string(embeddings.rows()) + " embedding rows for " +
                         std::to_string(labels.size()) + " labels");
    std::vector<NodeId> keep;
    for (std::size_t i = 0; i < labels.size(); ++i)
        if (labels[i] >= 0) keep.push_back(static_cast<NodeId>(i));
    const MatrixD x = detail::gather_rows(embeddings, keep);
    std::vector<int> y;
    for (auto i : keep) y.push_back(labels[i]);

    std::vector<double> scores;
    for (int run = 0; run < runs; ++run) {
        Rng run_rng = rng.substream(static_cast<std::uint64_t>(run));
        scores.push_back(nmi(kmeans(x, k, run_rng).assignment, y));
    }
    return median_of(scores);
}

} // namespace magcl
