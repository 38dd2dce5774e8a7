#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <string>
#include <vector>

#include "magcl/augment.hpp"
#include "magcl/encoder.hpp"
#include "magcl/loss.hpp"
#include "magcl/rng.hpp"
#include "magcl/tensor.hpp"

namespace magcl {

struct ParamCheck {
    std::string name;
    double max_abs_error = 0.0;
    /// max |analytic - numeric| / max(max |analytic|, max |numeric|, noise floor), per parameter tensor.
    double rel_error = 0.0;
};

/// The relative-error denominator is at least kGradScaleFloor and at least
/// kGradNoiseFactor * |f| * eps / step, a multiple of the rounding noise of a
/// central difference. Gradients below the floor are compared absolutely.
inline constexpr double kGradScaleFloor = 1e-6;
inline constexpr double kGradNoiseFactor = 1e5;

enum class GradCheckStatus { pass, fail, nondifferentiable };

struct GradCheckReport {
    std::vector<ParamCheck> params;
    double max_rel_error = 0.0;
    std::size_t kink_points = 0;
    GradCheckStatus status = GradCheckStatus::pass;

    bool passed() const { return status == GradCheckStatus::pass; }
    bool excluded() const { return status == GradCheckStatus::nondifferentiable; }
};

inline const char* to_string(GradCheckStatus s) {
    switch (s) {
    case GradCheckStatus::pass: return "pass";
    case GradCheckStatus::fail: return "fail";
    case GradCheckStatus::nondifferentiable: return "nondifferentiable point";
    }
    return "?";
}

/// Records a scalar loss on the given tape, reading the parameters by reference.
using ScalarFn = std::function<Tensor<double>(Tape<double>&)>;

/// Compares tape gradients with central differences (f(p + h) - f(p - h)) / 2h
/// for every entry of every parameter. If the base point puts a ReLU/PReLU
/// input exactly at 0 the check is reported as nondifferentiable instead of
/// pass/fail.
inline GradCheckReport grad_check(const ScalarFn& f, const std::vector<Parameter<double>*>& params, double step,
                                  double tol) {
    GradCheckReport report;
    Gradients<double> analytic;
    double f0 = 0.0;
    {
        Tape<double> tape;
        auto loss = f(tape);
        f0 = loss.value()(0, 0);
        report.kink_points = tape.kink_count();
        analytic = tape.backward(loss);
    }
    const double floor = std::max(
        kGradScaleFloor, kGradNoiseFactor * std::abs(f0) * std::numeric_limits<double>::epsilon() / step);
    auto eval = [&f] {
        Tape<double> tape;
        return f(tape).value()(0, 0);
    };

    for (auto* p : params) {
        const auto it = analytic.find(p->name);
        const Matrix<double> a = it != analytic.end() ? it->second : Matrix<double>::Zero(p->value.rows(), p->value.cols());
        Matrix<double> num(p->value.rows(), p->value.cols());
        for (Eigen::Index i = 0; i < p->value.rows(); ++i) {
            for (Eigen::Index j = 0; j < p->value.cols(); ++j) {
                const double saved = p->value(i, j);
                p->value(i, j) = saved + step;
                const double up = eval();
                p->value(i, j) = saved - step;
                const double down = eval();
                p->value(i, j) = saved;
                num(i, j) = (up - down) / (2.0 * step);
            }
        }
        ParamCheck pc;
        pc.name = p->name;
        pc.max_abs_error = (a - num).cwiseAbs().maxCoeff();
        const double scale = std::max({a.cwiseAbs().maxCoeff(), num.cwiseAbs().maxCoeff(), floor});
        pc.rel_error = pc.max_abs_error / scale;
        report.max_rel_error = std::max(report.max_rel_error, pc.rel_error);
        report.params.push_back(pc);
    }

    if (report.kink_points > 0)
        report.status = GradCheckStatus::nondifferentiable;
    else
        report.status = report.max_rel_error < tol ? GradCheckStatus::pass : GradCheckStatus::fail;
    return report;
}

struct ModelCheckOptions {
    std::size_t max_nodes = 8;
    Eigen::Index max_hidden = 8;
    Activation activation = Activation::relu;
    double step = 1e-6;
    double tol = 1e-4;
};

struct ModelCheckCase {
    std::size_t nodes = 0;
    Eigen::Index features = 0, hidden = 0, proj = 0;
    ArchPair archs;
    GradCheckReport report;
    bool degenerate = false; // a projected row had zero norm
};

/// Gradient check of the full training loss (both views, shared encoder,
/// projector, InfoNCE) on a random small instance drawn from `rng`.
inline ModelCheckCase model_grad_check(const ModelCheckOptions& opt, Rng& rng) {
    ModelCheckCase c;
    c.nodes = static_cast<std::size_t>(rng.uniform_int(2, static_cast<std::int64_t>(opt.max_nodes)));
    c.features = rng.uniform_int(2, 6);
    c.hidden = rng.uniform_int(2, opt.max_hidden);
    c.proj = rng.uniform_int(2, opt.max_hidden);

    std::vector<Edge> edges;
    for (std::size_t u = 0; u < c.nodes; ++u)
        for (std::size_t v = u + 1; v < c.nodes; ++v)
            if (rng.bernoulli(0.4)) edges.emplace_back(static_cast<NodeId>(u), static_cast<NodeId>(v));
    const auto graph = SparseGraph::from_edges(c.nodes, edges, true);

    Matrix<double> x(static_cast<Eigen::Index>(c.nodes), c.features);
    for (Eigen::Index i = 0; i < x.rows(); ++i)
        for (Eigen::Index j = 0; j < x.cols(); ++j) x(i, j) = rng.uniform(-1.0, 1.0);

    ModelShape shape{c.features, c.hidden, c.proj, 2, opt.activation, kPreluInitSlope};
    auto params = init_model<double>(shape, rng);
    for (auto& s : params.encoder.slopes) s.value(0, 0) = rng.uniform(0.05, 0.5);

    c.archs = {EncoderArch{{static_cast<int>(rng.uniform_int(0, 2)), static_cast<int>(rng.uniform_int(0, 2))}},
               EncoderArch{{static_cast<int>(rng.uniform_int(0, 2)), static_cast<int>(rng.uniform_int(0, 2))}}};
    const GdaConfig gda{0.2, 0.2, 0.0, 0.0};
    const Rng view1 = rng.substream("gda.view1");
    const Rng view2 = rng.substream("gda.view2");

    ScalarFn f = [&](Tape<double>& tape) {
        Rng r1 = view1, r2 = view2;
        auto bound = BoundModel<double>::bind(tape, params);
        auto v = forward_pair(graph, x, gda, c.archs, bound, kDefaultPi, r1, r2, tape);
        // A zero projected row is a kink of the normalization.
        for (const auto* z : {&v.z1, &v.z2})
            if ((z->value().rowwise().squaredNorm().array() == 0.0).any())
                throw NumericError("model_grad_check: zero projected row");
        return info_nce(v.z1, v.z2);
    };
    try {
        c.report = grad_check(f, params.all(), opt.step, opt.tol);
    } catch (const NumericError&) {
        c.degenerate = true;
        c.report.status = GradCheckStatus::nondifferentiable;
    }
    return c;
}

} // namespace magcl
