#pragma once

#include <cmath>
#include <memory>
#include <string>
#include <utility>
#include <vector>

#include "magcl/augment.hpp"
#include "magcl/binary_io.hpp"
#include "magcl/error.hpp"
#include "magcl/graph.hpp"
#include "magcl/loss.hpp"
#include "magcl/matrix.hpp"
#include "magcl/rng.hpp"
#include "magcl/tensor.hpp"

namespace magcl {

enum class Activation { identity, relu, prelu };

inline constexpr double kPreluInitSlope = 0.25;
/// Initial slope used when a config asks for RReLU (mapped onto PReLU).
inline constexpr double kRreluSubstituteSlope = 0.125;

/// Glorot-uniform matrix, bound sqrt(6 / (fan_in + fan_out)), filled row-major from `rng`.
template <class T>
Matrix<T> glorot_uniform(Eigen::Index fan_in, Eigen::Index fan_out, Rng& rng) {
    const double bound = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
    Matrix<T> w(fan_in, fan_out);
    for (Eigen::Index i = 0; i < fan_in; ++i)
        for (Eigen::Index j = 0; j < fan_out; ++j) w(i, j) = static_cast<T>(rng.uniform(-bound, bound));
    return w;
}

/// The N transformation operators h_i(Z) = act(Z W_i). No bias terms. Shared by both views.
template <class T>
struct EncoderParams {
    std::vector<Parameter<T>> w;
    Activation activation = Activation::relu;
    std::vector<Parameter<T>> slopes; // one 1x1 slope per block when activation == prelu

    std::size_t n_transforms() const { return w.size(); }
    Eigen::Index output_dim() const { return w.back().value.cols(); }
};

/// proj(z) = normalize_rows(relu(z P1) P2).
template <class T>
struct ProjectorParams {
    Parameter<T> p1;
    Parameter<T> p2;
};

template <class T>
struct ModelParams {
    EncoderParams<T> encoder;
    ProjectorParams<T> projector;

    /// Stable order: encoder weights, PReLU slopes, projector P1, P2.
    std::vector<Parameter<T>*> all() {
        std::vector<Parameter<T>*> out;
        for (auto& p : encoder.w) out.push_back(&p);
        for (auto& p : encoder.slopes) out.push_back(&p);
        out.push_back(&projector.p1);
        out.push_back(&projector.p2);
        return out;
    }
    std::vector<const Parameter<T>*> all() const {
        std::vector<const Parameter<T>*> out;
        for (auto* p : const_cast<ModelParams*>(this)->all()) out.push_back(p);
        return out;
    }

    template <class U>
    ModelParams<U> cast() const {
        ModelParams<U> m;
        m.encoder.activation = encoder.activation;
        for (const auto& p : encoder.w) m.encoder.w.push_back({p.name, p.value.template cast<U>()});
        for (const auto& p : encoder.slopes) m.encoder.slopes.push_back({p.name, p.value.template cast<U>()});
        m.projector.p1 = {projector.p1.name, projector.p1.value.template cast<U>()};
        m.projector.p2 = {projector.p2.name, projector.p2.value.template cast<U>()};
        return m;
    }
};

struct ModelShape {
    Eigen::Index input_dim = 0;
    Eigen::Index hidden = 0;
    Eigen::Index proj = 0;
    std::size_t n_transforms = 2;
    Activation activation = Activation::relu;
    double prelu_init = kPreluInitSlope;
};

template <class T>
ModelParams<T> init_model(const ModelShape& s, Rng& rng) {
    if (s.n_transforms < 1) throw ConfigError("n_transforms must be >= 1");
    if (s.input_dim < 1 || s.hidden < 1 || s.proj < 1) throw ConfigError("model dimensions must be positive");
    ModelParams<T> m;
    m.encoder.activation = s.activation;
    Eigen::Index in = s.input_dim;
    for (std::size_t i = 0; i < s.n_transforms; ++i) {
        m.encoder.w.push_back({"encoder.w" + std::to_string(i), glorot_uniform<T>(in, s.hidden, rng)});
        in = s.hidden;
    }
    if (s.activation == Activation::prelu)
        for (std::size_t i = 0; i < s.n_transforms; ++i)
            m.encoder.slopes.push_back(
                {"encoder.slope" + std::to_string(i), Matrix<T>::Constant(1, 1, static_cast<T>(s.prelu_init))});
    m.projector.p1 = {"projector.p1", glorot_uniform<T>(s.hidden, s.proj, rng)};
    m.projector.p2 = {"projector.p2", glorot_uniform<T>(s.proj, s.proj, rng)};
    return m;
}

/// Parameters registered once on a tape, so both view encoders read the same leaves.
template <class T>
struct BoundModel {
    std::vector<Tensor<T>> w;
    std::vector<Tensor<T>> slopes;
    Tensor<T> p1, p2;
    Activation activation = Activation::relu;

    static BoundModel bind(Tape<T>& tape, const ModelParams<T>& m) {
        BoundModel b;
        b.activation = m.encoder.activation;
        for (const auto& p : m.encoder.w) b.w.push_back(tape.parameter(p));
        for (const auto& p : m.encoder.slopes) b.slopes.push_back(tape.parameter(p));
        b.p1 = tape.parameter(m.projector.p1);
        b.p2 = tape.parameter(m.projector.p2);
        return b;
    }

    /// Binds as constants: forward only, nothing differentiated.
    static BoundModel bind_frozen(Tape<T>& tape, const ModelParams<T>& m) {
        BoundModel b;
        b.activation = m.encoder.activation;
        for (const auto& p : m.encoder.w) b.w.push_back(tape.constant(p.value));
        for (const auto& p : m.encoder.slopes) b.slopes.push_back(tape.constant(p.value));
        b.p1 = tape.constant(m.projector.p1.value);
        b.p2 = tape.constant(m.projector.p2.value);
        return b;
    }
};

/// f(X) = h_N o g^[K_N] o ... o h_1 o g^[K_1] (X): K_i propagation steps, then
/// act(Z W_i), for each block in order.
template <class T>
Tensor<T> encode(const GraphFilter& filter, const Tensor<T>& x, const EncoderArch& arch, const BoundModel<T>& m) {
    if (arch.size() != m.w.size())
        throw ShapeError("encode: architecture has " + std::to_string(arch.size()) + " blocks but encoder has " +
                         std::to_string(m.w.size()) + " weight matrices");
    Tensor<T> z = x;
    for (std::size_t i = 0; i < arch.size(); ++i) {
        if (arch.k[i] < 0) throw ConfigError("encode: negative propagation count");
        z = propagate(filter, z, arch.k[i]);
        z = matmul(z, m.w[i]);
        switch (m.activation) {
        case Activation::identity: break;
        case Activation::relu: z = relu(z); break;
        case Activation::prelu: z = prelu(z, m.slopes.at(i)); break;
        }
    }
    return z;
}

/// Rows that come out exactly zero (e.g. a node whose features were all masked
/// and that received no propagation) stay zero; an all-zero output is an error.
template <class T>
Tensor<T> project(const Tensor<T>& z, const BoundModel<T>& m) {
    return l2_normalize_rows(matmul(relu(matmul(z, m.p1)), m.p2), /*allow_zero_rows=*/true);
}

/// Evaluation embeddings: the encoder under a fixed architecture, projector dropped.
template <class T>
Matrix<T> embed(const GraphFilter& filter, const Matrix<T>& x, const EncoderArch& arch, const ModelParams<T>& params) {
    Tape<T> tape;
    auto bound = BoundModel<T>::bind_frozen(tape, params);
    return encode(filter, tape.constant(x), arch, bound).value();
}

/// The two augmented views of one training step. Filters and masked features
/// are owned by the tape, since its backward rules refer to them.
template <class T>
struct ViewPair {
    const GraphFilter* filter1 = nullptr;
    const GraphFilter* filter2 = nullptr;
    const Matrix<T>* x1 = nullptr;
    const Matrix<T>* x2 = nullptr;
    Tensor<T> h1, h2; // encoder outputs
    Tensor<T> z1, z2; // projected, unit rows
};

/// Draws GDA for each view from its own stream, rebuilds both filters, and runs
/// the shared encoder with each view's architecture followed by the projector.
template <class T>
ViewPair<T> forward_pair(const SparseGraph& graph, const Matrix<T>& features, const GdaConfig& gda,
                         const ArchPair& archs, const BoundModel<T>& model, double pi, Rng& rng_view1,
                         Rng& rng_view2, Tape<T>& tape) {
    ViewPair<T> v;
    v.filter1 = &tape.hold(std::make_shared<GraphFilter>(build_filter(drop_edges(graph, gda.edr1, rng_view1), pi)));
    v.x1 = &tape.hold(std::make_shared<Matrix<T>>(mask_features(features, gda.fdr1, rng_view1)));
    v.filter2 = &tape.hold(std::make_shared<GraphFilter>(build_filter(drop_edges(graph, gda.edr2, rng_view2), pi)));
    v.x2 = &tape.hold(std::make_shared<Matrix<T>>(mask_features(features, gda.fdr2, rng_view2)));
    v.h1 = encode(*v.filter1, tape.constant(*v.x1), archs.first, model);
    v.h2 = encode(*v.filter2, tape.constant(*v.x2), archs.second, model);
    v.z1 = project(v.h1, model);
    v.z2 = project(v.h2, model);
    return v;
}

// ---------------------------------------------------------------------------
// Checkpoints: "MAWT", u32 matrix count, then per matrix u32 rows, u32 cols and
// f32 little-endian row-major data. Order as ModelParams::all().

template <class T>
void save_checkpoint(const ModelParams<T>& params, const std::string& path) {
    auto os = io::open_out(path);
    os.write("MAWT", 4);
    const auto all = params.all();
    io::write_le<std::uint32_t>(os, static_cast<std::uint32_t>(all.size()));
    for (const auto* p : all) {
        io::write_le<std::uint32_t>(os, static_cast<std::uint32_t>(p->value.rows()));
        io::write_le<std::uint32_t>(os, static_cast<std::uint32_t>(p->value.cols()));
        for (Eigen::Index i = 0; i < p->value.rows(); ++i)
            for (Eigen::Index j = 0; j < p->value.cols(); ++j)
                io::write_le<float>(os, static_cast<float>(p->value(i, j)));
    }
    if (!os) throw Error("failed writing " + path);
}

/// Raw matrices of a checkpoint file.
inline std::vector<MatrixF> read_checkpoint(const std::string& path) {
    auto is = io::open_in(path);
    io::Reader rd(is, path);
    rd.expect_magic("MAWT");
    const auto count = rd.read_le<std::uint32_t>();
    std::vector<MatrixF> out;
    for (std::uint32_t m = 0; m < count; ++m) {
        const auto rows = rd.read_le<std::uint32_t>();
        const auto cols = rd.read_le<std::uint32_t>();
        MatrixF w(rows, cols);
        for (std::uint32_t i = 0; i < rows; ++i)
            for (std::uint32_t j = 0; j < cols; ++j) w(i, j) = rd.read_le<float>();
        out.push_back(std::move(w));
    }
    rd.expect_eof();
    return out;
}

/// Loads into a copy of `like`, which fixes the expected layout and shapes.
template <class T>
ModelParams<T> load_checkpoint(const std::string& path, const ModelParams<T>& like) {
    auto mats = read_checkpoint(path);
    ModelParams<T> out = like;
    auto slots = out.all();
    if (mats.size() != slots.size())
        throw DataError(path + ": checkpoint holds " + std::to_string(mats.size()) + " matrices, model expects " +
                        std::to_string(slots.size()));
    for (std::size_t i = 0; i < slots.size(); ++i) {
        auto& dst = slots[i]->value;
        if (mats[i].rows() != dst.rows() || mats[i].cols() != dst.cols())
            throw DataError(path + ": shape mismatch for " + slots[i]->name + ": checkpoint has " +
                            shape_str(mats[i].rows(), mats[i].cols()) + ", model expects " +
                            shape_str(dst.rows(), dst.cols()));
        dst = mats[i].template cast<T>();
    }
    return out;
}

} // namespace magcl
