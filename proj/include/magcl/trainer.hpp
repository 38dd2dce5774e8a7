#pragma once

#include <chrono>
#include <cstdint>
#include <functional>
#include <set>
#include <string>
#include <vector>

#include "json.hpp"

#include "magcl/augment.hpp"
#include "magcl/dataset.hpp"
#include "magcl/encoder.hpp"
#include "magcl/error.hpp"
#include "magcl/loss.hpp"
#include "magcl/optim.hpp"
#include "magcl/rng.hpp"

namespace magcl {

enum class Precision { single, dbl };

/// Every hyperparameter of a training run.
struct TrainConfig {
    int epochs = 500;
    double lr = 2e-4;
    double weight_decay = 1e-6;
    double pi = kDefaultPi;
    int hidden_size = 512;
    int proj_size = 512;
    int n_transforms = 2;
    int k_low = 0, k_high = 4;   // k_range
    int k2_low = 1, k2_high = 4; // k2_range
    int fixed_k = 2;
    int eval_k = 2;
    GdaConfig gda{0.3, 0.3, 0.3, 0.3};
    Strategies strategies{true, true, true};
    Activation activation = Activation::relu;
    /// Set when the config asked for "rrelu"; trained as PReLU starting at kRreluSubstituteSlope.
    bool rrelu_requested = false;
    bool symmetric_loss = false;
    std::uint64_t seed = 0;
    Precision precision = Precision::single;

    ArchSamplerConfig sampler_config() const {
        ArchSamplerConfig s;
        s.n_transforms = static_cast<std::size_t>(n_transforms);
        s.low = k_low;
        s.high = k_high;
        s.low2 = k2_low;
        s.high2 = k2_high;
        s.strategies = strategies;
        s.fixed_k = fixed_k;
        return s;
    }

    void validate() const {
        auto positive = [](const char* name, long v) {
            if (v < 1) throw ConfigError(std::string(name) + " must be >= 1");
        };
        positive("epochs", epochs);
        positive("hidden_size", hidden_size);
        positive("proj_size", proj_size);
        positive("n_transforms", n_transforms);
        if (!(lr > 0.0)) throw ConfigError("lr must be > 0");
        if (!(weight_decay >= 0.0)) throw ConfigError("weight_decay must be >= 0");
        if (!(pi > 0.0 && pi < 1.0)) throw ConfigError("pi must lie in (0, 1)");
        if (fixed_k < 0) throw ConfigError("fixed_k must be >= 0");
        if (eval_k < 0) throw ConfigError("eval_k must be >= 0");
        gda.validate();
        ArchSampler{sampler_config()}; // satisfiability
    }
};

namespace detail {

inline Activation parse_activation(const std::string& s, bool& rrelu) {
    rrelu = false;
    if (s == "identity") return Activation::identity;
    if (s == "relu") return Activation::relu;
    if (s == "prelu") return Activation::prelu;
    if (s == "rrelu") {
        rrelu = true;
        return Activation::prelu;
    }
    throw ConfigError("activation must be one of identity, relu, prelu, rrelu; got \"" + s + "\"");
}

inline std::string activation_name(Activation a, bool rrelu) {
    if (rrelu) return "rrelu";
    switch (a) {
    case Activation::identity: return "identity";
    case Activation::relu: return "relu";
    case Activation::prelu: return "prelu";
    }
    return "relu";
}

inline void read_range(const nlohmann::json& j, const char* key, int& lo, int& hi) {
    const auto& r = j.at(key);
    if (!r.is_array() || r.size() != 2) throw ConfigError(std::string(key) + " must be a [low, high] pair");
    lo = r[0].get<int>();
    hi = r[1].get<int>();
}

} // namespace detail

/// Parses a config document. Keys are optional (defaults above) but unknown keys are rejected.
inline TrainConfig config_from_json(const nlohmann::json& j) {
    static const std::set<std::string> known = {
        "epochs", "lr", "weight_decay", "pi", "hidden_size", "proj_size", "n_transforms", "k_range", "k2_range",
        "fixed_k", "eval_k", "gda", "strategies", "activation", "symmetric_loss", "seed", "precision"};
    if (!j.is_object()) throw ConfigError("config must be a JSON object");
    for (const auto& [key, _] : j.items())
        if (!known.count(key)) throw ConfigError("unknown config key \"" + key + "\"");

    TrainConfig c;
    try {
        if (j.contains("epochs")) c.epochs = j["epochs"].get<int>();
        if (j.contains("lr")) c.lr = j["lr"].get<double>();
        if (j.contains("weight_decay")) c.weight_decay = j["weight_decay"].get<double>();
        if (j.contains("pi")) c.pi = j["pi"].get<double>();
        if (j.contains("hidden_size")) c.hidden_size = j["hidden_size"].get<int>();
        if (j.contains("proj_size")) c.proj_size = j["proj_size"].get<int>();
        if (j.contains("n_transforms")) c.n_transforms = j["n_transforms"].get<int>();
        if (j.contains("k_range")) detail::read_range(j, "k_range", c.k_low, c.k_high);
        if (j.contains("k2_range")) detail::read_range(j, "k2_range", c.k2_low, c.k2_high);
        if (j.contains("fixed_k")) c.fixed_k = j["fixed_k"].get<int>();
        if (j.contains("eval_k")) c.eval_k = j["eval_k"].get<int>();
        if (j.contains("gda")) {
            const auto& g = j["gda"];
            for (const auto& [key, _] : g.items())
                if (key != "edr1" && key != "edr2" && key != "fdr1" && key != "fdr2")
                    throw ConfigError("unknown config key \"gda." + key + "\"");
            c.gda.edr1 = g.value("edr1", c.gda.edr1);
            c.gda.edr2 = g.value("edr2", c.gda.edr2);
            c.gda.fdr1 = g.value("fdr1", c.gda.fdr1);
            c.gda.fdr2 = g.value("fdr2", c.gda.fdr2);
        }
        if (j.contains("strategies")) {
            const auto& s = j["strategies"];
            for (const auto& [key, _] : s.items())
                if (key != "asymmetric" && key != "random" && key != "shuffling")
                    throw ConfigError("unknown config key \"strategies." + key + "\"");
            c.strategies.asymmetric = s.value("asymmetric", c.strategies.asymmetric);
            c.strategies.random = s.value("random", c.strategies.random);
            c.strategies.shuffling = s.value("shuffling", c.strategies.shuffling);
        }
        if (j.contains("activation"))
            c.activation = detail::parse_activation(j["activation"].get<std::string>(), c.rrelu_requested);
        if (j.contains("symmetric_loss")) c.symmetric_loss = j["symmetric_loss"].get<bool>();
        if (j.contains("seed")) c.seed = j["seed"].get<std::uint64_t>();
        if (j.contains("precision")) {
            const auto p = j["precision"].get<std::string>();
            if (p == "single")
                c.precision = Precision::single;
            else if (p == "double")
                c.precision = Precision::dbl;
            else
                throw ConfigError("precision must be \"single\" or \"double\"");
        }
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("config: ") + e.what());
    }
    c.validate();
    return c;
}

inline nlohmann::json config_to_json(const TrainConfig& c) {
    return {
        {"epochs", c.epochs},
        {"lr", c.lr},
        {"weight_decay", c.weight_decay},
        {"pi", c.pi},
        {"hidden_size", c.hidden_size},
        {"proj_size", c.proj_size},
        {"n_transforms", c.n_transforms},
        {"k_range", {c.k_low, c.k_high}},
        {"k2_range", {c.k2_low, c.k2_high}},
        {"fixed_k", c.fixed_k},
        {"eval_k", c.eval_k},
        {"gda", {{"edr1", c.gda.edr1}, {"edr2", c.gda.edr2}, {"fdr1", c.gda.fdr1}, {"fdr2", c.gda.fdr2}}},
        {"strategies",
         {{"asymmetric", c.strategies.asymmetric},
          {"random", c.strategies.random},
          {"shuffling", c.strategies.shuffling}}},
        {"activation", detail::activation_name(c.activation, c.rrelu_requested)},
        {"symmetric_loss", c.symmetric_loss},
        {"seed", c.seed},
        {"precision", c.precision == Precision::single ? "single" : "double"},
    };
}

struct EpochLog {
    int epoch = 0;
    double loss = 0.0;
    double align = 0.0;
    int depth1 = 0; // L
    int depth2 = 0; // L'
    double seconds = 0.0;

    nlohmann::json to_json() const {
        return {{"epoch", epoch}, {"loss", loss}, {"align", align}, {"L", depth1}, {"L2", depth2}, {"seconds", seconds}};
    }
};

template <class T>
struct TrainResult {
    ModelParams<T> params;
    std::vector<EpochLog> log;
};

/// Named substreams of the run seed.
struct RunStreams {
    Rng init, gda1, gda2, sampler, probe;

    explicit RunStreams(std::uint64_t seed) {
        const Rng master(seed);
        init = master.substream("init");
        gda1 = master.substream("gda.view1");
        gda2 = master.substream("gda.view2");
        sampler = master.substream("sampler");
        probe = master.substream("probe");
    }
};

inline ModelShape model_shape(const TrainConfig& cfg, Eigen::Index input_dim) {
    ModelShape s;
    s.input_dim = input_dim;
    s.hidden = cfg.hidden_size;
    s.proj = cfg.proj_size;
    s.n_transforms = static_cast<std::size_t>(cfg.n_transforms);
    s.activation = cfg.activation;
    s.prelu_init = cfg.rrelu_requested ? kRreluSubstituteSlope : kPreluInitSlope;
    return s;
}

using EpochCallback = std::function<void(const EpochLog&)>;

namespace detail {

template <class Fn>
decltype(auto) with_epoch_context(int epoch, Fn&& fn) {
    const auto ctx = [epoch](const std::exception& e) { return "epoch " + std::to_string(epoch) + ": " + e.what(); };
    try {
        return fn();
    } catch (const NumericError& e) {
        throw NumericError(ctx(e));
    } catch (const ShapeError& e) {
        throw ShapeError(ctx(e));
    } catch (const ConfigError& e) {
        throw ConfigError(ctx(e));
    } catch (const DataError& e) {
        throw DataError(ctx(e));
    } catch (const Error& e) {
        throw Error(ctx(e));
    }
}

} // namespace detail

/// Full-batch contrastive training. Per epoch: draw both views' augmentations,
/// draw the architecture pair, encode and project both views with the shared
/// parameters, take the InfoNCE loss, backpropagate and apply one Adam step.
template <class T>
TrainResult<T> train(const Dataset& ds, const TrainConfig& cfg, const EpochCallback& on_epoch = {}) {
    cfg.validate();
    RunStreams streams(cfg.seed);
    const ArchSampler sampler(cfg.sampler_config());

    TrainResult<T> result;
    result.params = init_model<T>(model_shape(cfg, ds.features.cols()), streams.init);
    const Matrix<T> features = ds.features.template cast<T>();
    AdamState<T> adam;

    for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
        const auto t0 = std::chrono::steady_clock::now();
        EpochLog entry = detail::with_epoch_context(epoch, [&] {
            Tape<T> tape;
            const auto bound = BoundModel<T>::bind(tape, result.params);
            const ArchPair archs = sampler.sample(streams.sampler);
            auto views = forward_pair(ds.graph, features, cfg.gda, archs, bound, cfg.pi, streams.gda1, streams.gda2,
                                      tape);
            auto loss = cfg.symmetric_loss ? info_nce_symmetric(views.z1, views.z2) : info_nce(views.z1, views.z2);
            EpochLog e;
            e.epoch = epoch;
            e.loss = static_cast<double>(loss.value()(0, 0));
            e.align = alignment_metric(views.z1.value(), views.z2.value());
            e.depth1 = archs.first.depth();
            e.depth2 = archs.second.depth();
            const auto grads = tape.backward(loss);
            adam_step(result.params.all(), grads, adam, cfg.lr, cfg.weight_decay);
            return e;
        });
        entry.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        if (on_epoch) on_epoch(entry);
        result.log.push_back(entry);
    }
    return result;
}

/// Embeddings for downstream evaluation: un-augmented graph, fixed eval architecture, no projector.
template <class T>
Matrix<T> eval_embeddings(const Dataset& ds, const TrainConfig& cfg, const ModelParams<T>& params) {
    const auto filter = build_filter(ds.graph, cfg.pi);
    return embed(filter, Matrix<T>(ds.features.template cast<T>()),
                 fixed_eval_arch(static_cast<std::size_t>(cfg.n_transforms), cfg.eval_k), params);
}

} // namespace magcl
