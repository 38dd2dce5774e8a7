#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "magcl/magcl.hpp"

namespace fs = std::filesystem;
using json = nlohmann::json;
using namespace magcl;

namespace {

constexpr int kExitRuntime = 1;
constexpr int kExitConfig = 2;
constexpr int kExitData = 3;

std::string hex64(std::uint64_t v) {
    std::ostringstream os;
    os << std::hex << std::setw(16) << std::setfill('0') << v;
    return os.str();
}

TrainConfig read_config(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw ConfigError("cannot open config file " + path);
    json j;
    try {
        is >> j;
    } catch (const json::exception& e) {
        throw ConfigError(path + ": " + e.what());
    }
    try {
        return config_from_json(j);
    } catch (const ConfigError& e) {
        throw ConfigError(path + ": " + e.what());
    }
}

void write_json(const fs::path& p, const json& j) {
    std::ofstream os(p);
    if (!os) throw Error("cannot open " + p.string() + " for writing");
    os << j.dump(2) << '\n';
}

Strategies parse_strategies(const std::string& s) {
    Strategies st;
    if (s == "Base" || s == "base") return st;
    std::stringstream ss(s);
    std::string part;
    while (std::getline(ss, part, '+')) {
        if (part == "A")
            st.asymmetric = true;
        else if (part == "R")
            st.random = true;
        else if (part == "S")
            st.shuffling = true;
        else
            throw ConfigError("unknown strategy \"" + part + "\" in \"" + s + "\" (use Base or a +-joined subset of A, R, S)");
    }
    return st;
}

std::vector<Strategies> all_strategies() {
    std::vector<Strategies> out;
    for (int m = 0; m < 8; ++m) out.push_back({(m & 1) != 0, (m & 2) != 0, (m & 4) != 0});
    return out;
}

template <class T>
MatrixD train_and_embed(const Dataset& ds, const TrainConfig& cfg, const EpochCallback& cb,
                        const std::string& checkpoint) {
    auto r = train<T>(ds, cfg, cb);
    if (!checkpoint.empty()) save_checkpoint(r.params, checkpoint);
    return eval_embeddings(ds, cfg, r.params).template cast<double>();
}

MatrixD run_training(const Dataset& ds, const TrainConfig& cfg, const EpochCallback& cb = {},
                     const std::string& checkpoint = {}) {
    return cfg.precision == Precision::single ? train_and_embed<float>(ds, cfg, cb, checkpoint)
                                              : train_and_embed<double>(ds, cfg, cb, checkpoint);
}

json report_json(const EvalReport& r) {
    json j{{"accuracy_mean", r.accuracy_mean}, {"accuracy_std", r.accuracy_std}, {"per_seed", r.per_seed}};
    if (r.nmi) j["nmi"] = *r.nmi;
    return j;
}

EvalReport evaluate(const MatrixD& z, const Dataset& ds, const std::string& splits, int seeds,
                    const ProbeConfig& probe) {
    if (static_cast<std::size_t>(z.rows()) != ds.labels.size())
        throw DataError("embeddings have " + std::to_string(z.rows()) + " rows but the dataset has " +
                        std::to_string(ds.labels.size()) + " labels");
    EvalReport r;
    for (int s = 0; s < seeds; ++s) {
        Splits sp = ds.splits;
        if (splits == "random") {
            Rng rng = Rng(static_cast<std::uint64_t>(s)).substream("split");
            sp = random_split(ds.labels.size(), rng);
        }
        r.per_seed.push_back(linear_probe(z, ds.labels, sp, probe));
    }
    r.accuracy_mean = mean_of(r.per_seed);
    r.accuracy_std = std_of(r.per_seed);
    return r;
}

struct ProbeFlags {
    ProbeConfig cfg;
    void add(CLI::App* cmd) {
        cmd->add_option("--probe-lr", cfg.lr, "Probe learning rate")->capture_default_str();
        cmd->add_option("--probe-wd", cfg.weight_decay, "Probe weight decay")->capture_default_str();
        cmd->add_option("--probe-steps", cfg.max_steps, "Probe optimization steps")->capture_default_str();
        cmd->add_flag("--standardize", cfg.standardize, "Standardize embedding columns before the probe");
    }
};

// ---------------------------------------------------------------------------

struct TrainArgs {
    std::string config, data, out, format = "bin";
    std::uint64_t seed = 0;
    bool row_normalize = false;
};

int cmd_train(const TrainArgs& a, const std::vector<std::string>& seed_given) {
    TrainConfig cfg = read_config(a.config);
    if (!seed_given.empty()) cfg.seed = a.seed;
    const Dataset ds = load_dataset(a.data, {a.row_normalize});
    const fs::path out(a.out);
    fs::create_directories(out);

    json outputs{{"checkpoint", "weights.bin"}, {"embeddings", "embeddings.bin"}, {"log", "log.jsonl"}};
    if (a.format == "csv") outputs["embeddings_csv"] = "embeddings.csv";
    const json manifest{{"tool", "magcl"},
                        {"version", kVersion},
                        {"command", "train"},
                        {"config", config_to_json(cfg)},
                        {"dataset", {{"path", a.data}, {"fingerprint", hex64(dataset_fingerprint(a.data))}}},
                        {"row_normalize_features", a.row_normalize},
                        {"seeds", {cfg.seed}},
                        {"outputs", outputs}};
    write_json(out / "manifest.json", manifest);

    std::ofstream log(out / "log.jsonl");
    if (!log) throw Error("cannot open " + (out / "log.jsonl").string() + " for writing");
    auto on_epoch = [&](const EpochLog& e) {
        json j = e.to_json();
        j["manifest"] = "manifest.json";
        log << j.dump() << '\n';
    };
    const MatrixD z = run_training(ds, cfg, on_epoch, (out / "weights.bin").string());
    save_embeddings(z, (out / "embeddings.bin").string());
    if (a.format == "csv") save_embeddings_csv(z, (out / "embeddings.csv").string());
    std::cout << json{{"out", a.out}, {"embeddings", {z.rows(), z.cols()}}}.dump() << '\n';
    return 0;
}

struct EvalArgs {
    std::string embeddings, data, splits = "public";
    int seeds = 5;
    bool row_normalize = false;
};

int cmd_eval(const EvalArgs& a, const ProbeConfig& probe) {
    const Dataset ds = load_dataset(a.data, {a.row_normalize});
    const MatrixD z = load_embeddings(a.embeddings);
    std::cout << report_json(evaluate(z, ds, a.splits, a.seeds, probe)).dump(2) << '\n';
    return 0;
}

struct ClusterArgs {
    std::string embeddings, data;
    int runs = 20, k = 0;
    std::uint64_t seed = 0;
};

int cmd_cluster(const ClusterArgs& a) {
    const Dataset ds = load_dataset(a.data);
    const MatrixD z = load_embeddings(a.embeddings);
    if (static_cast<std::size_t>(z.rows()) != ds.labels.size())
        throw DataError("embeddings have " + std::to_string(z.rows()) + " rows but the dataset has " +
                        std::to_string(ds.labels.size()) + " labels");
    const int k = a.k > 0 ? a.k : ds.num_classes;
    Rng rng(a.seed);
    const double v = kmeans_nmi(z, ds.labels, k, a.runs, rng);
    std::cout << json{{"nmi", v}, {"k", k}, {"runs", a.runs}}.dump(2) << '\n';
    return 0;
}

struct SpectralArgs {
    std::string data;
    double pi = kDefaultPi;
    int l1 = 1, l2 = 2;
    std::size_t dout = 1, bins = 20;
};

int cmd_spectral(const SpectralArgs& a) {
    const Dataset ds = load_dataset(a.data);
    const auto filter = build_filter(ds.graph, a.pi);
    const auto spec = eig_sym(filter);
    const auto rep = spectrum_report(spec, a.pi, a.bins);
    const auto sel = depth_gap_select(spec.eigenvalues, a.l1, a.l2, a.dout);
    json j{{"num_nodes", rep.num_nodes},
           {"pi", rep.pi},
           {"lambda_1", rep.lambda_1},
           {"lambda_min", rep.lambda_min},
           {"fraction_above_0.99", rep.fraction_above_099},
           {"histogram", {{"lo", rep.histogram_lo}, {"hi", rep.histogram_hi}, {"counts", rep.histogram}}},
           {"selection", {{"L", a.l1}, {"L2", a.l2}, {"d_out", a.dout}, {"indices", sel.indices}, {"scores", sel.scores}}}};
    j["lambda_100"] = rep.lambda_100 ? json(*rep.lambda_100) : json(nullptr);
    if (filter.num_nodes() <= kOracleMaxNodes) {
        const auto orc = depth_gap_bruteforce_oracle(filter, a.l1, a.l2, a.dout);
        double closed = 0;
        for (double s : sel.scores) closed += s;
        j["oracle"] = {{"subset", orc.subset}, {"objective", orc.objective}, {"closed_form_objective", closed}};
    }
    std::cout << j.dump(2) << '\n';
    return 0;
}

struct GradArgs {
    std::size_t size = 8;
    int trials = 20;
    std::uint64_t seed = 0;
    double tol = 1e-4;
};

int cmd_gradcheck(const GradArgs& a) {
    if (a.size < 2) throw ConfigError("--size must be >= 2");
    if (a.trials < 1) throw ConfigError("--trials must be >= 1");
    const Activation acts[] = {Activation::identity, Activation::relu, Activation::prelu};
    const Rng master(a.seed);
    int checked = 0, excluded = 0, failed = 0;
    double worst = 0.0;
    const int max_draws = 20 * a.trials;
    for (int draw = 0; draw < max_draws && checked < a.trials; ++draw) {
        ModelCheckOptions opt;
        opt.max_nodes = a.size;
        opt.max_hidden = static_cast<Eigen::Index>(a.size);
        opt.activation = acts[draw % 3];
        opt.tol = a.tol;
        Rng rng = master.substream(static_cast<std::uint64_t>(draw));
        const auto c = model_grad_check(opt, rng);
        if (c.report.excluded()) {
            ++excluded;
            continue;
        }
        ++checked;
        worst = std::max(worst, c.report.max_rel_error);
        if (!c.report.passed()) ++failed;
    }
    const bool ok = failed == 0 && checked == a.trials;
    std::cout << json{{"trials", checked},
                      {"excluded", excluded},
                      {"failed", failed},
                      {"max_rel_error", worst},
                      {"tolerance", a.tol},
                      {"status", ok ? "pass" : "fail"}}
                     .dump(2)
              << '\n';
    return ok ? 0 : kExitRuntime;
}

struct AblateArgs {
    std::string config, data, out;
    std::vector<std::string> strategies;
    int seeds = 5;
    bool row_normalize = false;
};

int cmd_ablate(const AblateArgs& a, const ProbeConfig& probe) {
    const TrainConfig base = read_config(a.config);
    std::vector<Strategies> combos;
    if (a.strategies.empty())
        combos = all_strategies();
    else
        for (const auto& s : a.strategies) combos.push_back(parse_strategies(s));
    std::vector<std::string> unsatisfiable(combos.size());
    for (std::size_t i = 0; i < combos.size(); ++i) {
        TrainConfig c = base;
        c.strategies = combos[i];
        try {
            c.validate();
        } catch (const ConfigError& e) {
            if (std::string(e.what()).find("unsatisfiable") == std::string::npos) throw;
            unsatisfiable[i] = e.what();
        }
    }
    const Dataset ds = load_dataset(a.data, {a.row_normalize});

    json rows = json::array();
    std::printf("%-8s %10s %8s\n", "model", "acc_mean", "acc_std");
    for (std::size_t i = 0; i < combos.size(); ++i) {
        const Strategies& st = combos[i];
        if (!unsatisfiable[i].empty()) {
            std::printf("%-8s %10s %8s\n", st.label().c_str(), "n/a", "n/a");
            rows.push_back({{"strategies", st.label()}, {"error", unsatisfiable[i]}});
            continue;
        }
        EvalReport r;
        for (int s = 0; s < a.seeds; ++s) {
            TrainConfig c = base;
            c.strategies = st;
            c.seed = base.seed + static_cast<std::uint64_t>(s);
            const MatrixD z = run_training(ds, c);
            r.per_seed.push_back(linear_probe(z, ds.labels, ds.splits, probe));
        }
        r.accuracy_mean = mean_of(r.per_seed);
        r.accuracy_std = std_of(r.per_seed);
        std::printf("%-8s %10.2f %8.2f\n", st.label().c_str(), r.accuracy_mean, r.accuracy_std);
        std::fflush(stdout);
        json row = report_json(r);
        row["strategies"] = st.label();
        rows.push_back(row);
    }
    if (!a.out.empty()) {
        fs::create_directories(a.out);
        write_json(fs::path(a.out) / "ablation.json",
                   {{"tool", "magcl"},
                    {"version", kVersion},
                    {"config", config_to_json(base)},
                    {"dataset", {{"path", a.data}, {"fingerprint", hex64(dataset_fingerprint(a.data))}}},
                    {"seeds", a.seeds},
                    {"rows", rows}});
    }
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Model-augmented graph contrastive learning"};
    app.set_version_flag("--version", kVersion);
    app.require_subcommand(1);

    TrainArgs train_a;
    auto* train_cmd = app.add_subcommand("train", "Train an encoder and write checkpoint, embeddings, log and manifest");
    train_cmd->add_option("--config", train_a.config, "JSON config file")->required()->check(CLI::ExistingFile);
    train_cmd->add_option("--data", train_a.data, "Dataset directory")->required();
    train_cmd->add_option("--out", train_a.out, "Output directory")->required();
    auto* seed_opt = train_cmd->add_option("--seed", train_a.seed, "Run seed (overrides the config)");
    train_cmd->add_option("--format", train_a.format, "Also write embeddings as csv")
        ->check(CLI::IsMember({"bin", "csv"}))
        ->capture_default_str();
    train_cmd->add_flag("--row-normalize", train_a.row_normalize, "Row-normalize features on load");

    EvalArgs eval_a;
    ProbeFlags eval_probe;
    auto* eval_cmd = app.add_subcommand("eval", "Linear-probe accuracy of saved embeddings");
    eval_cmd->add_option("--embeddings", eval_a.embeddings, "MAEB embedding file")->required();
    eval_cmd->add_option("--data", eval_a.data, "Dataset directory")->required();
    eval_cmd->add_option("--splits", eval_a.splits, "public or random (10/10/80 per seed)")
        ->check(CLI::IsMember({"public", "random"}))
        ->capture_default_str();
    eval_cmd->add_option("--seeds", eval_a.seeds, "Number of seeds")->check(CLI::PositiveNumber)->capture_default_str();
    eval_cmd->add_flag("--row-normalize", eval_a.row_normalize, "Row-normalize features on load");
    eval_probe.add(eval_cmd);

    ClusterArgs cl_a;
    auto* cl_cmd = app.add_subcommand("cluster", "k-means NMI of saved embeddings (median over runs)");
    cl_cmd->add_option("--embeddings", cl_a.embeddings, "MAEB embedding file")->required();
    cl_cmd->add_option("--data", cl_a.data, "Dataset directory")->required();
    cl_cmd->add_option("--runs", cl_a.runs, "Number of k-means runs")->check(CLI::PositiveNumber)->capture_default_str();
    cl_cmd->add_option("--k", cl_a.k, "Number of clusters (default: number of classes)");
    cl_cmd->add_option("--seed", cl_a.seed, "Seed")->capture_default_str();

    SpectralArgs sp_a;
    auto* sp_cmd = app.add_subcommand("spectral", "Filter spectrum and closed-form eigenvector selection");
    sp_cmd->add_option("--data", sp_a.data, "Dataset directory")->required();
    sp_cmd->add_option("--pi", sp_a.pi, "Filter coefficient in (0, 1)")->capture_default_str();
    sp_cmd->add_option("--L", sp_a.l1, "Depth of view 1")->capture_default_str();
    sp_cmd->add_option("--L2", sp_a.l2, "Depth of view 2")->capture_default_str();
    sp_cmd->add_option("--dout", sp_a.dout, "Number of selected eigenvectors")->capture_default_str();
    sp_cmd->add_option("--bins", sp_a.bins, "Histogram bins")->capture_default_str();

    GradArgs gc_a;
    auto* gc_cmd = app.add_subcommand("gradcheck", "Finite-difference check of full-model gradients");
    gc_cmd->add_option("--size", gc_a.size, "Max nodes and hidden width")->capture_default_str();
    gc_cmd->add_option("--trials", gc_a.trials, "Number of checked instances")->capture_default_str();
    gc_cmd->add_option("--seed", gc_a.seed, "Seed")->capture_default_str();
    gc_cmd->add_option("--tol", gc_a.tol, "Relative error tolerance")->capture_default_str();

    AblateArgs ab_a;
    ProbeFlags ab_probe;
    auto* ab_cmd = app.add_subcommand("ablate", "Train and probe each strategy combination");
    ab_cmd->add_option("--config", ab_a.config, "JSON config file")->required()->check(CLI::ExistingFile);
    ab_cmd->add_option("--data", ab_a.data, "Dataset directory")->required();
    ab_cmd->add_option("--strategies", ab_a.strategies, "Combinations, e.g. Base A A+R A+R+S (default: all 8)")
        ->delimiter(',');
    ab_cmd->add_option("--seeds", ab_a.seeds, "Seeds per combination")->check(CLI::PositiveNumber)->capture_default_str();
    ab_cmd->add_option("--out", ab_a.out, "Directory for ablation.json");
    ab_cmd->add_flag("--row-normalize", ab_a.row_normalize, "Row-normalize features on load");
    ab_probe.add(ab_cmd);

    try {
        app.parse(argc, argv);
    } catch (const CLI::Success& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return kExitConfig;
    }

    try {
        if (*train_cmd) return cmd_train(train_a, seed_opt->results());
        if (*eval_cmd) return cmd_eval(eval_a, eval_probe.cfg);
        if (*cl_cmd) return cmd_cluster(cl_a);
        if (*sp_cmd) return cmd_spectral(sp_a);
        if (*gc_cmd) return cmd_gradcheck(gc_a);
        if (*ab_cmd) return cmd_ablate(ab_a, ab_probe.cfg);
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << '\n';
        return kExitConfig;
    } catch (const DataError& e) {
        std::cerr << "data error: " << e.what() << '\n';
        return kExitData;
    } catch (const ShapeError& e) {
        std::cerr << "data error: " << e.what() << '\n';
        return kExitData;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitRuntime;
    }
    return kExitRuntime;
}
