// hopmix: dynamics simulation, pseudo-energy landscapes, desk-scale mixer
// training, and iterative-layer evaluation from one JSON-configured binary.
//
// Exit codes: 0 ok, 1 usage/config error, 2 non-convergence, 3 divergence.

#include <filesystem>
#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include "hopmix/autodiff.hpp"
#include "hopmix/datasets.hpp"
#include "hopmix/hopfield.hpp"
#include "hopmix/io.hpp"
#include "hopmix/parallel.hpp"
#include "hopmix/symmetry.hpp"
#include "hopmix/train.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace hopmix;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitUsage = 1;
constexpr int kExitNonConvergence = 2;
constexpr int kExitDivergence = 3;

// ---------------------------------------------------------------------------
// Strict config parsing: unknown keys are rejected with their path.

void require_keys(const json& section, const std::vector<std::string>& allowed,
                  const std::string& path) {
    if (!section.is_object()) {
        throw ConfigError("config: section '" + path + "' must be an object");
    }
    for (const auto& [key, value] : section.items()) {
        bool known = false;
        for (const auto& k : allowed) {
            if (key == k) {
                known = true;
                break;
            }
        }
        if (!known) {
            throw ConfigError("config: unknown key '" + path + "." + key + "'");
        }
    }
}

template <typename T>
T get_or(const json& section, const char* key, T fallback) {
    if (!section.contains(key)) return fallback;
    return section.at(key).get<T>();
}

struct Config {
    json doc;
    std::string raw_text;

    json section(const char* name) const {
        return doc.contains(name) ? doc.at(name) : json::object();
    }
};

Config load_config(const std::string& path) {
    Config cfg;
    cfg.raw_text = read_text_file(path);
    try {
        cfg.doc = json::parse(cfg.raw_text);
    } catch (const json::parse_error& e) {
        throw ConfigError("config: " + path + " is not valid JSON (" + e.what() + ")");
    }
    require_keys(cfg.doc, {"seed", "net", "block", "train", "integrate", "landscape", "sweep"},
                 "config");
    require_keys(cfg.section("net"),
                 {"type", "n_visible", "n_hidden", "n_s", "n_vs", "n_vc", "n_c", "weight_scale",
                  "hidden_lagrangian", "visible_eps", "tau_s", "tau_v", "tau_c", "tau_h",
                  "visible_decay"},
                 "net");
    require_keys(cfg.section("block"),
                 {"n_tokens", "n_channels", "token_ratio", "channel_ratio", "h_r", "n_iter",
                  "norm", "eps", "init_scale", "n_blocks", "embed_scale", "head_scale"},
                 "block");
    require_keys(cfg.section("train"),
                 {"lr", "beta1", "beta2", "adam_eps", "batch_size", "epochs", "lambda", "dataset",
                  "unroll_dt", "unroll_steps"},
                 "train");
    require_keys(cfg.section("integrate"), {"dt", "steps", "method", "tol", "tol_window"},
                 "integrate");
    require_keys(cfg.section("landscape"),
                 {"extent", "n_points", "n_inits", "init_range", "cluster_radius"}, "landscape");
    require_keys(cfg.section("sweep"), {"lambdas", "seeds"}, "sweep");
    if (cfg.doc.contains("train") && cfg.section("train").contains("dataset")) {
        require_keys(cfg.section("train").at("dataset"),
                     {"task", "n_train", "n_test", "n_tokens", "d_in", "noise", "sigma",
                      "pattern_scale"},
                     "train.dataset");
    }
    return cfg;
}

std::uint64_t resolve_seed(const Config& cfg, bool seed_flag_set, std::uint64_t seed_flag) {
    if (seed_flag_set) return seed_flag;
    if (cfg.doc.contains("seed")) return cfg.doc.at("seed").get<std::uint64_t>();
    throw ConfigError("config: 'seed' is mandatory (set it in the config or pass --seed)");
}

// Derived streams so each stage sees a stable, documented seed.
std::uint64_t data_seed(std::uint64_t seed) { return seed + 1000003; }
std::uint64_t net_seed(std::uint64_t seed) { return seed + 2000003; }
std::uint64_t state_seed(std::uint64_t seed) { return seed + 3000003; }

void prepare_out_dir(const std::string& out, const Config& cfg) {
    fs::create_directories(out);
    // The config is echoed byte-verbatim for provenance.
    write_text_file((fs::path(out) / "config.json").string(), cfg.raw_text);
}

void write_meta(const std::string& out, json meta) {
    meta["version"] = version_string();
    write_text_file((fs::path(out) / "meta.json").string(), meta.dump(2) + "\n");
}

IntegrateOptions integrate_options(const Config& cfg) {
    const json sec = cfg.section("integrate");
    IntegrateOptions opts;
    opts.dt = get_or(sec, "dt", 1e-2);
    opts.steps = get_or<std::size_t>(sec, "steps", 2000);
    const std::string method = get_or<std::string>(sec, "method", "rk4");
    if (method == "euler") {
        opts.method = Integrator::Euler;
    } else if (method == "rk4") {
        opts.method = Integrator::RK4;
    } else {
        throw ConfigError("config: integrate.method must be 'euler' or 'rk4'");
    }
    opts.tol = get_or(sec, "tol", 1e-7);
    opts.tol_window = get_or<std::size_t>(sec, "tol_window", 10);
    return opts;
}

LagrangianSpec hidden_spec(const std::string& name) {
    if (name == "relu_squared") return LagrangianSpec::relu_squared();
    if (name == "gelu_primitive") return LagrangianSpec::gelu_primitive();
    throw ConfigError("config: net.hidden_lagrangian must be 'relu_squared' or 'gelu_primitive'");
}

HierarchicalNet three_layer_from_config(const Config& cfg, std::uint64_t seed) {
    const json sec = cfg.section("net");
    HierarchicalNet net;
    net.n_s = get_or<std::size_t>(sec, "n_s", 8);
    net.n_vs = get_or<std::size_t>(sec, "n_vs", 4);
    net.n_vc = get_or<std::size_t>(sec, "n_vc", 4);
    net.n_c = get_or<std::size_t>(sec, "n_c", 8);
    const double scale = get_or(sec, "weight_scale", 0.5);
    Rng rng(net_seed(seed));
    net.xi_sv = rng.normal_matrix(net.n_s, net.n_vs,
                                  scale / std::sqrt(static_cast<double>(net.n_vs)));
    net.xi_cv = rng.normal_matrix(net.n_c, net.n_vc,
                                  scale / std::sqrt(static_cast<double>(net.n_vc)));
    net.lagr_s = net.lagr_c =
        hidden_spec(get_or<std::string>(sec, "hidden_lagrangian", "relu_squared"));
    net.lagr_v = LagrangianSpec::centered_norm(get_or(sec, "visible_eps", 1e-6));
    net.tau_s = get_or(sec, "tau_s", 1.0);
    net.tau_v = get_or(sec, "tau_v", 1.0);
    net.tau_c = get_or(sec, "tau_c", 1.0);
    net.visible_decay = get_or(sec, "visible_decay", 1.0);
    return net;
}

TwoLayerNet two_layer_from_config(const Config& cfg, std::uint64_t seed) {
    const json sec = cfg.section("net");
    TwoLayerNet net;
    net.n_visible = get_or<std::size_t>(sec, "n_visible", 16);
    net.n_hidden = get_or<std::size_t>(sec, "n_hidden", 8);
    const double scale = get_or(sec, "weight_scale", 0.5);
    Rng rng(net_seed(seed));
    net.xi = rng.normal_matrix(net.n_hidden, net.n_visible,
                               scale / std::sqrt(static_cast<double>(net.n_visible)));
    net.lagr_h = hidden_spec(get_or<std::string>(sec, "hidden_lagrangian", "relu_squared"));
    net.lagr_v = LagrangianSpec::centered_norm(get_or(sec, "visible_eps", 1e-6));
    net.tau_v = get_or(sec, "tau_v", 1.0);
    net.tau_h = get_or(sec, "tau_h", 1.0);
    return net;
}

TrainConfig train_config(const Config& cfg, std::uint64_t seed) {
    const json sec = cfg.section("train");
    TrainConfig tc;
    tc.lr = get_or(sec, "lr", 1e-4);
    tc.beta1 = get_or(sec, "beta1", 0.9);
    tc.beta2 = get_or(sec, "beta2", 0.999);
    tc.adam_eps = get_or(sec, "adam_eps", 1e-8);
    tc.batch_size = get_or<std::size_t>(sec, "batch_size", 32);
    tc.epochs = get_or<std::size_t>(sec, "epochs", 30);
    tc.lambda = get_or(sec, "lambda", 0.0);
    tc.seed = seed;
    return tc;
}

// ---------------------------------------------------------------------------
// simulate

int cmd_simulate(const Config& cfg, std::uint64_t seed, const std::string& out) {
    prepare_out_dir(out, cfg);
    const IntegrateOptions opts = integrate_options(cfg);
    const std::string type = get_or<std::string>(cfg.section("net"), "type", "three_layer");

    EnergyTrace trace;
    json dims;
    Rng state_rng(state_seed(seed));
    if (type == "two_layer") {
        const TwoLayerNet net = two_layer_from_config(cfg, seed);
        TwoLayerState init{state_rng.normal_vector(net.n_visible),
                           state_rng.normal_vector(net.n_hidden)};
        trace = integrate(net, std::move(init), opts).trace;
        dims = {{"n_visible", net.n_visible}, {"n_hidden", net.n_hidden}};
    } else if (type == "three_layer") {
        const HierarchicalNet net = three_layer_from_config(cfg, seed);
        HierarchicalState init{state_rng.normal_matrix(net.n_s, net.n_vc),
                               state_rng.normal_matrix(net.n_vs, net.n_vc),
                               state_rng.normal_matrix(net.n_vs, net.n_c)};
        trace = integrate(net, std::move(init), opts).trace;
        dims = {{"n_s", net.n_s}, {"n_vs", net.n_vs}, {"n_vc", net.n_vc}, {"n_c", net.n_c}};
    } else {
        throw ConfigError("config: net.type must be 'two_layer' or 'three_layer'");
    }

    write_trace_csv((fs::path(out) / "trace.csv").string(), trace);
    write_meta(out, {{"command", "simulate"},
                     {"seed", seed},
                     {"dims", dims},
                     {"method", integrator_name(opts.method)},
                     {"dt", opts.dt},
                     {"steps_taken", trace.steps_taken},
                     {"converged", trace.converged},
                     {"max_energy_increase", trace.max_energy_increase()}});
    return trace.converged ? kExitOk : kExitNonConvergence;
}

// ---------------------------------------------------------------------------
// landscape

json attractor_json(const AttractorSet& set) {
    json list = json::array();
    for (const auto& a : set.attractors) {
        json state = json::array();
        for (double v : a.state.flat()) state.push_back(v);
        list.push_back({{"state", state},
                        {"basin_count", a.basin_count},
                        {"energy", a.energy},
                        {"residual", a.residual}});
    }
    return list;
}

int cmd_landscape(const Config& cfg, std::uint64_t seed, const std::string& out,
                  double break_scale) {
    prepare_out_dir(out, cfg);
    const json net_sec = cfg.section("net");
    const json land_sec = cfg.section("landscape");

    HierarchicalNet net;
    net.n_vs = get_or<std::size_t>(net_sec, "n_vs", 2);
    net.n_vc = get_or<std::size_t>(net_sec, "n_vc", 1);
    net.n_s = get_or<std::size_t>(net_sec, "n_s", 6);
    net.n_c = get_or<std::size_t>(net_sec, "n_c", 6);
    const double scale = get_or(net_sec, "weight_scale", 0.8);
    Rng rng(net_seed(seed));
    net.xi_sv = rng.normal_matrix(net.n_s, net.n_vs, scale);
    net.xi_cv = rng.normal_matrix(net.n_c, net.n_vc, scale);
    net.lagr_s = net.lagr_c =
        hidden_spec(get_or<std::string>(net_sec, "hidden_lagrangian", "gelu_primitive"));
    // eps defaults to the plotting value that keeps the singular ridge finite.
    net.lagr_v = LagrangianSpec::centered_norm(get_or(net_sec, "visible_eps", 1e-3));
    if (break_scale > 0.0) apply_symmetry_breaking(net, break_scale, rng);

    GridSpec grid_spec;
    grid_spec.extent = get_or(land_sec, "extent", 3.0);
    grid_spec.n_points = get_or<std::size_t>(land_sec, "n_points", 201);
    const LandscapeGrid grid = sample_landscape(net, grid_spec);
    write_landscape_csv((fs::path(out) / "landscape.csv").string(), grid.points());

    AttractorSearchOptions search;
    search.integrate = integrate_options(cfg);
    if (!cfg.doc.contains("integrate")) {
        search.integrate.steps = 6000;
    }
    search.init_range = get_or(land_sec, "init_range", 2.0);
    search.cluster_radius = get_or(land_sec, "cluster_radius", 1e-3);
    Rng init_rng(state_seed(seed));
    const std::size_t n_inits = get_or<std::size_t>(land_sec, "n_inits", 24);
    const AttractorSet set = find_attractors(net, n_inits, init_rng, search);

    json attractors;
    attractors["n_clusters"] = set.attractors.size();
    attractors["attractors"] = attractor_json(set);
    attractors["min_pairwise_distance"] = set.min_pairwise_distance;
    attractors["spread_along"] = set.spread_along;
    attractors["spread_transverse"] = set.spread_transverse;
    attractors["zero_mode_valley"] = set.zero_mode_valley;
    attractors["max_line_distance"] = set.max_line_distance;
    attractors["reflection_discrepancy"] = reflection_discrepancy(grid);
    attractors["swap_discrepancy"] = swap_discrepancy(grid);
    attractors["break_scale"] = break_scale;
    write_text_file((fs::path(out) / "attractors.json").string(), attractors.dump(2) + "\n");

    write_meta(out, {{"command", "landscape"},
                     {"seed", seed},
                     {"dims", {{"n_s", net.n_s}, {"n_vs", net.n_vs}, {"n_vc", net.n_vc},
                               {"n_c", net.n_c}}},
                     {"break_scale", break_scale},
                     {"n_points", grid_spec.n_points},
                     {"n_inits", n_inits}});
    return kExitOk;
}

// ---------------------------------------------------------------------------
// train

struct ModeChoice {
    MixerVariant variant;
    WeightMode mode;
};

ModeChoice mode_from_flag(const std::string& mode) {
    if (mode == "vanilla") return {MixerVariant::Vanilla, WeightMode::Free};
    if (mode == "para") return {MixerVariant::Parallel, WeightMode::Free};
    if (mode == "sym") return {MixerVariant::Parallel, WeightMode::Symmetric};
    if (mode == "asym") return {MixerVariant::Parallel, WeightMode::Asymmetric};
    throw ConfigError("--mode must be one of vanilla|para|sym|asym");
}

ClassificationSplits classification_data(const Config& cfg, std::uint64_t seed,
                                         const std::string& data_dir, const std::string& out) {
    if (!data_dir.empty()) {
        ClassificationSplits splits;
        splits.train = load_classification_dataset((fs::path(data_dir) / "train").string());
        splits.test = load_classification_dataset((fs::path(data_dir) / "test").string());
        return splits;
    }
    const json dsec = cfg.section("train").contains("dataset")
                          ? cfg.section("train").at("dataset")
                          : json::object();
    TokenPatternSpec spec;
    spec.n_samples = get_or<std::size_t>(dsec, "n_train", 512);
    spec.n_tokens = get_or<std::size_t>(dsec, "n_tokens", 4);
    spec.d_in = get_or<std::size_t>(dsec, "d_in", 8);
    spec.noise = get_or(dsec, "noise", 0.35);
    spec.pattern_scale = get_or(dsec, "pattern_scale", 1.0);
    Rng rng(data_seed(seed));
    ClassificationSplits splits =
        make_token_pattern_splits(spec, get_or<std::size_t>(dsec, "n_test", 256), rng);
    if (!out.empty()) {
        save_classification_dataset((fs::path(out) / "dataset" / "train").string(), splits.train);
        save_classification_dataset((fs::path(out) / "dataset" / "test").string(), splits.test);
    }
    return splits;
}

int train_classifier_cmd(const Config& cfg, std::uint64_t seed, const std::string& out,
                         const std::string& mode, double lambda_override, bool lambda_set,
                         long epochs_override, const std::string& data_dir) {
    const ModeChoice choice = mode_from_flag(mode);
    const json bsec = cfg.section("block");

    ClassificationSplits splits = classification_data(cfg, seed, data_dir, out);
    ClassificationDataset& train_set = splits.train;
    ClassificationDataset& test_set = splits.test;

    MixerNetOptions opts;
    opts.n_blocks = get_or<std::size_t>(bsec, "n_blocks", 2);
    opts.block.token_ratio = get_or(bsec, "token_ratio", 0.5);
    opts.block.channel_ratio = get_or(bsec, "channel_ratio", 4.0);
    opts.block.h_r = get_or(bsec, "h_r", 1.0);
    opts.block.init_scale = get_or(bsec, "init_scale", 1.0);
    opts.block.n_iter = get_or(bsec, "n_iter", 1);
    opts.block.norm = norm_mode_from_name(get_or<std::string>(bsec, "norm", "joint_axes"));
    opts.block.eps = get_or(bsec, "eps", 1e-6);
    opts.embed_scale = get_or(bsec, "embed_scale", 1.0);
    opts.head_scale = get_or(bsec, "head_scale", 1.0);
    const std::size_t n_channels = get_or<std::size_t>(bsec, "n_channels", 8);

    Rng rng(net_seed(seed));
    MixerNet net = make_mixer_net(choice.variant, choice.mode, train_set.n_tokens,
                                  train_set.d_in, n_channels, train_set.n_classes, rng, opts);

    TrainConfig tc = train_config(cfg, seed);
    if (lambda_set) tc.lambda = lambda_override;
    if (epochs_override >= 0) tc.epochs = static_cast<std::size_t>(epochs_override);

    TrainResult result;
    try {
        result = train_classifier(net, train_set, tc);
    } catch (const NumericError& e) {
        std::cerr << "hopmix train: " << e.what() << "\n";
        return kExitDivergence;
    }

    save_mixer_checkpoint((fs::path(out) / "checkpoint").string(), net);
    std::vector<std::tuple<std::size_t, double, double>> rows;
    for (const auto& p : result.curve) rows.emplace_back(p.epoch, p.loss, p.metric);
    write_curve_csv((fs::path(out) / "curve.csv").string(), rows, "epoch,loss,metric");

    json final_metrics;
    final_metrics["mode"] = mode;
    final_metrics["seed"] = seed;
    final_metrics["lambda"] = tc.lambda;
    final_metrics["epochs"] = tc.epochs;
    final_metrics["train_accuracy"] = result.curve.back().metric;
    final_metrics["accuracy"] = evaluate_accuracy(net, test_set);
    if (choice.mode == WeightMode::Asymmetric) {
        final_metrics["wtilde_norm"] = frobenius_penalty(net);
    }
    write_text_file((fs::path(out) / "final.json").string(), final_metrics.dump(2) + "\n");
    return kExitOk;
}

int train_denoiser_cmd(const Config& cfg, std::uint64_t seed, const std::string& out,
                       long epochs_override, const std::string& data_dir) {
    const json tsec = cfg.section("train");
    const json dsec = tsec.contains("dataset") ? tsec.at("dataset") : json::object();

    DenoiseDataset train_set, test_set;
    if (!data_dir.empty()) {
        train_set = load_denoise_dataset((fs::path(data_dir) / "train").string());
        test_set = load_denoise_dataset((fs::path(data_dir) / "test").string());
    } else {
        GlyphSpec gspec;
        gspec.n_samples = get_or<std::size_t>(dsec, "n_train", 256);
        gspec.sigma = get_or(dsec, "sigma", 0.3);
        Rng rng(data_seed(seed));
        train_set = make_glyph_dataset(gspec, rng);
        GlyphSpec test_spec = gspec;
        test_spec.n_samples = get_or<std::size_t>(dsec, "n_test", 128);
        test_set = make_glyph_dataset(test_spec, rng);
        save_denoise_dataset((fs::path(out) / "dataset" / "train").string(), train_set);
        save_denoise_dataset((fs::path(out) / "dataset" / "test").string(), test_set);
    }

    HierarchicalNet net = three_layer_from_config(cfg, seed);
    if (net.n_vs != train_set.rows || net.n_vc != train_set.cols) {
        throw DimensionError("train: net visible grid (" + std::to_string(net.n_vs) + "x" +
                             std::to_string(net.n_vc) + ") does not match dataset (" +
                             std::to_string(train_set.rows) + "x" +
                             std::to_string(train_set.cols) + ")");
    }

    TrainConfig tc = train_config(cfg, seed);
    tc.loss = LossKind::Mse;
    if (epochs_override >= 0) tc.epochs = static_cast<std::size_t>(epochs_override);
    DenoiseUnroll unroll;
    unroll.dt = get_or(tsec, "unroll_dt", 0.2);
    unroll.steps = get_or<std::size_t>(tsec, "unroll_steps", 20);

    TrainResult result;
    try {
        result = train_denoiser(net, train_set, tc, unroll);
    } catch (const NumericError& e) {
        std::cerr << "hopmix train: " << e.what() << "\n";
        return kExitDivergence;
    }

    // Interaction matrices reuse the raw-blob weight format.
    const fs::path ckpt = fs::path(out) / "checkpoint";
    fs::create_directories(ckpt);
    write_f64_blob((ckpt / "xi_sv.bin").string(), net.xi_sv.flat());
    write_f64_blob((ckpt / "xi_cv.bin").string(), net.xi_cv.flat());
    json manifest;
    manifest["format"] = "hopmix-denoiser-checkpoint";
    manifest["dims"] = {{"n_s", net.n_s}, {"n_vs", net.n_vs}, {"n_vc", net.n_vc},
                        {"n_c", net.n_c}};
    manifest["visible_eps"] = net.lagr_v.eps;
    write_text_file((ckpt / "manifest.json").string(), manifest.dump(2) + "\n");

    std::vector<std::tuple<std::size_t, double, double>> rows;
    for (const auto& p : result.curve) rows.emplace_back(p.epoch, p.loss, p.metric);
    write_curve_csv((fs::path(out) / "curve.csv").string(), rows, "epoch,loss,metric");

    const DenoiseEval eval = evaluate_denoiser(net, test_set, unroll);
    json final_metrics;
    final_metrics["mode"] = "denoise";
    final_metrics["seed"] = seed;
    final_metrics["epochs"] = tc.epochs;
    final_metrics["initial_mse"] = result.curve.front().metric;
    final_metrics["final_mse"] = result.curve.back().metric;
    final_metrics["test_mse"] = eval.mse;
    final_metrics["test_input_mse"] = eval.input_mse;
    final_metrics["improved_fraction"] = eval.improved_fraction;
    write_text_file((fs::path(out) / "final.json").string(), final_metrics.dump(2) + "\n");
    return kExitOk;
}

int cmd_train(const Config& cfg, std::uint64_t seed, const std::string& out,
              const std::string& mode, double lambda_override, bool lambda_set,
              long epochs_override, const std::string& data_dir, bool sweep) {
    prepare_out_dir(out, cfg);
    const json dsec = cfg.section("train").contains("dataset")
                          ? cfg.section("train").at("dataset")
                          : json::object();
    const std::string task = get_or<std::string>(dsec, "task", "classify");

    if (sweep) {
        const json ssec = cfg.section("sweep");
        std::vector<double> lambdas = ssec.contains("lambdas")
                                          ? ssec.at("lambdas").get<std::vector<double>>()
                                          : std::vector<double>{0.0, 1e-4, 1e-2, 1.0};
        std::vector<std::uint64_t> seeds =
            ssec.contains("seeds") ? ssec.at("seeds").get<std::vector<std::uint64_t>>()
                                   : std::vector<std::uint64_t>{seed};
        std::vector<std::tuple<std::size_t, double, double>> rows;
        std::string summary = "lambda,seed,accuracy,wtilde_norm\n";
        for (std::size_t li = 0; li < lambdas.size(); ++li) {
            for (std::uint64_t s : seeds) {
                const std::string run_dir =
                    (fs::path(out) / ("run_l" + std::to_string(li) + "_s" + std::to_string(s)))
                        .string();
                fs::create_directories(run_dir);
                write_text_file((fs::path(run_dir) / "config.json").string(), cfg.raw_text);
                const int rc = train_classifier_cmd(cfg, s, run_dir, mode, lambdas[li], true,
                                                    epochs_override, data_dir);
                if (rc != kExitOk) return rc;
                const json fin =
                    json::parse(read_text_file((fs::path(run_dir) / "final.json").string()));
                summary += format_double(lambdas[li]) + "," + std::to_string(s) + "," +
                           format_double(fin.at("accuracy").get<double>()) + "," +
                           format_double(fin.contains("wtilde_norm")
                                             ? fin.at("wtilde_norm").get<double>()
                                             : 0.0) +
                           "\n";
            }
        }
        write_text_file((fs::path(out) / "sweep_summary.csv").string(), summary);
        write_meta(out, {{"command", "train"}, {"seed", seed}, {"sweep", true}, {"mode", mode}});
        return kExitOk;
    }

    int rc;
    if (task == "denoise") {
        rc = train_denoiser_cmd(cfg, seed, out, epochs_override, data_dir);
    } else if (task == "classify") {
        rc = train_classifier_cmd(cfg, seed, out, mode, lambda_override, lambda_set,
                                  epochs_override, data_dir);
    } else {
        throw ConfigError("config: train.dataset.task must be 'classify' or 'denoise'");
    }
    if (rc == kExitOk) {
        write_meta(out, {{"command", "train"}, {"seed", seed}, {"mode", mode}, {"task", task}});
    }
    return rc;
}

// ---------------------------------------------------------------------------
// iterate

int cmd_iterate(const std::string& checkpoint, const std::string& data_dir, std::size_t k_max,
                const std::string& out) {
    fs::create_directories(out);
    const MixerNet net = load_mixer_checkpoint(checkpoint);
    const ClassificationDataset data =
        load_classification_dataset((fs::path(data_dir) / "test").string());
    if (data.n_tokens != net.n_tokens() || data.d_in != net.patch_embed.rows()) {
        throw DimensionError("iterate: dataset grid (" + std::to_string(data.n_tokens) + "x" +
                             std::to_string(data.d_in) + ") does not match checkpoint (" +
                             std::to_string(net.n_tokens()) + "x" +
                             std::to_string(net.patch_embed.rows()) + ")");
    }

    std::vector<double> accuracy(k_max);
    parallel_for(k_max, [&](std::size_t idx) {
        accuracy[idx] = evaluate_accuracy(net, data, idx + 1);
    });

    std::string csv = "k,accuracy\n";
    for (std::size_t k = 1; k <= k_max; ++k) {
        csv += std::to_string(k) + "," + format_double(accuracy[k - 1]) + "\n";
    }
    write_text_file((fs::path(out) / "iterate.csv").string(), csv);

    double max_drop = 0.0;
    for (double a : accuracy) max_drop = std::max(max_drop, accuracy[0] - a);
    write_meta(out, {{"command", "iterate"},
                     {"checkpoint", checkpoint},
                     {"k_max", k_max},
                     {"accuracy_k1", accuracy.front()},
                     {"accuracy_kmax", accuracy.back()},
                     {"max_drop", max_drop},
                     {"degraded_by_10_points", max_drop > 0.10}});
    return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"hierarchical Hopfield networks and parallelized mixers"};
    app.set_version_flag("--version", version_string());
    app.require_subcommand(1);

    std::string config_path, out_dir, data_dir, mode = "sym", checkpoint;
    std::uint64_t seed_flag = 0;
    bool seed_set = false;
    double break_scale = 0.0, lambda_flag = 0.0;
    bool lambda_set = false, sweep = false;
    long epochs_override = -1;
    std::size_t k_max = 16;

    auto add_common = [&](CLI::App* cmd, bool needs_config) {
        auto* copt = cmd->add_option("--config", config_path, "JSON experiment config");
        if (needs_config) copt->required()->check(CLI::ExistingFile);
        cmd->add_option("--seed", seed_flag, "seed override")->each([&](const std::string&) {
            seed_set = true;
        });
        cmd->add_option("--out", out_dir, "output directory")->required();
    };

    CLI::App* simulate = app.add_subcommand("simulate", "integrate a network and trace energy");
    add_common(simulate, true);

    CLI::App* landscape = app.add_subcommand("landscape", "pseudo-energy grid and attractors");
    add_common(landscape, true);
    landscape->add_option("--break-scale", break_scale,
                          "symmetry-breaking scale relative to the symmetric rms");

    CLI::App* train = app.add_subcommand("train", "desk-scale training runs");
    add_common(train, true);
    train->add_option("--mode", mode, "vanilla|para|sym|asym");
    train->add_option("--lambda", lambda_flag, "Frobenius penalty weight")
        ->each([&](const std::string&) { lambda_set = true; });
    train->add_option("--epochs", epochs_override, "override train.epochs");
    train->add_option("--data", data_dir, "dataset directory (train/ and test/ subsets)");
    train->add_flag("--sweep", sweep, "run the sweep section of the config");

    CLI::App* iterate = app.add_subcommand("iterate", "accuracy vs last-layer iterations");
    iterate->add_option("--checkpoint", checkpoint, "mixer checkpoint directory")->required();
    iterate->add_option("--data", data_dir, "dataset directory")->required();
    iterate->add_option("--k-max", k_max, "largest iteration count");
    iterate->add_option("--out", out_dir, "output directory")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? kExitOk : kExitUsage;
    }

    try {
        if (iterate->parsed()) {
            return cmd_iterate(checkpoint, data_dir, k_max, out_dir);
        }
        const Config cfg = load_config(config_path);
        const std::uint64_t seed = resolve_seed(cfg, seed_set, seed_flag);
        if (simulate->parsed()) return cmd_simulate(cfg, seed, out_dir);
        if (landscape->parsed()) return cmd_landscape(cfg, seed, out_dir, break_scale);
        if (train->parsed()) {
            return cmd_train(cfg, seed, out_dir, mode, lambda_flag, lambda_set, epochs_override,
                             data_dir, sweep);
        }
    } catch (const ConfigError& e) {
        std::cerr << "hopmix: " << e.what() << "\n";
        return kExitUsage;
    } catch (const DimensionError& e) {
        std::cerr << "hopmix: " << e.what() << "\n";
        return kExitUsage;
    } catch (const NumericError& e) {
        std::cerr << "hopmix: " << e.what() << "\n";
        return kExitDivergence;
    } catch (const std::exception& e) {
        std::cerr << "hopmix: " << e.what() << "\n";
        return kExitUsage;
    }
    return kExitUsage;
}
