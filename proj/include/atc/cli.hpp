#pragma once
// Command-line front end. Every subcommand computes everything first and
// writes its output files only on success.
//
// exit codes: 0 success, 1 usage error, 2 data / runtime error.

#include <CLI11.hpp>

#include <cstdint>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "atc/adapt.hpp"
#include "atc/core.hpp"
#include "atc/estimate.hpp"
#include "atc/io.hpp"
#include "atc/models.hpp"
#include "atc/sim.hpp"
#include "atc/tc.hpp"
#include "atc/theory.hpp"

namespace atc::cli {

struct UsageError : Error {
    using Error::Error;
};

// A grid file is a JSON array (numbers and "inf") or whitespace / comma
// separated tokens.
inline PenaltyGrid read_grid_file(const std::string& path) {
    auto in = io::detail::open_in(path);
    std::stringstream buf;
    buf << in.rdbuf();
    const std::string text = buf.str();
    const auto first = text.find_first_not_of(" \t\r\n");
    if (first != std::string::npos && text[first] == '[') {
        try {
            return io::grid_from_json(io::json::parse(text));
        } catch (const io::json::exception& e) {
            throw DataError(path + ": " + e.what());
        }
    }
    io::json arr = io::json::array();
    std::string token;
    std::stringstream tokens(text);
    while (tokens >> token) {
        for (auto& ch : token)
            if (ch == ',') ch = ' ';
        std::stringstream parts(token);
        std::string part;
        while (parts >> part) {
            if (part == "inf") {
                arr.push_back("inf");
                continue;
            }
            double v = 0.0;
            if (!io::detail::parse_double(part, v)) throw DataError(path + ": bad grid entry '" + part + "'");
            arr.push_back(v);
        }
    }
    return io::grid_from_json(arr);
}

inline PenaltyGrid grid_option(const std::string& value, std::size_t n) {
    return value == "auto" ? default_grid(n) : read_grid_file(value);
}

inline int b_reps_option(const std::string& value, double zeta, std::size_t grid_points) {
    if (value == "auto") return default_b_reps(zeta, grid_points);
    int b = 0;
    const auto res = std::from_chars(value.data(), value.data() + value.size(), b);
    if (res.ec != std::errc() || res.ptr != value.data() + value.size() || b < 1)
        throw UsageError("--b-reps must be a positive integer or 'auto'");
    return b;
}

// One side of a transfer problem as given on the command line.
struct LayerArgs {
    std::string data_path;
    std::string model_path;
    std::string family;
};

inline void add_layer_options(CLI::App* cmd, LayerArgs& layer, const std::string& side, bool data_required) {
    auto* data = cmd->add_option("--" + side, layer.data_path, side + " data CSV (features, or 0/1 adjacency for sbm)");
    if (data_required) data->required();
    cmd->add_option("--" + side + "-model", layer.model_path, side + " model JSON");
    cmd->add_option("--" + side + "-family", layer.family, side + " family when estimating without a model file")
        ->check(CLI::IsMember({"sym_gmm2", "gmm_k", "lcm", "sbm"}));
}

inline ModelFamily layer_family(const LayerArgs& layer, const std::string& side) {
    if (!layer.family.empty()) return parse_family(layer.family);
    if (!layer.model_path.empty()) {
        const io::json j = io::read_json(layer.model_path);
        if (!j.contains("family") || !j["family"].is_string()) throw DataError(layer.model_path + ": missing family");
        try {
            return parse_family(j["family"].get<std::string>());
        } catch (const InvalidArgument& e) {
            throw DataError(e.what());
        }
    }
    throw UsageError("--" + side + "-model or --" + side + "-family is required");
}

struct Layer {
    ModelSpec spec;
    Dataset data;
};

// Loads data and a model; with `estimate` the model is refit on the data
// (the model file, if any, only supplies the family and k).
inline Layer load_layer(const LayerArgs& layer, const std::string& side, bool estimate, int k,
                        const RandomStream& stream) {
    if (!estimate && layer.model_path.empty()) throw UsageError("--" + side + "-model is required without --estimate");
    const ModelFamily family = layer_family(layer, side);
    Dataset data = io::read_dataset(layer.data_path, family);
    if (!estimate) return {io::model_from_json(io::read_json(layer.model_path)), std::move(data)};
    if (!layer.model_path.empty() && layer.family.empty()) {
        const io::json j = io::read_json(layer.model_path);
        if (j.contains("params")) k = io::model_from_json(j).k();
        else if (j.contains("k")) k = j["k"].get<int>();
    }
    ModelSpec spec = estimate_params(family, data, k, stream);
    return {std::move(spec), std::move(data)};
}

inline void check_zeta(double zeta) {
    if (!(zeta > 0.0 && zeta < 1.0)) throw UsageError("--zeta must lie in (0,1)");
}

// ---------------------------------------------------------------------------

inline int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
    CLI::App app{"Adaptive transfer clustering"};
    app.require_subcommand(1);
    app.set_help_all_flag("--help-all");

    // simulate
    std::string sim_config, sim_out, sim_raw;
    std::size_t sim_threads = 0;
    bool sim_has_threads = false;
    auto* simulate = app.add_subcommand("simulate", "run a comparison scenario and write the error table");
    simulate->add_option("--config", sim_config, "scenario JSON")->required();
    simulate->add_option("--out", sim_out, "result CSV")->required();
    simulate->add_option("--raw", sim_raw, "per-replication error CSV");
    auto* sim_thr = simulate->add_option("--threads", sim_threads, "worker threads (0 = auto)");

    // atc / itl / tc share the layer options
    LayerArgs t_layer, s_layer;
    bool estimate = false;
    int k = 2;
    std::string grid_arg = "auto", b_reps_arg = "auto", labels_out, diag_out, sidecar_out;
    double zeta = 0.1, lambda_arg = 0.0;
    std::string lambda_text;
    std::uint64_t seed = 0;

    auto* atc_cmd = app.add_subcommand("atc", "adaptive transfer clustering of the target");
    add_layer_options(atc_cmd, t_layer, "target", true);
    add_layer_options(atc_cmd, s_layer, "source", true);
    atc_cmd->add_flag("--estimate", estimate, "refit model parameters on the data");
    atc_cmd->add_option("--k", k, "cluster count when estimating from a family")->check(CLI::PositiveNumber);
    atc_cmd->add_option("--grid", grid_arg, "'auto' or a grid file");
    atc_cmd->add_option("--zeta", zeta, "bootstrap level");
    atc_cmd->add_option("--b-reps", b_reps_arg, "bootstrap replicates or 'auto'");
    atc_cmd->add_option("--seed", seed, "master seed");
    atc_cmd->add_option("--out", labels_out, "target labels (1-based, one per line)")->required();
    atc_cmd->add_option("--diag", diag_out, "diagnostics JSON");

    auto* itl_cmd = app.add_subcommand("itl", "cluster the target alone");
    LayerArgs i_layer;
    add_layer_options(itl_cmd, i_layer, "target", true);
    itl_cmd->add_flag("--estimate", estimate, "refit model parameters on the data");
    itl_cmd->add_option("--k", k, "cluster count when estimating from a family")->check(CLI::PositiveNumber);
    itl_cmd->add_option("--seed", seed, "master seed");
    itl_cmd->add_option("--out", labels_out, "target labels")->required();

    auto* tc_cmd = app.add_subcommand("tc", "transfer clustering at a fixed penalty");
    add_layer_options(tc_cmd, t_layer, "target", true);
    add_layer_options(tc_cmd, s_layer, "source", true);
    tc_cmd->add_flag("--estimate", estimate, "refit model parameters on the data");
    tc_cmd->add_option("--k", k, "cluster count when estimating from a family")->check(CLI::PositiveNumber);
    tc_cmd->add_option("--lambda", lambda_text, "penalty (number or 'inf')")->required();
    tc_cmd->add_option("--seed", seed, "master seed");
    tc_cmd->add_option("--out", labels_out, "target labels")->required();
    tc_cmd->add_option("--source-out", sidecar_out, "source labels");
    tc_cmd->add_option("--sidecar", diag_out, "solution JSON");

    // bootstrap
    std::string boot_out;
    std::size_t boot_n = 0;
    auto* boot_cmd = app.add_subcommand("bootstrap", "bootstrap envelope psi over a penalty grid");
    boot_cmd->add_option("--target-model", t_layer.model_path, "target model JSON")->required();
    boot_cmd->add_option("--source-model", s_layer.model_path, "source model JSON")->required();
    boot_cmd->add_option("--n", boot_n, "sample count")->required()->check(CLI::PositiveNumber);
    boot_cmd->add_option("--grid", grid_arg, "'auto' or a grid file");
    boot_cmd->add_option("--zeta", zeta, "bootstrap level");
    boot_cmd->add_option("--b-reps", b_reps_arg, "bootstrap replicates or 'auto'");
    boot_cmd->add_option("--seed", seed, "master seed");
    boot_cmd->add_option("--out", boot_out, "envelope JSON")->required();

    // theory
    double th_s = 0.0, th_eps = 0.0;
    std::size_t th_n = 0;
    std::string th_out;
    auto* theory_cmd = app.add_subcommand("theory", "closed-form rates for the symmetric two-cluster mixture");
    theory_cmd->add_option("--s", th_s, "mu / sigma")->required();
    theory_cmd->add_option("--epsilon", th_eps, "label discrepancy in [0, 1/2]")->required();
    theory_cmd->add_option("--n", th_n, "sample count")->required();
    theory_cmd->add_option("--out", th_out, "write JSON here instead of stdout");

    // align
    std::string ref_path, cand_path, align_out;
    auto* align_cmd = app.add_subcommand("align", "match candidate labels to a reference");
    align_cmd->add_option("--ref", ref_path, "reference labels")->required();
    align_cmd->add_option("--cand", cand_path, "candidate labels")->required();
    align_cmd->add_option("--out", align_out, "aligned candidate labels");

    // fit
    std::string fit_data, fit_family, fit_out;
    auto* fit_cmd = app.add_subcommand("fit", "estimate model parameters from data");
    fit_cmd->add_option("--data", fit_data, "data CSV")->required();
    fit_cmd->add_option("--family", fit_family, "model family")
        ->required()
        ->check(CLI::IsMember({"sym_gmm2", "gmm_k", "lcm", "sbm"}));
    fit_cmd->add_option("--k", k, "cluster count")->check(CLI::PositiveNumber);
    fit_cmd->add_option("--seed", seed, "master seed");
    fit_cmd->add_option("--out", fit_out, "model JSON")->required();

    try {
        app.parse(argc, argv);
        sim_has_threads = sim_thr->count() > 0;
    } catch (const CLI::CallForHelp&) {
        out << app.help();
        return 0;
    } catch (const CLI::CallForAllHelp&) {
        out << app.help("", CLI::AppFormatMode::All);
        return 0;
    } catch (const CLI::ParseError& e) {
        err << "error: " << e.what() << "\n\n" << app.help();
        return 1;
    }

    const RandomStream root(seed, {});
    try {
        if (simulate->parsed()) {
            sim::ScenarioConfig cfg;
            try {
                cfg = sim::config_from_json(io::read_json(sim_config));
            } catch (const InvalidArgument& e) {
                throw DataError(e.what());
            }
            if (sim_has_threads) cfg.threads = sim_threads;
            sim::run_curve_comparison(cfg, sim_out, sim_raw);
            return 0;
        }

        if (atc_cmd->parsed()) {
            check_zeta(zeta);
            const Layer target = load_layer(t_layer, "target", estimate, k, split_stream(root, 10));
            const Layer source = load_layer(s_layer, "source", estimate, k, split_stream(root, 11));
            const std::size_t n = sample_count(target.data);
            const PenaltyGrid grid = grid_option(grid_arg, n);
            const int b = b_reps_option(b_reps_arg, zeta, grid.size());
            const AtcResult r = atc(target.data, source.data, target.spec, source.spec, grid, zeta, b, root);
            std::ostringstream labels;
            io::write_labels(labels, r.labels);
            const std::string diag = io::diagnostics_to_json(r, seed).dump(2) + "\n";
            io::detail::open_out(labels_out) << labels.str();
            if (!diag_out.empty()) io::detail::open_out(diag_out) << diag;
            return 0;
        }

        if (itl_cmd->parsed()) {
            const Layer target = load_layer(i_layer, "target", estimate, k, split_stream(root, 10));
            LabelVector z = [&] {
                if (target.spec.is_separable()) return itl(neg_log_post(target.spec, target.data));
                // a network target alone: ICM at lambda = 0 against a flat other side
                const auto flat = NegLogPostMatrix::zeros(sample_count(target.data), target.spec.k());
                const auto init = network_init(adjacency_of(target.data), flat, split_stream(root, 0));
                return tc_network(target.spec.as<SbmParams>(), adjacency_of(target.data), flat, Penalty(0.0),
                                  init.network, init.other)
                    .z0;
            }();
            std::ostringstream labels;
            io::write_labels(labels, z);
            io::detail::open_out(labels_out) << labels.str();
            return 0;
        }

        if (tc_cmd->parsed()) {
            Penalty lambda;
            if (lambda_text == "inf") {
                lambda = Penalty::infinity();
            } else {
                if (!io::detail::parse_double(lambda_text, lambda_arg) || !(lambda_arg >= 0.0) ||
                    !std::isfinite(lambda_arg))
                    throw UsageError("--lambda must be a non-negative number or 'inf'");
                lambda = Penalty(lambda_arg);
            }
            const Layer target = load_layer(t_layer, "target", estimate, k, split_stream(root, 10));
            const Layer source = load_layer(s_layer, "source", estimate, k, split_stream(root, 11));
            const TransferProblem prob =
                prepare_transfer(target.data, source.data, target.spec, source.spec, split_stream(root, 0));
            const TcSolution sol = prob.solver->solve(lambda);
            std::ostringstream z0, z1;
            io::write_labels(z0, sol.z0);
            io::write_labels(z1, sol.z1);
            const std::string side = io::solution_sidecar(lambda, sol).dump(2) + "\n";
            io::detail::open_out(labels_out) << z0.str();
            if (!sidecar_out.empty()) io::detail::open_out(sidecar_out) << z1.str();
            if (!diag_out.empty()) io::detail::open_out(diag_out) << side;
            return 0;
        }

        if (boot_cmd->parsed()) {
            check_zeta(zeta);
            if (boot_n < 2) throw UsageError("--n must be >= 2");
            const ModelSpec t = io::model_from_json(io::read_json(t_layer.model_path));
            const ModelSpec s = io::model_from_json(io::read_json(s_layer.model_path));
            const PenaltyGrid grid = grid_option(grid_arg, boot_n);
            const int b = b_reps_option(b_reps_arg, zeta, grid.size());
            const PsiEnvelope psi = bootstrap_psi(t, s, boot_n, grid, zeta, b, split_stream(root, 1));
            io::write_json(boot_out, io::psi_to_json(psi, seed));
            return 0;
        }

        if (theory_cmd->parsed()) {
            if (!(th_s > 0.0) || !std::isfinite(th_s)) throw UsageError("--s must be > 0");
            if (!(th_eps >= 0.0 && th_eps <= 0.5)) throw UsageError("--epsilon must lie in [0, 1/2]");
            if (th_n < 2) throw UsageError("--n must be >= 2");
            const Penalty lam = theory::optimal_lambda(th_eps);
            const auto base = theory::baseline_rates(th_s, th_eps);
            const double snr = theory::snr(th_s);
            const double alpha = theory::informativeness(th_s, th_eps);
            const double r = th_s * th_s / std::log(static_cast<double>(th_n));
            io::json j = {{"s", th_s},
                          {"epsilon", th_eps},
                          {"n", th_n},
                          {"snr", snr},
                          {"alpha", std::isinf(alpha) ? io::json("inf") : io::json(alpha)},
                          {"lambda_star", io::penalty_to_json(lam)},
                          {"rate_bound_at_lambda_star", theory::mis_rate_bound({th_s, th_eps, lam})},
                          {"itl_rate", base.itl},
                          {"dp_rate_lower", base.dp_lower},
                          {"dp_rate_upper", base.dp_upper},
                          {"oracle_rate", theory::oracle_rate(snr, alpha)},
                          {"r", r},
                          {"detection_boundary", theory::detection_boundary(r)},
                          {"default_grid", io::grid_to_json(default_grid(th_n))}};
            if (th_out.empty()) out << j.dump(2) << '\n';
            else io::write_json(th_out, j);
            return 0;
        }

        if (align_cmd->parsed()) {
            const LabelVector ref = io::read_labels(ref_path);
            const LabelVector cand_raw = io::read_labels(cand_path);
            const int kk = std::max(ref.k(), cand_raw.k());
            const LabelVector a = io::read_labels(ref_path, kk);
            const LabelVector b = io::read_labels(cand_path, kk);
            const Alignment al = align_labels(a, b);
            io::json j = {{"distance", hamming_distance(al.aligned, a)}, {"permutation", std::vector<int>{}}};
            for (int p : al.permutation) j["permutation"].push_back(p + 1);
            if (!align_out.empty()) io::write_labels(align_out, al.aligned);
            out << j.dump() << '\n';
            return 0;
        }

        if (fit_cmd->parsed()) {
            const ModelFamily family = parse_family(fit_family);
            const Dataset data = io::read_dataset(fit_data, family);
            const ModelSpec spec = estimate_params(family, data, k, split_stream(root, 12));
            io::write_json(fit_out, io::model_to_json(spec));
            return 0;
        }
    } catch (const UsageError& e) {
        err << "error: " << e.what() << '\n';
        return 1;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << '\n';
        return 2;
    }
    return 1;
}

inline int cli_dispatch(int argc, const char* const* argv) { return run(argc, argv, std::cout, std::cerr); }

}  // namespace atc::cli
