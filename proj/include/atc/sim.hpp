#pragma once
// Monte Carlo harness for the two-cluster comparison scenarios: error of
// ITL, DP, ATC and TC at the MAP penalty against the label discrepancy.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <fstream>
#include <numeric>
#include <optional>
#include <ostream>
#include <random>
#include <string>
#include <vector>

#include "atc/adapt.hpp"
#include "atc/core.hpp"
#include "atc/estimate.hpp"
#include "atc/io.hpp"
#include "atc/models.hpp"
#include "atc/parallel.hpp"
#include "atc/random.hpp"
#include "atc/tc.hpp"
#include "atc/theory.hpp"

namespace atc::sim {

enum class Scenario { gmm_gmm, sbm_gmm, gmm_sbm, lcm_gmm, lcm_lcm };

inline std::string_view scenario_name(Scenario s) {
    switch (s) {
        case Scenario::gmm_gmm: return "gmm_gmm";
        case Scenario::sbm_gmm: return "sbm_gmm";
        case Scenario::gmm_sbm: return "gmm_sbm";
        case Scenario::lcm_gmm: return "lcm_gmm";
        case Scenario::lcm_lcm: return "lcm_lcm";
    }
    return "?";
}

inline Scenario parse_scenario(std::string_view name) {
    for (Scenario s : {Scenario::gmm_gmm, Scenario::sbm_gmm, Scenario::gmm_sbm, Scenario::lcm_gmm, Scenario::lcm_lcm})
        if (scenario_name(s) == name) return s;
    throw InvalidArgument("unknown scenario: " + std::string(name));
}

enum class Method { itl, dp, atc, tc_star };

struct ScenarioConfig {
    Scenario scenario_id = Scenario::gmm_gmm;
    std::size_t n = 500;
    int k = 2;
    int d = 10;
    double upsilon = 0.0;
    double p = 0.0, q = 0.0;
    double delta = 0.0;
    std::vector<double> epsilon_grid;
    int reps = 1;
    std::vector<double> zeta_list{0.1};
    std::uint64_t seed = 0;

    int b_reps = 0;                     // 0 = default_b_reps
    std::optional<PenaltyGrid> grid;    // unset = default_grid(n)
    bool estimate = false;              // plug-in parameters instead of the generating ones
    bool fixed_direction = false;       // one GMM direction per setting instead of one per rep
    std::vector<Method> methods{Method::itl, Method::dp, Method::atc, Method::tc_star};
    std::size_t threads = 0;
};

struct ResultRow {
    double epsilon;
    std::string method;
    double mean_error;
    double std_error;
    int reps;
};

// Per-rep errors behind every row, in row order.
struct ScenarioResult {
    std::vector<ResultRow> rows;
    std::vector<std::vector<double>> per_rep;
};

inline bool uses_gmm(Scenario s) { return s != Scenario::lcm_lcm; }
inline bool uses_sbm(Scenario s) { return s == Scenario::sbm_gmm || s == Scenario::gmm_sbm; }
inline bool uses_lcm(Scenario s) { return s == Scenario::lcm_gmm || s == Scenario::lcm_lcm; }

inline void validate(const ScenarioConfig& c) {
    if (c.k != 2) throw InvalidArgument("scenario: only k = 2 is supported");
    if (c.n < 2) throw InvalidArgument("scenario: n must be >= 2");
    if (c.reps < 1) throw InvalidArgument("scenario: reps must be >= 1");
    if (c.epsilon_grid.empty()) throw InvalidArgument("scenario: epsilon_grid is empty");
    for (double e : c.epsilon_grid)
        if (!(e >= 0.0 && e <= 0.5)) throw InvalidArgument("scenario: epsilon must lie in [0, 1/2]");
    if (c.methods.empty()) throw InvalidArgument("scenario: no methods");
    const bool needs_atc = std::find(c.methods.begin(), c.methods.end(), Method::atc) != c.methods.end();
    if (needs_atc && c.zeta_list.empty()) throw InvalidArgument("scenario: zeta_list is empty");
    for (double z : c.zeta_list)
        if (!(z > 0.0 && z < 1.0)) throw InvalidArgument("scenario: zeta must lie in (0,1)");
    if (c.b_reps < 0) throw InvalidArgument("scenario: b_reps must be >= 0");
    if ((uses_gmm(c.scenario_id) || uses_lcm(c.scenario_id)) && c.d < 1)
        throw InvalidArgument("scenario: d must be >= 1");
    if (uses_gmm(c.scenario_id) && !(c.upsilon > 0.0)) throw InvalidArgument("scenario: upsilon must be > 0");
    if (uses_sbm(c.scenario_id) && !(c.p > 0.0 && c.p < 1.0 && c.q > 0.0 && c.q < 1.0))
        throw InvalidArgument("scenario: p and q must lie in (0,1)");
    if (uses_lcm(c.scenario_id) && !(c.delta >= 0.0 && c.delta < 0.5))
        throw InvalidArgument("scenario: delta must lie in [0, 1/2)");
}

// ---------------------------------------------------------------------------
// generating models
// ---------------------------------------------------------------------------

// mu = a / |a| * upsilon with a ~ N(0, I_d); sigma = 1.
inline ModelSpec gmm_spec(int d, double upsilon, const RandomStream& stream) {
    auto eng = stream.engine();
    std::normal_distribution<double> normal;
    Eigen::VectorXd a(d);
    for (int j = 0; j < d; ++j) a(j) = normal(eng);
    const double norm = a.norm();
    if (!(norm > 0.0)) throw Error("gmm_spec: degenerate direction draw");
    return ModelSpec(make_sym_gmm2(a / norm * upsilon, 1.0));
}

// B = q 1 1^T + (p - q) I.
inline ModelSpec sbm_spec(int k, double p, double q) {
    Eigen::MatrixXd link = Eigen::MatrixXd::Constant(k, k, q);
    link.diagonal().setConstant(p);
    return ModelSpec(make_sbm(detail::uniform_weights(k), std::move(link)));
}

// Item probabilities 0.5 - delta in class 1 and 0.5 + delta in class 2.
inline ModelSpec lcm_spec(int d, double delta) {
    Eigen::MatrixXd probs(d, 2);
    probs.col(0).setConstant(0.5 - delta);
    probs.col(1).setConstant(0.5 + delta);
    return ModelSpec(make_lcm(detail::uniform_weights(2), std::move(probs)));
}

struct ScenarioModels {
    ModelSpec target, source;
};

// side 0 = target, 1 = source; direction streams are keyed by side so the two
// GMM layers of gmm_gmm get independent directions.
inline ScenarioModels scenario_models(const ScenarioConfig& c, const RandomStream& direction_stream) {
    auto gmm = [&](std::uint64_t side) { return gmm_spec(c.d, c.upsilon, split_stream(direction_stream, side)); };
    switch (c.scenario_id) {
        case Scenario::gmm_gmm: return {gmm(0), gmm(1)};
        case Scenario::sbm_gmm: return {sbm_spec(c.k, c.p, c.q), gmm(1)};
        case Scenario::gmm_sbm: return {gmm(0), sbm_spec(c.k, c.p, c.q)};
        case Scenario::lcm_gmm: return {lcm_spec(c.d, c.delta), gmm(1)};
        case Scenario::lcm_lcm: return {lcm_spec(c.d, c.delta), lcm_spec(c.d, c.delta)};
    }
    throw InvalidArgument("unknown scenario");
}

// ---------------------------------------------------------------------------
// one replication
// ---------------------------------------------------------------------------

// Column labels of the result table, in output order.
inline std::vector<std::string> method_labels(const ScenarioConfig& c) {
    std::vector<std::string> out;
    for (Method m : c.methods) {
        switch (m) {
            case Method::itl: out.emplace_back("ITL"); break;
            case Method::dp: out.emplace_back("DP"); break;
            case Method::atc:
                for (double z : c.zeta_list) out.push_back("ATC(" + io::format_double(z) + ")");
                break;
            case Method::tc_star: out.emplace_back("TC(lambda*)"); break;
        }
    }
    return out;
}

inline double aligned_error(const LabelVector& truth, const LabelVector& estimate) {
    return hamming_distance(align_labels(truth, estimate).aligned, truth);
}

// Errors of every method label for one (epsilon, rep) cell.
inline std::vector<double> run_replication(const ScenarioConfig& c, double epsilon, const PenaltyGrid& grid, int b_reps,
                                           const RandomStream& rep_stream, const RandomStream& fixed_directions) {
    const RandomStream directions = c.fixed_direction ? fixed_directions : split_stream(rep_stream, 0);
    ScenarioModels truth = scenario_models(c, directions);
    const PairedSample pair =
        generate_pair(truth.target, truth.source, c.n, epsilon, truth.target.label_weights(), split_stream(rep_stream, 1));

    ModelSpec theta0 = truth.target, theta1 = truth.source;
    if (c.estimate) {
        theta0 = estimate_params(truth.target.family(), pair.x0, c.k, split_stream(rep_stream, 2));
        theta1 = estimate_params(truth.source.family(), pair.x1, c.k, split_stream(rep_stream, 3));
    }

    AdaptOptions opts;
    opts.threads = 1;  // replications already run in parallel
    const TransferProblem prob = prepare_transfer(pair.x0, pair.x1, theta0, theta1, split_stream(rep_stream, 4), opts);

    std::vector<double> errors;
    for (Method m : c.methods) {
        switch (m) {
            case Method::itl: errors.push_back(aligned_error(pair.z0, prob.itl_target)); break;
            case Method::dp:
                errors.push_back(aligned_error(pair.z0, prob.solver->solve(Penalty::infinity()).z0));
                break;
            case Method::atc: {
                const auto distances =
                    bootstrap_distances(prob.target, prob.source, prob.n, grid, b_reps, split_stream(rep_stream, 5), opts);
                const auto solutions = solve_grid(prob, grid);
                for (double z : c.zeta_list) {
                    const AtcResult r =
                        select_adaptive(prob, solutions, envelope_from_distances(grid, distances, z, opts.inflation));
                    errors.push_back(aligned_error(pair.z0, r.labels));
                }
                break;
            }
            case Method::tc_star:
                errors.push_back(aligned_error(pair.z0, prob.solver->solve(theory::optimal_lambda(epsilon)).z0));
                break;
        }
    }
    return errors;
}

// ---------------------------------------------------------------------------
// aggregation
// ---------------------------------------------------------------------------

inline ScenarioResult run_scenario_detailed(const ScenarioConfig& c) {
    validate(c);
    const PenaltyGrid grid = c.grid ? *c.grid : default_grid(c.n);
    const int b_reps = c.b_reps > 0 ? c.b_reps : default_b_reps(c.zeta_list.empty() ? 0.1 : c.zeta_list.front(), grid.size());
    const RandomStream root(c.seed, {1, static_cast<std::uint64_t>(c.scenario_id)});
    const RandomStream fixed_directions(c.seed, {2});

    const std::size_t n_eps = c.epsilon_grid.size();
    const auto reps = static_cast<std::size_t>(c.reps);
    std::vector<std::vector<double>> cell(n_eps * reps);
    parallel_for(
        cell.size(),
        [&](std::size_t t) {
            const std::size_t e = t / reps, r = t % reps;
            const RandomStream rep_stream = split_stream(split_stream(root, e), r);
            cell[t] = run_replication(c, c.epsilon_grid[e], grid, b_reps, rep_stream, fixed_directions);
        },
        c.threads);

    const auto labels = method_labels(c);
    ScenarioResult out;
    for (std::size_t e = 0; e < n_eps; ++e) {
        for (std::size_t m = 0; m < labels.size(); ++m) {
            std::vector<double> errs(reps);
            for (std::size_t r = 0; r < reps; ++r) errs[r] = cell[e * reps + r][m];
            const double mean = std::accumulate(errs.begin(), errs.end(), 0.0) / static_cast<double>(reps);
            double se = 0.0;
            if (reps > 1) {
                double ss = 0.0;
                for (double x : errs) ss += (x - mean) * (x - mean);
                se = std::sqrt(ss / static_cast<double>(reps - 1)) / std::sqrt(static_cast<double>(reps));
            }
            out.rows.push_back({c.epsilon_grid[e], labels[m], mean, se, c.reps});
            out.per_rep.push_back(std::move(errs));
        }
    }
    return out;
}

inline std::vector<ResultRow> run_scenario(const ScenarioConfig& c) { return run_scenario_detailed(c).rows; }

inline void write_rows_csv(std::ostream& out, const std::vector<ResultRow>& rows) {
    out << "epsilon,method,mean_error,std_error,reps\n";
    for (const auto& r : rows)
        out << io::format_double(r.epsilon) << ',' << r.method << ',' << io::format_double(r.mean_error) << ','
            << io::format_double(r.std_error) << ',' << r.reps << '\n';
}

// epsilon,method,rep,error
inline void write_raw_csv(std::ostream& out, const ScenarioResult& res) {
    out << "epsilon,method,rep,error\n";
    for (std::size_t i = 0; i < res.rows.size(); ++i)
        for (std::size_t r = 0; r < res.per_rep[i].size(); ++r)
            out << io::format_double(res.rows[i].epsilon) << ',' << res.rows[i].method << ',' << r << ','
                << io::format_double(res.per_rep[i][r]) << '\n';
}

inline ScenarioResult run_curve_comparison(const ScenarioConfig& c, const std::string& out_path,
                                           const std::string& raw_path = {}) {
    ScenarioResult res = run_scenario_detailed(c);
    {
        auto out = io::detail::open_out(out_path);
        write_rows_csv(out, res.rows);
        if (!out) throw DataError("cannot write " + out_path);
    }
    if (!raw_path.empty()) {
        auto raw = io::detail::open_out(raw_path);
        write_raw_csv(raw, res);
        if (!raw) throw DataError("cannot write " + raw_path);
    }
    return res;
}

// ---------------------------------------------------------------------------
// config JSON
// ---------------------------------------------------------------------------

inline Method parse_method(std::string_view name) {
    if (name == "ITL") return Method::itl;
    if (name == "DP") return Method::dp;
    if (name == "ATC") return Method::atc;
    if (name == "TC(lambda*)" || name == "TC") return Method::tc_star;
    throw InvalidArgument("unknown method: " + std::string(name));
}

inline ScenarioConfig config_from_json(const io::json& j) {
    try {
        ScenarioConfig c;
        c.scenario_id = parse_scenario(j.at("scenario_id").get<std::string>());
        c.n = j.at("n").get<std::size_t>();
        c.k = j.value("k", 2);
        c.d = j.value("d", 0);
        c.upsilon = j.value("upsilon", 0.0);
        c.p = j.value("p", 0.0);
        c.q = j.value("q", 0.0);
        c.delta = j.value("delta", 0.0);
        c.epsilon_grid = j.at("epsilon_grid").get<std::vector<double>>();
        c.reps = j.at("reps").get<int>();
        if (j.contains("zeta_list")) c.zeta_list = j.at("zeta_list").get<std::vector<double>>();
        c.seed = j.value("seed", std::uint64_t{0});
        if (j.contains("b_reps") && !(j["b_reps"].is_string() && j["b_reps"] == "auto"))
            c.b_reps = j["b_reps"].get<int>();
        if (j.contains("grid") && !(j["grid"].is_string() && j["grid"] == "auto")) c.grid = io::grid_from_json(j["grid"]);
        c.estimate = j.value("estimate", false);
        c.fixed_direction = j.value("fixed_direction", false);
        if (j.contains("methods")) {
            c.methods.clear();
            for (const auto& m : j["methods"]) c.methods.push_back(parse_method(m.get<std::string>()));
        }
        c.threads = j.value("threads", std::size_t{0});
        validate(c);
        return c;
    } catch (const io::json::exception& e) {
        throw InvalidArgument(std::string("scenario config: ") + e.what());
    }
}

}  // namespace atc::sim
