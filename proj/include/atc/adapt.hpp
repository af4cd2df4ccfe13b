#pragma once
// Adaptive penalty selection.
//
// bootstrap_psi estimates, for every grid penalty, a high quantile of the
// distance between the penalized and the fully pooled solution on synthetic
// pairs that share their labels exactly. gl_select then compares solutions
// across the grid Goldenshluger-Lepski style, and atc() runs the whole
// pipeline on observed data.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <numeric>
#include <optional>
#include <vector>

#include "atc/core.hpp"
#include "atc/models.hpp"
#include "atc/parallel.hpp"
#include "atc/random.hpp"
#include "atc/tc.hpp"

namespace atc {

struct AdaptOptions {
    double inflation = 1.01;
    IcmOptions icm;
    std::size_t threads = 0;  // 0 = ATC_THREADS / hardware
};

// psi values on every grid point (the sentinel, when present, is last and
// always 0) together with the replicate distances they were computed from.
struct PsiEnvelope {
    PenaltyGrid grid;
    std::vector<double> values;
    double zeta = 0.1;
    int b_reps = 0;
    double inflation = 1.01;
    std::vector<std::vector<double>> replicate_distances;  // [replicate][grid point]
};

struct GlSelection {
    PenaltyGrid grid;
    std::size_t index = 0;  // position of lambda_hat in grid.points()
    Penalty lambda_hat;
    std::vector<double> phi;
    std::vector<double> objective;
    bool tie = false;  // several grid points attained the minimum; the smallest was taken
};

// ---------------------------------------------------------------------------
// grids and replicate counts
// ---------------------------------------------------------------------------

// M = ceil(log^2 n) steps of log(n)/M from 0 to log n, plus the sentinel.
inline PenaltyGrid default_grid(std::size_t n) {
    if (n < 2) throw InvalidArgument("default_grid: n must be >= 2");
    const double log_n = std::log(static_cast<double>(n));
    const auto m = static_cast<std::size_t>(std::ceil(log_n * log_n));
    std::vector<double> values(m + 1);
    for (std::size_t j = 0; j <= m; ++j) values[j] = static_cast<double>(j) * log_n / static_cast<double>(m);
    values[m] = log_n;
    return PenaltyGrid(std::move(values), true);
}

// ceil(C zeta^-2 log(M / zeta)) with C = 10.
inline int default_b_reps(double zeta, std::size_t grid_points) {
    if (!(zeta > 0.0 && zeta < 1.0)) throw InvalidArgument("default_b_reps: zeta must lie in (0,1)");
    const double m = static_cast<double>(std::max<std::size_t>(grid_points, 1));
    return static_cast<int>(std::ceil(10.0 / (zeta * zeta) * std::log(m / zeta)));
}

// ---------------------------------------------------------------------------
// bootstrap
// ---------------------------------------------------------------------------

// Distances D_b(lambda) = D(Z^{lambda,b}, Z^{inf,b}) for every replicate b
// and grid point, on synthetic pairs generated from one shared label draw.
inline std::vector<std::vector<double>> bootstrap_distances(const ModelSpec& theta0, const ModelSpec& theta1,
                                                            std::size_t n, const PenaltyGrid& grid, int b_reps,
                                                            const RandomStream& stream, const AdaptOptions& opts = {}) {
    if (b_reps < 1) throw InvalidArgument("bootstrap: b_reps must be >= 1");
    if (n < 1) throw InvalidArgument("bootstrap: n must be >= 1");
    if (theta0.k() != theta1.k()) throw DimensionError("bootstrap: cluster counts differ");

    const auto points = grid.points();
    const Eigen::VectorXd label_weights = theta0.label_weights();
    std::vector<std::vector<double>> dist(static_cast<std::size_t>(b_reps));

    parallel_for(
        dist.size(),
        [&](std::size_t b) {
            const RandomStream rep = split_stream(stream, b);
            const LabelVector shared = sample_labels(label_weights, n, split_stream(rep, 0));
            const LabelVector& z_target = shared;
            const LabelVector& z_source = shared;
            const Dataset x0 = sample(theta0, z_target, split_stream(rep, 1));
            const Dataset x1 = sample(theta1, z_source, split_stream(rep, 2));
            if (!(z_target == z_source)) throw Error("bootstrap: replicate labels must coincide");

            const TransferSolver solver(theta0, x0, theta1, x1, split_stream(rep, 3), opts.icm);
            const LabelVector pooled = solver.solve(Penalty::infinity()).z0;
            auto& row = dist[b];
            row.resize(points.size());
            for (std::size_t j = 0; j < points.size(); ++j)
                row[j] = points[j].is_infinite() ? 0.0 : hamming_distance(solver.solve(points[j]).z0, pooled);
        },
        opts.threads);
    return dist;
}

// psi(lambda) = inflation * (1 - zeta/2) empirical quantile of D_b(lambda).
inline PsiEnvelope envelope_from_distances(const PenaltyGrid& grid, std::vector<std::vector<double>> distances,
                                           double zeta, double inflation = 1.01) {
    if (!(zeta > 0.0 && zeta < 1.0)) throw InvalidArgument("bootstrap: zeta must lie in (0,1)");
    if (!(inflation > 0.0)) throw InvalidArgument("bootstrap: inflation must be > 0");
    if (distances.empty()) throw InvalidArgument("bootstrap: no replicates");
    const std::size_t m = grid.size();
    for (const auto& row : distances)
        if (row.size() != m) throw DimensionError("bootstrap: replicate row does not match the grid");
    PsiEnvelope env{grid, std::vector<double>(m), zeta, static_cast<int>(distances.size()), inflation,
                    std::move(distances)};
    std::vector<double> column(env.replicate_distances.size());
    for (std::size_t j = 0; j < m; ++j) {
        for (std::size_t b = 0; b < column.size(); ++b) column[b] = env.replicate_distances[b][j];
        env.values[j] = inflation * empirical_quantile(column, 1.0 - zeta / 2.0);
    }
    return env;
}

inline PsiEnvelope bootstrap_psi(const ModelSpec& theta0, const ModelSpec& theta1, std::size_t n,
                                 const PenaltyGrid& grid, double zeta, int b_reps, const RandomStream& stream,
                                 const AdaptOptions& opts = {}) {
    if (!(zeta > 0.0 && zeta < 1.0)) throw InvalidArgument("bootstrap_psi: zeta must lie in (0,1)");
    return envelope_from_distances(grid, bootstrap_distances(theta0, theta1, n, grid, b_reps, stream, opts), zeta,
                                   opts.inflation);
}

// ---------------------------------------------------------------------------
// selection
// ---------------------------------------------------------------------------

// phi(l) = max over l' < l of [D(Z^l, Z^l') - psi(l')]_+ ; lambda_hat is the
// smallest grid point minimizing phi + psi.
inline GlSelection gl_select(const std::vector<LabelVector>& solutions, const PsiEnvelope& psi) {
    const std::size_t m = psi.grid.size();
    if (solutions.size() != m || psi.values.size() != m)
        throw DimensionError("gl_select: solutions and psi must cover the same grid");
    GlSelection sel{psi.grid, 0, Penalty(), std::vector<double>(m, 0.0), std::vector<double>(m, 0.0), false};
    for (std::size_t j = 0; j < m; ++j) {
        double phi = 0.0;
        for (std::size_t jp = 0; jp < j; ++jp)
            phi = std::max(phi, hamming_distance(solutions[j], solutions[jp]) - psi.values[jp]);
        sel.phi[j] = phi;
        sel.objective[j] = phi + psi.values[j];
    }
    const auto best = std::min_element(sel.objective.begin(), sel.objective.end());
    sel.index = static_cast<std::size_t>(best - sel.objective.begin());
    sel.tie = std::count(sel.objective.begin(), sel.objective.end(), *best) > 1;
    sel.lambda_hat = psi.grid.points()[sel.index];
    return sel;
}

// Plug-in discrepancy estimate from independently clustered labels. It is
// inconsistent for small epsilon and is reported as a diagnostic only.
inline double naive_epsilon_hat(const LabelVector& z0_itl, const LabelVector& z1_itl) {
    return hamming_distance(z0_itl, z1_itl);
}

// ---------------------------------------------------------------------------
// driver
// ---------------------------------------------------------------------------

// A (target, source) pair with the source labels matched to the target and
// everything that does not depend on lambda precomputed.
struct TransferProblem {
    ModelSpec target;
    ModelSpec source;  // relabeled to agree with the target
    std::size_t n;
    std::optional<TransferSolver> solver;
    LabelVector itl_target, itl_source;
    std::vector<int> source_permutation;
};

// Independent fits fix the correspondence between source and target labels;
// the source model is relabeled by the matching permutation.
inline TransferProblem prepare_transfer(const Dataset& x0, const Dataset& x1, const ModelSpec& theta0,
                                        const ModelSpec& theta1, const RandomStream& init_stream,
                                        const AdaptOptions& opts = {}) {
    const std::size_t n = sample_count(x0);
    if (sample_count(x1) != n) throw DimensionError("atc: target and source sample counts differ");
    TransferProblem prob{theta0, theta1, n, std::nullopt, {}, {}, {}};
    prob.solver.emplace(theta0, x0, theta1, x1, init_stream, opts.icm);
    const TcSolution independent = prob.solver->solve(Penalty(0.0));
    Alignment alignment = align_labels(independent.z0, independent.z1);
    std::vector<int> identity(static_cast<std::size_t>(theta1.k()));
    std::iota(identity.begin(), identity.end(), 0);
    if (alignment.permutation != identity) {
        prob.source = permute_labels(theta1, alignment.permutation);
        prob.solver.emplace(theta0, x0, prob.source, x1, init_stream, opts.icm);
    }
    prob.itl_target = independent.z0;
    prob.itl_source = std::move(alignment.aligned);
    prob.source_permutation = std::move(alignment.permutation);
    return prob;
}

struct AtcResult {
    LabelVector labels;  // target labels at lambda_hat
    GlSelection selection;
    PsiEnvelope psi;
    std::vector<TcSolution> solutions;  // one per grid point
    LabelVector itl_target, itl_source;  // source already aligned to the target
    std::vector<int> source_permutation;
    double epsilon_hat_naive = 0.0;
};

inline std::vector<TcSolution> solve_grid(const TransferProblem& prob, const PenaltyGrid& grid) {
    std::vector<TcSolution> out;
    for (const auto& lam : grid.points()) out.push_back(prob.solver->solve(lam));
    return out;
}

// Selection step given grid solutions and an envelope on the same grid.
inline AtcResult select_adaptive(const TransferProblem& prob, std::vector<TcSolution> solutions, PsiEnvelope psi) {
    std::vector<LabelVector> target_labels;
    target_labels.reserve(solutions.size());
    for (const auto& s : solutions) target_labels.push_back(s.z0);
    GlSelection sel = gl_select(target_labels, psi);
    LabelVector chosen = target_labels[sel.index];
    return AtcResult{std::move(chosen),    std::move(sel),         std::move(psi),
                     std::move(solutions), prob.itl_target,        prob.itl_source,
                     prob.source_permutation, naive_epsilon_hat(prob.itl_target, prob.itl_source)};
}

inline AtcResult atc(const Dataset& x0, const Dataset& x1, const ModelSpec& theta0, const ModelSpec& theta1,
                     const PenaltyGrid& grid, double zeta, int b_reps, const RandomStream& stream,
                     const AdaptOptions& opts = {}) {
    const TransferProblem prob = prepare_transfer(x0, x1, theta0, theta1, split_stream(stream, 0), opts);
    PsiEnvelope psi = bootstrap_psi(prob.target, prob.source, prob.n, grid, zeta, b_reps, split_stream(stream, 1), opts);
    return select_adaptive(prob, solve_grid(prob, grid), std::move(psi));
}

}  // namespace atc
