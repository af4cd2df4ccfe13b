#pragma once
// Plug-in estimators for the nuisance parameters of each model family:
// k-means++ / Lloyd, spectral clustering for networks, and EM for the
// mixture families.

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <numeric>
#include <vector>

#include "atc/core.hpp"
#include "atc/models.hpp"
#include "atc/random.hpp"

namespace atc {

struct EstimationOptions {
    double split_fraction = 0.0;  // 0 = plug-in on the full data
    int restarts = 5;
    int max_iter = 200;
    double tolerance = 1e-8;
    int sym_gmm2_em_steps = 10;
};

namespace detail {

struct KMeansResult {
    std::vector<int> labels;
    Eigen::MatrixXd centers;  // k x d
};

// k-means++ seeding followed by Lloyd iterations. Throws EstimationError if
// a cluster ends up empty.
inline KMeansResult kmeans(const Eigen::MatrixXd& x, int k, const RandomStream& stream, int max_iter = 100) {
    const Eigen::Index n = x.rows();
    if (k > n) throw EstimationError("kmeans: more clusters than points");
    auto eng = stream.engine();
    Eigen::MatrixXd centers(k, x.cols());
    std::vector<double> d2(static_cast<std::size_t>(n), std::numeric_limits<double>::infinity());

    auto first = static_cast<Eigen::Index>(eng.uniform() * static_cast<double>(n));
    centers.row(0) = x.row(std::min(first, n - 1));
    for (int c = 1; c < k; ++c) {
        double total = 0.0;
        for (Eigen::Index i = 0; i < n; ++i) {
            d2[i] = std::min(d2[i], (x.row(i) - centers.row(c - 1)).squaredNorm());
            total += d2[i];
        }
        Eigen::Index pick = n - 1;
        if (total > 0.0) {
            const double u = eng.uniform() * total;
            double acc = 0.0;
            for (Eigen::Index i = 0; i < n; ++i) {
                acc += d2[i];
                if (u < acc) {
                    pick = i;
                    break;
                }
            }
        } else {
            pick = std::min(static_cast<Eigen::Index>(eng.uniform() * static_cast<double>(n)), n - 1);
        }
        centers.row(c) = x.row(pick);
    }

    std::vector<int> labels(static_cast<std::size_t>(n), -1);
    for (int it = 0; it < max_iter; ++it) {
        bool changed = false;
        for (Eigen::Index i = 0; i < n; ++i) {
            int best = 0;
            double best_d = std::numeric_limits<double>::infinity();
            for (int c = 0; c < k; ++c) {
                const double d = (x.row(i) - centers.row(c)).squaredNorm();
                if (d < best_d) {
                    best_d = d;
                    best = c;
                }
            }
            if (labels[i] != best) {
                labels[i] = best;
                changed = true;
            }
        }
        Eigen::MatrixXd sums = Eigen::MatrixXd::Zero(k, x.cols());
        std::vector<int> counts(k, 0);
        for (Eigen::Index i = 0; i < n; ++i) {
            sums.row(labels[i]) += x.row(i);
            ++counts[labels[i]];
        }
        for (int c = 0; c < k; ++c) {
            if (counts[c] == 0) throw EstimationError("kmeans: empty cluster");
            centers.row(c) = sums.row(c) / counts[c];
        }
        if (!changed) break;
    }
    return {std::move(labels), std::move(centers)};
}

template <class Fn>
auto with_restarts(const RandomStream& stream, int restarts, Fn&& fn) {
    for (int r = 0;; ++r) {
        try {
            return fn(split_stream(stream, static_cast<std::uint64_t>(r)));
        } catch (const EstimationError&) {
            if (r + 1 >= std::max(1, restarts)) throw;
        }
    }
}

inline double log_sum_exp_neg(std::span<const double> costs) {
    const double m = *std::min_element(costs.begin(), costs.end());
    double s = 0.0;
    for (double c : costs) s += std::exp(m - c);
    return -m + std::log(s);
}

}  // namespace detail

namespace detail {

// LU with partial pivoting of a tridiagonal matrix (diag d, sub = super = e),
// then solves in place. Zero pivots are replaced by `tiny`, which is what
// inverse iteration at an exact eigenvalue needs.
inline void tridiagonal_solve(Eigen::VectorXd d, Eigen::VectorXd dl, Eigen::VectorXd du, Eigen::VectorXd& x,
                              double tiny) {
    const Eigen::Index n = d.size();
    Eigen::VectorXd du2 = Eigen::VectorXd::Zero(std::max<Eigen::Index>(n - 2, 0));
    std::vector<bool> swapped(static_cast<std::size_t>(std::max<Eigen::Index>(n - 1, 0)), false);
    for (Eigen::Index i = 0; i + 1 < n; ++i) {
        if (std::abs(d[i]) >= std::abs(dl[i])) {
            if (d[i] == 0.0) d[i] = tiny;
            const double f = dl[i] / d[i];
            dl[i] = f;
            d[i + 1] -= f * du[i];
        } else {
            const double f = d[i] / dl[i];
            d[i] = dl[i];
            dl[i] = f;
            const double t = du[i];
            du[i] = d[i + 1];
            d[i + 1] = t - f * d[i + 1];
            if (i + 2 < n) {
                du2[i] = du[i + 1];
                du[i + 1] = -f * du[i + 1];
            }
            swapped[static_cast<std::size_t>(i)] = true;
        }
    }
    if (d[n - 1] == 0.0) d[n - 1] = tiny;
    for (Eigen::Index i = 0; i + 1 < n; ++i) {
        if (!swapped[static_cast<std::size_t>(i)]) {
            x[i + 1] -= dl[i] * x[i];
        } else {
            const double t = x[i] - dl[i] * x[i + 1];
            x[i] = x[i + 1];
            x[i + 1] = t;
        }
    }
    x[n - 1] /= d[n - 1];
    if (n > 1) x[n - 2] = (x[n - 2] - du[n - 2] * x[n - 1]) / d[n - 2];
    for (Eigen::Index i = n - 3; i >= 0; --i) x[i] = (x[i] - du[i] * x[i + 1] - du2[i] * x[i + 2]) / d[i];
}

// Eigenvectors for the k eigenvalues of largest magnitude (ties by position).
// Householder tridiagonalization, eigenvalues of the tridiagonal, inverse
// iteration for the selected ones only, back-transform.
inline Eigen::MatrixXd top_abs_eigenvectors(const Eigen::MatrixXd& a, int k) {
    const Eigen::Index n = a.rows();
    std::vector<Eigen::Index> order(static_cast<std::size_t>(n));
    std::iota(order.begin(), order.end(), 0);
    Eigen::MatrixXd out(n, k);

    if (n <= 64) {
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(a);
        if (eig.info() != Eigen::Success) throw EstimationError("spectral_clustering: eigensolver failed");
        const auto& ev = eig.eigenvalues();
        std::stable_sort(order.begin(), order.end(),
                         [&](Eigen::Index x, Eigen::Index y) { return std::abs(ev[x]) > std::abs(ev[y]); });
        for (int c = 0; c < k; ++c) out.col(c) = eig.eigenvectors().col(order[static_cast<std::size_t>(c)]);
        return out;
    }

    Eigen::Tridiagonalization<Eigen::MatrixXd> tri(a);
    const Eigen::VectorXd diag = tri.diagonal();
    const Eigen::VectorXd sub = tri.subDiagonal();
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> vals;
    vals.computeFromTridiagonal(diag, sub, Eigen::EigenvaluesOnly);
    if (vals.info() != Eigen::Success) throw EstimationError("spectral_clustering: eigensolver failed");
    const auto& ev = vals.eigenvalues();
    std::stable_sort(order.begin(), order.end(),
                     [&](Eigen::Index x, Eigen::Index y) { return std::abs(ev[x]) > std::abs(ev[y]); });

    const double scale = std::max(diag.cwiseAbs().maxCoeff(), sub.size() ? sub.cwiseAbs().maxCoeff() : 0.0);
    const double tiny = std::numeric_limits<double>::epsilon() * std::max(scale, 1.0);
    Eigen::MatrixXd y(n, k);
    for (int c = 0; c < k; ++c) {
        const double theta = ev[order[static_cast<std::size_t>(c)]];
        Eigen::VectorXd shifted = diag.array() - theta;
        Eigen::VectorXd v(n);
        for (Eigen::Index i = 0; i < n; ++i) v[i] = 1.0 + 0.01 * static_cast<double>((i * 7919) % 101) / 101.0;
        for (int it = 0; it < 4; ++it) {
            tridiagonal_solve(shifted, sub, sub, v, tiny);
            for (int p = 0; p < c; ++p) v -= y.col(p).dot(v) * y.col(p);
            v /= v.norm();
        }
        y.col(c) = v;
    }
    out = tri.matrixQ() * y;
    return out;
}

}  // namespace detail

// Spectral clustering: k eigenvectors of the adjacency with the largest
// |eigenvalue|, rows clustered by k-means.
inline LabelVector spectral_clustering(const AdjacencyMatrix& adjacency, int k, const RandomStream& stream,
                                       int restarts = 5) {
    const auto n = static_cast<Eigen::Index>(adjacency.size());
    if (k > n) throw EstimationError("spectral_clustering: k > n");
    const Eigen::MatrixXd embed = detail::top_abs_eigenvectors(adjacency.to_dense(), k);
    auto km = detail::with_restarts(stream, restarts, [&](const RandomStream& s) { return detail::kmeans(embed, k, s); });
    return LabelVector(std::move(km.labels), k);
}

// Block-average estimates of (pi, B) given node labels.
inline SbmParams sbm_block_estimates(const AdjacencyMatrix& adjacency, const LabelVector& labels) {
    const int k = labels.k();
    const std::size_t n = adjacency.size();
    Eigen::VectorXd sizes = Eigen::VectorXd::Zero(k);
    for (std::size_t i = 0; i < n; ++i) sizes[labels[i]] += 1.0;
    if ((sizes.array() <= 0.0).any()) throw EstimationError("sbm estimate: empty block");
    Eigen::MatrixXd edges = Eigen::MatrixXd::Zero(k, k);
    for (std::size_t i = 0; i < n; ++i)
        for (auto j : adjacency.neighbors(i))
            if (j > i) {
                edges(labels[i], labels[j]) += 1.0;
                if (labels[i] != labels[j]) edges(labels[j], labels[i]) += 1.0;
            }
    Eigen::MatrixXd link(k, k);
    for (int a = 0; a < k; ++a)
        for (int b = 0; b < k; ++b) {
            const double pairs = a == b ? sizes[a] * (sizes[a] - 1.0) / 2.0 : sizes[a] * sizes[b];
            link(a, b) = pairs > 0.0 ? edges(a, b) / pairs : 0.5;
        }
    return make_sbm(sizes / static_cast<double>(n), link);
}

namespace detail {

inline SymGmm2Params estimate_sym_gmm2(const Eigen::MatrixXd& x, int em_steps) {
    const auto n = static_cast<double>(x.rows());
    const auto d = static_cast<double>(x.cols());
    const Eigen::MatrixXd second = x.transpose() * x / n;
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(second);
    const Eigen::VectorXd v = eig.eigenvectors().col(x.cols() - 1);
    const Eigen::VectorXd proj = x * v;
    Eigen::VectorXd mu = Eigen::VectorXd::Zero(x.cols());
    for (Eigen::Index i = 0; i < x.rows(); ++i) mu += (proj[i] >= 0.0 ? 1.0 : -1.0) * x.row(i).transpose();
    mu /= n;
    double s2 = 0.0;
    for (Eigen::Index i = 0; i < x.rows(); ++i)
        s2 += (x.row(i).transpose() - (proj[i] >= 0.0 ? 1.0 : -1.0) * mu).squaredNorm();
    s2 = std::max(s2 / (n * d), 1e-12);

    const double sq_total = x.squaredNorm();
    for (int it = 0; it < em_steps; ++it) {
        const Eigen::VectorXd xm = x * mu;
        // E[Z_i | X_i] for Z in {+1, -1} with equal weights
        const Eigen::VectorXd t = (xm.array() / s2).tanh().matrix();
        mu = x.transpose() * t / n;
        s2 = std::max((sq_total - 2.0 * t.dot(x * mu) + n * mu.squaredNorm()) / (n * d), 1e-12);
    }
    return make_sym_gmm2(mu, std::sqrt(s2));
}

inline GmmKParams gmm_k_from_responsibilities(const Eigen::MatrixXd& x, const Eigen::MatrixXd& resp) {
    const int k = static_cast<int>(resp.cols());
    const Eigen::Index d = x.cols();
    Eigen::VectorXd w = resp.colwise().sum().transpose();
    if ((w.array() <= 1e-12).any()) throw EstimationError("gmm_k: empty cluster");
    std::vector<Eigen::VectorXd> means(k);
    std::vector<Eigen::MatrixXd> covs(k);
    for (int c = 0; c < k; ++c) {
        means[c] = x.transpose() * resp.col(c) / w[c];
        const Eigen::MatrixXd centered = x.rowwise() - means[c].transpose();
        covs[c] = centered.transpose() * resp.col(c).asDiagonal() * centered / w[c];
        covs[c] = 0.5 * (covs[c] + covs[c].transpose()) + 1e-6 * Eigen::MatrixXd::Identity(d, d);
    }
    return make_gmm_k(w / w.sum(), std::move(means), std::move(covs));
}

inline LcmParams lcm_from_responsibilities(const Eigen::MatrixXd& x, const Eigen::MatrixXd& resp) {
    Eigen::VectorXd w = resp.colwise().sum().transpose();
    if ((w.array() <= 1e-12).any()) throw EstimationError("lcm: empty cluster");
    Eigen::MatrixXd p = x.transpose() * resp;  // d x K
    for (Eigen::Index c = 0; c < p.cols(); ++c) p.col(c) /= w[c];
    p = p.unaryExpr([](double v) { return clip_probability(v); });
    return make_lcm(w / w.sum(), std::move(p));
}

inline Eigen::MatrixXd hard_responsibilities(const std::vector<int>& labels, int k) {
    Eigen::MatrixXd r = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(labels.size()), k);
    for (std::size_t i = 0; i < labels.size(); ++i) r(static_cast<Eigen::Index>(i), labels[i]) = 1.0;
    return r;
}

// Generic EM over a separable family given an M-step functor.
template <class MStep>
ModelSpec run_em(const Eigen::MatrixXd& x, int k, const std::vector<int>& init, const EstimationOptions& opts,
                 MStep&& m_step) {
    ModelSpec spec = m_step(x, hard_responsibilities(init, k));
    const FeatureMatrix data{x};
    double prev = -std::numeric_limits<double>::infinity();
    for (int it = 0; it < opts.max_iter; ++it) {
        const NegLogPostMatrix nlp = neg_log_post(spec, data);
        Eigen::MatrixXd resp(x.rows(), k);
        double loglik = 0.0;
        for (std::size_t i = 0; i < nlp.rows(); ++i) {
            const double lse = log_sum_exp_neg(nlp.row(i));
            loglik += lse;
            for (int c = 0; c < k; ++c) resp(static_cast<Eigen::Index>(i), c) = std::exp(-nlp(i, c) - lse);
        }
        if (std::abs(loglik - prev) < opts.tolerance) break;
        prev = loglik;
        spec = m_step(x, resp);
    }
    return spec;
}

inline std::vector<std::size_t> estimation_subset(std::size_t n, int k, double fraction, const RandomStream& stream) {
    std::vector<std::size_t> idx(n);
    std::iota(idx.begin(), idx.end(), 0);
    if (fraction <= 0.0) return idx;
    if (fraction >= 1.0) throw InvalidArgument("split_fraction must lie in [0, 1)");
    auto m = static_cast<std::size_t>(std::ceil(fraction * static_cast<double>(n)));
    m = std::max<std::size_t>(m, static_cast<std::size_t>(k) + 1);
    if (m > n) throw EstimationError("split_fraction leaves too few samples");
    auto eng = stream.engine();
    for (std::size_t i = 0; i < m; ++i) {
        const auto j = i + std::min(static_cast<std::size_t>(eng.uniform() * static_cast<double>(n - i)), n - i - 1);
        std::swap(idx[i], idx[j]);
    }
    idx.resize(m);
    std::sort(idx.begin(), idx.end());
    return idx;
}

}  // namespace detail

inline ModelSpec estimate_params(ModelFamily family, const Dataset& data, int k, const RandomStream& stream,
                                 const EstimationOptions& opts = {}) {
    const std::size_t n = sample_count(data);
    if (k < 2) throw InvalidArgument("estimate_params: k must be >= 2");
    if (static_cast<std::size_t>(k) > n) throw EstimationError("estimate_params: k > n");
    const auto subset = detail::estimation_subset(n, k, opts.split_fraction, split_stream(stream, 0));
    const RandomStream init_stream = split_stream(stream, 1);

    if (family == ModelFamily::sbm) {
        const AdjacencyMatrix& full = adjacency_of(data);
        const AdjacencyMatrix sub = subset.size() == n ? full : full.subgraph(subset);
        return detail::with_restarts(init_stream, opts.restarts, [&](const RandomStream& s) {
            const LabelVector z = spectral_clustering(sub, k, s, 1);
            return ModelSpec(sbm_block_estimates(sub, z));
        });
    }

    const Eigen::MatrixXd& all = features_of(data).values;
    Eigen::MatrixXd x(static_cast<Eigen::Index>(subset.size()), all.cols());
    for (std::size_t r = 0; r < subset.size(); ++r) x.row(static_cast<Eigen::Index>(r)) = all.row(static_cast<Eigen::Index>(subset[r]));

    switch (family) {
        case ModelFamily::sym_gmm2:
            if (k != 2) throw InvalidArgument("estimate_params: sym_gmm2 has exactly two clusters");
            return ModelSpec(detail::estimate_sym_gmm2(x, opts.sym_gmm2_em_steps));
        case ModelFamily::gmm_k:
            return detail::with_restarts(init_stream, opts.restarts, [&](const RandomStream& s) {
                const auto km = detail::kmeans(x, k, s);
                return detail::run_em(x, k, km.labels, opts, [](const Eigen::MatrixXd& xx, const Eigen::MatrixXd& r) {
                    return ModelSpec(detail::gmm_k_from_responsibilities(xx, r));
                });
            });
        case ModelFamily::lcm:
            return detail::with_restarts(init_stream, opts.restarts, [&](const RandomStream& s) {
                const auto km = detail::kmeans(x, k, s);
                return detail::run_em(x, k, km.labels, opts, [](const Eigen::MatrixXd& xx, const Eigen::MatrixXd& r) {
                    return ModelSpec(detail::lcm_from_responsibilities(xx, r));
                });
            });
        case ModelFamily::sbm: break;
    }
    throw InvalidArgument("estimate_params: unknown family");
}

}  // namespace atc
