#pragma once
// Penalized transfer clustering.
//
// Given per-sample costs a_i(u) for the target and b_i(v) for the source,
// the separable solver picks, for every sample independently,
//
//     (u, v) = argmin a_i(u) + b_i(v) + lambda * 1{u != v}
//
// with ties resolved toward u == v, then the smallest u, then the smallest v.
// lambda = infinity is the hard-agreement path. When one side is an SBM the
// posterior is not separable and the same per-site rule is applied inside an
// iterated-conditional-modes sweep.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <limits>
#include <optional>
#include <span>
#include <utility>
#include <vector>

#include "atc/core.hpp"
#include "atc/estimate.hpp"
#include "atc/models.hpp"
#include "atc/neg_log_post_matrix.hpp"

namespace atc {

struct TcSolution {
    LabelVector z0;  // target labels
    LabelVector z1;  // source labels
    double objective = 0.0;
    double disagreement = 0.0;
    int sweeps = 0;         // ICM sweeps; 0 for the separable solver
    bool converged = true;  // ICM reached a fixed point
};

namespace detail {

struct PairChoice {
    int u;
    int v;
    double cost;
};

// Optimal (u, v) for one sample, O(k).
inline PairChoice best_pair(std::span<const double> a, std::span<const double> b, Penalty lambda) {
    const int k = static_cast<int>(a.size());
    int agree = 0;
    double agree_cost = a[0] + b[0];
    for (int c = 1; c < k; ++c) {
        const double s = a[c] + b[c];
        if (s < agree_cost) {
            agree_cost = s;
            agree = c;
        }
    }
    if (lambda.is_infinite()) return {agree, agree, agree_cost};

    // smallest b over v != u from the two smallest entries of b
    int b1 = 0;
    for (int c = 1; c < k; ++c)
        if (b[c] < b[b1]) b1 = c;
    double b2 = std::numeric_limits<double>::infinity();
    for (int c = 0; c < k; ++c)
        if (c != b1) b2 = std::min(b2, b[c]);

    const double lam = lambda.value();
    int du = -1;
    double dis_cost = std::numeric_limits<double>::infinity();
    for (int u = 0; u < k; ++u) {
        const double s = (a[u] + (u == b1 ? b2 : b[b1])) + lam;
        if (s < dis_cost) {
            dis_cost = s;
            du = u;
        }
    }
    if (agree_cost <= dis_cost) return {agree, agree, agree_cost};
    int dv = du == b1 ? -1 : b1;
    for (int v = 0; v < k; ++v)
        if (v != du && (a[du] + b[v]) + lam == dis_cost) {
            dv = v;
            break;
        }
    return {du, dv, dis_cost};
}

inline void require_same_shape(const NegLogPostMatrix& a, const NegLogPostMatrix& b) {
    if (a.rows() != b.rows() || a.k() != b.k()) throw DimensionError("cost matrices differ in shape");
}

}  // namespace detail

inline TcSolution tc_separable(const NegLogPostMatrix& a, const NegLogPostMatrix& b, Penalty lambda) {
    detail::require_same_shape(a, b);
    const std::size_t n = a.rows();
    std::vector<int> z0(n), z1(n);
    double objective = 0.0;
    std::size_t diff = 0;
    for (std::size_t i = 0; i < n; ++i) {
        const auto choice = detail::best_pair(a.row(i), b.row(i), lambda);
        z0[i] = choice.u;
        z1[i] = choice.v;
        objective += choice.cost;
        diff += choice.u != choice.v;
    }
    TcSolution sol{LabelVector(std::move(z0), a.k()), LabelVector(std::move(z1), a.k()), objective,
                   static_cast<double>(diff) / static_cast<double>(n)};
    return sol;
}

// Row-wise argmin (smallest index on ties).
inline LabelVector itl(const NegLogPostMatrix& a) {
    std::vector<int> z(a.rows());
    for (std::size_t i = 0; i < a.rows(); ++i) {
        const auto r = a.row(i);
        z[i] = static_cast<int>(std::min_element(r.begin(), r.end()) - r.begin());
    }
    return LabelVector(std::move(z), a.k());
}

// Row-wise argmin of a + b.
inline LabelVector dp(const NegLogPostMatrix& a, const NegLogPostMatrix& b) {
    detail::require_same_shape(a, b);
    std::vector<int> z(a.rows());
    for (std::size_t i = 0; i < a.rows(); ++i) {
        int best = 0;
        double best_cost = a(i, 0) + b(i, 0);
        for (int c = 1; c < a.k(); ++c) {
            const double s = a(i, c) + b(i, c);
            if (s < best_cost) {
                best_cost = s;
                best = c;
            }
        }
        z[i] = best;
    }
    return LabelVector(std::move(z), a.k());
}

// ---------------------------------------------------------------------------
// network (SBM) side: iterated conditional modes
// ---------------------------------------------------------------------------

enum class NetworkRole { target, source };

struct IcmOptions {
    int max_sweeps = 100;
};

namespace detail {

// Neighbor counts per block for every node, kept in sync with the labels so
// each site cost is O(k^2).
class SbmSiteCosts {
public:
    SbmSiteCosts(const SbmParams& params, const AdjacencyMatrix& adj, const LabelVector& z)
        : adj_(adj), k_(static_cast<int>(params.weights.size())), n_(adj.size()) {
        log_b_.resize(k_ * k_);
        log_1mb_.resize(k_ * k_);
        for (int a = 0; a < k_; ++a)
            for (int b = 0; b < k_; ++b) {
                log_b_[a * k_ + b] = std::log(params.link(a, b));
                log_1mb_[a * k_ + b] = std::log1p(-params.link(a, b));
            }
        log_pi_.resize(k_);
        for (int a = 0; a < k_; ++a) log_pi_[a] = std::log(params.weights[a]);
        reset(z);
    }

    void reset(const LabelVector& z) {
        labels_.assign(z.values().begin(), z.values().end());
        sizes_.assign(k_, 0);
        counts_.assign(n_ * k_, 0);
        for (std::size_t i = 0; i < n_; ++i) {
            ++sizes_[labels_[i]];
            for (auto j : adj_.neighbors(i)) ++counts_[i * k_ + z[j]];
        }
    }

    // Cost of each label for node i given all other labels.
    void site_costs(std::size_t i, std::span<double> out) const {
        for (int u = 0; u < k_; ++u) {
            double s = -log_pi_[u];
            for (int l = 0; l < k_; ++l) {
                const double m = counts_[i * k_ + l];
                const double others = sizes_[l] - (labels_[i] == l ? 1 : 0);
                s -= m * log_b_[u * k_ + l] + (others - m) * log_1mb_[u * k_ + l];
            }
            out[u] = s;
        }
    }

    void relabel(std::size_t i, int label) {
        const int old = labels_[i];
        if (old == label) return;
        --sizes_[old];
        ++sizes_[label];
        for (auto j : adj_.neighbors(i)) {
            --counts_[j * k_ + old];
            ++counts_[j * k_ + label];
        }
        labels_[i] = label;
    }

    // Negative log posterior over pairs i < j, from block counts.
    double total() const {
        std::vector<double> edges(k_ * k_, 0.0);
        for (std::size_t i = 0; i < n_; ++i)
            for (int l = 0; l < k_; ++l) edges[labels_[i] * k_ + l] += counts_[i * k_ + l];
        double s = 0.0;
        for (int a = 0; a < k_; ++a) {
            s -= sizes_[a] * log_pi_[a];
            for (int b = a; b < k_; ++b) {
                const double e = a == b ? edges[a * k_ + a] / 2.0 : edges[a * k_ + b];
                const double pairs = a == b ? 0.5 * sizes_[a] * (sizes_[a] - 1.0)
                                            : static_cast<double>(sizes_[a]) * sizes_[b];
                s -= e * log_b_[a * k_ + b] + (pairs - e) * log_1mb_[a * k_ + b];
            }
        }
        return s;
    }

    int label(std::size_t i) const { return labels_[i]; }
    LabelVector labels() const { return LabelVector(labels_, k_); }

private:
    const AdjacencyMatrix& adj_;
    int k_;
    std::size_t n_;
    std::vector<double> log_b_, log_1mb_, log_pi_;
    std::vector<int> labels_;
    std::vector<int> sizes_;
    std::vector<int> counts_;
};

}  // namespace detail

// Observer invoked after every site update with the current objective.
using IcmObserver = std::function<void(double)>;

inline TcSolution tc_network(const SbmParams& sbm, const AdjacencyMatrix& adjacency, const NegLogPostMatrix& other,
                             Penalty lambda, const LabelVector& init_network, const LabelVector& init_other,
                             NetworkRole role = NetworkRole::target, IcmOptions opts = {},
                             const IcmObserver& observer = {}) {
    const std::size_t n = adjacency.size();
    const int k = static_cast<int>(sbm.weights.size());
    if (other.rows() != n || other.k() != k) throw DimensionError("tc_network: cost matrix shape mismatch");
    if (init_network.size() != n || init_other.size() != n || init_network.k() != k || init_other.k() != k)
        throw DimensionError("tc_network: initial labels shape mismatch");

    // The hard constraint needs a feasible start.
    LabelVector z_other = lambda.is_infinite() ? init_network : init_other;
    detail::SbmSiteCosts net(sbm, adjacency, init_network);

    auto disagreements = [&] {
        std::size_t d = 0;
        for (std::size_t i = 0; i < n; ++i) d += net.label(i) != z_other[i];
        return d;
    };
    auto objective = [&] {
        double s = net.total();
        for (std::size_t i = 0; i < n; ++i) s += other(i, z_other[i]);
        const auto d = disagreements();
        if (d > 0) s += lambda.is_infinite() ? std::numeric_limits<double>::infinity() : lambda.value() * d;
        return s;
    };

    std::vector<double> site(k);
    int sweeps = 0;
    bool converged = false;
    while (sweeps < opts.max_sweeps) {
        ++sweeps;
        std::size_t changes = 0;
        for (std::size_t i = 0; i < n; ++i) {
            net.site_costs(i, site);
            const auto row = other.row(i);
            const auto choice = role == NetworkRole::target ? detail::best_pair(site, row, lambda)
                                                            : detail::best_pair(row, site, lambda);
            const int net_new = role == NetworkRole::target ? choice.u : choice.v;
            const int oth_new = role == NetworkRole::target ? choice.v : choice.u;
            const int net_old = net.label(i), oth_old = z_other[i];
            if (net_new == net_old && oth_new == oth_old) continue;
            // keep the current pair unless the new one is strictly better
            double current = site[net_old] + row[oth_old];
            if (net_old != oth_old)
                current += lambda.is_infinite() ? std::numeric_limits<double>::infinity() : lambda.value();
            if (!(choice.cost < current)) continue;
            net.relabel(i, net_new);
            z_other.set(i, oth_new);
            ++changes;
            if (observer) observer(objective());
        }
        if (changes == 0) {
            converged = true;
            break;
        }
    }

    LabelVector z_net = net.labels();
    const double obj = objective();
    const double dis = static_cast<double>(disagreements()) / static_cast<double>(n);
    if (role == NetworkRole::target) return {std::move(z_net), std::move(z_other), obj, dis, sweeps, converged};
    return {std::move(z_other), std::move(z_net), obj, dis, sweeps, converged};
}

// ICM starting point: the other side from its row-wise argmin, the network
// side from spectral clustering aligned to it.
struct NetworkInit {
    LabelVector network;
    LabelVector other;
};

inline NetworkInit network_init(const AdjacencyMatrix& adjacency, const NegLogPostMatrix& other,
                                const RandomStream& stream) {
    LabelVector z_other = itl(other);
    LabelVector z_net = spectral_clustering(adjacency, other.k(), stream);
    return {align_labels(z_other, z_net).aligned, std::move(z_other)};
}

// ---------------------------------------------------------------------------
// TransferSolver: TC for any supported (target, source) pair
// ---------------------------------------------------------------------------

// Precomputes everything that does not depend on lambda, so the solve can be
// repeated over a grid.
class TransferSolver {
public:
    TransferSolver(const ModelSpec& target, const Dataset& x0, const ModelSpec& source, const Dataset& x1,
                   const RandomStream& init_stream, IcmOptions icm = {})
        : icm_(icm) {
        if (target.k() != source.k()) throw DimensionError("TransferSolver: cluster counts differ");
        if (sample_count(x0) != sample_count(x1)) throw DimensionError("TransferSolver: sample counts differ");
        if (target.is_network() && source.is_network())
            throw InvalidArgument("TransferSolver: two network layers are not supported");

        if (target.is_separable() && source.is_separable()) {
            a_ = neg_log_post(target, x0);
            b_ = neg_log_post(source, x1);
            return;
        }
        role_ = target.is_network() ? NetworkRole::target : NetworkRole::source;
        const ModelSpec& net_spec = target.is_network() ? target : source;
        const Dataset& net_data = target.is_network() ? x0 : x1;
        sbm_ = net_spec.as<SbmParams>();
        adjacency_ = adjacency_of(net_data);
        a_ = target.is_network() ? neg_log_post(source, x1) : neg_log_post(target, x0);  // the separable side
        if (adjacency_->size() != a_.rows()) throw DimensionError("TransferSolver: sample counts differ");
        init_ = network_init(*adjacency_, a_, init_stream);
    }

    bool is_network() const noexcept { return sbm_.has_value(); }

    TcSolution solve(Penalty lambda) const {
        if (!is_network()) return tc_separable(a_, b_, lambda);
        return tc_network(*sbm_, *adjacency_, a_, lambda, init_->network, init_->other, role_, icm_);
    }

private:
    IcmOptions icm_;
    NegLogPostMatrix a_, b_;
    std::optional<SbmParams> sbm_;
    std::optional<AdjacencyMatrix> adjacency_;
    std::optional<NetworkInit> init_;
    NetworkRole role_ = NetworkRole::target;
};

}  // namespace atc
