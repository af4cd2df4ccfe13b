#pragma once
// Generative model families, samplers and per-sample negative log posteriors.
//
//   sym_gmm2 : X_i ~ N(+mu, sigma^2 I) for label 0, N(-mu, sigma^2 I) for label 1
//   gmm_k    : X_i ~ N(mu_k, Sigma_k), P(Z_i = k) = pi_k
//   lcm      : X_ij ~ Bernoulli(P_{j, Z_i}), binary d-vectors
//   sbm      : A_ij ~ Bernoulli(B_{Z_i, Z_j}) for i < j, symmetric, zero diagonal

#include <Eigen/Cholesky>
#include <Eigen/Core>

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <numbers>
#include <random>
#include <span>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "atc/core.hpp"
#include "atc/neg_log_post_matrix.hpp"
#include "atc/random.hpp"

namespace atc {

inline constexpr double probability_floor = 1e-6;

inline double clip_probability(double p) {
    return std::clamp(p, probability_floor, 1.0 - probability_floor);
}

// ---------------------------------------------------------------------------
// parameter records
// ---------------------------------------------------------------------------

struct SymGmm2Params {
    Eigen::VectorXd mu;
    double sigma = 1.0;
};

struct GmmKParams {
    Eigen::VectorXd weights;
    std::vector<Eigen::VectorXd> means;
    std::vector<Eigen::MatrixXd> covariances;
};

struct LcmParams {
    Eigen::VectorXd weights;
    Eigen::MatrixXd item_probs;  // d x K
};

struct SbmParams {
    Eigen::VectorXd weights;
    Eigen::MatrixXd link;  // K x K, symmetric
};

enum class ModelFamily { sym_gmm2, gmm_k, lcm, sbm };

inline std::string_view family_name(ModelFamily f) {
    switch (f) {
        case ModelFamily::sym_gmm2: return "sym_gmm2";
        case ModelFamily::gmm_k: return "gmm_k";
        case ModelFamily::lcm: return "lcm";
        case ModelFamily::sbm: return "sbm";
    }
    return "unknown";
}

inline ModelFamily parse_family(std::string_view name) {
    if (name == "sym_gmm2") return ModelFamily::sym_gmm2;
    if (name == "gmm_k") return ModelFamily::gmm_k;
    if (name == "lcm") return ModelFamily::lcm;
    if (name == "sbm") return ModelFamily::sbm;
    throw InvalidArgument("unknown model family: " + std::string(name));
}

namespace detail {

inline void validate_weights(const Eigen::VectorXd& w, const char* what) {
    if (w.size() < 2) throw InvalidArgument(std::string(what) + ": need at least two clusters");
    for (Eigen::Index k = 0; k < w.size(); ++k)
        if (!(w[k] > 0.0) || !std::isfinite(w[k]))
            throw InvalidArgument(std::string(what) + ": weights must be positive");
    if (std::abs(w.sum() - 1.0) > 1e-8) throw InvalidArgument(std::string(what) + ": weights must sum to 1");
}

inline Eigen::VectorXd uniform_weights(int k) { return Eigen::VectorXd::Constant(k, 1.0 / k); }

}  // namespace detail

inline SymGmm2Params make_sym_gmm2(Eigen::VectorXd mu, double sigma) {
    if (mu.size() < 1) throw InvalidArgument("sym_gmm2: dimension must be >= 1");
    if (!(sigma > 0.0) || !std::isfinite(sigma)) throw InvalidArgument("sym_gmm2: sigma must be > 0");
    if (!mu.allFinite()) throw InvalidArgument("sym_gmm2: non-finite mean");
    return {std::move(mu), sigma};
}

inline GmmKParams make_gmm_k(Eigen::VectorXd weights, std::vector<Eigen::VectorXd> means,
                             std::vector<Eigen::MatrixXd> covariances) {
    detail::validate_weights(weights, "gmm_k");
    const auto k = static_cast<std::size_t>(weights.size());
    if (means.size() != k || covariances.size() != k)
        throw InvalidArgument("gmm_k: need one mean and covariance per cluster");
    const Eigen::Index d = means.front().size();
    if (d < 1) throw InvalidArgument("gmm_k: dimension must be >= 1");
    for (std::size_t c = 0; c < k; ++c) {
        if (means[c].size() != d || covariances[c].rows() != d || covariances[c].cols() != d)
            throw InvalidArgument("gmm_k: inconsistent dimensions");
        if (!means[c].allFinite()) throw InvalidArgument("gmm_k: non-finite mean");
        const auto& s = covariances[c];
        if (!s.isApprox(s.transpose(), 1e-10)) throw InvalidArgument("gmm_k: covariance not symmetric");
        if ((s.diagonal().array() <= 0.0).any()) throw InvalidArgument("gmm_k: covariance diagonal must be > 0");
        if (Eigen::LLT<Eigen::MatrixXd>(s).info() != Eigen::Success)
            throw InvalidArgument("gmm_k: covariance not positive definite");
    }
    return {std::move(weights), std::move(means), std::move(covariances)};
}

inline LcmParams make_lcm(Eigen::VectorXd weights, Eigen::MatrixXd item_probs) {
    detail::validate_weights(weights, "lcm");
    if (item_probs.cols() != weights.size() || item_probs.rows() < 1)
        throw InvalidArgument("lcm: item_probs must be d x K");
    for (Eigen::Index j = 0; j < item_probs.rows(); ++j)
        for (Eigen::Index c = 0; c < item_probs.cols(); ++c) {
            const double p = item_probs(j, c);
            if (!(p >= 0.0 && p <= 1.0)) throw InvalidArgument("lcm: item probabilities must lie in [0,1]");
            item_probs(j, c) = clip_probability(p);
        }
    return {std::move(weights), std::move(item_probs)};
}

inline SbmParams make_sbm(Eigen::VectorXd weights, Eigen::MatrixXd link) {
    detail::validate_weights(weights, "sbm");
    if (link.rows() != weights.size() || link.cols() != weights.size())
        throw InvalidArgument("sbm: link must be K x K");
    if ((link - link.transpose()).cwiseAbs().maxCoeff() > 1e-12)
        throw InvalidArgument("sbm: link matrix must be symmetric");
    for (Eigen::Index a = 0; a < link.rows(); ++a)
        for (Eigen::Index b = 0; b < link.cols(); ++b) {
            const double p = link(a, b);
            if (!(p >= 0.0 && p <= 1.0)) throw InvalidArgument("sbm: link probabilities must lie in [0,1]");
            link(a, b) = clip_probability(p);
        }
    return {std::move(weights), std::move(link)};
}

// ---------------------------------------------------------------------------
// ModelSpec
// ---------------------------------------------------------------------------

class ModelSpec {
public:
    using Params = std::variant<SymGmm2Params, GmmKParams, LcmParams, SbmParams>;

    ModelSpec(SymGmm2Params p) : params_(std::move(p)) {}
    ModelSpec(GmmKParams p) : params_(std::move(p)) {}
    ModelSpec(LcmParams p) : params_(std::move(p)) {}
    ModelSpec(SbmParams p) : params_(std::move(p)) {}

    ModelFamily family() const noexcept { return static_cast<ModelFamily>(params_.index()); }
    bool is_separable() const noexcept { return family() != ModelFamily::sbm; }
    bool is_network() const noexcept { return family() == ModelFamily::sbm; }

    int k() const {
        return std::visit(
            [](const auto& p) -> int {
                using T = std::decay_t<decltype(p)>;
                if constexpr (std::is_same_v<T, SymGmm2Params>) return 2;
                else return static_cast<int>(p.weights.size());
            },
            params_);
    }

    // Marginal label distribution (uniform for the symmetric two-component GMM).
    Eigen::VectorXd label_weights() const {
        return std::visit(
            [](const auto& p) -> Eigen::VectorXd {
                using T = std::decay_t<decltype(p)>;
                if constexpr (std::is_same_v<T, SymGmm2Params>) return detail::uniform_weights(2);
                else return p.weights;
            },
            params_);
    }

    const Params& params() const noexcept { return params_; }
    template <class T>
    const T& as() const {
        if (const T* p = std::get_if<T>(&params_)) return *p;
        throw InvalidArgument("ModelSpec: unexpected family " + std::string(family_name(family())));
    }

private:
    Params params_;
};

// ---------------------------------------------------------------------------
// datasets
// ---------------------------------------------------------------------------

struct FeatureMatrix {
    Eigen::MatrixXd values;  // n x d
};

// Dense symmetric binary adjacency with zero diagonal, plus neighbor lists.
class AdjacencyMatrix {
public:
    AdjacencyMatrix() = default;

    AdjacencyMatrix(std::size_t n, std::vector<std::uint8_t> bits) : n_(n), bits_(std::move(bits)) {
        if (bits_.size() != n_ * n_) throw DimensionError("adjacency: entry count != n*n");
        for (std::size_t i = 0; i < n_; ++i) {
            if (bits_[i * n_ + i] != 0) throw InvalidArgument("adjacency: non-zero diagonal");
            for (std::size_t j = i + 1; j < n_; ++j) {
                const auto a = bits_[i * n_ + j];
                if (a > 1) throw InvalidArgument("adjacency: entries must be 0 or 1");
                if (a != bits_[j * n_ + i]) throw InvalidArgument("adjacency: matrix not symmetric");
            }
        }
        build_neighbors();
    }

    std::size_t size() const noexcept { return n_; }
    bool edge(std::size_t i, std::size_t j) const { return bits_[i * n_ + j] != 0; }
    std::span<const std::uint32_t> neighbors(std::size_t i) const { return neighbors_[i]; }
    std::size_t edge_count() const {
        std::size_t e = 0;
        for (const auto& nb : neighbors_) e += nb.size();
        return e / 2;
    }

    Eigen::MatrixXd to_dense() const {
        Eigen::MatrixXd a = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(n_), static_cast<Eigen::Index>(n_));
        for (std::size_t i = 0; i < n_; ++i)
            for (auto j : neighbors_[i]) a(static_cast<Eigen::Index>(i), j) = 1.0;
        return a;
    }

    // Induced subgraph on the given node indices.
    AdjacencyMatrix subgraph(std::span<const std::size_t> nodes) const {
        const std::size_t m = nodes.size();
        std::vector<std::uint8_t> out(m * m, 0);
        for (std::size_t a = 0; a < m; ++a)
            for (std::size_t b = 0; b < m; ++b) out[a * m + b] = bits_[nodes[a] * n_ + nodes[b]];
        return AdjacencyMatrix(m, std::move(out));
    }

private:
    void build_neighbors() {
        neighbors_.assign(n_, {});
        for (std::size_t i = 0; i < n_; ++i)
            for (std::size_t j = 0; j < n_; ++j)
                if (bits_[i * n_ + j]) neighbors_[i].push_back(static_cast<std::uint32_t>(j));
    }

    std::size_t n_ = 0;
    std::vector<std::uint8_t> bits_;
    std::vector<std::vector<std::uint32_t>> neighbors_;
};

using Dataset = std::variant<FeatureMatrix, AdjacencyMatrix>;

inline std::size_t sample_count(const Dataset& data) {
    if (const auto* f = std::get_if<FeatureMatrix>(&data)) return static_cast<std::size_t>(f->values.rows());
    return std::get<AdjacencyMatrix>(data).size();
}

inline const FeatureMatrix& features_of(const Dataset& data) {
    if (const auto* f = std::get_if<FeatureMatrix>(&data)) return *f;
    throw DimensionError("expected a feature matrix, got an adjacency matrix");
}

inline const AdjacencyMatrix& adjacency_of(const Dataset& data) {
    if (const auto* a = std::get_if<AdjacencyMatrix>(&data)) return *a;
    throw DimensionError("expected an adjacency matrix, got a feature matrix");
}

// ---------------------------------------------------------------------------
// sampling
// ---------------------------------------------------------------------------

namespace detail {

inline int draw_categorical(StreamEngine& eng, const Eigen::VectorXd& weights) {
    const double u = eng.uniform() * weights.sum();
    double acc = 0.0;
    for (Eigen::Index c = 0; c + 1 < weights.size(); ++c) {
        acc += weights[c];
        if (u < acc) return static_cast<int>(c);
    }
    return static_cast<int>(weights.size() - 1);
}

inline void require_label_count(const ModelSpec& spec, const LabelVector& labels) {
    if (labels.k() != spec.k()) throw DimensionError("label cluster count does not match model");
}

}  // namespace detail

inline LabelVector sample_labels(const Eigen::VectorXd& weights, std::size_t n, const RandomStream& stream) {
    auto eng = stream.engine();
    std::vector<int> z(n);
    for (auto& v : z) v = detail::draw_categorical(eng, weights);
    return LabelVector(std::move(z), static_cast<int>(weights.size()));
}

inline Dataset sample(const ModelSpec& spec, const LabelVector& labels, const RandomStream& stream) {
    detail::require_label_count(spec, labels);
    auto eng = stream.engine();
    const auto n = static_cast<Eigen::Index>(labels.size());

    switch (spec.family()) {
        case ModelFamily::sym_gmm2: {
            const auto& p = spec.as<SymGmm2Params>();
            std::normal_distribution<double> normal(0.0, 1.0);
            Eigen::MatrixXd x(n, p.mu.size());
            for (Eigen::Index i = 0; i < n; ++i) {
                const double sign = labels[static_cast<std::size_t>(i)] == 0 ? 1.0 : -1.0;
                for (Eigen::Index j = 0; j < p.mu.size(); ++j) x(i, j) = sign * p.mu[j] + p.sigma * normal(eng);
            }
            return FeatureMatrix{std::move(x)};
        }
        case ModelFamily::gmm_k: {
            const auto& p = spec.as<GmmKParams>();
            std::vector<Eigen::MatrixXd> chol;
            for (const auto& s : p.covariances) chol.emplace_back(Eigen::LLT<Eigen::MatrixXd>(s).matrixL());
            std::normal_distribution<double> normal(0.0, 1.0);
            const Eigen::Index d = p.means.front().size();
            Eigen::MatrixXd x(n, d);
            Eigen::VectorXd e(d);
            for (Eigen::Index i = 0; i < n; ++i) {
                const int c = labels[static_cast<std::size_t>(i)];
                for (Eigen::Index j = 0; j < d; ++j) e[j] = normal(eng);
                x.row(i) = (p.means[c] + chol[c] * e).transpose();
            }
            return FeatureMatrix{std::move(x)};
        }
        case ModelFamily::lcm: {
            const auto& p = spec.as<LcmParams>();
            const Eigen::Index d = p.item_probs.rows();
            Eigen::MatrixXd x(n, d);
            for (Eigen::Index i = 0; i < n; ++i) {
                const int c = labels[static_cast<std::size_t>(i)];
                for (Eigen::Index j = 0; j < d; ++j) x(i, j) = eng.uniform() <= p.item_probs(j, c) ? 1.0 : 0.0;
            }
            return FeatureMatrix{std::move(x)};
        }
        case ModelFamily::sbm: {
            const auto& p = spec.as<SbmParams>();
            const auto nn = labels.size();
            std::vector<std::uint8_t> bits(nn * nn, 0);
            for (std::size_t i = 0; i < nn; ++i)
                for (std::size_t j = i + 1; j < nn; ++j)
                    if (eng.uniform() < p.link(labels[i], labels[j])) bits[i * nn + j] = bits[j * nn + i] = 1;
            return AdjacencyMatrix(nn, std::move(bits));
        }
    }
    throw InvalidArgument("sample: unknown family");
}

struct PairedSample {
    LabelVector z0, z1;
    Dataset x0, x1;
};

// Target labels i.i.d. from pi0; each source label copies the target label
// with probability 1 - epsilon and otherwise is uniform over the other k-1.
inline PairedSample generate_pair(const ModelSpec& target, const ModelSpec& source, std::size_t n, double epsilon,
                                  const Eigen::VectorXd& pi0, const RandomStream& stream) {
    if (!(epsilon >= 0.0 && epsilon <= 0.5)) throw InvalidArgument("generate_pair: epsilon must lie in [0, 1/2]");
    if (target.k() != source.k()) throw DimensionError("generate_pair: target and source cluster counts differ");
    if (pi0.size() != target.k()) throw DimensionError("generate_pair: pi0 length != k");
    if (n < 1) throw InvalidArgument("generate_pair: n must be >= 1");
    const int k = target.k();

    LabelVector z0 = sample_labels(pi0, n, split_stream(stream, 0));
    auto eng = split_stream(stream, 1).engine();
    std::vector<int> z1(n);
    for (std::size_t i = 0; i < n; ++i) {
        z1[i] = z0[i];
        if (eng.uniform() < epsilon) {
            int alt = static_cast<int>(eng.uniform() * (k - 1));
            alt = std::min(alt, k - 2);
            z1[i] = alt >= z0[i] ? alt + 1 : alt;
        }
    }
    LabelVector z1v(std::move(z1), k);
    Dataset x0 = sample(target, z0, split_stream(stream, 2));
    Dataset x1 = sample(source, z1v, split_stream(stream, 3));
    return {std::move(z0), std::move(z1v), std::move(x0), std::move(x1)};
}

// ---------------------------------------------------------------------------
// negative log posteriors
// ---------------------------------------------------------------------------

inline NegLogPostMatrix neg_log_post(const ModelSpec& spec, const Dataset& data) {
    if (!spec.is_separable())
        throw NotSeparableError("neg_log_post: the SBM posterior does not factor over samples");
    const auto& x = features_of(data).values;
    const auto n = static_cast<std::size_t>(x.rows());
    if (n == 0) throw DimensionError("neg_log_post: empty data");
    const int k = spec.k();
    std::vector<double> out(n * k);
    const double log2pi = std::log(2.0 * std::numbers::pi);

    switch (spec.family()) {
        case ModelFamily::sym_gmm2: {
            const auto& p = spec.as<SymGmm2Params>();
            if (x.cols() != p.mu.size()) throw DimensionError("neg_log_post: data dimension != model dimension");
            const double d = static_cast<double>(p.mu.size());
            const double norm = 0.5 * d * (log2pi + 2.0 * std::log(p.sigma)) + std::log(2.0);
            const double inv2s2 = 1.0 / (2.0 * p.sigma * p.sigma);
            for (std::size_t i = 0; i < n; ++i) {
                const auto row = x.row(static_cast<Eigen::Index>(i));
                out[i * 2 + 0] = (row.transpose() - p.mu).squaredNorm() * inv2s2 + norm;
                out[i * 2 + 1] = (row.transpose() + p.mu).squaredNorm() * inv2s2 + norm;
            }
            break;
        }
        case ModelFamily::gmm_k: {
            const auto& p = spec.as<GmmKParams>();
            const Eigen::Index d = p.means.front().size();
            if (x.cols() != d) throw DimensionError("neg_log_post: data dimension != model dimension");
            for (int c = 0; c < k; ++c) {
                Eigen::LLT<Eigen::MatrixXd> llt(p.covariances[c]);
                const Eigen::MatrixXd l = llt.matrixL();
                const double logdet = 2.0 * l.diagonal().array().log().sum();
                const double base = 0.5 * (static_cast<double>(d) * log2pi + logdet) - std::log(p.weights[c]);
                for (std::size_t i = 0; i < n; ++i) {
                    const Eigen::VectorXd r = x.row(static_cast<Eigen::Index>(i)).transpose() - p.means[c];
                    const Eigen::VectorXd w = l.triangularView<Eigen::Lower>().solve(r);
                    out[i * k + c] = 0.5 * w.squaredNorm() + base;
                }
            }
            break;
        }
        case ModelFamily::lcm: {
            const auto& p = spec.as<LcmParams>();
            const Eigen::Index d = p.item_probs.rows();
            if (x.cols() != d) throw DimensionError("neg_log_post: data dimension != model dimension");
            const Eigen::MatrixXd lp = p.item_probs.array().log();
            const Eigen::MatrixXd lq = (1.0 - p.item_probs.array()).log();
            for (std::size_t i = 0; i < n; ++i)
                for (int c = 0; c < k; ++c) {
                    double s = -std::log(p.weights[c]);
                    for (Eigen::Index j = 0; j < d; ++j) {
                        const double v = x(static_cast<Eigen::Index>(i), j);
                        if (v != 0.0 && v != 1.0) throw DataError("neg_log_post: LCM data must be binary");
                        s -= v == 1.0 ? lp(j, c) : lq(j, c);
                    }
                    out[i * k + c] = s;
                }
            break;
        }
        case ModelFamily::sbm: break;
    }
    for (double v : out)
        if (!std::isfinite(v)) throw InvalidArgument("neg_log_post: non-finite density (invalid parameters?)");
    return NegLogPostMatrix(n, k, std::move(out));
}

// Per-node conditional cost for the SBM, summing over every j != i.
inline std::vector<double> sbm_neg_log_post_row(const SbmParams& params, const AdjacencyMatrix& adjacency,
                                                std::size_t i, const LabelVector& labels_rest) {
    const std::size_t n = adjacency.size();
    if (i >= n) throw DimensionError("sbm_neg_log_post_row: node index out of range");
    if (labels_rest.size() != n) throw DimensionError("sbm_neg_log_post_row: label vector length != n");
    const int k = static_cast<int>(params.weights.size());
    if (labels_rest.k() != k) throw DimensionError("sbm_neg_log_post_row: label cluster count != K");
    std::vector<double> row(k);
    for (int u = 0; u < k; ++u) {
        double s = -std::log(params.weights[u]);
        for (std::size_t j = 0; j < n; ++j) {
            if (j == i) continue;
            const double b = params.link(u, labels_rest[j]);
            s -= adjacency.edge(i, j) ? std::log(b) : std::log1p(-b);
        }
        row[u] = s;
    }
    return row;
}

// Full SBM negative log posterior over unordered pairs i < j.
inline double sbm_neg_log_post_total(const SbmParams& params, const AdjacencyMatrix& adjacency,
                                     const LabelVector& labels) {
    const std::size_t n = adjacency.size();
    double s = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        s -= std::log(params.weights[labels[i]]);
        for (std::size_t j = i + 1; j < n; ++j) {
            const double b = params.link(labels[i], labels[j]);
            s -= adjacency.edge(i, j) ? std::log(b) : std::log1p(-b);
        }
    }
    return s;
}

// ---------------------------------------------------------------------------
// relabeling and projection
// ---------------------------------------------------------------------------

// Spec whose cluster perm[c] is the old cluster c.
inline ModelSpec permute_labels(const ModelSpec& spec, std::span<const int> perm) {
    const int k = spec.k();
    if (static_cast<int>(perm.size()) != k) throw DimensionError("permute_labels: permutation size != k");
    auto permute_weights = [&](const Eigen::VectorXd& w) {
        Eigen::VectorXd out(k);
        for (int c = 0; c < k; ++c) out[perm[c]] = w[c];
        return out;
    };
    switch (spec.family()) {
        case ModelFamily::sym_gmm2: {
            auto p = spec.as<SymGmm2Params>();
            if (perm[0] == 1) p.mu = -p.mu;
            return ModelSpec(std::move(p));
        }
        case ModelFamily::gmm_k: {
            auto p = spec.as<GmmKParams>();
            GmmKParams out{permute_weights(p.weights), p.means, p.covariances};
            for (int c = 0; c < k; ++c) {
                out.means[perm[c]] = p.means[c];
                out.covariances[perm[c]] = p.covariances[c];
            }
            return ModelSpec(std::move(out));
        }
        case ModelFamily::lcm: {
            const auto& p = spec.as<LcmParams>();
            LcmParams out{permute_weights(p.weights), p.item_probs};
            for (int c = 0; c < k; ++c) out.item_probs.col(perm[c]) = p.item_probs.col(c);
            return ModelSpec(std::move(out));
        }
        case ModelFamily::sbm: {
            const auto& p = spec.as<SbmParams>();
            SbmParams out{permute_weights(p.weights), p.link};
            for (int a = 0; a < k; ++a)
                for (int b = 0; b < k; ++b) out.link(perm[a], perm[b]) = p.link(a, b);
            return ModelSpec(std::move(out));
        }
    }
    throw InvalidArgument("permute_labels: unknown family");
}

// Row i becomes <mu_hat, X_i> / ||mu_hat||.
inline FeatureMatrix project_multivariate(const FeatureMatrix& data, const Eigen::VectorXd& mu_hat) {
    const double norm = mu_hat.norm();
    if (!(norm > 0.0)) throw InvalidArgument("project_multivariate: zero direction");
    if (data.values.cols() != mu_hat.size()) throw DimensionError("project_multivariate: dimension mismatch");
    return FeatureMatrix{(data.values * mu_hat) / norm};
}

}  // namespace atc
