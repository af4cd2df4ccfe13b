#pragma once
// Label vectors, penalties, grids and the small statistical primitives the
// transfer-clustering pipeline is built on.
//
// Labels are stored 0-based (cluster index in [0, k)); the text file format
// is 1-based.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <numeric>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace atc {

// ---------------------------------------------------------------------------
// errors
// ---------------------------------------------------------------------------

struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct DimensionError : Error {
    using Error::Error;
};
struct InvalidArgument : Error {
    using Error::Error;
};
struct NotSeparableError : Error {
    using Error::Error;
};
struct EstimationError : Error {
    using Error::Error;
};
struct DataError : Error {
    using Error::Error;
};

// ---------------------------------------------------------------------------
// LabelVector
// ---------------------------------------------------------------------------

class LabelVector {
public:
    LabelVector() = default;

    LabelVector(std::vector<int> labels, int k) : labels_(std::move(labels)), k_(k) {
        if (k_ < 2) throw InvalidArgument("LabelVector: k must be >= 2");
        if (labels_.empty()) throw InvalidArgument("LabelVector: empty label vector");
        for (int v : labels_)
            if (v < 0 || v >= k_) throw InvalidArgument("LabelVector: label out of range");
    }

    static LabelVector from_one_based(const std::vector<int>& one_based, int k) {
        std::vector<int> z(one_based.size());
        std::transform(one_based.begin(), one_based.end(), z.begin(), [](int v) { return v - 1; });
        return LabelVector(std::move(z), k);
    }

    std::vector<int> one_based() const {
        std::vector<int> out(labels_.size());
        std::transform(labels_.begin(), labels_.end(), out.begin(), [](int v) { return v + 1; });
        return out;
    }

    std::size_t size() const noexcept { return labels_.size(); }
    int k() const noexcept { return k_; }
    int operator[](std::size_t i) const { return labels_[i]; }
    std::span<const int> values() const noexcept { return labels_; }

    void set(std::size_t i, int label) {
        if (label < 0 || label >= k_) throw InvalidArgument("LabelVector: label out of range");
        labels_[i] = label;
    }

    friend bool operator==(const LabelVector&, const LabelVector&) = default;

private:
    std::vector<int> labels_;
    int k_ = 2;
};

// ---------------------------------------------------------------------------
// Penalty: a non-negative real or the infinity sentinel (hard agreement)
// ---------------------------------------------------------------------------

class Penalty {
public:
    constexpr Penalty() = default;
    explicit Penalty(double value) : value_(value) {
        if (!(value >= 0.0) || std::isinf(value))
            throw InvalidArgument("Penalty: must be finite and non-negative (use Penalty::infinity())");
    }
    static constexpr Penalty infinity() noexcept {
        Penalty p;
        p.infinite_ = true;
        p.value_ = std::numeric_limits<double>::infinity();
        return p;
    }

    constexpr bool is_infinite() const noexcept { return infinite_; }
    // Finite value; +inf for the sentinel.
    constexpr double value() const noexcept { return value_; }

    friend constexpr bool operator==(const Penalty& a, const Penalty& b) noexcept {
        return a.infinite_ == b.infinite_ && (a.infinite_ || a.value_ == b.value_);
    }
    friend constexpr bool operator<(const Penalty& a, const Penalty& b) noexcept {
        if (a.infinite_) return false;
        if (b.infinite_) return true;
        return a.value_ < b.value_;
    }

private:
    double value_ = 0.0;
    bool infinite_ = false;
};

// ---------------------------------------------------------------------------
// PenaltyGrid
// ---------------------------------------------------------------------------

class PenaltyGrid {
public:
    PenaltyGrid() = default;
    PenaltyGrid(std::vector<double> values, bool include_infinity)
        : values_(std::move(values)), include_infinity_(include_infinity) {
        for (std::size_t j = 0; j < values_.size(); ++j) {
            if (!(values_[j] >= 0.0) || std::isinf(values_[j]))
                throw InvalidArgument("PenaltyGrid: finite values must be >= 0");
            if (j > 0 && !(values_[j] > values_[j - 1]))
                throw InvalidArgument("PenaltyGrid: values must be strictly increasing");
        }
        if (values_.empty() && !include_infinity_)
            throw InvalidArgument("PenaltyGrid: grid must contain at least one point");
    }

    std::span<const double> finite_values() const noexcept { return values_; }
    bool include_infinity() const noexcept { return include_infinity_; }

    // Every grid point in increasing order, the sentinel last.
    std::vector<Penalty> points() const {
        std::vector<Penalty> out;
        out.reserve(values_.size() + 1);
        for (double v : values_) out.emplace_back(v);
        if (include_infinity_) out.push_back(Penalty::infinity());
        return out;
    }
    std::size_t size() const noexcept { return values_.size() + (include_infinity_ ? 1 : 0); }

    friend bool operator==(const PenaltyGrid&, const PenaltyGrid&) = default;

private:
    std::vector<double> values_;
    bool include_infinity_ = false;
};

// ---------------------------------------------------------------------------
// distances and alignment
// ---------------------------------------------------------------------------

inline void require_compatible(const LabelVector& a, const LabelVector& b) {
    if (a.size() != b.size()) throw DimensionError("label vectors differ in length");
    if (a.k() != b.k()) throw DimensionError("label vectors differ in cluster count");
}

// Fraction of disagreeing entries.
inline double hamming_distance(const LabelVector& a, const LabelVector& b) {
    require_compatible(a, b);
    std::size_t diff = 0;
    for (std::size_t i = 0; i < a.size(); ++i) diff += (a[i] != b[i]);
    return static_cast<double>(diff) / static_cast<double>(a.size());
}

// perm[c] is the reference label that candidate label c is mapped to.
struct Alignment {
    std::vector<int> permutation;
    LabelVector aligned;
};

inline LabelVector apply_permutation(const LabelVector& z, std::span<const int> perm) {
    if (static_cast<int>(perm.size()) != z.k()) throw DimensionError("permutation size != k");
    std::vector<int> out(z.size());
    for (std::size_t i = 0; i < z.size(); ++i) out[i] = perm[z[i]];
    return LabelVector(std::move(out), z.k());
}

namespace detail {

// Minimum-cost perfect assignment on a square integer matrix (Hungarian
// algorithm, potentials form). Returns the optimal cost.
inline long long assignment_cost(const std::vector<std::vector<long long>>& cost) {
    const int n = static_cast<int>(cost.size());
    if (n == 0) return 0;
    constexpr long long inf = std::numeric_limits<long long>::max() / 4;
    std::vector<long long> u(n + 1, 0), v(n + 1, 0);
    std::vector<int> p(n + 1, 0), way(n + 1, 0);
    for (int i = 1; i <= n; ++i) {
        p[0] = i;
        int j0 = 0;
        std::vector<long long> minv(n + 1, inf);
        std::vector<char> used(n + 1, 0);
        do {
            used[j0] = 1;
            const int i0 = p[j0];
            long long delta = inf;
            int j1 = 0;
            for (int j = 1; j <= n; ++j) {
                if (used[j]) continue;
                const long long cur = cost[i0 - 1][j - 1] - u[i0] - v[j];
                if (cur < minv[j]) {
                    minv[j] = cur;
                    way[j] = j0;
                }
                if (minv[j] < delta) {
                    delta = minv[j];
                    j1 = j;
                }
            }
            for (int j = 0; j <= n; ++j) {
                if (used[j]) {
                    u[p[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
        } while (p[j0] != 0);
        do {
            const int j1 = way[j0];
            p[j0] = p[j1];
            j0 = j1;
        } while (j0);
    }
    long long total = 0;
    for (int j = 1; j <= n; ++j) total += cost[p[j] - 1][j - 1];
    return total;
}

}  // namespace detail

// Permutation of the candidate's labels maximizing the confusion-matrix
// trace; among optimal permutations the lexicographically smallest one.
inline Alignment align_labels(const LabelVector& reference, const LabelVector& candidate) {
    require_compatible(reference, candidate);
    const int k = reference.k();
    // cost[c][r] = -#{i : cand_i = c, ref_i = r}
    std::vector<std::vector<long long>> cost(k, std::vector<long long>(k, 0));
    for (std::size_t i = 0; i < reference.size(); ++i) cost[candidate[i]][reference[i]] -= 1;

    const long long best = detail::assignment_cost(cost);
    std::vector<int> perm(k, -1);
    std::vector<char> used(k, 0);
    long long fixed = 0;
    for (int c = 0; c < k; ++c) {
        for (int r = 0; r < k; ++r) {
            if (used[r]) continue;
            // optimum of the remaining sub-problem with c -> r fixed
            std::vector<std::vector<long long>> sub;
            for (int c2 = c + 1; c2 < k; ++c2) {
                std::vector<long long> row;
                for (int r2 = 0; r2 < k; ++r2)
                    if (!used[r2] && r2 != r) row.push_back(cost[c2][r2]);
                sub.push_back(std::move(row));
            }
            if (fixed + cost[c][r] + detail::assignment_cost(sub) == best) {
                perm[c] = r;
                used[r] = 1;
                fixed += cost[c][r];
                break;
            }
        }
    }
    LabelVector aligned = apply_permutation(candidate, perm);
    return {std::move(perm), std::move(aligned)};
}

// ---------------------------------------------------------------------------
// empirical quantile: inf{z : F_hat(z) >= level}
// ---------------------------------------------------------------------------

// Rank (1-based) of the order statistic that realizes the level-quantile of
// n samples. The product level*n is snapped to an integer when it is within
// rounding distance of one, so that e.g. 0.9 * 2000 selects rank 1800.
inline std::size_t quantile_rank(double level, std::size_t n) {
    if (!(level > 0.0 && level < 1.0)) throw InvalidArgument("quantile level must lie in (0,1)");
    const double t = level * static_cast<double>(n);
    const double snapped = std::round(t);
    const double r = std::abs(t - snapped) <= 1e-9 * std::max(1.0, t) ? snapped : std::ceil(t);
    return std::clamp<std::size_t>(static_cast<std::size_t>(r), 1, n);
}

inline double empirical_quantile(std::span<const double> samples, double level) {
    if (samples.empty()) throw InvalidArgument("empirical_quantile: empty sample");
    const std::size_t rank = quantile_rank(level, samples.size());
    std::vector<double> sorted(samples.begin(), samples.end());
    std::nth_element(sorted.begin(), sorted.begin() + static_cast<std::ptrdiff_t>(rank - 1), sorted.end());
    return sorted[rank - 1];
}

}  // namespace atc
