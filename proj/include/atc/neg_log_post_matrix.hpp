#pragma once

#include <cmath>
#include <cstddef>
#include <span>
#include <utility>
#include <vector>

#include "atc/core.hpp"

namespace atc {

// n x k table of per-sample negative log posterior terms, row-major.
// Entry (i, c) = -log L_i(c): the cost of giving sample i label c.
class NegLogPostMatrix {
public:
    NegLogPostMatrix() = default;

    NegLogPostMatrix(std::size_t n, int k, std::vector<double> entries)
        : n_(n), k_(k), entries_(std::move(entries)) {
        if (k_ < 2) throw InvalidArgument("NegLogPostMatrix: k must be >= 2");
        if (n_ == 0) throw InvalidArgument("NegLogPostMatrix: no rows");
        if (entries_.size() != n_ * static_cast<std::size_t>(k_))
            throw DimensionError("NegLogPostMatrix: entry count != n*k");
        for (double v : entries_)
            if (!std::isfinite(v)) throw InvalidArgument("NegLogPostMatrix: non-finite entry");
    }

    static NegLogPostMatrix zeros(std::size_t n, int k) {
        return NegLogPostMatrix(n, k, std::vector<double>(n * static_cast<std::size_t>(k), 0.0));
    }

    std::size_t rows() const noexcept { return n_; }
    int k() const noexcept { return k_; }

    double operator()(std::size_t i, int c) const { return entries_[i * k_ + c]; }
    std::span<const double> row(std::size_t i) const {
        return std::span<const double>(entries_).subspan(i * k_, static_cast<std::size_t>(k_));
    }

    // Relabels columns: new column perm[c] holds old column c.
    NegLogPostMatrix permuted(std::span<const int> perm) const {
        if (static_cast<int>(perm.size()) != k_) throw DimensionError("permutation size != k");
        std::vector<double> out(entries_.size());
        for (std::size_t i = 0; i < n_; ++i)
            for (int c = 0; c < k_; ++c) out[i * k_ + perm[c]] = entries_[i * k_ + c];
        return NegLogPostMatrix(n_, k_, std::move(out));
    }

private:
    std::size_t n_ = 0;
    int k_ = 2;
    std::vector<double> entries_;
};

}  // namespace atc
