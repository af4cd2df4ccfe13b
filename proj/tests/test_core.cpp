#include <gtest/gtest.h>

#include <algorithm>
#include <numeric>
#include <random>
#include <set>
#include <vector>

#include "atc/core.hpp"
#include "atc/parallel.hpp"
#include "atc/random.hpp"

using namespace atc;

namespace {

LabelVector one_based(std::vector<int> v, int k) { return LabelVector::from_one_based(v, k); }

LabelVector random_labels(std::mt19937_64& rng, std::size_t n, int k) {
    std::uniform_int_distribution<int> u(0, k - 1);
    std::vector<int> z(n);
    for (auto& x : z) x = u(rng);
    return LabelVector(z, k);
}

}  // namespace

TEST(LabelVector, RejectsOutOfRange) {
    EXPECT_THROW(LabelVector({0, 2}, 2), InvalidArgument);
    EXPECT_THROW(LabelVector({0, -1}, 2), InvalidArgument);
    EXPECT_THROW(LabelVector({}, 2), InvalidArgument);
    EXPECT_THROW(LabelVector({0}, 1), InvalidArgument);
    EXPECT_THROW(LabelVector::from_one_based({0, 1}, 2), InvalidArgument);
}

TEST(LabelVector, OneBasedRoundTrip) {
    const auto z = one_based({1, 3, 2, 3}, 3);
    EXPECT_EQ(z[1], 2);
    EXPECT_EQ(z.one_based(), (std::vector<int>{1, 3, 2, 3}));
}

TEST(PenaltyGrid, Validation) {
    EXPECT_THROW(PenaltyGrid({1.0, 1.0}, false), InvalidArgument);
    EXPECT_THROW(PenaltyGrid({2.0, 1.0}, false), InvalidArgument);
    EXPECT_THROW(PenaltyGrid({-1.0}, false), InvalidArgument);
    EXPECT_THROW(PenaltyGrid({}, false), InvalidArgument);
    EXPECT_THROW(Penalty(-0.5), InvalidArgument);
    const PenaltyGrid only_inf({}, true);
    ASSERT_EQ(only_inf.size(), 1u);
    EXPECT_TRUE(only_inf.points().back().is_infinite());
    const PenaltyGrid g({0.0, 0.5, 2.0}, true);
    ASSERT_EQ(g.size(), 4u);
    EXPECT_EQ(g.points()[1].value(), 0.5);
    EXPECT_TRUE(g.points()[3].is_infinite());
    EXPECT_TRUE(Penalty(1e300) < Penalty::infinity());
}

TEST(Hamming, Examples) {
    EXPECT_DOUBLE_EQ(hamming_distance(one_based({1, 1, 2, 2}, 2), one_based({1, 2, 2, 2}, 2)), 0.25);
    const auto z = one_based({1, 2, 2, 1, 2}, 2);
    EXPECT_DOUBLE_EQ(hamming_distance(z, z), 0.0);
    EXPECT_DOUBLE_EQ(hamming_distance(one_based({1, 2}, 2), one_based({2, 1}, 2)), 1.0);
}

TEST(Hamming, DimensionErrors) {
    EXPECT_THROW(hamming_distance(one_based({1, 2}, 2), one_based({1, 2, 1}, 2)), DimensionError);
    EXPECT_THROW(hamming_distance(one_based({1, 2}, 2), one_based({1, 2}, 3)), DimensionError);
}

TEST(Hamming, MetricProperties) {
    std::mt19937_64 rng(11);
    for (int t = 0; t < 1000; ++t) {
        const std::size_t n = 1 + rng() % 50;
        const int k = 2 + static_cast<int>(rng() % 4);
        const auto a = random_labels(rng, n, k), b = random_labels(rng, n, k), c = random_labels(rng, n, k);
        EXPECT_EQ(hamming_distance(a, b), hamming_distance(b, a));
        EXPECT_EQ(hamming_distance(a, b) == 0.0, a == b);
        EXPECT_LE(hamming_distance(a, c), hamming_distance(a, b) + hamming_distance(b, c) + 1e-15);
    }
}

TEST(Align, Examples) {
    {
        const auto r = align_labels(one_based({1, 1, 2, 2}, 2), one_based({2, 2, 1, 1}, 2));
        EXPECT_EQ(r.permutation, (std::vector<int>{1, 0}));
        EXPECT_EQ(r.aligned, one_based({1, 1, 2, 2}, 2));
    }
    {
        const auto z = one_based({1, 3, 2, 2, 3}, 3);
        const auto r = align_labels(z, z);
        EXPECT_EQ(r.permutation, (std::vector<int>{0, 1, 2}));
    }
    {
        const auto ref = one_based({1, 1, 1, 2}, 2);
        const auto r = align_labels(ref, one_based({2, 2, 1, 1}, 2));
        EXPECT_EQ(r.permutation, (std::vector<int>{1, 0}));
        EXPECT_EQ(r.aligned, one_based({1, 1, 2, 2}, 2));
        EXPECT_DOUBLE_EQ(hamming_distance(ref, r.aligned), 0.25);
    }
}

// Exhaustive enumeration over all permutations: alignment attains the
// minimum, and among minimizers returns the lexicographically smallest.
TEST(Align, ExhaustiveOptimality) {
    std::mt19937_64 rng(5);
    for (int t = 0; t < 400; ++t) {
        const int k = 2 + static_cast<int>(rng() % 3);
        const std::size_t n = 1 + rng() % 30;
        const auto ref = random_labels(rng, n, k), cand = random_labels(rng, n, k);
        const auto r = align_labels(ref, cand);
        std::vector<int> perm(k);
        std::iota(perm.begin(), perm.end(), 0);
        double best = 2.0;
        std::vector<int> best_perm;
        do {
            const double d = hamming_distance(ref, apply_permutation(cand, perm));
            if (d < best) {
                best = d;
                best_perm = perm;
            }
        } while (std::next_permutation(perm.begin(), perm.end()));
        EXPECT_DOUBLE_EQ(hamming_distance(ref, r.aligned), best);
        EXPECT_EQ(r.permutation, best_perm);
        EXPECT_LE(hamming_distance(ref, r.aligned), hamming_distance(ref, cand));
    }
}

TEST(Quantile, Examples) {
    const std::vector<double> a{0.1, 0.2, 0.3, 0.4};
    EXPECT_EQ(empirical_quantile(a, 0.95), 0.4);
    const std::vector<double> b{5.0};
    EXPECT_EQ(empirical_quantile(b, 0.5), 5.0);
    const std::vector<double> c{3, 1, 2};
    EXPECT_EQ(empirical_quantile(c, 0.5), 2.0);
    EXPECT_THROW(empirical_quantile(std::vector<double>{}, 0.5), InvalidArgument);
    EXPECT_THROW(empirical_quantile(c, 0.0), InvalidArgument);
    EXPECT_THROW(empirical_quantile(c, 1.0), InvalidArgument);
}

TEST(Quantile, RankSnapsExactProducts) {
    // 0.95 * 200 is 190 in exact arithmetic but 190.00000000000003 in doubles
    EXPECT_EQ(quantile_rank(0.95, 200), 190u);
    EXPECT_EQ(quantile_rank(0.9, 10), 9u);
    EXPECT_EQ(quantile_rank(0.901, 10), 10u);
    EXPECT_EQ(quantile_rank(1e-9, 10), 1u);
}

TEST(Quantile, MonotoneAndMember) {
    std::mt19937_64 rng(3);
    std::uniform_real_distribution<double> u(0, 1);
    for (int t = 0; t < 200; ++t) {
        std::vector<double> s(1 + rng() % 40);
        for (auto& x : s) x = std::round(u(rng) * 10) / 10;
        double prev = -1;
        for (double level = 0.01; level < 1.0; level += 0.01) {
            const double q = empirical_quantile(s, level);
            EXPECT_GE(q, prev);
            EXPECT_NE(std::find(s.begin(), s.end(), q), s.end());
            // inf-definition: F(q) >= level and F(q-) < level
            const auto below = std::count_if(s.begin(), s.end(), [&](double x) { return x < q; });
            const auto at_most = std::count_if(s.begin(), s.end(), [&](double x) { return x <= q; });
            EXPECT_GE(static_cast<double>(at_most), level * static_cast<double>(s.size()) - 1e-9);
            EXPECT_LT(static_cast<double>(below), level * static_cast<double>(s.size()) + 1e-9);
            prev = q;
        }
    }
}

TEST(RandomStream, SplitDeterminism) {
    const RandomStream s(42, {7});
    auto e1 = split_stream(s, 0).engine(), e2 = split_stream(s, 0).engine();
    for (int i = 0; i < 100; ++i) EXPECT_EQ(e1(), e2());
    EXPECT_NE(split_stream(s, 0).engine()(), split_stream(s, 1).engine()());
    EXPECT_NE(split_stream(split_stream(s, 0), 1).engine()(), split_stream(split_stream(s, 1), 0).engine()());
    EXPECT_NE(RandomStream(1, {}).engine()(), RandomStream(2, {}).engine()());
}

TEST(RandomStream, UniformMoments) {
    auto eng = RandomStream(9, {1, 2, 3}).engine();
    const int n = 200000;
    double sum = 0, sq = 0;
    for (int i = 0; i < n; ++i) {
        const double u = eng.uniform();
        ASSERT_GE(u, 0.0);
        ASSERT_LT(u, 1.0);
        sum += u;
        sq += u * u;
    }
    EXPECT_NEAR(sum / n, 0.5, 5 * std::sqrt(1.0 / 12 / n));
    EXPECT_NEAR(sq / n - (sum / n) * (sum / n), 1.0 / 12, 0.002);
}

// Sibling streams are uncorrelated.
TEST(RandomStream, SiblingsUncorrelated) {
    const RandomStream root(123, {});
    auto a = split_stream(root, 0).engine(), b = split_stream(root, 1).engine();
    const int n = 100000;
    double sab = 0, sa = 0, sb = 0, saa = 0, sbb = 0;
    for (int i = 0; i < n; ++i) {
        const double x = a.uniform(), y = b.uniform();
        sa += x, sb += y, sab += x * y, saa += x * x, sbb += y * y;
    }
    const double cov = sab / n - sa / n * sb / n;
    const double corr = cov / std::sqrt((saa / n - sa * sa / n / n) * (sbb / n - sb * sb / n / n));
    EXPECT_LT(std::abs(corr), 5.0 / std::sqrt(n));
}

TEST(Parallel, SameResultsAcrossThreadCounts) {
    const RandomStream root(77, {});
    auto run = [&](std::size_t threads) {
        std::vector<std::uint64_t> out(257);
        parallel_for(out.size(), [&](std::size_t i) { out[i] = split_stream(root, i).engine()(); }, threads);
        return out;
    };
    const auto one = run(1);
    EXPECT_EQ(one, run(2));
    EXPECT_EQ(one, run(7));
}

TEST(Parallel, PropagatesExceptions) {
    EXPECT_THROW(parallel_for(
                     10, [](std::size_t i) {
                         if (i == 3) throw DataError("boom");
                     },
                     3),
                 DataError);
}
