#include <gtest/gtest.h>

#include <limits>
#include <random>
#include <vector>

#include "atc/core.hpp"
#include "atc/models.hpp"
#include "atc/tc.hpp"

using namespace atc;

namespace {

Eigen::VectorXd vec(std::initializer_list<double> v) {
    Eigen::VectorXd out(static_cast<Eigen::Index>(v.size()));
    Eigen::Index i = 0;
    for (double x : v) out[i++] = x;
    return out;
}

Dataset column(std::initializer_list<double> v) {
    Eigen::MatrixXd m(static_cast<Eigen::Index>(v.size()), 1);
    m.col(0) = vec(v);
    return Dataset(FeatureMatrix{m});
}

const ModelSpec& unit_gmm() {
    static const ModelSpec spec(make_sym_gmm2(vec({1.0}), 1.0));
    return spec;
}

// Small integer costs make ties common.
NegLogPostMatrix random_costs(std::mt19937_64& rng, std::size_t n, int k, int range) {
    std::uniform_int_distribution<int> u(0, range);
    std::vector<double> e(n * k);
    for (auto& x : e) x = u(rng);
    return NegLogPostMatrix(n, k, e);
}

// Brute force over all k^2 pairs with the documented tie order.
std::pair<int, int> brute_pair(std::span<const double> a, std::span<const double> b, Penalty lambda) {
    const int k = static_cast<int>(a.size());
    int bu = -1, bv = -1;
    double best = std::numeric_limits<double>::infinity();
    auto better = [&](int u, int v, double c) {
        if (bu < 0 || c < best) return true;
        if (c > best) return false;
        const bool agree = u == v, best_agree = bu == bv;
        if (agree != best_agree) return agree;
        if (u != bu) return u < bu;
        return v < bv;
    };
    for (int u = 0; u < k; ++u)
        for (int v = 0; v < k; ++v) {
            if (u != v && lambda.is_infinite()) continue;
            const double c = u == v ? a[u] + b[v] : (a[u] + b[v]) + lambda.value();
            if (better(u, v, c)) {
                bu = u, bv = v, best = c;
            }
        }
    return {bu, bv};
}

std::vector<Penalty> test_penalties() {
    return {Penalty(0.0), Penalty(0.1), Penalty(1.0), Penalty(10.0), Penalty::infinity()};
}

}  // namespace

TEST(TcSeparable, WorkedExample) {
    // costs: (+,+) -0.8, (+,-) 0.8, (-,+) 3.2, (-,-) 0.8
    const auto a = neg_log_post(unit_gmm(), column({1.0})), b = neg_log_post(unit_gmm(), column({-0.2}));
    const auto sol = tc_separable(a, b, Penalty(2.0));
    EXPECT_EQ(sol.z0[0], 0);
    EXPECT_EQ(sol.z1[0], 0);
    EXPECT_EQ(sol.disagreement, 0.0);
    // shifting by the shared normalizing constants recovers the enumerated cost
    const double shift = a(0, 0) + 1.0 + b(0, 0) - 0.2;
    EXPECT_NEAR(sol.objective - shift, -0.8, 1e-12);
}

TEST(TcSeparable, HardAgreementIsSignOfSum) {
    std::mt19937_64 rng(1);
    std::normal_distribution<double> g;
    Eigen::MatrixXd x0(200, 1), x1(200, 1);
    for (int i = 0; i < 200; ++i) x0(i, 0) = g(rng), x1(i, 0) = g(rng);
    const auto a = neg_log_post(unit_gmm(), Dataset(FeatureMatrix{x0}));
    const auto b = neg_log_post(unit_gmm(), Dataset(FeatureMatrix{x1}));
    const auto sol = tc_separable(a, b, Penalty::infinity());
    for (int i = 0; i < 200; ++i) EXPECT_EQ(sol.z0[i], x0(i, 0) + x1(i, 0) > 0 ? 0 : 1);
    EXPECT_EQ(sol.z0, sol.z1);
}

TEST(Itl, Examples) {
    EXPECT_EQ(itl(neg_log_post(unit_gmm(), column({0.3, -0.7}))).one_based(), (std::vector<int>{1, 2}));
    EXPECT_EQ(itl(NegLogPostMatrix::zeros(3, 4)).one_based(), (std::vector<int>{1, 1, 1}));
    std::mt19937_64 rng(2);
    std::uniform_real_distribution<double> u(0, 1);
    std::vector<double> e(15);
    for (auto& x : e) x = u(rng);
    const NegLogPostMatrix m(5, 3, e);
    const auto z = itl(m);
    for (int i = 0; i < 5; ++i)
        for (int c = 0; c < 3; ++c) EXPECT_LE(m(i, z[i]), m(i, c));
}

TEST(Dp, Examples) {
    const auto a = neg_log_post(unit_gmm(), column({0.3})), b = neg_log_post(unit_gmm(), column({-0.7}));
    EXPECT_EQ(dp(a, b).one_based(), (std::vector<int>{2}));
    std::mt19937_64 rng(3);
    const auto m = random_costs(rng, 6, 4, 1000);
    EXPECT_EQ(dp(m, NegLogPostMatrix::zeros(6, 4)), itl(m));
    const auto n = random_costs(rng, 6, 4, 1000);
    const auto z = dp(m, n);
    for (int i = 0; i < 6; ++i) {
        int best = 0;
        for (int c = 1; c < 4; ++c)
            if (m(i, c) + n(i, c) < m(i, best) + n(i, best)) best = c;
        EXPECT_EQ(z[i], best);
    }
}

TEST(TcSeparable, ShapeErrors) {
    EXPECT_THROW(tc_separable(NegLogPostMatrix::zeros(3, 2), NegLogPostMatrix::zeros(4, 2), Penalty(1.0)),
                 DimensionError);
    EXPECT_THROW(tc_separable(NegLogPostMatrix::zeros(3, 2), NegLogPostMatrix::zeros(3, 3), Penalty(1.0)),
                 DimensionError);
    EXPECT_THROW(dp(NegLogPostMatrix::zeros(3, 2), NegLogPostMatrix::zeros(3, 3)), DimensionError);
}

TEST(TcSeparable, ExhaustiveEquivalence) {
    std::mt19937_64 rng(4);
    for (int t = 0; t < 1000; ++t) {
        const std::size_t n = 1 + rng() % 20;
        const int k = 2 + static_cast<int>(rng() % 4);
        const int range = t % 2 == 0 ? 3 : 1000;
        const auto a = random_costs(rng, n, k, range), b = random_costs(rng, n, k, range);
        for (const auto lam : test_penalties()) {
            const auto sol = tc_separable(a, b, lam);
            double objective = 0;
            for (std::size_t i = 0; i < n; ++i) {
                const auto [u, v] = brute_pair(a.row(i), b.row(i), lam);
                ASSERT_EQ(sol.z0[i], u) << "t=" << t << " i=" << i;
                ASSERT_EQ(sol.z1[i], v) << "t=" << t << " i=" << i;
                objective += a(i, u) + b(i, v) + (u != v ? lam.value() : 0.0);
            }
            EXPECT_NEAR(sol.objective, objective, 1e-9 * (1 + std::abs(objective)));
            EXPECT_DOUBLE_EQ(sol.disagreement, hamming_distance(sol.z0, sol.z1));
        }
    }
}

// With tied costs the agreement preference can pick a different argmin than
// itl at lambda = 0, so the identity is checked on tie-free costs.
TEST(TcSeparable, EndpointIdentities) {
    std::mt19937_64 rng(5);
    for (int t = 0; t < 200; ++t) {
        const auto a = random_costs(rng, 30, 3, 1 << 30), b = random_costs(rng, 30, 3, 1 << 30);
        EXPECT_EQ(tc_separable(a, b, Penalty(0.0)).z0, itl(a));
        EXPECT_EQ(tc_separable(a, b, Penalty(0.0)).z1, itl(b));
        EXPECT_EQ(tc_separable(a, b, Penalty::infinity()).z0, dp(a, b));
    }
}

TEST(TcSeparable, MonotoneCoupling) {
    std::mt19937_64 rng(6);
    const std::vector<double> grid{0, 0.05, 0.1, 0.3, 0.7, 1, 2, 5, 10, 100};
    for (int t = 0; t < 200; ++t) {
        const int k = 2 + static_cast<int>(rng() % 4);
        const auto a = random_costs(rng, 25, k, t % 2 ? 4 : 1000), b = random_costs(rng, 25, k, t % 2 ? 4 : 1000);
        std::vector<bool> agreed(25, false);
        for (double lam : grid) {
            const auto sol = tc_separable(a, b, Penalty(lam));
            for (int i = 0; i < 25; ++i) {
                const bool agree = sol.z0[i] == sol.z1[i];
                if (agreed[i]) {
                    EXPECT_TRUE(agree);
                }
                agreed[i] = agreed[i] || agree;
            }
        }
    }
}

TEST(TcSeparable, RowShiftInvariance) {
    std::mt19937_64 rng(7);
    for (int t = 0; t < 200; ++t) {
        const auto a = random_costs(rng, 15, 3, 6), b = random_costs(rng, 15, 3, 6);
        std::vector<double> sa(45), sb(45);
        for (int i = 0; i < 15; ++i) {
            const double ca = static_cast<double>(rng() % 16) * 4, cb = static_cast<double>(rng() % 16) * 4;
            for (int c = 0; c < 3; ++c) sa[i * 3 + c] = a(i, c) + ca, sb[i * 3 + c] = b(i, c) + cb;
        }
        const NegLogPostMatrix a2(15, 3, sa), b2(15, 3, sb);
        for (const auto lam : test_penalties()) {
            const auto s1 = tc_separable(a, b, lam), s2 = tc_separable(a2, b2, lam);
            EXPECT_EQ(s1.z0, s2.z0);
            EXPECT_EQ(s1.z1, s2.z1);
        }
    }
}

namespace {

AdjacencyMatrix two_cliques(std::size_t n) {
    std::vector<std::uint8_t> bits(n * n, 0);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j)
            if (i != j && (i < n / 2) == (j < n / 2)) bits[i * n + j] = 1;
    return AdjacencyMatrix(n, bits);
}

SbmParams sbm_params(double p, double q) {
    Eigen::MatrixXd b(2, 2);
    b << p, q, q, p;
    return make_sbm(vec({0.5, 0.5}), b);
}

}  // namespace

TEST(TcNetwork, NoiselessFixedPoint) {
    const auto adj = two_cliques(20);
    std::vector<int> z(20);
    for (int i = 0; i < 20; ++i) z[i] = i < 10 ? 0 : 1;
    const LabelVector truth(z, 2);
    const auto sol = tc_network(sbm_params(0.9, 0.1), adj, NegLogPostMatrix::zeros(20, 2), Penalty(0.0), truth, truth);
    EXPECT_EQ(sol.z0, truth);
    EXPECT_TRUE(sol.converged);
    EXPECT_EQ(sol.sweeps, 1);
    // a wrong start is repaired
    LabelVector start = truth;
    start.set(3, 1);
    start.set(15, 0);
    const auto fixed =
        tc_network(sbm_params(0.9, 0.1), adj, NegLogPostMatrix::zeros(20, 2), Penalty(0.0), start, truth);
    EXPECT_EQ(fixed.z0, truth);
}

TEST(TcNetwork, UninformativeNetworkFollowsOther) {
    std::mt19937_64 rng(8);
    const ModelSpec net(sbm_params(0.3, 0.3));
    std::vector<int> zz(40);
    for (auto& v : zz) v = static_cast<int>(rng() % 2);
    const auto adj = adjacency_of(sample(net, LabelVector(zz, 2), RandomStream(3, {})));
    std::uniform_real_distribution<double> u(0, 5);
    std::vector<double> e(80);
    for (auto& x : e) x = u(rng);
    const NegLogPostMatrix other(40, 2, e);
    const LabelVector init(zz, 2);
    const auto sol = tc_network(net.as<SbmParams>(), adj, other, Penalty::infinity(), init, init);
    EXPECT_EQ(sol.z0, itl(other));
    EXPECT_EQ(sol.z1, itl(other));
    const auto src = tc_network(net.as<SbmParams>(), adj, other, Penalty::infinity(), init, init, NetworkRole::source);
    EXPECT_EQ(src.z0, itl(other));
}

TEST(TcNetwork, ObjectiveNonIncreasingAndFixedPoint) {
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
        std::mt19937_64 rng(seed);
        const ModelSpec net(sbm_params(0.5, 0.3));
        std::vector<int> zz(60);
        for (auto& v : zz) v = static_cast<int>(rng() % 2);
        const auto adj = adjacency_of(sample(net, LabelVector(zz, 2), RandomStream(seed, {1})));
        std::normal_distribution<double> g;
        std::vector<double> e(120);
        for (auto& x : e) x = 2 * g(rng);
        const NegLogPostMatrix other(60, 2, e);
        std::vector<int> r0(60), r1(60);
        for (auto& v : r0) v = static_cast<int>(rng() % 2);
        for (auto& v : r1) v = static_cast<int>(rng() % 2);
        for (const auto lam : {Penalty(0.0), Penalty(1.0), Penalty::infinity()}) {
            for (const auto role : {NetworkRole::target, NetworkRole::source}) {
                std::vector<double> trace;
                const auto sol = tc_network(net.as<SbmParams>(), adj, other, lam, LabelVector(r0, 2), LabelVector(r1, 2),
                                            role, {}, [&](double obj) { trace.push_back(obj); });
                for (std::size_t t = 1; t < trace.size(); ++t) EXPECT_LE(trace[t], trace[t - 1] + 1e-9);
                ASSERT_TRUE(sol.converged);
                EXPECT_DOUBLE_EQ(sol.disagreement, hamming_distance(sol.z0, sol.z1));
                // recompute the objective from scratch
                const auto& net_z = role == NetworkRole::target ? sol.z0 : sol.z1;
                const auto& oth_z = role == NetworkRole::target ? sol.z1 : sol.z0;
                double obj = sbm_neg_log_post_total(net.as<SbmParams>(), adj, net_z);
                for (int i = 0; i < 60; ++i) obj += other(i, oth_z[i]);
                if (!lam.is_infinite()) obj += lam.value() * 60 * sol.disagreement;
                EXPECT_NEAR(sol.objective, obj, 1e-8 * std::abs(obj));
                // restarting from the result changes nothing
                const auto again = tc_network(net.as<SbmParams>(), adj, other, lam, net_z, oth_z, role);
                EXPECT_EQ(again.z0, sol.z0);
                EXPECT_EQ(again.z1, sol.z1);
                EXPECT_EQ(again.sweeps, 1);
            }
        }
    }
}

TEST(TcNetwork, MaxSweepsIsNotAnError) {
    const auto adj = two_cliques(20);
    std::vector<int> z(20, 0);
    z[0] = 1;
    IcmOptions opts;
    opts.max_sweeps = 0;
    const auto sol = tc_network(sbm_params(0.9, 0.1), adj, NegLogPostMatrix::zeros(20, 2), Penalty(0.0),
                                LabelVector(z, 2), LabelVector(z, 2), NetworkRole::target, opts);
    EXPECT_FALSE(sol.converged);
    EXPECT_EQ(sol.sweeps, 0);
    EXPECT_THROW(tc_network(sbm_params(0.9, 0.1), adj, NegLogPostMatrix::zeros(21, 2), Penalty(0.0),
                            LabelVector(z, 2), LabelVector(z, 2)),
                 DimensionError);
}

TEST(TransferSolver, SeparableMatchesDirect) {
    const ModelSpec spec(make_sym_gmm2(vec({1.0, 0.5}), 1.0));
    const auto pr = generate_pair(spec, spec, 300, 0.2, vec({0.5, 0.5}), RandomStream(9, {}));
    const TransferSolver solver(spec, pr.x0, spec, pr.x1, RandomStream(1, {}));
    EXPECT_FALSE(solver.is_network());
    const auto a = neg_log_post(spec, pr.x0), b = neg_log_post(spec, pr.x1);
    for (const auto lam : test_penalties()) {
        const auto s = solver.solve(lam), d = tc_separable(a, b, lam);
        EXPECT_EQ(s.z0, d.z0);
        EXPECT_EQ(s.z1, d.z1);
    }
}

TEST(TransferSolver, NetworkTargetRecoversBlocks) {
    const ModelSpec net(sbm_params(0.5, 0.2));
    const ModelSpec gmm(make_sym_gmm2(vec({1.0}), 1.0));
    const auto pr = generate_pair(net, gmm, 200, 0.0, vec({0.5, 0.5}), RandomStream(10, {}));
    const TransferSolver solver(net, pr.x0, gmm, pr.x1, RandomStream(2, {}));
    EXPECT_TRUE(solver.is_network());
    const auto hard = solver.solve(Penalty::infinity());
    EXPECT_EQ(hard.z0, hard.z1);
    const double err = hamming_distance(pr.z0, align_labels(pr.z0, hard.z0).aligned);
    EXPECT_LT(err, 0.05);
    EXPECT_THROW(TransferSolver(net, pr.x0, net, pr.x0, RandomStream()), InvalidArgument);
}
