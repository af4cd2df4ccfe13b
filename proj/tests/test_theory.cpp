#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <random>

#include "atc/theory.hpp"

using namespace atc;
using namespace atc::theory;

namespace {

// Independent normal CDF in long double: Taylor series of the integral near
// zero, Lentz continued fraction for the Mills ratio in the tails.
long double phi_oracle(long double x) {
    const long double pdf = std::exp(-x * x / 2) / std::sqrt(2 * std::numbers::pi_v<long double>);
    if (std::fabs(x) <= 3) {
        long double term = x, sum = x;
        for (int k = 1; k < 200; ++k) {
            term *= x * x / (2 * k + 1);
            sum += term;
        }
        return 0.5L + pdf * sum;
    }
    // R(t) = 1 / (t + 1 / (t + 2 / (t + 3 / ...)))
    const long double t = std::fabs(x);
    long double f = t, c = t, d = 0;
    for (int k = 1; k < 500; ++k) {
        d = t + k * d;
        c = t + k / c;
        d = 1 / d;
        const long double delta = c * d;
        f *= delta;
        if (std::fabs(delta - 1) < 1e-19L) break;
    }
    const long double tail = pdf / f;
    return x < 0 ? tail : 1 - tail;
}

double m_direct(double s, double eps, double lam) {
    const double h = lam / (2 * s);
    return static_cast<double>(phi_oracle(-std::sqrt(2.0L) * s) + phi_oracle(-s - h) * phi_oracle(s - h) +
                               2 * eps * phi_oracle(-s + h));
}

}  // namespace

TEST(NormalCdf, Values) {
    EXPECT_EQ(std_normal_cdf(0.0), 0.5);
    EXPECT_NEAR(std_normal_cdf(-2.0), 0.022750131948, 1e-12);
    EXPECT_NEAR(std_normal_cdf(-1.5), 0.0668072012688581, 1e-15);
    for (double x : {-30.0, -12.0, -7.5, -6.1, -5.0, -3.2, -1.0, 0.3, 2.9, 4.0, 8.0}) {
        const double want = static_cast<double>(phi_oracle(x));
        EXPECT_NEAR(std_normal_cdf(x) / want, 1.0, 1e-13) << x;
    }
}

TEST(NormalCdf, Symmetry) {
    std::mt19937_64 rng(1);
    std::uniform_real_distribution<double> u(-8, 8);
    for (int t = 0; t < 1000; ++t) {
        const double x = u(rng);
        EXPECT_NEAR(std_normal_cdf(x) + std_normal_cdf(-x), 1.0, 1e-12);
    }
}

TEST(NormalCdf, MillsSandwich) {
    std::mt19937_64 rng(2);
    std::uniform_real_distribution<double> u(0, 30);
    const double c = std::sqrt(2 / std::numbers::pi);
    for (int t = 0; t < 1000; ++t) {
        const double x = u(rng);
        const double e = std::exp(-x * x / 2);
        const double v = std_normal_cdf(-x);
        EXPECT_LE(c * e / (x + std::sqrt(x * x + 4)), v * (1 + 1e-14));
        EXPECT_LE(v, c * e / (x + std::sqrt(x * x + 8 / std::numbers::pi)) * (1 + 1e-14));
    }
}

TEST(RateBound, Endpoints) {
    for (double s : {0.5, 1.0, 1.5, 3.0})
        for (double eps : {0.0, 0.1, 0.5}) {
            const double base = std_normal_cdf(-std::numbers::sqrt2 * s);
            EXPECT_NEAR(mis_rate_bound({s, eps, Penalty(0.0)}),
                        base + std_normal_cdf(-s) * std_normal_cdf(s) + 2 * eps * std_normal_cdf(-s), 1e-15);
            EXPECT_DOUBLE_EQ(mis_rate_bound({s, eps, Penalty::infinity()}), base + 2 * eps);
        }
}

TEST(RateBound, MatchesIndependentComposition) {
    const double lam = optimal_lambda(0.05).value();
    EXPECT_NEAR(lam, std::log(19.0), 1e-15);
    EXPECT_NEAR(mis_rate_bound({1.5, 0.05, optimal_lambda(0.05)}), m_direct(1.5, 0.05, lam), 1e-10);
    std::mt19937_64 rng(3);
    std::uniform_real_distribution<double> us(0.2, 4), ue(0, 0.5), ul(0, 40);
    for (int t = 0; t < 500; ++t) {
        const double s = us(rng), e = ue(rng), l = ul(rng);
        const double got = mis_rate_bound({s, e, Penalty(l)}), want = m_direct(s, e, l);
        EXPECT_NEAR(got / want, 1.0, 1e-10);
        EXPECT_GE(got, std_normal_cdf(-std::numbers::sqrt2 * s));
    }
}

TEST(RateBound, ComponentMonotonicity) {
    for (double s : {0.3, 1.0, 1.5, 2.5})
        for (double eps : {0.01, 0.2, 0.5}) {
            double prev_var = 1, prev_bias = -1;
            for (int j = 0; j <= 400; ++j) {
                const Penalty lam(0.1 * j);
                const double v = variance_term(s, lam), b = bias_term(s, eps, lam);
                EXPECT_LE(v, prev_var + 1e-16);
                EXPECT_GE(b, prev_bias - 1e-16);
                EXPECT_NEAR(mis_rate_bound({s, 0.0, lam}), v, 1e-16);
                prev_var = v, prev_bias = b;
            }
            EXPECT_LE(variance_term(s, Penalty::infinity()), prev_var);
            EXPECT_GE(bias_term(s, eps, Penalty::infinity()), prev_bias);
        }
}

TEST(RateBound, InputValidation) {
    EXPECT_THROW(mis_rate_bound({0.0, 0.1, Penalty(1.0)}), InvalidArgument);
    EXPECT_THROW(mis_rate_bound({1.0, 0.6, Penalty(1.0)}), InvalidArgument);
    EXPECT_THROW(optimal_lambda(-0.1), InvalidArgument);
}

TEST(OptimalLambda, Values) {
    EXPECT_EQ(optimal_lambda(0.5).value(), 0.0);
    EXPECT_NEAR(optimal_lambda(0.1).value(), 2.1972245773362196, 1e-15);
    EXPECT_TRUE(optimal_lambda(0.0).is_infinite());
    EXPECT_GT(optimal_lambda(1e-300).value(), 600);
}

TEST(OptimalLambda, ConstantFactorOptimal) {
    for (double s : {0.5, 1.0, 1.5, 2.0, 3.0})
        for (double eps : {0.001, 0.01, 0.05, 0.1, 0.3, 0.5}) {
            const double at_star = mis_rate_bound({s, eps, optimal_lambda(eps)});
            double best = mis_rate_bound({s, eps, Penalty::infinity()});
            for (int j = 0; j < 10000; ++j) best = std::min(best, mis_rate_bound({s, eps, Penalty(j * 0.005)}));
            EXPECT_GE(best, at_star / 4) << s << " " << eps;
        }
}

TEST(Baselines, Values) {
    const auto b = baseline_rates(1.5, 0.1);
    EXPECT_NEAR(b.itl, 0.0668072012688581, 1e-15);
    EXPECT_NEAR(b.dp_lower, static_cast<double>(phi_oracle(-std::sqrt(2.0L) * 1.5L)), 1e-15);
    EXPECT_NEAR(b.dp_lower, 0.0169474267623446, 1e-13);
    EXPECT_NEAR(b.dp_upper, b.dp_lower + 0.05, 1e-15);
    const auto z = baseline_rates(1.5, 0.0);
    EXPECT_EQ(z.dp_lower, z.dp_upper);
}

TEST(DetectionBoundary, Values) {
    EXPECT_NEAR(detection_boundary(0.2), 2.0, 1e-14);
    EXPECT_NEAR(detection_boundary(0.5), 1.0, 1e-15);
    EXPECT_NEAR(detection_boundary(1.0), 0.5, 1e-15);
    EXPECT_NEAR(detection_boundary(0.2), detection_boundary(std::nextafter(0.2, 1.0)), 1e-12);
    const double r = 0.2 + 1e-13;
    EXPECT_NEAR(2.5 * std::sqrt(1 - 0.36), (1 / (2 * r)) * std::sqrt(1 - (1 - 2 * r) * (1 - 2 * r)), 1e-11);
    EXPECT_THROW(detection_boundary(0.0), InvalidArgument);
}

TEST(OracleRate, Values) {
    EXPECT_DOUBLE_EQ(oracle_rate(1.7, 0.0), std::exp(-1.7));
    EXPECT_DOUBLE_EQ(oracle_rate(1.7, 0.5), std::exp(-3.4));
    EXPECT_DOUBLE_EQ(oracle_rate(1.7, std::numbers::sqrt2 - 1 + 1e-12), std::exp(-3.4));
    EXPECT_NEAR(oracle_rate(2.0, 0.2), 0.05613476283, 1e-10);
    EXPECT_DOUBLE_EQ(oracle_rate(2.0, std::numeric_limits<double>::infinity()), std::exp(-4.0));
    EXPECT_EQ(snr(2.0), 2.0);
    EXPECT_NEAR(informativeness(1.5, 0.1), std::log(10.0) / 4.5, 1e-15);
    EXPECT_TRUE(std::isinf(informativeness(1.5, 0.0)));
}
