#pragma once
// Closed-form rates for the symmetric two-component Gaussian mixture:
// normal CDF, the misclassification bound M(s, eps, lambda), baseline
// ITL / pooling rates, the MAP penalty, the oracle exponent and the
// detection boundary of the matching testing problem.

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

#include "atc/core.hpp"

namespace atc::theory {

// Phi(x) = erfc(-x / sqrt 2) / 2. In the far tails the argument is carried
// in double-double and erfc is corrected to first order, which keeps the
// relative accuracy of products of tiny tail probabilities.
inline double std_normal_cdf(double x) {
    constexpr double inv_sqrt2_hi = 0.70710678118654757;    // nearest double to 1/sqrt(2)
    constexpr double inv_sqrt2_lo = -4.8336466567264567e-17;  // 1/sqrt(2) - inv_sqrt2_hi
    const double t = -x * inv_sqrt2_hi;
    if (std::abs(x) <= 6.0) return 0.5 * std::erfc(t);
    const double t_lo = std::fma(-x, inv_sqrt2_hi, -t) + (-x) * inv_sqrt2_lo;
    const double deriv = -2.0 / std::sqrt(std::numbers::pi) * std::exp(-t * t);
    return 0.5 * (std::erfc(t) + deriv * t_lo);
}

struct RateInputs {
    double s;        // mu / sigma (or ||mu|| / sigma)
    double epsilon;  // label discrepancy in [0, 1/2]
    Penalty lambda;

    void validate() const {
        if (!(s > 0.0) || !std::isfinite(s)) throw InvalidArgument("rate inputs: s must be > 0");
        if (!(epsilon >= 0.0 && epsilon <= 0.5)) throw InvalidArgument("rate inputs: epsilon must lie in [0, 1/2]");
    }
};

inline double snr(double s) { return s * s / 2.0; }

// alpha = log(1/eps) / (4 SNR); +inf at eps = 0.
inline double informativeness(double s, double epsilon) {
    if (epsilon <= 0.0) return std::numeric_limits<double>::infinity();
    return std::log(1.0 / epsilon) / (4.0 * snr(s));
}

// The two pieces of M: noise-only term psi and mismatch term phi.
inline double variance_term(double s, Penalty lambda) {
    if (lambda.is_infinite()) return std_normal_cdf(-std::numbers::sqrt2 * s);
    const double h = lambda.value() / (2.0 * s);
    return std_normal_cdf(-std::numbers::sqrt2 * s) + std_normal_cdf(-s - h) * std_normal_cdf(s - h);
}

inline double bias_term(double s, double epsilon, Penalty lambda) {
    if (lambda.is_infinite()) return 2.0 * epsilon;
    return 2.0 * epsilon * std_normal_cdf(-s + lambda.value() / (2.0 * s));
}

inline double mis_rate_bound(const RateInputs& r) {
    r.validate();
    return variance_term(r.s, r.lambda) + bias_term(r.s, r.epsilon, r.lambda);
}

// log((1 - eps) / eps); the infinity sentinel at eps = 0.
inline Penalty optimal_lambda(double epsilon) {
    if (!(epsilon >= 0.0 && epsilon <= 0.5)) throw InvalidArgument("optimal_lambda: epsilon must lie in [0, 1/2]");
    if (epsilon == 0.0) return Penalty::infinity();
    return Penalty(std::max(0.0, std::log((1.0 - epsilon) / epsilon)));
}

struct BaselineRates {
    double itl;
    double dp_lower;
    double dp_upper;
};

inline BaselineRates baseline_rates(double s, double epsilon) {
    if (!(s > 0.0)) throw InvalidArgument("baseline_rates: s must be > 0");
    const double pooled = std_normal_cdf(-std::numbers::sqrt2 * s);
    return {std_normal_cdf(-s), pooled, pooled + epsilon / 2.0};
}

inline double detection_boundary(double r) {
    if (!(r > 0.0)) throw InvalidArgument("detection_boundary: r must be > 0");
    if (r <= 0.2) return 0.25 * (3.0 + 1.0 / r);
    const double c = std::max(0.0, 1.0 - 2.0 * r);
    return std::sqrt(1.0 - c * c) / (2.0 * r);
}

// exp(-SNR * min((1 + alpha)^2, 2)); alpha = inf saturates at exp(-2 SNR).
inline double oracle_rate(double snr_value, double alpha) {
    if (!(snr_value > 0.0)) throw InvalidArgument("oracle_rate: snr must be > 0");
    if (!(alpha >= 0.0)) throw InvalidArgument("oracle_rate: alpha must be >= 0");
    if (std::isinf(alpha)) return std::exp(-2.0 * snr_value);
    return std::exp(-snr_value * std::min((1.0 + alpha) * (1.0 + alpha), 2.0));
}

}  // namespace atc::theory
