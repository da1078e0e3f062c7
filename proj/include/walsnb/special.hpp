#pragma once

// Scalar special functions used by the NB2 kernels: digamma, trigamma and
// a few normal-distribution helpers. Accuracy target is ~1e-13 relative on
// positive arguments, which dominates the accuracy of the dispersion score.

#include <cmath>
#include <limits>
#include <stdexcept>

namespace walsnb {

// psi0(x) for x > 0. Recurrence up to x >= 10, then the asymptotic series
// psi(x) ~ ln x - 1/(2x) - sum B_2n / (2n x^(2n)).
inline double digamma(double x) {
    if (!(x > 0.0)) {
        throw std::domain_error("digamma: argument must be positive");
    }
    double result = 0.0;
    while (x < 10.0) {
        result -= 1.0 / x;
        x += 1.0;
    }
    const double inv = 1.0 / x;
    const double inv2 = inv * inv;
    // Bernoulli coefficients B_2/(2), B_4/(4), ... as -coefficients of inv^(2n)
    double series = inv2 * (1.0 / 12.0
        - inv2 * (1.0 / 120.0
        - inv2 * (1.0 / 252.0
        - inv2 * (1.0 / 240.0
        - inv2 * (1.0 / 132.0
        - inv2 * (691.0 / 32760.0
        - inv2 * (1.0 / 12.0)))))));
    result += std::log(x) - 0.5 * inv - series;
    return result;
}

// psi1(x) for x > 0. Same scheme: recurrence then asymptotic expansion
// psi'(x) ~ 1/x + 1/(2x^2) + sum B_2n / x^(2n+1).
inline double trigamma(double x) {
    if (!(x > 0.0)) {
        throw std::domain_error("trigamma: argument must be positive");
    }
    double result = 0.0;
    while (x < 10.0) {
        result += 1.0 / (x * x);
        x += 1.0;
    }
    const double inv = 1.0 / x;
    const double inv2 = inv * inv;
    double series = 1.0
        + inv * 0.5
        + inv2 * (1.0 / 6.0
        - inv2 * (1.0 / 30.0
        - inv2 * (1.0 / 42.0
        - inv2 * (1.0 / 30.0
        - inv2 * (5.0 / 66.0
        - inv2 * (691.0 / 2730.0
        - inv2 * (7.0 / 6.0)))))));
    result += series * inv;
    return result;
}

inline double norm_pdf(double x) {
    static const double inv_sqrt_2pi = 0.3989422804014326779;
    return inv_sqrt_2pi * std::exp(-0.5 * x * x);
}

inline double norm_cdf(double x) {
    return 0.5 * std::erfc(-x * 0.7071067811865475244);
}

}  // namespace walsnb
