#pragma once

// Symmetric unimodal priors for the shrinkage step and the posterior mean
// m(x) = E(d | x) under the N(d, 1) likelihood. The Laplace prior has a
// closed form; the reflected Weibull is integrated numerically after the
// substitution w = |d|^q, which removes the density singularity at zero.
//
// Default hyperparameters are the minimax-regret solutions of the normal
// location problem; they are compile-time constants here and overridable
// everywhere a PriorSpec is accepted.

#include <cmath>
#include <stdexcept>
#include <string>

#include "walsnb/errors.hpp"
#include "walsnb/special.hpp"

namespace walsnb {

namespace prior_defaults {
// Laplace rate: neutrality (prior median of |d| equal to one)
inline constexpr double laplace_c = 0.6931471805599453;
// reflected Weibull: minimax-regret shape, neutral rate
inline constexpr double weibull_q = 0.887630085544086;
inline constexpr double weibull_c = 0.6931471805599453;
}  // namespace prior_defaults

enum class PriorFamily {
    Laplace,
    ReflectedWeibull,
    Identity,  // debug: no shrinkage, m(x) = x
    Zero,      // debug: full shrinkage, m(x) = 0
};

struct PriorSpec {
    PriorFamily family = PriorFamily::Laplace;
    double c = prior_defaults::laplace_c;  // rate
    double q = 1.0;                        // shape (Weibull only)

    static PriorSpec laplace(double c = prior_defaults::laplace_c) {
        return PriorSpec{PriorFamily::Laplace, c, 1.0};
    }
    static PriorSpec reflected_weibull(double q = prior_defaults::weibull_q,
                                       double c = prior_defaults::weibull_c) {
        return PriorSpec{PriorFamily::ReflectedWeibull, c, q};
    }
    static PriorSpec identity() { return PriorSpec{PriorFamily::Identity, 0.0, 0.0}; }
    static PriorSpec zero() { return PriorSpec{PriorFamily::Zero, 0.0, 0.0}; }

    void validate() const {
        if (family == PriorFamily::Laplace && !(c > 0.0)) {
            throw std::domain_error("PriorSpec: Laplace rate must be positive");
        }
        if (family == PriorFamily::ReflectedWeibull && (!(c > 0.0) || !(q > 0.0))) {
            throw std::domain_error("PriorSpec: Weibull shape and rate must be positive");
        }
    }
};

namespace detail {

inline double log_norm_cdf_neg(double b) {
    // log Phi(-b) for b possibly large
    if (b < 30.0) return std::log(0.5 * std::erfc(b * 0.7071067811865475244));
    return -0.5 * b * b - std::log(b * 2.5066282746310005024);
}

// posterior mean under the Laplace(c) prior, x >= 0
inline double laplace_posterior_mean_nonneg(double x, double c) {
    const double a = x - c;
    const double b = x + c;
    // weight of the negative branch relative to the positive one
    const double log_rel = 2.0 * c * x + log_norm_cdf_neg(b) - std::log(norm_cdf(a) > 0.0 ? norm_cdf(a) : 1e-300);
    const double phi_a = norm_pdf(a);
    const double phi_b = norm_pdf(b);
    const double Phi_a = norm_cdf(a);
    const double Phi_nb = norm_cdf(-b);
    if (log_rel < -700.0) {
        return a + phi_a / Phi_a;  // negative branch negligible
    }
    const double rel = std::exp(2.0 * c * x) * Phi_nb;
    const double num = (a * Phi_a + phi_a) + std::exp(2.0 * c * x) * (b * Phi_nb - phi_b);
    const double den = Phi_a + rel;
    return num / den;
}

struct QuadratureBudget {
    int evaluations = 0;
    int limit = 200000;
};

template <typename F>
double adaptive_simpson(const F& f, double a, double b, double fa, double fm, double fb,
                        double whole, double tol, int depth, QuadratureBudget& budget) {
    const double m = 0.5 * (a + b);
    const double lm = 0.5 * (a + m);
    const double rm = 0.5 * (m + b);
    const double flm = f(lm);
    const double frm = f(rm);
    budget.evaluations += 2;
    if (budget.evaluations > budget.limit) {
        throw QuadratureFailure("posterior_mean: quadrature budget exhausted");
    }
    const double left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
    const double right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
    const double delta = left + right - whole;
    if (depth <= 0) {
        throw QuadratureFailure("posterior_mean: quadrature depth exhausted");
    }
    if (std::fabs(delta) <= 15.0 * tol) {
        return left + right + delta / 15.0;
    }
    return adaptive_simpson(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1, budget)
         + adaptive_simpson(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1, budget);
}

template <typename F>
double integrate(const F& f, double a, double b, double tol, QuadratureBudget& budget) {
    const double m = 0.5 * (a + b);
    const double fa = f(a);
    const double fm = f(m);
    const double fb = f(b);
    budget.evaluations += 3;
    const double whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
    return adaptive_simpson(f, a, b, fa, fm, fb, whole, tol, 60, budget);
}

// Composite variant: the peaked integrands here can vanish at every coarse
// sample point of a single wide span, so the range is pre-split into panels
// before each panel is refined adaptively.
template <typename F>
double integrate_panels(const F& f, double a, double b, int panels, double tol,
                        QuadratureBudget& budget) {
    double total = 0.0;
    const double width = (b - a) / static_cast<double>(panels);
    for (int i = 0; i < panels; ++i) {
        const double lo = a + width * static_cast<double>(i);
        const double hi = (i + 1 == panels) ? b : lo + width;
        total += integrate(f, lo, hi, tol / static_cast<double>(panels), budget);
    }
    return total;
}

// posterior mean under the reflected Weibull(q, c) prior, x >= 0
inline double weibull_posterior_mean_nonneg(double x, double q, double c) {
    const double upper = std::max(std::pow(x + 12.0, q), 50.0 / c);
    const double inv_q = 1.0 / q;
    QuadratureBudget budget;
    // after w = d^q the prior contributes (c/2) exp(-c w) dw on each branch
    auto dens_pos = [&](double w) { return std::exp(-c * w) * norm_pdf(x - std::pow(w, inv_q)); };
    auto num_pos = [&](double w) { return std::pow(w, inv_q) * dens_pos(w); };
    auto dens_neg = [&](double w) { return std::exp(-c * w) * norm_pdf(x + std::pow(w, inv_q)); };
    auto num_neg = [&](double w) { return std::pow(w, inv_q) * dens_neg(w); };

    // pilot scan to scale the absolute tolerance to the integrand magnitude
    double scale = 0.0;
    for (int i = 0; i <= 64; ++i) {
        const double w = upper * static_cast<double>(i) / 64.0;
        scale = std::max(scale, dens_pos(w) + dens_neg(w));
    }
    if (!(scale > 0.0)) {
        // posterior mass has underflowed entirely; the prior is robust, so
        // the mean is within o(1) of the observation for such extreme x
        return x;
    }
    const double tol = 1e-10 * scale * std::max(1.0, upper);
    const double d_pos = integrate_panels(dens_pos, 0.0, upper, 64, tol, budget);
    const double n_pos = integrate_panels(num_pos, 0.0, upper, 64, tol, budget);
    const double d_neg = integrate_panels(dens_neg, 0.0, upper, 64, tol, budget);
    const double n_neg = integrate_panels(num_neg, 0.0, upper, 64, tol, budget);
    const double den = d_pos + d_neg;
    if (!(den > 0.0) || !std::isfinite(den)) {
        throw QuadratureFailure("posterior_mean: degenerate posterior normalizer");
    }
    return (n_pos - n_neg) / den;
}

}  // namespace detail

inline double posterior_mean(double x, const PriorSpec& prior) {
    if (!std::isfinite(x)) throw std::domain_error("posterior_mean: x must be finite");
    prior.validate();
    switch (prior.family) {
        case PriorFamily::Identity:
            return x;
        case PriorFamily::Zero:
            return 0.0;
        case PriorFamily::Laplace: {
            if (x == 0.0) return 0.0;
            const double ax = std::fabs(x);
            const double m = (ax > 40.0) ? ax - prior.c
                                         : detail::laplace_posterior_mean_nonneg(ax, prior.c);
            return x > 0.0 ? m : -m;
        }
        case PriorFamily::ReflectedWeibull: {
            if (x == 0.0) return 0.0;
            const double ax = std::fabs(x);
            const double m = detail::weibull_posterior_mean_nonneg(ax, prior.q, prior.c);
            return x > 0.0 ? m : -m;
        }
    }
    throw std::logic_error("posterior_mean: unknown prior family");
}

inline std::string prior_family_name(PriorFamily f) {
    switch (f) {
        case PriorFamily::Laplace: return "laplace";
        case PriorFamily::ReflectedWeibull: return "weibull";
        case PriorFamily::Identity: return "identity";
        case PriorFamily::Zero: return "zero";
    }
    return "unknown";
}

inline PriorSpec prior_from_name(const std::string& name) {
    if (name == "laplace") return PriorSpec::laplace();
    if (name == "weibull") return PriorSpec::reflected_weibull();
    if (name == "identity") return PriorSpec::identity();
    if (name == "zero") return PriorSpec::zero();
    throw std::domain_error("unknown prior family: " + name);
}

}  // namespace walsnb
