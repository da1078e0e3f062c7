#pragma once

// NB2 distribution and the scalar building blocks of the score and Hessian
// of its log-likelihood under the log-link, with log(rho) parametrized as
// alpha. All quantities are pure functions of their inputs.

#include <cmath>
#include <cstdint>

#include "walsnb/dataset.hpp"
#include "walsnb/errors.hpp"
#include "walsnb/rng.hpp"
#include "walsnb/special.hpp"

namespace walsnb {

enum class Link { Log };  // only the log-link is supported

// beta covers the full (focus, auxiliary) design in order; rho is derived
// from alpha and never set independently.
struct Nb2Params {
    Vector beta;
    double alpha = 0.0;

    double rho() const { return std::exp(alpha); }

    static Nb2Params from_rho(Vector beta, double rho) {
        if (!(rho > 0.0)) throw std::domain_error("Nb2Params: rho must be positive");
        Nb2Params p;
        p.beta = std::move(beta);
        p.alpha = std::log(rho);
        return p;
    }
};

inline double nb2_variance(double mu, double rho) {
    if (!(mu > 0.0) || !(rho > 0.0)) {
        throw std::domain_error("nb2_variance: mu and rho must be positive");
    }
    return mu + mu * mu / rho;
}

inline double nb2_log_pmf(double y, double mu, double rho) {
    if (!(mu > 0.0) || !(rho > 0.0)) {
        throw std::domain_error("nb2_log_pmf: mu and rho must be positive");
    }
    if (y < 0.0) throw std::domain_error("nb2_log_pmf: y must be nonnegative");
    return std::lgamma(y + rho) - std::lgamma(rho) - std::lgamma(y + 1.0)
        + y * std::log(mu) + rho * std::log(rho)
        - (y + rho) * (std::log(mu) + std::log1p(rho / mu));
}

// Scalar pieces of the score and negative Hessian at one observation.
struct KernelValues {
    double theta;   // canonical parameter
    double mu;      // conditional mean
    double sigma2;  // conditional variance
    double v;       // dtheta/deta
    double omega;   // d2theta/deta2
    double psi;     // Hessian weight, positive under log-link
    double c;       // d2theta/(deta drho)
    double kappa;   // dispersion score term
    double k;       // dkappa/drho
    double g;       // drho/dalpha = rho under log-link
    double varrho;  // d2rho/dalpha2 = rho under log-link
};

inline KernelValues kernel_values(double eta, double rho, double y,
                                  Link link = Link::Log) {
    if (link != Link::Log) throw std::domain_error("kernel_values: only the log-link is supported");
    if (!(rho > 0.0)) throw std::domain_error("kernel_values: rho must be positive");
    const double mu = std::exp(eta);
    if (!std::isfinite(mu) || !(mu > 0.0)) {
        throw NumericOverflow("kernel_values: exp(eta) overflow/underflow");
    }
    KernelValues kv;
    kv.mu = mu;
    kv.sigma2 = mu + mu * mu / rho;
    kv.theta = -std::log1p(rho / mu);
    const double denom = mu + rho;
    kv.v = rho / denom;
    kv.omega = -kv.v * (1.0 - kv.v);                 // -rho*mu/(mu+rho)^2
    kv.psi = kv.v * (1.0 - kv.v) * (y + rho);        // mu*rho*(y+rho)/(mu+rho)^2
    kv.c = (1.0 - kv.v) / denom;                     // mu/(mu+rho)^2
    const double log_v = -std::log1p(mu / rho);      // log(rho) - log(mu+rho)
    kv.kappa = -(y - mu) / denom + log_v + digamma(y + rho) - digamma(rho);
    kv.k = (y - mu) / (denom * denom) + mu / (rho * denom)
        + trigamma(y + rho) - trigamma(rho);
    kv.g = rho;
    kv.varrho = rho;
    return kv;
}

inline double log_likelihood(const Nb2Params& params, const Dataset& data) {
    data.validate();
    if (params.beta.size() != data.k1() + data.k2()) {
        throw DimensionMismatch("log_likelihood: coefficient length mismatch");
    }
    const Vector eta = data.full_design() * params.beta;
    const double rho = params.rho();
    double ll = 0.0;
    for (Eigen::Index i = 0; i < data.n(); ++i) {
        ll += nb2_log_pmf(data.y[i], std::exp(eta[i]), rho);
    }
    return ll;
}

// Gamma-Poisson mixture draw: lambda ~ Gamma(rho, mu/rho), y ~ Poisson(lambda).
inline std::uint64_t sample_nb2(double mu, double rho, Rng& rng) {
    if (!(mu > 0.0) || !(rho > 0.0)) {
        throw std::domain_error("sample_nb2: mu and rho must be positive");
    }
    const double lambda = rng.gamma(rho, mu / rho);
    return rng.poisson(lambda);
}

}  // namespace walsnb
