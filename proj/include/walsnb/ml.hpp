#pragma once

// Fully iterated maximum-likelihood estimation of the NB2 regression model.
// The fit alternates between IRLS for the coefficients at fixed dispersion
// and Newton steps (in log-dispersion, with step halving) for rho at fixed
// coefficients, until the relative deviance change drops below tolerance.

#include <cmath>
#include <limits>
#include <optional>
#include <string>

#include <Eigen/Dense>

#include "walsnb/dataset.hpp"
#include "walsnb/errors.hpp"
#include "walsnb/kernels.hpp"

namespace walsnb {

struct MlOptions {
    int max_outer_iterations = 2500;
    int max_irls_iterations = 2500;
    double tolerance = 1e-8;  // relative deviance change
};

inline MlOptions ml_options_default() { return MlOptions{}; }

struct MlFit {
    Nb2Params params;
    double loglik = 0.0;
    bool converged = false;
    int outer_iterations = 0;
    int inner_iterations = 0;
    std::optional<std::string> failure_reason;
};

namespace detail {

inline double nb2_deviance(const Vector& y, const Vector& mu, double rho) {
    double dev = 0.0;
    for (Eigen::Index i = 0; i < y.size(); ++i) {
        double term = -(y[i] + rho) * std::log((y[i] + rho) / (mu[i] + rho));
        if (y[i] > 0.0) term += y[i] * std::log(y[i] / mu[i]);
        dev += 2.0 * term;
    }
    return dev;
}

// One IRLS pass for beta at fixed rho; returns updated beta.
inline Vector irls_step(const Matrix& X, const Vector& y, const Vector& eta,
                        const Vector& mu, double rho) {
    const Eigen::Index n = X.rows();
    Vector w(n), z(n);
    for (Eigen::Index i = 0; i < n; ++i) {
        w[i] = mu[i] * rho / (mu[i] + rho);  // mu^2 / sigma^2 under log-link
        z[i] = eta[i] + (y[i] - mu[i]) / mu[i];
    }
    const Matrix Xw = w.asDiagonal() * X;
    Matrix XtWX = X.transpose() * Xw;
    Vector XtWz = Xw.transpose() * z;
    Eigen::LDLT<Matrix> ldlt(XtWX);
    if (ldlt.info() != Eigen::Success) {
        throw RankDeficient("fit_ml: weighted Gram matrix not factorizable");
    }
    return ldlt.solve(XtWz);
}

// Newton update for rho given mu, performed in alpha = log(rho) with step
// halving on the profile log-likelihood.
inline double update_rho(const Vector& y, const Vector& mu, double rho, int* steps) {
    auto profile_ll = [&](double r) {
        double ll = 0.0;
        for (Eigen::Index i = 0; i < y.size(); ++i) ll += nb2_log_pmf(y[i], mu[i], r);
        return ll;
    };
    const double ll0 = profile_ll(rho);
    for (int it = 0; it < 50; ++it) {
        double score = 0.0, hess = 0.0;
        for (Eigen::Index i = 0; i < y.size(); ++i) {
            const double d = mu[i] + rho;
            const double kap = -(y[i] - mu[i]) / d + std::log(rho / d)
                + digamma(y[i] + rho) - digamma(rho);
            const double kk = (y[i] - mu[i]) / (d * d) + mu[i] / (rho * d)
                + trigamma(y[i] + rho) - trigamma(rho);
            score += kap;
            hess += kk;
        }
        // d l / d alpha = rho * score; d2 l / d alpha2 = rho^2 * hess + rho * score
        const double salpha = rho * score;
        double halpha = rho * rho * hess + rho * score;
        if (std::fabs(salpha) < 1e-10 * (1.0 + std::fabs(rho))) break;
        double step = (halpha < 0.0) ? -salpha / halpha : (salpha > 0.0 ? 0.5 : -0.5);
        if (std::fabs(step) > 5.0) step = (step > 0.0) ? 5.0 : -5.0;
        double alpha = std::log(rho);
        double ll_cur = profile_ll(rho);
        bool moved = false;
        for (int half = 0; half < 30; ++half) {
            double cand = std::exp(alpha + step);
            cand = std::min(std::max(cand, 1e-3), 1e6);
            if (profile_ll(cand) >= ll_cur - 1e-12) {
                rho = cand;
                moved = true;
                break;
            }
            step *= 0.5;
        }
        if (steps) ++*steps;
        if (!moved) break;
    }
    if (profile_ll(rho) < ll0) return std::min(std::max(rho, 1e-3), 1e6);
    return rho;
}

inline double moment_rho_start(const Vector& y) {
    const double mean = y.mean();
    double var = 0.0;
    for (Eigen::Index i = 0; i < y.size(); ++i) var += (y[i] - mean) * (y[i] - mean);
    var /= static_cast<double>(y.size() > 1 ? y.size() - 1 : 1);
    double rho = (var > mean && mean > 0.0) ? mean * mean / (var - mean) : 1e6;
    return std::min(std::max(rho, 1e-3), 1e6);
}

}  // namespace detail

inline MlFit fit_ml(const Dataset& data, const MlOptions& options = ml_options_default()) {
    data.validate();
    const Matrix X = data.full_design();
    const Eigen::Index n = X.rows();
    const Eigen::Index k = X.cols();
    if (n <= k) throw RankDeficient("fit_ml: need n > k");

    Eigen::ColPivHouseholderQR<Matrix> qr(X);
    qr.setThreshold(1e-10);
    if (qr.rank() < k) throw RankDeficient("fit_ml: design matrix is rank deficient");

    MlFit fit;
    const Vector& y = data.y;
    double rho = detail::moment_rho_start(y);

    // start from the log of shifted counts
    Vector z0(n);
    for (Eigen::Index i = 0; i < n; ++i) z0[i] = std::log(y[i] + 0.5);
    Vector beta = qr.solve(z0);
    Vector eta = X * beta;
    Vector mu = eta.array().exp();

    double deviance = detail::nb2_deviance(y, mu, rho);
    int inner_total = 0;
    bool converged = false;
    std::optional<std::string> failure;

    int outer = 0;
    try {
        for (; outer < options.max_outer_iterations; ++outer) {
            // (a) IRLS for beta at fixed rho
            double dev_in = deviance;
            for (int it = 0; it < options.max_irls_iterations; ++it) {
                beta = detail::irls_step(X, y, eta, mu, rho);
                eta = X * beta;
                if (eta.maxCoeff() > 690.0) {
                    throw NumericOverflow("fit_ml: linear predictor overflow");
                }
                mu = eta.array().exp();
                const double dev_new = detail::nb2_deviance(y, mu, rho);
                ++inner_total;
                if (std::fabs(dev_new - dev_in) < options.tolerance * (std::fabs(dev_new) + 0.1)) {
                    dev_in = dev_new;
                    break;
                }
                dev_in = dev_new;
            }
            // (b) one-dimensional ML update of rho given beta
            rho = detail::update_rho(y, mu, rho, &inner_total);
            const double dev_new = detail::nb2_deviance(y, mu, rho);
            if (std::fabs(dev_new - deviance) < options.tolerance * (std::fabs(dev_new) + 0.1)) {
                deviance = dev_new;
                converged = true;
                ++outer;
                break;
            }
            deviance = dev_new;
        }
    } catch (const NumericOverflow& e) {
        failure = e.what();
    } catch (const RankDeficient&) {
        throw;
    }

    if (!converged && !failure) failure = "iteration limit reached";

    fit.params = Nb2Params::from_rho(beta, rho);
    fit.loglik = std::numeric_limits<double>::quiet_NaN();
    if (mu.allFinite() && mu.minCoeff() > 0.0) {
        fit.loglik = 0.0;
        for (Eigen::Index i = 0; i < n; ++i) fit.loglik += nb2_log_pmf(y[i], mu[i], rho);
    }
    fit.converged = converged;
    fit.outer_iterations = outer;
    fit.inner_iterations = inner_total;
    fit.failure_reason = failure;
    return fit;
}

// Unpartitioned convenience overload.
inline MlFit fit_ml(const Matrix& X, const Vector& y,
                    const MlOptions& options = ml_options_default()) {
    Dataset data;
    data.y = y;
    data.X1 = X;
    return fit_ml(data, options);
}

}  // namespace walsnb
