#pragma once

// The WALS-NB model averaging estimator: barred intermediates, transform,
// one-step estimation, componentwise posterior-mean shrinkage of the
// auxiliary coefficients and back-transformation to the original basis.

#include <cmath>

#include "walsnb/bars.hpp"
#include "walsnb/dataset.hpp"
#include "walsnb/errors.hpp"
#include "walsnb/ml.hpp"
#include "walsnb/onestep.hpp"
#include "walsnb/priors.hpp"
#include "walsnb/transforms.hpp"

namespace walsnb {

struct WalsFit {
    Vector gamma1_hat;       // averaged focus coefficients (transformed basis)
    Vector gamma2_hat;       // shrunken auxiliary coefficients (transformed basis)
    Vector w_diag;           // shrinkage weights in [0, 1]
    Vector gamma2_tilde_u;   // unrestricted one-step auxiliary estimates
    Vector gamma1_tilde_r;   // fully restricted focus estimates
    double alpha_hat = 0.0;
    double rho_hat = 0.0;
    Vector beta1_hat;
    Vector beta2_hat;
    PriorSpec prior;
    MlFit start;
    TransformState transforms;

    Eigen::Index k1() const { return beta1_hat.size(); }
    Eigen::Index k2() const { return beta2_hat.size(); }
};

inline WalsFit fit_walsnb(const Dataset& data, const PriorSpec& prior, const MlFit& start,
                          bool allow_unconverged_start = false) {
    prior.validate();
    if (!start.converged && !allow_unconverged_start) {
        throw NonConvergence("fit_walsnb: starting ML fit did not converge", start.outer_iterations);
    }
    const BarQuantities bars = compute_bars(data, start.params);
    const TransformState t = build_transforms(data, bars);
    const OneStep os = one_step_unrestricted(data, bars, t);

    const double sqrt_n = std::sqrt(static_cast<double>(data.n()));

    WalsFit fit;
    fit.prior = prior;
    fit.start = start;
    fit.gamma2_tilde_u = os.gamma2_tilde_u;
    fit.gamma1_tilde_r = os.gamma1_tilde_r;

    const Eigen::Index k2 = data.k2();
    fit.gamma2_hat.resize(k2);
    fit.w_diag.resize(k2);
    for (Eigen::Index h = 0; h < k2; ++h) {
        const double x = sqrt_n * os.gamma2_tilde_u[h];
        const double shrunk = posterior_mean(x, prior) / sqrt_n;
        fit.gamma2_hat[h] = shrunk;
        fit.w_diag[h] = (os.gamma2_tilde_u[h] != 0.0)
            ? shrunk / os.gamma2_tilde_u[h]
            : 1.0;
    }

    fit.gamma1_hat = os.gamma1_tilde_r - t.D_bar * fit.gamma2_hat;
    fit.alpha_hat = onestep_alpha(os, fit.gamma1_hat, fit.gamma2_hat);
    fit.rho_hat = std::exp(fit.alpha_hat);

    fit.beta1_hat = t.Delta1.asDiagonal() * fit.gamma1_hat;
    fit.beta2_hat = (k2 > 0)
        ? Vector(t.Delta2.asDiagonal() * (t.Xi_neg_half * fit.gamma2_hat))
        : Vector(0);
    fit.transforms = t;
    return fit;
}

inline Vector predict_mean(const Vector& beta1, const Vector& beta2,
                           const Matrix& X1new, const Matrix& X2new) {
    if (X1new.cols() != beta1.size() || X2new.cols() != beta2.size()) {
        throw DimensionMismatch("predict_mean: column counts do not match the fitted partition");
    }
    Vector eta = X1new * beta1;
    if (beta2.size() > 0) eta += X2new * beta2;
    return eta.array().exp();
}

inline Vector predict_mean(const WalsFit& fit, const Matrix& X1new, const Matrix& X2new) {
    return predict_mean(fit.beta1_hat, fit.beta2_hat, X1new, X2new);
}

}  // namespace walsnb
