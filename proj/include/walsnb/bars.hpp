#pragma once

// All "barred" intermediates of the linearized NB2 system, evaluated at the
// starting values. These feed the rank-1-perturbed residual algebra and the
// one-step estimators.

#include <cmath>

#include "walsnb/dataset.hpp"
#include "walsnb/errors.hpp"
#include "walsnb/kernels.hpp"

namespace walsnb {

struct BarQuantities {
    Vector eta_bar;     // linear predictor at start
    Vector mu_bar;      // fitted means
    Vector psi_bar;     // Hessian weights (diagonal of Psi)
    Vector v_bar;       // diagonal of V
    Vector c_bar;       // diagonal of C
    Vector u_bar;       // Psi^{-1/2} V (y - mu)
    Vector y_bar;       // transformed response
    Vector y0_bar;      // y_bar adjusted for the dispersion cross term
    Vector kappa_bar;
    Vector k_bar;
    Vector q_bar;       // C (y - mu)
    double g_bar = 0.0;
    double varrho_bar = 0.0;
    double alpha_bar = 0.0;
    double t_bar = 0.0;
    double eps_bar = 0.0;
    double denom = 0.0;  // g^2 <k,1> + varrho <kappa,1>

    Vector psi_sqrt;      // elementwise sqrt of psi_bar
    Vector psi_inv_sqrt;  // elementwise 1/sqrt(psi_bar)
};

inline BarQuantities compute_bars(const Dataset& data, const Nb2Params& start) {
    data.validate();
    if (start.beta.size() != data.k1() + data.k2()) {
        throw DimensionMismatch("compute_bars: starting coefficient length mismatch");
    }
    const Eigen::Index n = data.n();
    const double rho = start.rho();

    BarQuantities b;
    b.alpha_bar = start.alpha;
    b.eta_bar = data.X1 * start.beta.head(data.k1());
    if (data.k2() > 0) b.eta_bar += data.X2 * start.beta.tail(data.k2());

    b.mu_bar.resize(n);
    b.psi_bar.resize(n);
    b.v_bar.resize(n);
    b.c_bar.resize(n);
    b.kappa_bar.resize(n);
    b.k_bar.resize(n);
    for (Eigen::Index i = 0; i < n; ++i) {
        const KernelValues kv = kernel_values(b.eta_bar[i], rho, data.y[i]);
        b.mu_bar[i] = kv.mu;
        b.psi_bar[i] = kv.psi;
        b.v_bar[i] = kv.v;
        b.c_bar[i] = kv.c;
        b.kappa_bar[i] = kv.kappa;
        b.k_bar[i] = kv.k;
        if (!(kv.psi > 0.0) || !std::isfinite(kv.psi)) {
            throw NumericOverflow("compute_bars: nonpositive or non-finite psi");
        }
    }
    b.g_bar = rho;
    b.varrho_bar = rho;

    b.psi_sqrt = b.psi_bar.array().sqrt();
    b.psi_inv_sqrt = b.psi_sqrt.cwiseInverse();

    const Vector resid = data.y - b.mu_bar;
    b.u_bar = b.psi_inv_sqrt.cwiseProduct(b.v_bar.cwiseProduct(resid));
    b.q_bar = b.c_bar.cwiseProduct(resid);

    // y_bar = Xbar1 beta1 + Xbar2 beta2 + u_bar = Psi^{1/2} eta + u_bar
    b.y_bar = b.psi_sqrt.cwiseProduct(b.eta_bar) + b.u_bar;
    b.y0_bar = b.y_bar
        - b.g_bar * b.alpha_bar * b.psi_inv_sqrt.cwiseProduct(b.q_bar);

    const double sum_kappa = b.kappa_bar.sum();
    const double sum_k = b.k_bar.sum();
    b.denom = b.g_bar * b.g_bar * sum_k + b.varrho_bar * sum_kappa;
    if (std::fabs(b.denom) < 1e-12 * static_cast<double>(n)) {
        throw DegenerateDenominator("compute_bars: dispersion curvature denominator near zero");
    }
    b.t_bar = b.g_bar * sum_kappa
        - b.g_bar * resid.dot(b.c_bar.cwiseProduct(b.eta_bar))
        - b.denom * b.alpha_bar;
    b.eps_bar = b.g_bar / b.denom;
    return b;
}

}  // namespace walsnb
