#pragma once

// Independent reference implementations used only by the tests: dense
// construction of the rank-1-perturbed residual matrix, the untransformed
// closed-form one-step solution via explicit partitioned inverses, random
// instance generation and finite differences. Deliberately naive, O(n^2)
// and free of the production shortcuts they are meant to check.

#include <cstdint>

#include <Eigen/Dense>

#include "walsnb/bars.hpp"
#include "walsnb/dataset.hpp"
#include "walsnb/kernels.hpp"
#include "walsnb/ml.hpp"
#include "walsnb/rng.hpp"

namespace walsnb::test {

struct Instance {
    Dataset data;
    MlFit start;
};

// Random dataset with an intercept in the focus block and a converged ML
// starting fit; bumps the seed until the starting fit converges.
inline Instance random_instance(Eigen::Index n, Eigen::Index k1, Eigen::Index k2,
                                std::uint64_t seed) {
    for (std::uint64_t attempt = 0;; ++attempt) {
        Rng rng = Rng::from_stream(seed + attempt, 0x7E57u);
        Dataset data;
        data.X1.resize(n, k1);
        data.X1.col(0).setOnes();
        for (Eigen::Index j = 1; j < k1; ++j) {
            for (Eigen::Index i = 0; i < n; ++i) data.X1(i, j) = rng.normal();
        }
        data.X2.resize(n, k2);
        for (Eigen::Index j = 0; j < k2; ++j) {
            for (Eigen::Index i = 0; i < n; ++i) data.X2(i, j) = rng.normal();
        }
        Vector beta1(k1), beta2(k2);
        beta1[0] = 1.0;
        for (Eigen::Index j = 1; j < k1; ++j) beta1[j] = rng.uniform(-0.3, 0.3);
        for (Eigen::Index j = 0; j < k2; ++j) beta2[j] = rng.uniform(-0.05, 0.05);
        const double rho = rng.uniform(0.5, 3.0);
        Vector eta = data.X1 * beta1 + data.X2 * beta2;
        data.y.resize(n);
        for (Eigen::Index i = 0; i < n; ++i) {
            data.y[i] = static_cast<double>(sample_nb2(std::exp(eta[i]), rho, rng));
        }
        MlFit start;
        try {
            start = fit_ml(data);
        } catch (const std::exception&) {
            continue;
        }
        if (!start.converged) continue;
        return Instance{std::move(data), std::move(start)};
    }
}

// Dense n x n construction of the residual-maker-like matrix.
inline Matrix dense_m1(const Dataset& data, const BarQuantities& b) {
    const Eigen::Index n = data.n();
    const double ge = b.g_bar * b.eps_bar;
    const Vector p = b.psi_inv_sqrt.cwiseProduct(b.q_bar);
    const Matrix Xbar1 = b.psi_sqrt.asDiagonal() * data.X1;
    const Vector r1 = data.X1.transpose() * b.q_bar;
    const Matrix S1 = Xbar1.transpose() * Xbar1 + ge * r1 * r1.transpose();
    const Matrix L = Xbar1 + ge * p * r1.transpose();
    Matrix M = Matrix::Identity(n, n) + ge * p * p.transpose();
    M -= L * S1.inverse() * L.transpose();
    return M;
}

// Untransformed closed-form one-step solution computed through the explicit
// partitioned inverse with a dense M1.
struct UntransformedOneStep {
    Vector beta1_u;
    Vector beta2_u;
    Vector beta1_r;
    double alpha_u = 0.0;
};

inline UntransformedOneStep untransformed_one_step(const Dataset& data,
                                                   const BarQuantities& b) {
    const double ge = b.g_bar * b.eps_bar;
    const double te = b.t_bar * b.eps_bar;
    const Matrix Xbar1 = b.psi_sqrt.asDiagonal() * data.X1;
    const Matrix Xbar2 = b.psi_sqrt.asDiagonal() * data.X2;
    const Vector r1 = data.X1.transpose() * b.q_bar;
    const Vector r2 = data.X2.transpose() * b.q_bar;
    const Matrix S1 = Xbar1.transpose() * Xbar1 + ge * r1 * r1.transpose();
    const Matrix A12 = Xbar1.transpose() * Xbar2 + ge * r1 * r2.transpose();
    const Matrix M1 = dense_m1(data, b);
    const Matrix S2M = Xbar2.transpose() * M1 * Xbar2;
    const Vector rhs1 = Xbar1.transpose() * b.y0_bar - te * r1;
    const Vector rhs2 = Xbar2.transpose() * b.y0_bar - te * r2;

    UntransformedOneStep out;
    const Vector s1_rhs1 = S1.ldlt().solve(rhs1);
    out.beta1_r = s1_rhs1;
    out.beta2_u = S2M.ldlt().solve(rhs2 - A12.transpose() * s1_rhs1);
    out.beta1_u = S1.ldlt().solve(rhs1 - A12 * out.beta2_u);
    const Vector eta_hat = data.X1 * out.beta1_u + data.X2 * out.beta2_u;
    out.alpha_u = -(b.t_bar + b.g_bar * b.q_bar.dot(eta_hat)) / b.denom;
    return out;
}

// Residuals of the linearized likelihood system at a candidate solution
// with no restrictions: the coefficient block stacks the two normal
// equations of the weighted regression of y0 on (Xbar1, Xbar2) plus the
// rank-1 dispersion coupling, the last entry is the alpha equation.
inline Vector linearized_residual(const Dataset& data, const BarQuantities& b,
                                  const Vector& beta1, const Vector& beta2, double alpha) {
    const double ge = b.g_bar * b.eps_bar;
    const double te = b.t_bar * b.eps_bar;
    const Matrix Xbar1 = b.psi_sqrt.asDiagonal() * data.X1;
    const Matrix Xbar2 = b.psi_sqrt.asDiagonal() * data.X2;
    const Vector r1 = data.X1.transpose() * b.q_bar;
    const Vector r2 = data.X2.transpose() * b.q_bar;
    const Vector eta_hat = data.X1 * beta1 + data.X2 * beta2;
    const double coupling = b.q_bar.dot(eta_hat);

    // alpha consistent with (beta1, beta2) by the expanded alpha equation
    Vector res(data.k1() + data.k2() + 1);
    Vector top = Xbar1.transpose() * (b.y0_bar - Xbar1 * beta1 - Xbar2 * beta2)
        - te * r1 - ge * coupling * r1;
    Vector bottom = Xbar2.transpose() * (b.y0_bar - Xbar1 * beta1 - Xbar2 * beta2)
        - te * r2 - ge * coupling * r2;
    res.head(data.k1()) = top;
    res.segment(data.k1(), data.k2()) = bottom;
    res[data.k1() + data.k2()] =
        b.denom * alpha + b.t_bar + b.g_bar * coupling;
    return res;
}

// central finite difference of a scalar function
template <typename F>
double fd_derivative(const F& f, double x, double h) {
    return (f(x + h) - f(x - h)) / (2.0 * h);
}

}  // namespace walsnb::test
