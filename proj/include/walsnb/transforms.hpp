#pragma once

// Scaling of the focus regressors and the rotation of the auxiliary
// regressors that makes the auxiliary one-step estimators componentwise
// independent. The symmetric square root of Xi is taken via
// eigendecomposition; a triangular factor would not satisfy the transform.

#include <Eigen/Dense>

#include "walsnb/bars.hpp"
#include "walsnb/dataset.hpp"
#include "walsnb/errors.hpp"
#include "walsnb/m1.hpp"

namespace walsnb {

struct TransformState {
    Vector Delta1;       // diagonal of Delta1 (k1)
    Vector Delta2;       // diagonal of Delta2 (k2)
    Matrix Xi;           // k2 x k2, unit diagonal by construction
    Matrix Xi_half;      // symmetric square root
    Matrix Xi_neg_half;  // its inverse
    Matrix Z1;           // transformed focus design (X1 * Delta1)
    Matrix Z2;           // transformed auxiliary design (X2 * Delta2 * Xi^{-1/2})
    Matrix D_bar;        // k1 x k2 cross-block of the transformed system
};

inline TransformState build_transforms(const Dataset& data, const BarQuantities& bars) {
    const Eigen::Index n = data.n();
    const Eigen::Index k2 = data.k2();
    M1Operator op(data, bars);

    TransformState t;
    const Matrix& Xbar1 = op.focus_design_bar();
    t.Delta1 = (Xbar1.colwise().squaredNorm() / static_cast<double>(n))
                   .cwiseSqrt().cwiseInverse().transpose();
    t.Z1 = data.X1 * t.Delta1.asDiagonal();

    const Matrix Xbar2 = bars.psi_sqrt.asDiagonal() * data.X2;
    Matrix S2 = op.quad(Xbar2, Xbar2);
    S2 = 0.5 * (S2 + S2.transpose()).eval();

    const Vector diag_scaled = S2.diagonal() / static_cast<double>(n);
    if (k2 > 0 && diag_scaled.minCoeff() <= 0.0) {
        throw NotPositiveDefinite("build_transforms: X2' M1 X2 has nonpositive diagonal");
    }
    t.Delta2 = diag_scaled.cwiseSqrt().cwiseInverse();

    t.Xi = t.Delta2.asDiagonal() * (S2 / static_cast<double>(n)) * t.Delta2.asDiagonal();
    t.Xi = 0.5 * (t.Xi + t.Xi.transpose()).eval();

    Eigen::SelfAdjointEigenSolver<Matrix> eig(t.Xi);
    if (eig.info() != Eigen::Success ||
        (k2 > 0 && eig.eigenvalues().minCoeff() <= 1e-10)) {
        throw NotPositiveDefinite("build_transforms: Xi is not positive definite");
    }
    const Vector sqrt_ev = eig.eigenvalues().cwiseSqrt();
    t.Xi_half = eig.eigenvectors() * sqrt_ev.asDiagonal() * eig.eigenvectors().transpose();
    t.Xi_neg_half =
        eig.eigenvectors() * sqrt_ev.cwiseInverse().asDiagonal() * eig.eigenvectors().transpose();

    t.Z2 = data.X2 * t.Delta2.asDiagonal() * t.Xi_neg_half;

    // D_bar = (Z1bar'Z1bar + ge (Z1'q)(Z1'q)')^{-1} (Z1bar'Z2bar + ge (Z1'q)(Z2'q)')
    const Vector r2 = data.X2.transpose() * bars.q_bar;
    Matrix cross = Xbar1.transpose() * Xbar2;
    cross.noalias() += op.g_eps() * op.focus_q() * r2.transpose();
    t.D_bar = t.Delta1.cwiseInverse().asDiagonal()
        * op.solve_gram(cross) * t.Delta2.asDiagonal() * t.Xi_neg_half;
    return t;
}

}  // namespace walsnb
