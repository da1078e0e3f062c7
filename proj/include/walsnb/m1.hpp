#pragma once

// Quadratic forms through the residual-maker-like matrix M1 with its rank-1
// dispersion perturbation. M1 is n x n and never materialized: every form
// A' M1 B is assembled from the focus-block Gram factorization plus
// Sherman-Morrison-Woodbury rank-1 corrections, at O(n (p + q + k1) k1).

#include <cmath>

#include <Eigen/Dense>

#include "walsnb/bars.hpp"
#include "walsnb/dataset.hpp"
#include "walsnb/errors.hpp"

namespace walsnb {

class M1Operator {
public:
    M1Operator(const Dataset& data, const BarQuantities& bars)
        : geps_(bars.g_bar * bars.eps_bar),
          p_(bars.psi_inv_sqrt.cwiseProduct(bars.q_bar)),
          Xbar1_(bars.psi_sqrt.asDiagonal() * data.X1),
          r1_(data.X1.transpose() * bars.q_bar) {
        const Matrix S = Xbar1_.transpose() * Xbar1_;
        llt_.compute(S);
        if (llt_.info() != Eigen::Success) {
            throw SingularFocusBlock("M1Operator: focus Gram matrix not positive definite");
        }
        const Vector Sinv_r1 = llt_.solve(r1_);
        smw_denom_ = 1.0 + geps_ * r1_.dot(Sinv_r1);
        if (std::fabs(smw_denom_) < 1e-14) {
            throw SmwDenominatorZero("M1Operator: SMW denominator is zero");
        }
        Sinv_r1_ = Sinv_r1;
    }

    double g_eps() const { return geps_; }
    const Vector& psi_scaled_q() const { return p_; }
    const Matrix& focus_design_bar() const { return Xbar1_; }
    const Vector& focus_q() const { return r1_; }

    // (S + geps r1 r1')^{-1} Y via SMW on the factorized S.
    Matrix solve_gram(const Matrix& Y) const {
        Matrix out = llt_.solve(Y);
        out.noalias() -= Sinv_r1_ * ((geps_ / smw_denom_) * (r1_.transpose() * out));
        return out;
    }

    // A' M1 B for arbitrary n x p and n x q matrices.
    Matrix quad(const Matrix& A, const Matrix& B) const {
        const Vector Ap = A.transpose() * p_;
        const Vector Bp = B.transpose() * p_;
        Matrix result = A.transpose() * B;
        result.noalias() += geps_ * Ap * Bp.transpose();
        // Fa = A'(Xbar1 + geps p r1'), Fb likewise for B
        Matrix Fa = A.transpose() * Xbar1_;
        Fa.noalias() += geps_ * Ap * r1_.transpose();
        Matrix Fb = B.transpose() * Xbar1_;
        Fb.noalias() += geps_ * Bp * r1_.transpose();
        result.noalias() -= Fa * solve_gram(Fb.transpose());
        return result;
    }

private:
    double geps_;
    Vector p_;
    Matrix Xbar1_;
    Vector r1_;
    Eigen::LLT<Matrix> llt_;
    Vector Sinv_r1_;
    double smw_denom_ = 0.0;
};

inline Matrix m1_quadratic_form(const Dataset& data, const BarQuantities& bars,
                                const Matrix& A, const Matrix& B) {
    return M1Operator(data, bars).quad(A, B);
}

}  // namespace walsnb
