#pragma once

// One-step (single Taylor step) ML estimators of the transformed model:
// the fully restricted and unrestricted solutions plus the closed form for
// any submodel defined by excluding auxiliary columns.

#include <set>

#include <Eigen/Dense>

#include "walsnb/bars.hpp"
#include "walsnb/dataset.hpp"
#include "walsnb/errors.hpp"
#include "walsnb/m1.hpp"
#include "walsnb/transforms.hpp"

namespace walsnb {

// Defines the j-th submodel by the set of excluded auxiliary column indices.
struct RestrictionMatrix {
    std::set<Eigen::Index> excluded;

    Eigen::Index rank() const { return static_cast<Eigen::Index>(excluded.size()); }

    // diagonal of W_j: 1 keeps the column, 0 excludes it
    Vector keep_mask(Eigen::Index k2) const {
        Vector w = Vector::Ones(k2);
        for (Eigen::Index idx : excluded) {
            if (idx < 0 || idx >= k2) {
                throw DimensionMismatch("RestrictionMatrix: excluded index out of range");
            }
            w[idx] = 0.0;
        }
        return w;
    }
};

struct OneStep {
    Vector gamma1_tilde_u;
    Vector gamma2_tilde_u;
    Vector gamma1_tilde_r;  // fully restricted focus estimator
    double alpha_tilde_u = 0.0;

    // cached pieces for restricted submodels
    Vector qT_Z1;  // Z1' q_bar
    Vector qT_Z2;  // Z2' q_bar
    double t_bar = 0.0;
    double g_bar = 0.0;
    double denom = 0.0;
};

inline double onestep_alpha(const OneStep& os, const Vector& gamma1, const Vector& gamma2) {
    const double lin = os.qT_Z1.dot(gamma1) + os.qT_Z2.dot(gamma2);
    return -(os.t_bar + os.g_bar * lin) / os.denom;
}

inline OneStep one_step_unrestricted(const Dataset& data, const BarQuantities& bars,
                                     const TransformState& t) {
    const double n = static_cast<double>(data.n());
    M1Operator op(data, bars);

    const Matrix& Xbar1 = op.focus_design_bar();
    const Matrix Zbar2 = bars.psi_sqrt.asDiagonal() * t.Z2;

    OneStep os;
    os.t_bar = bars.t_bar;
    os.g_bar = bars.g_bar;
    os.denom = bars.denom;
    os.qT_Z1 = t.Z1.transpose() * bars.q_bar;
    os.qT_Z2 = t.Z2.transpose() * bars.q_bar;

    const double te = bars.t_bar * bars.eps_bar;
    // focus block solved in the untransformed basis, then rescaled
    const Vector rhs1 = Xbar1.transpose() * bars.y0_bar - te * op.focus_q();
    os.gamma1_tilde_r =
        t.Delta1.cwiseInverse().asDiagonal() * op.solve_gram(rhs1);

    // gamma2_tilde_u, exploiting Z2bar' M1 Z2bar / n = I
    Matrix cross = Zbar2.transpose() * Xbar1;
    cross.noalias() += op.g_eps() * os.qT_Z2 * op.focus_q().transpose();
    const Vector solved = op.solve_gram(rhs1);
    Vector g2 = Zbar2.transpose() * bars.y0_bar - te * os.qT_Z2;
    g2.noalias() -= cross * solved;
    os.gamma2_tilde_u = g2 / n;

    os.gamma1_tilde_u = os.gamma1_tilde_r - t.D_bar * os.gamma2_tilde_u;
    os.alpha_tilde_u = onestep_alpha(os, os.gamma1_tilde_u, os.gamma2_tilde_u);
    return os;
}

struct RestrictedEstimates {
    Vector gamma1;
    Vector gamma2;
    double alpha = 0.0;
};

inline RestrictedEstimates one_step_restricted(const RestrictionMatrix& restriction,
                                               const OneStep& os,
                                               const TransformState& t) {
    RestrictedEstimates est;
    const Vector mask = restriction.keep_mask(os.gamma2_tilde_u.size());
    est.gamma2 = mask.cwiseProduct(os.gamma2_tilde_u);
    est.gamma1 = os.gamma1_tilde_r - t.D_bar * est.gamma2;
    est.alpha = onestep_alpha(os, est.gamma1, est.gamma2);
    return est;
}

}  // namespace walsnb
