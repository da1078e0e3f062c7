#pragma once

#include <Eigen/Dense>

#include "walsnb/errors.hpp"

namespace walsnb {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

// Count responses with a caller-declared focus/auxiliary partition of the
// design. k2 = 0 degenerates to a plain regression (no averaging).
struct Dataset {
    Vector y;   // nonnegative integer counts, length n
    Matrix X1;  // n x k1 focus design
    Matrix X2;  // n x k2 auxiliary design

    Eigen::Index n() const { return y.size(); }
    Eigen::Index k1() const { return X1.cols(); }
    Eigen::Index k2() const { return X2.cols(); }

    Matrix full_design() const {
        if (k2() == 0) return X1;
        Matrix X(n(), k1() + k2());
        X << X1, X2;
        return X;
    }

    void validate() const {
        if (X1.rows() != n() || (X2.size() > 0 && X2.rows() != n())) {
            throw DimensionMismatch("Dataset: design rows do not match response length");
        }
        if (n() < k1() + k2() + 1) {
            throw DimensionMismatch("Dataset: need n >= k1 + k2 + 1");
        }
        if (!y.allFinite() || !X1.allFinite() || !X2.allFinite()) {
            throw DimensionMismatch("Dataset: non-finite entries");
        }
        for (Eigen::Index i = 0; i < n(); ++i) {
            if (y[i] < 0.0 || y[i] != std::floor(y[i])) {
                throw DimensionMismatch("Dataset: responses must be nonnegative integers");
            }
        }
    }
};

}  // namespace walsnb
