#pragma once

// Strictly proper scoring rules for count predictions. All scores are
// negatively oriented (smaller is better). Probability mass vectors are
// truncated at a cap R; the log score uses the exact pmf directly.

#include <cmath>
#include <vector>

#include "walsnb/dataset.hpp"
#include "walsnb/errors.hpp"
#include "walsnb/kernels.hpp"

namespace walsnb {

// Kahan compensated accumulator for long score averages.
class CompensatedSum {
public:
    void add(double x) {
        const double y = x - comp_;
        const double t = sum_ + y;
        comp_ = (t - sum_) - y;
        sum_ = t;
        ++count_;
    }
    double sum() const { return sum_; }
    double mean() const { return count_ > 0 ? sum_ / static_cast<double>(count_) : 0.0; }
    long long count() const { return count_; }

private:
    double sum_ = 0.0;
    double comp_ = 0.0;
    long long count_ = 0;
};

inline double rmse(const Vector& y, const Vector& mu) {
    if (y.size() != mu.size()) throw DimensionMismatch("rmse: length mismatch");
    if (y.size() == 0) throw DimensionMismatch("rmse: empty input");
    CompensatedSum acc;
    for (Eigen::Index i = 0; i < y.size(); ++i) {
        const double d = y[i] - mu[i];
        acc.add(d * d);
    }
    return std::sqrt(acc.mean());
}

// pmf values f(0..R | mu, rho)
inline std::vector<double> nb2_pmf_vector(double mu, double rho, int cap) {
    std::vector<double> p(static_cast<std::size_t>(cap) + 1);
    for (int r = 0; r <= cap; ++r) {
        p[static_cast<std::size_t>(r)] = std::exp(nb2_log_pmf(static_cast<double>(r), mu, rho));
    }
    return p;
}

inline double log_score(double y, double mu, double rho) {
    return -nb2_log_pmf(y, mu, rho);
}

// Brier (quadratic) score on the truncated support {0..cap}.
inline double brier_score(double y, double mu, double rho, int cap) {
    const std::vector<double> p = nb2_pmf_vector(mu, rho, cap);
    CompensatedSum ss;
    for (double pr : p) ss.add(pr * pr);
    const int yi = static_cast<int>(y);
    const double py = (yi >= 0 && yi <= cap) ? p[static_cast<std::size_t>(yi)] : 0.0;
    return -2.0 * py + ss.sum();
}

inline double spherical_score(double y, double mu, double rho, int cap) {
    const std::vector<double> p = nb2_pmf_vector(mu, rho, cap);
    CompensatedSum ss;
    for (double pr : p) ss.add(pr * pr);
    const double norm = std::sqrt(ss.sum());
    if (!(norm > 0.0)) {
        throw DegenerateNorm("spherical_score: truncated pmf has zero norm");
    }
    const int yi = static_cast<int>(y);
    const double py = (yi >= 0 && yi <= cap) ? p[static_cast<std::size_t>(yi)] : 0.0;
    return -py / norm;
}

struct ScoreReport {
    double rmse = 0.0;
    double log = 0.0;
    double brier = 0.0;
    double spherical = 0.0;
};

// Mean scores over an evaluation sample under fitted (mu_i, rho).
inline ScoreReport score_sample(const Vector& y, const Vector& mu, double rho, int cap) {
    if (y.size() != mu.size()) throw DimensionMismatch("score_sample: length mismatch");
    if (y.size() == 0) throw DimensionMismatch("score_sample: empty input");
    ScoreReport rep;
    rep.rmse = rmse(y, mu);
    CompensatedSum ls, bs, sp;
    for (Eigen::Index i = 0; i < y.size(); ++i) {
        ls.add(log_score(y[i], mu[i], rho));
        bs.add(brier_score(y[i], mu[i], rho, cap));
        sp.add(spherical_score(y[i], mu[i], rho, cap));
    }
    rep.log = ls.mean();
    rep.brier = bs.mean();
    rep.spherical = sp.mean();
    return rep;
}

}  // namespace walsnb
