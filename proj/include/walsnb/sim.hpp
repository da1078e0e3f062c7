#pragma once

// Monte-Carlo benchmark harness. Each run draws an independent training and
// validation sample from the count-data generating process, fits every
// requested procedure on the training sample and scores it on the validation
// sample. Failures are recorded and excluded from aggregates, never imputed.

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <limits>
#include <map>
#include <optional>
#include <ostream>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

#include "walsnb/dataset.hpp"
#include "walsnb/io.hpp"
#include "walsnb/kernels.hpp"
#include "walsnb/ml.hpp"
#include "walsnb/priors.hpp"
#include "walsnb/rng.hpp"
#include "walsnb/scoring.hpp"
#include "walsnb/wals.hpp"

namespace walsnb {

struct Scenario {
    int scenario_id = 0;
    Eigen::Index n = 500;
    Eigen::Index k1 = 1;
    Eigen::Index k2 = 1;
    double rho = 1.0;
    double b = 0.0;
    Eigen::Index n_eval = 4000;
    int runs = 300;
    std::uint64_t seed = 0;

    void validate() const {
        if (k1 < 1 || k1 > 10) throw std::domain_error("Scenario: k1 must be in 1..10");
        if (k2 < 1 || k2 > 100) throw std::domain_error("Scenario: k2 must be in 1..100");
        if (!(b >= 0.0 && b < 1.0)) throw std::domain_error("Scenario: b must be in [0,1)");
        if (!(rho > 0.0)) throw std::domain_error("Scenario: rho must be positive");
        if (n < 1 || n_eval < 1 || runs < 1) {
            throw std::domain_error("Scenario: n, n_eval and runs must be positive");
        }
    }
};

struct CoefficientPool {
    Vector beta1_pool;          // 10 entries, |value| in [0.1, 0.25]
    Vector beta2_pool;          // 100 entries, |value| <= 0.01
    double offset = 1.0986122886681098;  // log 3
};

inline CoefficientPool generate_pools(std::uint64_t seed) {
    Rng rng = Rng::from_stream(seed, 0xC0EFu);
    CoefficientPool pool;
    pool.beta1_pool.resize(10);
    for (int j = 0; j < 10; ++j) {
        const double sign = rng.uniform01() < 0.5 ? -1.0 : 1.0;
        pool.beta1_pool[j] = sign * (0.1 + 0.15 * rng.uniform01());
    }
    pool.beta2_pool.resize(100);
    for (int m = 0; m < 100; ++m) {
        pool.beta2_pool[m] = -0.01 + 0.02 * rng.uniform01();
    }
    return pool;
}

// Rows i.i.d. N(0, S) with unit variances and constant pairwise correlation
// b, via the one-factor representation x = sqrt(b) z0 1 + sqrt(1-b) z.
inline Matrix sample_design(Eigen::Index n, Eigen::Index k, double b, Rng& rng) {
    if (!(b >= 0.0 && b < 1.0)) throw std::domain_error("sample_design: b must be in [0,1)");
    Matrix X(n, k);
    const double sb = std::sqrt(b);
    const double s1b = std::sqrt(1.0 - b);
    for (Eigen::Index i = 0; i < n; ++i) {
        const double z0 = (b > 0.0) ? rng.normal() : 0.0;
        for (Eigen::Index j = 0; j < k; ++j) {
            X(i, j) = sb * z0 + s1b * rng.normal();
        }
    }
    return X;
}

enum class Procedure {
    WalsDgp,    // constant + first-block regressors as focus, rest auxiliary
    WalsAux,    // constant as sole focus, all regressors auxiliary
    MlU,        // constant + all regressors
    MlFocus,    // constant + first-block regressors only
    MlAc,       // constant + second-block regressors only
    Oracle,     // true (mu, rho), no estimation
};

inline std::string procedure_name(Procedure p) {
    switch (p) {
        case Procedure::WalsDgp: return "walsNB-dgp";
        case Procedure::WalsAux: return "walsNB-aux";
        case Procedure::MlU: return "ML-U";
        case Procedure::MlFocus: return "ML-focus";
        case Procedure::MlAc: return "ML-AC";
        case Procedure::Oracle: return "oracle";
    }
    return "unknown";
}

inline Procedure procedure_from_name(const std::string& name) {
    if (name == "walsNB-dgp") return Procedure::WalsDgp;
    if (name == "walsNB-aux") return Procedure::WalsAux;
    if (name == "ML-U") return Procedure::MlU;
    if (name == "ML-focus") return Procedure::MlFocus;
    if (name == "ML-AC") return Procedure::MlAc;
    if (name == "oracle") return Procedure::Oracle;
    throw std::domain_error("unknown procedure: " + name);
}

inline std::vector<Procedure> default_procedures() {
    return {Procedure::WalsDgp, Procedure::WalsAux, Procedure::MlU,
            Procedure::MlFocus, Procedure::MlAc, Procedure::Oracle};
}

struct RunResult {
    int scenario_id = 0;
    int run = 0;
    std::string procedure;
    bool converged = false;
    std::optional<ScoreReport> scores;  // present iff converged
    double fit_millis = std::numeric_limits<double>::quiet_NaN();
};

struct SimOptions {
    PriorSpec prior = PriorSpec::reflected_weibull();
    MlOptions ml = ml_options_default();
    int truncation = 150;      // pmf cap for Brier/spherical
    int threads = 1;
    bool record_timing = true;  // off for byte-identical CSV comparisons
};

namespace detail {

struct RunData {
    Matrix X;        // n x (k1 + k2), DGP order
    Vector y;
    Vector mu_true;  // validation only
};

inline RunData draw_sample(const Scenario& sc, const CoefficientPool& pool,
                           Eigen::Index n, Rng& rng) {
    RunData d;
    d.X = sample_design(n, sc.k1 + sc.k2, sc.b, rng);
    const Vector beta1 = pool.beta1_pool.head(sc.k1);
    const Vector beta2 = pool.beta2_pool.head(sc.k2);
    Vector eta = Vector::Constant(n, pool.offset);
    eta += d.X.leftCols(sc.k1) * beta1;
    eta += d.X.rightCols(sc.k2) * beta2;
    d.mu_true = eta.array().exp();
    d.y.resize(n);
    for (Eigen::Index i = 0; i < n; ++i) {
        d.y[i] = sample_nb2(d.mu_true[i], sc.rho, rng);
    }
    return d;
}

// design with an intercept followed by the selected regressor columns
inline Matrix with_intercept(const Matrix& cols) {
    Matrix X(cols.rows(), cols.cols() + 1);
    X.col(0).setOnes();
    X.rightCols(cols.cols()) = cols;
    return X;
}

}  // namespace detail

inline std::vector<RunResult> run_scenario(const Scenario& sc, const CoefficientPool& pool,
                                           const std::vector<Procedure>& procedures,
                                           const SimOptions& opt = SimOptions{}) {
    sc.validate();
    const std::size_t np = procedures.size();
    std::vector<RunResult> results(static_cast<std::size_t>(sc.runs) * np);

    auto do_run = [&](int run) {
        Rng train_rng = Rng::from_stream(sc.seed, static_cast<std::uint64_t>(sc.scenario_id),
                                         static_cast<std::uint64_t>(run), 1u);
        Rng eval_rng = Rng::from_stream(sc.seed, static_cast<std::uint64_t>(sc.scenario_id),
                                        static_cast<std::uint64_t>(run), 2u);
        const detail::RunData train = detail::draw_sample(sc, pool, sc.n, train_rng);
        const detail::RunData eval = detail::draw_sample(sc, pool, sc.n_eval, eval_rng);

        const Matrix X_full = detail::with_intercept(train.X);
        const Matrix Xe_full = detail::with_intercept(eval.X);

        // shared unrestricted ML fit: comparator and WALS starting values
        std::optional<MlFit> ml_u;
        auto unrestricted = [&]() -> const MlFit& {
            if (!ml_u) ml_u = fit_ml(X_full, train.y, opt.ml);
            return *ml_u;
        };

        for (std::size_t p = 0; p < np; ++p) {
            RunResult& rr = results[static_cast<std::size_t>(run) * np + p];
            rr.scenario_id = sc.scenario_id;
            rr.run = run;
            rr.procedure = procedure_name(procedures[p]);
            const auto t0 = std::chrono::steady_clock::now();
            try {
                Vector mu_hat;
                double rho_hat = sc.rho;
                bool ok = true;
                switch (procedures[p]) {
                    case Procedure::Oracle: {
                        mu_hat = eval.mu_true;
                        break;
                    }
                    case Procedure::MlU: {
                        const MlFit& f = unrestricted();
                        ok = f.converged;
                        if (ok) {
                            mu_hat = (Xe_full * f.params.beta).array().exp();
                            rho_hat = f.params.rho();
                        }
                        break;
                    }
                    case Procedure::MlFocus:
                    case Procedure::MlAc: {
                        const Matrix cols = (procedures[p] == Procedure::MlFocus)
                            ? train.X.leftCols(sc.k1)
                            : train.X.rightCols(sc.k2);
                        const Matrix ecols = (procedures[p] == Procedure::MlFocus)
                            ? eval.X.leftCols(sc.k1)
                            : eval.X.rightCols(sc.k2);
                        const MlFit f = fit_ml(detail::with_intercept(cols), train.y, opt.ml);
                        ok = f.converged;
                        if (ok) {
                            mu_hat = (detail::with_intercept(ecols) * f.params.beta).array().exp();
                            rho_hat = f.params.rho();
                        }
                        break;
                    }
                    case Procedure::WalsDgp:
                    case Procedure::WalsAux: {
                        const MlFit& start = unrestricted();
                        ok = start.converged;
                        if (ok) {
                            const Eigen::Index kf = (procedures[p] == Procedure::WalsDgp)
                                ? 1 + sc.k1 : 1;
                            Dataset data;
                            data.y = train.y;
                            data.X1 = X_full.leftCols(kf);
                            data.X2 = X_full.rightCols(X_full.cols() - kf);
                            const WalsFit wf = fit_walsnb(data, opt.prior, start);
                            mu_hat = predict_mean(wf, Xe_full.leftCols(kf),
                                                  Xe_full.rightCols(Xe_full.cols() - kf));
                            rho_hat = wf.rho_hat;
                        }
                        break;
                    }
                }
                if (ok) {
                    rr.scores = score_sample(eval.y, mu_hat, rho_hat, opt.truncation);
                    rr.converged = true;
                }
            } catch (const std::exception&) {
                rr.converged = false;
                rr.scores.reset();
            }
            if (opt.record_timing && rr.converged) {
                const auto t1 = std::chrono::steady_clock::now();
                rr.fit_millis =
                    std::chrono::duration<double, std::milli>(t1 - t0).count();
            }
        }
    };

    const int threads = std::max(1, opt.threads);
    if (threads == 1 || sc.runs == 1) {
        for (int run = 0; run < sc.runs; ++run) do_run(run);
    } else {
        std::atomic<int> next{0};
        std::vector<std::thread> workers;
        workers.reserve(static_cast<std::size_t>(threads));
        for (int w = 0; w < threads; ++w) {
            workers.emplace_back([&] {
                for (int run = next.fetch_add(1); run < sc.runs; run = next.fetch_add(1)) {
                    do_run(run);
                }
            });
        }
        for (auto& t : workers) t.join();
    }
    return results;
}

struct AggregateRow {
    int scenario_id = 0;
    std::string procedure;
    int successes = 0;
    int failures = 0;
    // per metric: mean, lower quartile, upper quartile
    double mean[4] = {};
    double q25[4] = {};
    double q75[4] = {};
};

namespace detail {

// linearly interpolated quantile on a sorted copy
inline double quantile(std::vector<double> v, double p) {
    if (v.empty()) return std::numeric_limits<double>::quiet_NaN();
    std::sort(v.begin(), v.end());
    const double h = p * static_cast<double>(v.size() - 1);
    const std::size_t lo = static_cast<std::size_t>(h);
    if (lo + 1 >= v.size()) return v.back();
    const double frac = h - static_cast<double>(lo);
    return v[lo] + frac * (v[lo + 1] - v[lo]);
}

}  // namespace detail

inline std::vector<AggregateRow> aggregate_results(const std::vector<RunResult>& results) {
    std::map<std::pair<int, std::string>, std::vector<const RunResult*>> groups;
    for (const RunResult& r : results) groups[{r.scenario_id, r.procedure}].push_back(&r);
    std::vector<AggregateRow> out;
    for (const auto& [key, rows] : groups) {
        AggregateRow agg;
        agg.scenario_id = key.first;
        agg.procedure = key.second;
        std::vector<double> metric[4];
        CompensatedSum sums[4];
        for (const RunResult* r : rows) {
            if (!r->converged || !r->scores) {
                ++agg.failures;
                continue;
            }
            ++agg.successes;
            const double vals[4] = {r->scores->rmse, r->scores->log,
                                    r->scores->brier, r->scores->spherical};
            for (int m = 0; m < 4; ++m) {
                metric[m].push_back(vals[m]);
                sums[m].add(vals[m]);
            }
        }
        for (int m = 0; m < 4; ++m) {
            agg.mean[m] = agg.successes > 0 ? sums[m].mean()
                                            : std::numeric_limits<double>::quiet_NaN();
            agg.q25[m] = detail::quantile(metric[m], 0.25);
            agg.q75[m] = detail::quantile(metric[m], 0.75);
        }
        out.push_back(std::move(agg));
    }
    return out;
}

inline void write_results_csv(std::ostream& os, const std::vector<RunResult>& results,
                              const std::string& metadata) {
    if (!metadata.empty()) os << metadata;
    os << "scenario_id,run,procedure,converged,rmse,log,brier,spherical,fit_millis\n";
    for (const RunResult& r : results) {
        os << r.scenario_id << ',' << r.run << ',' << r.procedure << ','
           << (r.converged ? "true" : "false") << ',';
        if (r.scores) {
            os << format_double(r.scores->rmse) << ',' << format_double(r.scores->log) << ','
               << format_double(r.scores->brier) << ',' << format_double(r.scores->spherical);
        } else {
            os << "NA,NA,NA,NA";
        }
        os << ',' << format_double(r.fit_millis) << '\n';
    }
}

inline void write_aggregate_csv(std::ostream& os, const std::vector<AggregateRow>& rows,
                                const std::string& metadata) {
    if (!metadata.empty()) os << metadata;
    os << "scenario_id,procedure,successes,failures";
    static const char* names[4] = {"rmse", "log", "brier", "spherical"};
    for (const char* n : names) os << ',' << n << "_mean," << n << "_q25," << n << "_q75";
    os << '\n';
    for (const AggregateRow& r : rows) {
        os << r.scenario_id << ',' << r.procedure << ',' << r.successes << ',' << r.failures;
        for (int m = 0; m < 4; ++m) {
            os << ',' << format_double(r.mean[m]) << ',' << format_double(r.q25[m])
               << ',' << format_double(r.q75[m]);
        }
        os << '\n';
    }
}

}  // namespace walsnb
