#pragma once

// K-fold cross-validated learning curves on user-supplied count data, plus
// design-matrix construction from declared column terms (interactions and
// powers). Validation folds are fixed; only the training sets grow, and the
// training sets are nested across grid points by construction.

#include <algorithm>
#include <array>
#include <atomic>
#include <cstdint>
#include <limits>
#include <map>
#include <numeric>
#include <optional>
#include <ostream>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

#include "walsnb/dataset.hpp"
#include "walsnb/io.hpp"
#include "walsnb/ml.hpp"
#include "walsnb/priors.hpp"
#include "walsnb/rng.hpp"
#include "walsnb/scoring.hpp"
#include "walsnb/wals.hpp"

namespace walsnb {

struct FoldPlan {
    std::vector<int> assignments;  // per-observation fold index in 0..K-1
    std::vector<Eigen::Index> order;  // the underlying permutation
    int K = 0;
    std::uint64_t seed = 0;

    std::vector<Eigen::Index> fold_indices(int k) const {
        std::vector<Eigen::Index> out;
        for (std::size_t i = 0; i < assignments.size(); ++i) {
            if (assignments[i] == k) out.push_back(static_cast<Eigen::Index>(i));
        }
        return out;
    }

    // training rows for fold k: the permutation with fold k's block removed
    std::vector<Eigen::Index> training_order(int k) const {
        std::vector<Eigen::Index> out;
        out.reserve(order.size());
        for (Eigen::Index idx : order) {
            if (assignments[static_cast<std::size_t>(idx)] != k) out.push_back(idx);
        }
        return out;
    }

    Eigen::Index max_fold_size() const {
        std::vector<Eigen::Index> sizes(static_cast<std::size_t>(K), 0);
        for (int a : assignments) ++sizes[static_cast<std::size_t>(a)];
        return *std::max_element(sizes.begin(), sizes.end());
    }
};

// Random permutation, then contiguous blocks; the first n mod K folds take
// one extra observation so fold sizes differ by at most one.
inline FoldPlan make_folds(Eigen::Index n, int K, std::uint64_t seed) {
    if (K < 2) throw std::domain_error("make_folds: K must be at least 2");
    if (n < K) throw std::domain_error("make_folds: need n >= K");
    FoldPlan plan;
    plan.K = K;
    plan.seed = seed;
    plan.order.resize(static_cast<std::size_t>(n));
    std::iota(plan.order.begin(), plan.order.end(), Eigen::Index{0});
    Rng rng = Rng::from_stream(seed, 0xF01Du);
    for (Eigen::Index i = n - 1; i > 0; --i) {
        const Eigen::Index j = static_cast<Eigen::Index>(
            rng.uniform01() * static_cast<double>(i + 1));
        std::swap(plan.order[static_cast<std::size_t>(i)],
                  plan.order[static_cast<std::size_t>(std::min(j, i))]);
    }
    plan.assignments.assign(static_cast<std::size_t>(n), 0);
    const Eigen::Index base = n / K;
    const Eigen::Index extra = n % K;
    Eigen::Index pos = 0;
    for (int k = 0; k < K; ++k) {
        const Eigen::Index size = base + (k < extra ? 1 : 0);
        for (Eigen::Index i = 0; i < size; ++i, ++pos) {
            plan.assignments[static_cast<std::size_t>(plan.order[static_cast<std::size_t>(pos)])] = k;
        }
    }
    return plan;
}

// Declarative design construction. A term is a base column name, an
// interaction "a:b" or a power "a^2". The intercept, when requested, leads
// the focus block.
struct DesignSpec {
    std::string response;
    std::vector<std::string> focus;
    std::vector<std::string> auxiliary;
    bool intercept = true;
};

namespace detail {

inline Vector term_column(const RawTable& table, const std::string& term) {
    const Eigen::Index n = static_cast<Eigen::Index>(table.n_rows());
    const auto colon = term.find(':');
    const auto caret = term.find('^');
    Vector out(n);
    if (colon != std::string::npos) {
        const std::size_t a = table.column_index(term.substr(0, colon));
        const std::size_t b = table.column_index(term.substr(colon + 1));
        for (Eigen::Index i = 0; i < n; ++i) {
            out[i] = table.numeric(static_cast<std::size_t>(i), a)
                   * table.numeric(static_cast<std::size_t>(i), b);
        }
    } else if (caret != std::string::npos) {
        const std::size_t a = table.column_index(term.substr(0, caret));
        const double power = std::stod(term.substr(caret + 1));
        for (Eigen::Index i = 0; i < n; ++i) {
            out[i] = std::pow(table.numeric(static_cast<std::size_t>(i), a), power);
        }
    } else {
        const std::size_t a = table.column_index(term);
        for (Eigen::Index i = 0; i < n; ++i) {
            out[i] = table.numeric(static_cast<std::size_t>(i), a);
        }
    }
    return out;
}

}  // namespace detail

inline Dataset build_design(const RawTable& table, const DesignSpec& spec) {
    const Eigen::Index n = static_cast<Eigen::Index>(table.n_rows());
    Dataset data;
    const std::size_t yc = table.column_index(spec.response);
    data.y.resize(n);
    for (Eigen::Index i = 0; i < n; ++i) {
        data.y[i] = table.numeric(static_cast<std::size_t>(i), yc);
    }
    const Eigen::Index k1 = static_cast<Eigen::Index>(spec.focus.size()) + (spec.intercept ? 1 : 0);
    data.X1.resize(n, k1);
    Eigen::Index col = 0;
    if (spec.intercept) data.X1.col(col++).setOnes();
    for (const std::string& term : spec.focus) {
        data.X1.col(col++) = detail::term_column(table, term);
    }
    data.X2.resize(n, static_cast<Eigen::Index>(spec.auxiliary.size()));
    for (std::size_t j = 0; j < spec.auxiliary.size(); ++j) {
        data.X2.col(static_cast<Eigen::Index>(j)) = detail::term_column(table, spec.auxiliary[j]);
    }
    data.validate();
    return data;
}

// A named estimation procedure for the learning curve: its own design over
// the shared raw table, estimated by ML or by the model-averaging estimator.
struct CvProcedure {
    std::string name;
    DesignSpec design;
    bool use_wals = false;
    PriorSpec prior = PriorSpec::laplace();
};

struct CvCell {
    Eigen::Index t = 0;
    std::string procedure;
    int fold = 0;
    bool ok = false;
    ScoreReport scores;
    std::string failure;
};

struct LearningCurve {
    std::vector<Eigen::Index> grid;
    int K = 0;
    int truncation = 0;
    std::vector<CvCell> cells;  // ordered by (t, procedure, fold)
};

struct CvOptions {
    MlOptions ml = ml_options_default();
    int threads = 1;
    std::optional<int> truncation;  // default: max observed count
};

namespace detail {

inline Dataset subset_rows(const Dataset& data, const std::vector<Eigen::Index>& rows,
                           std::size_t count) {
    Dataset out;
    const Eigen::Index m = static_cast<Eigen::Index>(count);
    out.y.resize(m);
    out.X1.resize(m, data.k1());
    out.X2.resize(m, data.k2());
    for (Eigen::Index i = 0; i < m; ++i) {
        const Eigen::Index r = rows[static_cast<std::size_t>(i)];
        out.y[i] = data.y[r];
        out.X1.row(i) = data.X1.row(r);
        if (data.k2() > 0) out.X2.row(i) = data.X2.row(r);
    }
    return out;
}

}  // namespace detail

inline LearningCurve learning_curve(const RawTable& table,
                                    const std::vector<CvProcedure>& procedures,
                                    const std::vector<Eigen::Index>& grid,
                                    int K, std::uint64_t seed,
                                    const CvOptions& opt = CvOptions{}) {
    if (procedures.empty()) throw std::domain_error("learning_curve: no procedures");
    if (grid.empty()) throw std::domain_error("learning_curve: empty training-size grid");

    const Eigen::Index n = static_cast<Eigen::Index>(table.n_rows());
    const FoldPlan plan = make_folds(n, K, seed);
    const Eigen::Index t_max = n - plan.max_fold_size();
    for (Eigen::Index t : grid) {
        if (t < 1 || t > t_max) {
            throw std::domain_error("learning_curve: training size out of range, max is " +
                                    std::to_string(t_max));
        }
    }

    // each procedure's full design, built once
    std::vector<Dataset> designs;
    designs.reserve(procedures.size());
    for (const CvProcedure& p : procedures) designs.push_back(build_design(table, p.design));

    int cap = 0;
    if (opt.truncation) {
        cap = *opt.truncation;
    } else {
        cap = static_cast<int>(designs.front().y.maxCoeff());
    }

    LearningCurve curve;
    curve.grid = grid;
    curve.K = K;
    curve.truncation = cap;
    const std::size_t np = procedures.size();
    const std::size_t cells_per_t = np * static_cast<std::size_t>(K);
    curve.cells.resize(grid.size() * cells_per_t);

    auto do_grid_point = [&](std::size_t l) {
        const Eigen::Index t = grid[l];
        for (std::size_t p = 0; p < np; ++p) {
            const Dataset& full = designs[p];
            for (int k = 0; k < K; ++k) {
                CvCell& cell = curve.cells[l * cells_per_t + p * static_cast<std::size_t>(K)
                                           + static_cast<std::size_t>(k)];
                cell.t = t;
                cell.procedure = procedures[p].name;
                cell.fold = k;
                try {
                    const std::vector<Eigen::Index> train_rows = plan.training_order(k);
                    const Dataset train =
                        detail::subset_rows(full, train_rows, static_cast<std::size_t>(t));
                    const std::vector<Eigen::Index> val_rows = plan.fold_indices(k);
                    const Dataset val = detail::subset_rows(full, val_rows, val_rows.size());

                    Vector mu_hat;
                    double rho_hat = 0.0;
                    if (procedures[p].use_wals) {
                        const MlFit start = fit_ml(train, opt.ml);
                        if (!start.converged) {
                            throw NonConvergence("starting ML fit did not converge",
                                                 start.outer_iterations);
                        }
                        const WalsFit wf = fit_walsnb(train, procedures[p].prior, start);
                        mu_hat = predict_mean(wf, val.X1, val.X2);
                        rho_hat = wf.rho_hat;
                    } else {
                        const MlFit f = fit_ml(train, opt.ml);
                        if (!f.converged) {
                            throw NonConvergence("ML fit did not converge", f.outer_iterations);
                        }
                        mu_hat = (val.full_design() * f.params.beta).array().exp();
                        rho_hat = f.params.rho();
                    }
                    cell.scores = score_sample(val.y, mu_hat, rho_hat, cap);
                    cell.ok = true;
                } catch (const std::exception& e) {
                    cell.ok = false;
                    cell.failure = e.what();
                }
            }
        }
    };

    const int threads = std::max(1, opt.threads);
    if (threads == 1 || grid.size() == 1) {
        for (std::size_t l = 0; l < grid.size(); ++l) do_grid_point(l);
    } else {
        std::atomic<std::size_t> next{0};
        std::vector<std::thread> workers;
        for (int w = 0; w < threads; ++w) {
            workers.emplace_back([&] {
                for (std::size_t l = next.fetch_add(1); l < grid.size();
                     l = next.fetch_add(1)) {
                    do_grid_point(l);
                }
            });
        }
        for (auto& t : workers) t.join();
    }
    return curve;
}

// fold means per (t, procedure, metric), failures excluded with counts
struct CvMeanRow {
    Eigen::Index t = 0;
    std::string procedure;
    int folds_ok = 0;
    int folds_failed = 0;
    double rmse = 0.0, log = 0.0, brier = 0.0, spherical = 0.0;
};

inline std::vector<CvMeanRow> cv_means(const LearningCurve& curve) {
    std::map<std::pair<Eigen::Index, std::string>, CvMeanRow> groups;
    std::map<std::pair<Eigen::Index, std::string>, std::array<CompensatedSum, 4>> sums;
    for (const CvCell& c : curve.cells) {
        auto key = std::make_pair(c.t, c.procedure);
        CvMeanRow& row = groups[key];
        row.t = c.t;
        row.procedure = c.procedure;
        if (!c.ok) {
            ++row.folds_failed;
            continue;
        }
        ++row.folds_ok;
        auto& s = sums[key];
        s[0].add(c.scores.rmse);
        s[1].add(c.scores.log);
        s[2].add(c.scores.brier);
        s[3].add(c.scores.spherical);
    }
    std::vector<CvMeanRow> out;
    for (auto& [key, row] : groups) {
        const auto& s = sums[key];
        const double nan = std::numeric_limits<double>::quiet_NaN();
        row.rmse = row.folds_ok > 0 ? s[0].mean() : nan;
        row.log = row.folds_ok > 0 ? s[1].mean() : nan;
        row.brier = row.folds_ok > 0 ? s[2].mean() : nan;
        row.spherical = row.folds_ok > 0 ? s[3].mean() : nan;
        out.push_back(row);
    }
    return out;
}

inline void write_curve_csv(std::ostream& os, const LearningCurve& curve,
                            const std::string& metadata) {
    if (!metadata.empty()) os << metadata;
    os << "t,procedure,fold,converged,rmse,log,brier,spherical\n";
    for (const CvCell& c : curve.cells) {
        os << c.t << ',' << c.procedure << ',' << c.fold << ','
           << (c.ok ? "true" : "false") << ',';
        if (c.ok) {
            os << format_double(c.scores.rmse) << ',' << format_double(c.scores.log) << ','
               << format_double(c.scores.brier) << ',' << format_double(c.scores.spherical);
        } else {
            os << "NA,NA,NA,NA";
        }
        os << '\n';
    }
}

inline void write_cv_means_csv(std::ostream& os, const std::vector<CvMeanRow>& rows,
                               const std::string& metadata) {
    if (!metadata.empty()) os << metadata;
    os << "t,procedure,folds_ok,folds_failed,rmse,log,brier,spherical\n";
    for (const CvMeanRow& r : rows) {
        os << r.t << ',' << r.procedure << ',' << r.folds_ok << ',' << r.folds_failed << ','
           << format_double(r.rmse) << ',' << format_double(r.log) << ','
           << format_double(r.brier) << ',' << format_double(r.spherical) << '\n';
    }
}

}  // namespace walsnb
