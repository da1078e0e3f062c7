// Command-line surface: fit, simulate, cv and score workflows over the
// header-only estimation library. Configuration lives in a JSON file whose
// keys individual flags may override; every output file embeds the tool
// version, the resolved config and the seed so a run can be reproduced
// bit-exactly from its own artifact.
//
// Exit codes: 0 success, 1 usage/config error, 2 estimation failure,
// 3 I/O error.

#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "walsnb/cv.hpp"
#include "walsnb/io.hpp"
#include "walsnb/ml.hpp"
#include "walsnb/sim.hpp"
#include "walsnb/version.hpp"
#include "walsnb/wals.hpp"

namespace {

using nlohmann::json;
using namespace walsnb;

constexpr int kExitOk = 0;
constexpr int kExitUsage = 1;
constexpr int kExitEstimation = 2;
constexpr int kExitIo = 3;

json load_config(const std::string& path) {
    if (path.empty()) return json::object();
    std::ifstream in(path);
    if (!in) throw CsvError("cannot open config file " + path);
    json cfg;
    try {
        in >> cfg;
    } catch (const json::exception& e) {
        throw std::domain_error("config parse error in " + path + ": " + e.what());
    }
    return cfg;
}

PriorSpec prior_from_config(const json& cfg) {
    PriorSpec prior = prior_from_name(cfg.value("prior", std::string("laplace")));
    if (cfg.contains("prior_c")) prior.c = cfg["prior_c"].get<double>();
    if (cfg.contains("prior_q")) prior.q = cfg["prior_q"].get<double>();
    prior.validate();
    return prior;
}

MlOptions ml_from_config(const json& cfg) {
    MlOptions opt = ml_options_default();
    if (cfg.contains("ml")) {
        const json& m = cfg["ml"];
        opt.max_outer_iterations = m.value("max_outer_iterations", opt.max_outer_iterations);
        opt.max_irls_iterations = m.value("max_irls_iterations", opt.max_irls_iterations);
        opt.tolerance = m.value("tolerance", opt.tolerance);
    }
    return opt;
}

DesignSpec design_from_json(const json& d) {
    DesignSpec spec;
    spec.response = d.at("response").get<std::string>();
    if (d.contains("focus")) spec.focus = d["focus"].get<std::vector<std::string>>();
    if (d.contains("auxiliary")) spec.auxiliary = d["auxiliary"].get<std::vector<std::string>>();
    spec.intercept = d.value("intercept", true);
    return spec;
}

std::string metadata_block(const json& resolved, std::uint64_t seed) {
    std::ostringstream os;
    os << "# walsnb " << kVersion << '\n';
    os << "# seed: " << seed << '\n';
    os << "# config: " << resolved.dump() << '\n';
    return os.str();
}

std::ofstream open_output(const std::string& path) {
    std::ofstream out(path);
    if (!out) throw CsvError("cannot open output file " + path);
    return out;
}

// ---- fit ----------------------------------------------------------------

int cmd_fit(const std::string& data_path, const std::string& config_path,
            const std::string& out_path, const std::string& prior_flag,
            std::optional<std::uint64_t> seed_flag) {
    json cfg = load_config(config_path);
    if (!prior_flag.empty()) cfg["prior"] = prior_flag;
    if (seed_flag) cfg["seed"] = *seed_flag;
    const std::uint64_t seed = cfg.value("seed", 0ULL);
    if (!cfg.contains("design")) {
        throw std::domain_error("fit: config must contain a 'design' object");
    }
    const DesignSpec spec = design_from_json(cfg["design"]);
    const PriorSpec prior = prior_from_config(cfg);
    const MlOptions ml_opt = ml_from_config(cfg);

    const RawTable table = read_csv_file(data_path);
    const Dataset data = build_design(table, spec);
    const MlFit start = fit_ml(data, ml_opt);
    if (!start.converged) {
        std::cerr << "fit: ML starting fit did not converge ("
                  << start.failure_reason.value_or("unknown") << ")\n";
        return kExitEstimation;
    }
    const WalsFit fit = fit_walsnb(data, prior, start);

    std::vector<std::string> names;
    if (spec.intercept) names.push_back("(intercept)");
    for (const auto& t : spec.focus) names.push_back(t);
    for (const auto& t : spec.auxiliary) names.push_back(t);

    std::ofstream out = open_output(out_path);
    out << metadata_block(cfg, seed);
    out << "# rho_hat: " << format_double(fit.rho_hat) << '\n';
    out << "# ml_loglik: " << format_double(start.loglik) << '\n';
    out << "# ml_converged: " << (start.converged ? "true" : "false") << '\n';
    out << "# ml_iterations: " << start.outer_iterations << '\n';
    out << "term,role,beta,gamma,weight\n";
    for (Eigen::Index j = 0; j < data.k1(); ++j) {
        out << names[static_cast<std::size_t>(j)] << ",focus,"
            << format_double(fit.beta1_hat[j]) << ','
            << format_double(fit.gamma1_hat[j]) << ",NA\n";
    }
    for (Eigen::Index j = 0; j < data.k2(); ++j) {
        out << names[static_cast<std::size_t>(data.k1() + j)] << ",auxiliary,"
            << format_double(fit.beta2_hat[j]) << ','
            << format_double(fit.gamma2_hat[j]) << ','
            << format_double(fit.w_diag[j]) << '\n';
    }
    return kExitOk;
}

// ---- simulate -----------------------------------------------------------

int cmd_simulate(const std::string& config_path, const std::string& out_path,
                 const std::string& aggregate_path, std::optional<int> threads_flag,
                 std::optional<std::uint64_t> seed_flag) {
    json cfg = load_config(config_path);
    if (seed_flag) cfg["seed"] = *seed_flag;
    const std::uint64_t seed = cfg.value("seed", 0ULL);
    cfg["seed"] = seed;

    SimOptions opt;
    opt.prior = prior_from_config(cfg.contains("prior") ? cfg : json{{"prior", "weibull"}});
    opt.ml = ml_from_config(cfg);
    opt.truncation = cfg.value("truncation", 150);
    opt.threads = threads_flag.value_or(cfg.value("threads", 1));
    const std::string timing = cfg.value("timing", std::string("millis"));
    if (timing != "millis" && timing != "none") {
        throw std::domain_error("simulate: timing must be 'millis' or 'none'");
    }
    opt.record_timing = (timing == "millis");

    std::vector<Procedure> procedures;
    if (cfg.contains("procedures")) {
        for (const auto& name : cfg["procedures"]) {
            procedures.push_back(procedure_from_name(name.get<std::string>()));
        }
    } else {
        procedures = default_procedures();
    }

    const int runs = cfg.value("runs", 300);
    const Eigen::Index n_eval = cfg.value("n_eval", 4000);

    // the grid is the cartesian product of the per-parameter value lists
    auto list_of = [&](const char* key, std::vector<double> fallback) {
        if (cfg.contains("grid") && cfg["grid"].contains(key)) {
            return cfg["grid"][key].get<std::vector<double>>();
        }
        return fallback;
    };
    const std::vector<double> ns = list_of("n", {500.0});
    const std::vector<double> k1s = list_of("k1", {1.0});
    const std::vector<double> k2s = list_of("k2", {1.0});
    const std::vector<double> rhos = list_of("rho", {1.0});
    const std::vector<double> bs = list_of("b", {0.0});

    std::vector<Scenario> scenarios;
    int id = 0;
    for (double n : ns)
        for (double k1 : k1s)
            for (double k2 : k2s)
                for (double rho : rhos)
                    for (double b : bs) {
                        Scenario sc;
                        sc.scenario_id = id++;
                        sc.n = static_cast<Eigen::Index>(n);
                        sc.k1 = static_cast<Eigen::Index>(k1);
                        sc.k2 = static_cast<Eigen::Index>(k2);
                        sc.rho = rho;
                        sc.b = b;
                        sc.n_eval = n_eval;
                        sc.runs = runs;
                        sc.seed = seed;
                        sc.validate();
                        scenarios.push_back(sc);
                    }

    // resolved config, minus execution details that do not affect results
    json resolved = cfg;
    resolved.erase("threads");
    resolved["runs"] = runs;
    resolved["n_eval"] = n_eval;
    resolved["truncation"] = opt.truncation;
    resolved["timing"] = timing;

    const CoefficientPool pool = generate_pools(seed);
    std::vector<RunResult> all;
    for (const Scenario& sc : scenarios) {
        std::vector<RunResult> res = run_scenario(sc, pool, procedures, opt);
        all.insert(all.end(), std::make_move_iterator(res.begin()),
                   std::make_move_iterator(res.end()));
    }

    std::ofstream out = open_output(out_path);
    write_results_csv(out, all, metadata_block(resolved, seed));
    if (!aggregate_path.empty()) {
        std::ofstream agg = open_output(aggregate_path);
        write_aggregate_csv(agg, aggregate_results(all), metadata_block(resolved, seed));
    }
    return kExitOk;
}

// ---- cv -----------------------------------------------------------------

int cmd_cv(const std::string& data_path, const std::string& config_path,
           const std::string& out_path, const std::string& means_path,
           std::optional<int> threads_flag, std::optional<std::uint64_t> seed_flag) {
    json cfg = load_config(config_path);
    if (seed_flag) cfg["seed"] = *seed_flag;
    const std::uint64_t seed = cfg.value("seed", 0ULL);
    cfg["seed"] = seed;
    const int K = cfg.value("K", 10);

    CvOptions opt;
    opt.ml = ml_from_config(cfg);
    opt.threads = threads_flag.value_or(cfg.value("threads", 1));
    if (cfg.contains("truncation")) opt.truncation = cfg["truncation"].get<int>();

    if (!cfg.contains("procedures") || cfg["procedures"].empty()) {
        throw std::domain_error("cv: config must list at least one procedure");
    }
    std::vector<CvProcedure> procedures;
    for (const auto& p : cfg["procedures"]) {
        CvProcedure proc;
        proc.name = p.at("name").get<std::string>();
        proc.design = design_from_json(p.at("design"));
        const std::string method = p.value("method", std::string("ml"));
        if (method == "wals") {
            proc.use_wals = true;
            proc.prior = prior_from_config(p.contains("prior") ? p : json{{"prior", "laplace"}});
        } else if (method != "ml") {
            throw std::domain_error("cv: method must be 'wals' or 'ml'");
        }
        procedures.push_back(std::move(proc));
    }

    const RawTable table = read_csv_file(data_path);
    std::vector<Eigen::Index> grid;
    if (cfg.contains("grid")) {
        for (const auto& t : cfg["grid"]) grid.push_back(t.get<Eigen::Index>());
    } else {
        const Eigen::Index n = static_cast<Eigen::Index>(table.n_rows());
        grid.push_back(n - make_folds(n, K, seed).max_fold_size());
    }

    json resolved = cfg;
    resolved.erase("threads");
    resolved["K"] = K;
    resolved["grid"] = grid;

    const LearningCurve curve = learning_curve(table, procedures, grid, K, seed, opt);

    bool any_ok = false;
    for (const CvCell& c : curve.cells) any_ok = any_ok || c.ok;
    if (!any_ok) {
        std::cerr << "cv: every fold fit failed\n";
        return kExitEstimation;
    }

    std::ofstream out = open_output(out_path);
    write_curve_csv(out, curve, metadata_block(resolved, seed));
    if (!means_path.empty()) {
        std::ofstream means = open_output(means_path);
        write_cv_means_csv(means, cv_means(curve), metadata_block(resolved, seed));
    }
    return kExitOk;
}

// ---- score --------------------------------------------------------------

int cmd_score(const std::string& predictions_path, const std::string& out_path,
              std::optional<int> truncation_flag) {
    const RawTable table = read_csv_file(predictions_path);
    const std::size_t yc = table.column_index("y");
    const std::size_t mc = table.column_index("mu");
    const std::size_t rc = table.column_index("rho");
    const Eigen::Index n = static_cast<Eigen::Index>(table.n_rows());
    if (n == 0) throw CsvError(predictions_path + ": no data rows");

    Vector y(n), mu(n), rho(n);
    for (Eigen::Index i = 0; i < n; ++i) {
        y[i] = table.numeric(static_cast<std::size_t>(i), yc);
        mu[i] = table.numeric(static_cast<std::size_t>(i), mc);
        rho[i] = table.numeric(static_cast<std::size_t>(i), rc);
    }
    const int cap = truncation_flag.value_or(150);

    ScoreReport rep;
    rep.rmse = rmse(y, mu);
    CompensatedSum ls, bs, sp;
    for (Eigen::Index i = 0; i < n; ++i) {
        ls.add(log_score(y[i], mu[i], rho[i]));
        bs.add(brier_score(y[i], mu[i], rho[i], cap));
        sp.add(spherical_score(y[i], mu[i], rho[i], cap));
    }
    rep.log = ls.mean();
    rep.brier = bs.mean();
    rep.spherical = sp.mean();

    json resolved;
    resolved["predictions"] = predictions_path;
    resolved["truncation"] = cap;
    std::ofstream out = open_output(out_path);
    out << metadata_block(resolved, 0);
    out << "metric,value\n";
    out << "rmse," << format_double(rep.rmse) << '\n';
    out << "log," << format_double(rep.log) << '\n';
    out << "brier," << format_double(rep.brier) << '\n';
    out << "spherical," << format_double(rep.spherical) << '\n';
    return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"WALS-NB: model-averaged negative binomial regression toolkit"};
    app.require_subcommand(1);

    std::string data_path, config_path, out_path, aggregate_path, means_path;
    std::string prior_flag, predictions_path;
    std::optional<std::uint64_t> seed_flag;
    std::optional<int> threads_flag, truncation_flag;

    CLI::App* fit = app.add_subcommand("fit", "fit the model-averaging estimator on a CSV");
    fit->add_option("--data", data_path, "input data CSV")->required();
    fit->add_option("--config", config_path, "JSON config with the design spec")->required();
    fit->add_option("--out", out_path, "coefficient table output path")->required();
    fit->add_option("--prior", prior_flag, "prior family override");
    fit->add_option("--seed", seed_flag, "seed override");

    CLI::App* sim = app.add_subcommand("simulate", "run the Monte-Carlo benchmark");
    sim->add_option("--config", config_path, "JSON scenario config")->required();
    sim->add_option("--out", out_path, "per-run results CSV path")->required();
    sim->add_option("--aggregate", aggregate_path, "aggregate table CSV path");
    sim->add_option("--threads", threads_flag, "worker thread count");
    sim->add_option("--seed", seed_flag, "seed override");

    CLI::App* cv = app.add_subcommand("cv", "cross-validated learning curves");
    cv->add_option("--data", data_path, "input data CSV")->required();
    cv->add_option("--config", config_path, "JSON config with procedures and grid")->required();
    cv->add_option("--out", out_path, "per-fold curve CSV path")->required();
    cv->add_option("--means", means_path, "fold-means CSV path");
    cv->add_option("--threads", threads_flag, "worker thread count");
    cv->add_option("--seed", seed_flag, "seed override");

    CLI::App* score = app.add_subcommand("score", "score per-row (mu, rho) predictions");
    score->add_option("--predictions", predictions_path, "CSV with columns y,mu,rho")->required();
    score->add_option("--out", out_path, "score report output path")->required();
    score->add_option("-R,--truncation", truncation_flag, "pmf truncation for Brier/spherical");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e) == 0 ? kExitOk : kExitUsage;
    }

    try {
        if (fit->parsed()) return cmd_fit(data_path, config_path, out_path, prior_flag, seed_flag);
        if (sim->parsed()) {
            return cmd_simulate(config_path, out_path, aggregate_path, threads_flag, seed_flag);
        }
        if (cv->parsed()) {
            return cmd_cv(data_path, config_path, out_path, means_path, threads_flag, seed_flag);
        }
        if (score->parsed()) return cmd_score(predictions_path, out_path, truncation_flag);
    } catch (const CsvError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitIo;
    } catch (const std::domain_error& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitUsage;
    } catch (const std::invalid_argument& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitUsage;
    } catch (const std::exception& e) {
        std::cerr << "estimation error: " << e.what() << '\n';
        return kExitEstimation;
    }
    return kExitUsage;
}
