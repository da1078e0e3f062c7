#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "walsnb/kernels.hpp"
#include "walsnb/rng.hpp"
#include "oracles.hpp"

using namespace walsnb;

TEST_CASE("log pmf matches high-precision reference values") {
    // frozen from a 40-digit evaluation of the gamma-ratio form
    CHECK(nb2_log_pmf(3.0, 2.5, 0.7) ==
          doctest::Approx(-2.4290126505100002564).epsilon(1e-13));
    CHECK(nb2_log_pmf(0.0, 1.0, 1.0) ==
          doctest::Approx(-0.69314718055994530942).epsilon(1e-13));
    CHECK(nb2_log_pmf(7.0, 4.2, 3.3) ==
          doctest::Approx(-2.7981884414228265371).epsilon(1e-13));
    CHECK(nb2_log_pmf(150.0, 3.0, 1.0) ==
          doctest::Approx(-44.538605228887029735).epsilon(1e-13));
}

TEST_CASE("rho = 1 reduces to the geometric distribution") {
    for (double mu : {0.4, 1.0, 3.7}) {
        for (double y : {0.0, 1.0, 5.0, 12.0}) {
            const double geometric = y * std::log(mu) - (y + 1.0) * std::log(1.0 + mu);
            CHECK(nb2_log_pmf(y, mu, 1.0) == doctest::Approx(geometric).epsilon(1e-13));
        }
    }
}

TEST_CASE("pmf sums to one with tail below 1e-10") {
    for (auto [mu, rho] : {std::pair{3.0, 1.0}, {0.5, 0.7}, {8.0, 2.5}}) {
        double total = 0.0;
        for (int r = 0; r <= 2000; ++r) {
            total += std::exp(nb2_log_pmf(static_cast<double>(r), mu, rho));
        }
        CHECK(std::fabs(total - 1.0) < 1e-10);
    }
}

TEST_CASE("variance formula and kernel sigma2 agree") {
    CHECK(nb2_variance(3.0, 1.0) == doctest::Approx(12.0));
    const KernelValues kv = kernel_values(std::log(3.0), 1.0, 2.0);
    CHECK(kv.sigma2 == doctest::Approx(12.0).epsilon(1e-12));
}

TEST_CASE("v and c match finite differences of theta") {
    // theta(eta, rho) = log mu - log(mu + rho), mu = exp(eta)
    auto theta = [](double eta, double rho) {
        const double mu = std::exp(eta);
        return std::log(mu) - std::log(mu + rho);
    };
    const double h = 1e-6;
    for (auto [eta, rho, y] : {std::tuple{0.3, 1.5, 2.0}, {-1.0, 0.6, 0.0}, {1.7, 3.0, 9.0}}) {
        const KernelValues kv = kernel_values(eta, rho, y);
        const double v_fd = test::fd_derivative(
            [&](double e) { return theta(e, rho); }, eta, h);
        CHECK(kv.v == doctest::Approx(v_fd).epsilon(1e-6));
        // c = d^2 theta / (d eta d rho), via d/drho of dtheta/deta
        const double c_fd = test::fd_derivative(
            [&](double r) {
                return test::fd_derivative([&](double e) { return theta(e, r); }, eta, h);
            },
            rho, h);
        CHECK(kv.c == doctest::Approx(c_fd).epsilon(1e-4));
        // omega = d^2 theta / d eta^2
        const double om_fd = test::fd_derivative(
            [&](double e) {
                return test::fd_derivative([&](double e2) { return theta(e2, rho); }, e, h);
            },
            eta, h);
        CHECK(kv.omega == doctest::Approx(om_fd).epsilon(1e-4));
    }
}

TEST_CASE("kappa and k match finite differences of the log pmf in rho") {
    const double h = 1e-5;
    for (auto [eta, rho, y] : {std::tuple{0.3, 1.5, 2.0}, {-0.5, 0.8, 1.0}, {1.2, 2.7, 6.0}}) {
        const double mu = std::exp(eta);
        const KernelValues kv = kernel_values(eta, rho, y);
        const double kappa_fd = test::fd_derivative(
            [&](double r) { return nb2_log_pmf(y, mu, r); }, rho, h);
        CHECK(kv.kappa == doctest::Approx(kappa_fd).epsilon(1e-6));
        const double k_fd = test::fd_derivative(
            [&](double r) { return kernel_values(eta, r, y).kappa; }, rho, h);
        CHECK(kv.k == doctest::Approx(k_fd).epsilon(1e-6));
    }
}

TEST_CASE("cumulant-function cross-derivative identity holds") {
    // b(theta, rho) = -rho log(1 - exp(theta));
    // (d2b/dtheta2)(dtheta/drho) + d2b/(dtheta drho) = 0 at fixed mu
    auto b = [](double theta, double rho) { return -rho * std::log1p(-std::exp(theta)); };
    const double h = 1e-6;
    for (auto [mu, rho] : {std::pair{1.3, 0.9}, {4.0, 2.2}}) {
        const double theta = std::log(mu) - std::log(mu + rho);
        auto db_dtheta = [&](double t, double r) {
            return test::fd_derivative([&](double tt) { return b(tt, r); }, t, h);
        };
        const double b_tt = test::fd_derivative(
            [&](double t) { return db_dtheta(t, rho); }, theta, h);
        const double b_tr = test::fd_derivative(
            [&](double r) { return db_dtheta(theta, r); }, rho, h);
        const double dtheta_drho = test::fd_derivative(
            [&](double r) { return std::log(mu) - std::log(mu + r); }, rho, h);
        CHECK(b_tt * dtheta_drho + b_tr == doctest::Approx(0.0).scale(1.0).epsilon(1e-4));
    }
}

TEST_CASE("sampler reproduces the NB2 mean and variance") {
    Rng rng(31337);
    const double mu = 3.0, rho = 1.0;
    const int n = 1000000;
    double sum = 0.0, sumsq = 0.0;
    for (int i = 0; i < n; ++i) {
        const double y = static_cast<double>(sample_nb2(mu, rho, rng));
        sum += y;
        sumsq += y * y;
    }
    const double mean = sum / n;
    const double var = sumsq / n - mean * mean;
    CHECK(mean == doctest::Approx(3.0).epsilon(0.01));
    CHECK(var == doctest::Approx(12.0).epsilon(0.03));
}

TEST_CASE("log_likelihood equals the sum of pointwise log pmfs") {
    test::Instance inst = test::random_instance(60, 2, 2, 5);
    const Vector eta = inst.data.full_design() * inst.start.params.beta;
    double manual = 0.0;
    for (Eigen::Index i = 0; i < inst.data.n(); ++i) {
        manual += nb2_log_pmf(inst.data.y[i], std::exp(eta[i]), inst.start.params.rho());
    }
    CHECK(log_likelihood(inst.start.params, inst.data) ==
          doctest::Approx(manual).epsilon(1e-12));
}

TEST_CASE("kernel guards reject invalid inputs") {
    CHECK_THROWS_AS(nb2_log_pmf(1.0, -1.0, 1.0), std::domain_error);
    CHECK_THROWS_AS(nb2_log_pmf(-1.0, 1.0, 1.0), std::domain_error);
    CHECK_THROWS_AS(kernel_values(0.0, -1.0, 1.0), std::domain_error);
    CHECK_THROWS_AS(kernel_values(800.0, 1.0, 1.0), NumericOverflow);
}
