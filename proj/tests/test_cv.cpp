#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <set>
#include <sstream>
#include <string>

#include "walsnb/cv.hpp"
#include "walsnb/kernels.hpp"

using namespace walsnb;

TEST_CASE("fold sizes differ by at most one and partition the sample") {
    {
        const FoldPlan plan = make_folds(100, 10, 1);
        for (int k = 0; k < 10; ++k) CHECK(plan.fold_indices(k).size() == 10);
    }
    const FoldPlan plan = make_folds(103, 10, 1);
    std::set<Eigen::Index> seen;
    for (int k = 0; k < 10; ++k) {
        const auto fold = plan.fold_indices(k);
        CHECK(fold.size() == (k < 3 ? 11u : 10u));
        for (Eigen::Index i : fold) CHECK(seen.insert(i).second);
    }
    CHECK(seen.size() == 103);
    CHECK(plan.max_fold_size() == 11);

    const FoldPlan again = make_folds(103, 10, 1);
    CHECK(plan.order == again.order);
    CHECK(plan.assignments == again.assignments);
    const FoldPlan other = make_folds(103, 10, 2);
    CHECK(plan.order != other.order);

    CHECK_THROWS_AS(make_folds(103, 1, 1), std::domain_error);
    CHECK_THROWS_AS(make_folds(5, 10, 1), std::domain_error);
}

TEST_CASE("training orders nest: smaller training sets are prefixes") {
    const FoldPlan plan = make_folds(103, 10, 7);
    for (int k = 0; k < 10; ++k) {
        const auto order = plan.training_order(k);
        CHECK(order.size() == 103 - plan.fold_indices(k).size());
        // no overlap with the validation fold
        const auto fold = plan.fold_indices(k);
        const std::set<Eigen::Index> fold_set(fold.begin(), fold.end());
        for (Eigen::Index i : order) CHECK(fold_set.count(i) == 0);
        // nesting is prefix containment by construction; make it explicit
        for (std::size_t t = 1; t < order.size(); ++t) {
            const std::set<Eigen::Index> small(order.begin(), order.begin() + t);
            CHECK(small.count(order[t]) == 0);
        }
    }
}

namespace {

std::string synthetic_csv(Eigen::Index n, std::uint64_t seed) {
    Rng rng = Rng::from_stream(seed, 0xDA7Au);
    std::ostringstream os;
    os << "y,a,b,c,d\n";
    for (Eigen::Index i = 0; i < n; ++i) {
        const double a = rng.normal();
        const double b = rng.normal();
        const double c = rng.normal();
        const double d = rng.normal();
        const double mu = std::exp(0.8 + 0.3 * a - 0.2 * b);
        const double y = sample_nb2(mu, 1.5, rng);
        os << y << ',' << a << ',' << b << ',' << c << ',' << d << '\n';
    }
    return os.str();
}

RawTable synthetic_table(Eigen::Index n, std::uint64_t seed) {
    std::istringstream in(synthetic_csv(n, seed));
    return read_csv(in, "synthetic");
}

}  // namespace

TEST_CASE("design construction: intercept, interactions and powers") {
    const RawTable table = synthetic_table(40, 3);
    DesignSpec spec;
    spec.response = "y";
    spec.focus = {};
    spec.auxiliary = {"a", "b", "c", "d", "a:b", "c^2"};
    const Dataset data = build_design(table, spec);
    CHECK(data.k1() == 1);
    CHECK(data.k2() == 6);
    CHECK((data.X1.col(0).array() == 1.0).all());
    const std::size_t ca = table.column_index("a");
    const std::size_t cb = table.column_index("b");
    const std::size_t cc = table.column_index("c");
    for (Eigen::Index i = 0; i < data.n(); ++i) {
        const std::size_t r = static_cast<std::size_t>(i);
        CHECK(data.X2(i, 4) == table.numeric(r, ca) * table.numeric(r, cb));
        CHECK(data.X2(i, 5) == table.numeric(r, cc) * table.numeric(r, cc));
    }

    DesignSpec no_intercept = spec;
    no_intercept.intercept = false;
    no_intercept.focus = {"a"};
    const Dataset data2 = build_design(table, no_intercept);
    CHECK(data2.k1() == 1);
    CHECK(data2.X1.col(0)[0] == table.numeric(0, ca));

    DesignSpec bad = spec;
    bad.auxiliary = {"nope"};
    CHECK_THROWS_AS(build_design(table, bad), CsvError);
}

TEST_CASE("ingest errors name the offending row and column") {
    {
        std::istringstream in("y,a\n1,2\n3,\n");
        const RawTable table = read_csv(in, "test");
        DesignSpec spec;
        spec.response = "y";
        spec.auxiliary = {"a"};
        try {
            build_design(table, spec);
            FAIL("expected CsvError");
        } catch (const CsvError& e) {
            const std::string msg = e.what();
            CHECK(msg.find("row 3") != std::string::npos);
            CHECK(msg.find("column a") != std::string::npos);
        }
    }
    {
        std::istringstream in("y,a\n1,2\n3,oops\n");
        const RawTable table = read_csv(in, "test");
        try {
            table.numeric(1, 1);
            FAIL("expected CsvError");
        } catch (const CsvError& e) {
            const std::string msg = e.what();
            CHECK(msg.find("oops") != std::string::npos);
            CHECK(msg.find("row 3") != std::string::npos);
        }
    }
    {
        std::istringstream in("y,a\n1,2,9\n");
        CHECK_THROWS_AS(read_csv(in, "test"), CsvError);
    }
}

TEST_CASE("learning curve: shape, fixed validation folds, and means") {
    const RawTable table = synthetic_table(120, 11);
    std::vector<CvProcedure> procs(2);
    procs[0].name = "ml-small";
    procs[0].design.response = "y";
    procs[0].design.focus = {"a", "b"};
    procs[1].name = "wals";
    procs[1].design.response = "y";
    procs[1].design.focus = {"a"};
    procs[1].design.auxiliary = {"b", "c", "d"};
    procs[1].use_wals = true;

    const int K = 4;
    const std::vector<Eigen::Index> grid = {60, 90};
    const LearningCurve curve = learning_curve(table, procs, grid, K, 5);
    CHECK(curve.cells.size() == grid.size() * procs.size() * K);
    CHECK(curve.truncation == static_cast<int>(build_design(table, procs[0].design).y.maxCoeff()));

    // every cell is labeled and the validation fold does not move with t:
    // a fold's score depends on t only through the fitted model
    int ok_count = 0;
    for (const CvCell& c : curve.cells) {
        CHECK((c.t == 60 || c.t == 90));
        CHECK((c.procedure == "ml-small" || c.procedure == "wals"));
        if (c.ok) ++ok_count;
    }
    CHECK(ok_count == static_cast<int>(curve.cells.size()));

    const auto means = cv_means(curve);
    CHECK(means.size() == grid.size() * procs.size());
    for (const CvMeanRow& r : means) {
        CHECK(r.folds_ok == K);
        CHECK(r.folds_failed == 0);
        double manual = 0.0;
        int cnt = 0;
        for (const CvCell& c : curve.cells) {
            if (c.t == r.t && c.procedure == r.procedure && c.ok) {
                manual += c.scores.log;
                ++cnt;
            }
        }
        CHECK(r.log == doctest::Approx(manual / cnt).epsilon(1e-12));
    }

    // more training data should not hurt on average (generous check)
    for (const auto& p : procs) {
        double log60 = 0.0, log90 = 0.0;
        for (const CvMeanRow& r : means) {
            if (r.procedure == p.name && r.t == 60) log60 = r.log;
            if (r.procedure == p.name && r.t == 90) log90 = r.log;
        }
        CHECK(log90 < log60 + 0.25);
    }
}

TEST_CASE("learning curve is deterministic across thread counts") {
    const RawTable table = synthetic_table(100, 21);
    std::vector<CvProcedure> procs(1);
    procs[0].name = "ml";
    procs[0].design.response = "y";
    procs[0].design.focus = {"a", "b"};
    CvOptions opt1;
    opt1.threads = 1;
    CvOptions opt4;
    opt4.threads = 4;
    const std::vector<Eigen::Index> grid = {40, 55, 70};
    const LearningCurve c1 = learning_curve(table, procs, grid, 5, 9, opt1);
    const LearningCurve c4 = learning_curve(table, procs, grid, 5, 9, opt4);
    REQUIRE(c1.cells.size() == c4.cells.size());
    for (std::size_t i = 0; i < c1.cells.size(); ++i) {
        CHECK(c1.cells[i].ok == c4.cells[i].ok);
        CHECK(c1.cells[i].scores.log == c4.cells[i].scores.log);
        CHECK(c1.cells[i].scores.rmse == c4.cells[i].scores.rmse);
    }
}

TEST_CASE("single grid point at the maximum degenerates to plain K-fold CV") {
    const RawTable table = synthetic_table(103, 31);
    std::vector<CvProcedure> procs(1);
    procs[0].name = "ml";
    procs[0].design.response = "y";
    procs[0].design.focus = {"a"};
    const FoldPlan plan = make_folds(103, 10, 13);
    const Eigen::Index t_max = 103 - plan.max_fold_size();
    CHECK(t_max == 92);
    const LearningCurve curve = learning_curve(table, procs, {t_max}, 10, 13);
    CHECK(curve.cells.size() == 10);
    for (const CvCell& c : curve.cells) CHECK(c.t == 92);

    CHECK_THROWS_AS(learning_curve(table, procs, {93}, 10, 13), std::domain_error);
    CHECK_THROWS_AS(learning_curve(table, procs, {0}, 10, 13), std::domain_error);
}

TEST_CASE("per-cell failures are recorded without aborting the curve") {
    // a training size below the parameter count forces a rank failure
    const RawTable table = synthetic_table(60, 41);
    std::vector<CvProcedure> procs(1);
    procs[0].name = "ml-wide";
    procs[0].design.response = "y";
    procs[0].design.focus = {"a", "b", "c", "d", "a:b", "a:c", "a:d", "b:c"};
    const LearningCurve curve = learning_curve(table, procs, {3}, 4, 3);
    CHECK(curve.cells.size() == 4);
    for (const CvCell& c : curve.cells) {
        CHECK_FALSE(c.ok);
        CHECK_FALSE(c.failure.empty());
    }
    const auto means = cv_means(curve);
    REQUIRE(means.size() == 1);
    CHECK(means[0].folds_failed == 4);
    CHECK(std::isnan(means[0].rmse));
}

TEST_CASE("curve CSV output round-trips through the reader") {
    const RawTable table = synthetic_table(80, 51);
    std::vector<CvProcedure> procs(1);
    procs[0].name = "ml";
    procs[0].design.response = "y";
    procs[0].design.focus = {"a"};
    const LearningCurve curve = learning_curve(table, procs, {30, 50}, 4, 17);
    std::ostringstream os;
    write_curve_csv(os, curve, "# test\n");
    std::istringstream in(os.str());
    const RawTable parsed = read_csv(in, "curve");
    CHECK(parsed.n_rows() == curve.cells.size());
    CHECK(parsed.numeric(0, parsed.column_index("log")) == curve.cells[0].scores.log);

    std::ostringstream ms;
    write_cv_means_csv(ms, cv_means(curve), "");
    std::istringstream min(ms.str());
    const RawTable mparsed = read_csv(min, "means");
    CHECK(mparsed.n_rows() == 2);
}
