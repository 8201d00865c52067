// Convergence-harness tests: a hand-computed accumulator oracle, exact
// vanishing of the metrics when the partition equals the substep grid, the
// degenerate-batch guard, the rate fitter on synthetic data, the ordering
// between the two Y metrics, and the sweep driver plus its CSV schema.
#include <cmath>
#include <cstdio>
#include <sstream>
#include <vector>

#include "doctest.h"
#include "qrbsde/common.hpp"
#include "qrbsde/convergence.hpp"
#include "qrbsde/presets.hpp"

using namespace qrbsde;

namespace {

struct Setup {
    Problem prob;
    SubstepGrid gt;
    SpaceGrid gx;
};

Setup reduced(const std::string& preset, int substeps, double dx) {
    RunConfig cfg = make_preset(preset);
    cfg.grid.substeps = substeps;
    cfg.grid.dx = dx;
    Setup s;
    s.prob = cfg.problem;
    s.gt = SubstepGrid::uniform(cfg.problem.T, substeps);
    s.gx = cfg.resolve_grid();
    return s;
}

}  // namespace

TEST_CASE("accumulator oracle on a two-substep series") {
    PathSeries s;
    s.y_d = {1.0, 2.0, 3.0};
    s.y_r = {1.5, 1.0, 3.5};
    s.z_d = {0.5, 1.0, 0.0};
    s.z_r = {0.0, 2.0, 0.0};
    s.k_d = {0.0, 0.2, 0.2};
    s.k_r = {0.0, 0.1, 0.4};
    const std::vector<int> pidx = {0, 2};
    const double dt = 0.5;

    std::vector<double> ysq(3, 0.0), ysup(1, 0.0), ksup(1, 0.0);
    double z_acc = 0.0;
    accumulate_series(s, pidx, dt, ysq, ysup, ksup, z_acc);

    CHECK(ysq[0] == doctest::Approx(0.25).epsilon(1e-15));
    CHECK(ysq[1] == doctest::Approx(1.0).epsilon(1e-15));
    CHECK(ysq[2] == doctest::Approx(0.25).epsilon(1e-15));
    CHECK(ysup[0] == doctest::Approx(1.0).epsilon(1e-15));   // interval max, endpoints in
    CHECK(ksup[0] == doctest::Approx(0.2).epsilon(1e-15));   // |0.2 - 0.4| at the end
    CHECK(z_acc == doctest::Approx(0.625).epsilon(1e-15));   // left-endpoint Riemann sum

    // Accumulation really accumulates.
    accumulate_series(s, pidx, dt, ysq, ysup, ksup, z_acc);
    CHECK(ysq[1] == doctest::Approx(2.0).epsilon(1e-15));
    CHECK(z_acc == doctest::Approx(1.25).epsilon(1e-15));
}

TEST_CASE("metrics vanish when the partition matches the substep grid") {
    Setup s = reduced("sf-example", 128, 0.05);
    ContinuousReference ref = solve_continuous_reference(s.prob, s.gt, s.gx);
    DiscreteSolution disc =
        solve_discrete(s.prob, s.gt, s.gx, Partition::uniform(s.prob.T, s.gt.S));
    PathBatch batch = simulate(s.prob.forward, s.gt, 150, 1);
    PathProcesses pp(s.prob, disc, ref, batch);
    REQUIRE(pp.valid_count() >= 100);

    ErrorRecord rec = error_metrics(pp);
    CHECK(rec.n == s.gt.S);
    CHECK(rec.mesh == doctest::Approx(s.prob.T / s.gt.S));
    CHECK(rec.err_y_sup_sq == 0.0);
    CHECK(rec.err_y_pathsup_sq == 0.0);
    CHECK(rec.err_z_l2_sq == 0.0);
    CHECK(rec.err_k_sup <= 1e-12);  // interpolation roundoff only
    CHECK(rec.valid_paths == pp.valid_count());
}

TEST_CASE("fewer than 100 surviving paths is refused") {
    Setup s = reduced("american-oracle", 64, 0.04);
    SpaceGrid tiny = SpaceGrid::centered(s.prob.forward.x0, 0.2, 21);
    DiscreteSolution disc = solve_discrete(s.prob, s.gt, tiny, Partition::uniform(s.prob.T, 2));
    ContinuousReference ref = solve_continuous_reference(s.prob, s.gt, tiny);
    PathBatch batch = simulate(s.prob.forward, s.gt, 150, 5);
    PathProcesses pp(s.prob, disc, ref, batch);
    REQUIRE(pp.valid_count() < 100);
    CHECK_THROWS_AS(error_metrics(pp), NumericalError);
}

TEST_CASE("rate fitter") {
    std::vector<double> mesh = {1.0, 0.5, 0.25, 0.125, 0.0625};

    SUBCASE("exact power law") {
        std::vector<double> err;
        for (double m : mesh) err.push_back(0.7 * std::sqrt(m));
        auto slope = fit_rate(mesh, err);
        REQUIRE(slope.has_value());
        CHECK(*slope == doctest::Approx(0.5).epsilon(1e-12));
    }
    SUBCASE("nonpositive entries are dropped with a warning") {
        std::vector<double> err = {0.7, 0.7 * std::sqrt(0.5), 0.0, 0.7 * std::sqrt(0.125),
                                   0.7 * std::sqrt(0.0625)};
        std::vector<std::string> warnings;
        auto slope = fit_rate(mesh, err, &warnings);
        REQUIRE(slope.has_value());
        CHECK(*slope == doctest::Approx(0.5).epsilon(1e-12));
        CHECK(warnings.size() == 1);
    }
    SUBCASE("fewer than four usable points yields no slope") {
        std::vector<double> err = {0.7, 0.35, 0.0, -1.0, 0.0};
        std::vector<std::string> warnings;
        auto slope = fit_rate(mesh, err, &warnings);
        CHECK_FALSE(slope.has_value());
        CHECK(warnings.size() >= 1);
    }
}

TEST_CASE("the two Y metrics are ordered") {
    Setup s = reduced("sf-example", 128, 0.05);
    ContinuousReference ref = solve_continuous_reference(s.prob, s.gt, s.gx);
    DiscreteSolution disc = solve_discrete(s.prob, s.gt, s.gx, Partition::uniform(s.prob.T, 8));
    PathBatch batch = simulate(s.prob.forward, s.gt, 200, 1);
    PathProcesses pp(s.prob, disc, ref, batch);
    ErrorRecord rec = error_metrics(pp);
    CHECK(rec.err_y_sup_sq <= rec.err_y_pathsup_sq + 1e-12);
    CHECK(rec.err_y_sup_sq > 0.0);
}

TEST_CASE("sweep driver: records, exponents, and the report schema") {
    Setup s = reduced("sf-example", 128, 0.05);
    SweepSetup setup;
    setup.ns = {2, 4, 8, 16};
    setup.M = 300;
    setup.seed = 1;
    setup.substeps = 128;
    setup.gx = s.gx;

    ConvergenceReport rep = run_sweep(s.prob, setup);
    REQUIRE(rep.records.size() == 4);
    for (std::size_t i = 0; i < rep.records.size(); ++i) {
        const ErrorRecord& r = rep.records[i];
        CHECK(r.n == setup.ns[i]);
        CHECK(r.mesh == doctest::Approx(s.prob.T / setup.ns[i]));
        CHECK(r.valid_paths >= 100);
        CHECK(r.seconds >= 0.0);
    }
    // Errors shrink under refinement (endpoints suffice for a smoke check).
    CHECK(rep.records.back().err_y_sup_sq < rep.records.front().err_y_sup_sq);
    CHECK(rep.records.back().err_k_sup < rep.records.front().err_k_sup);
    // Four points: every slope is fitted; tent payoff selects the rough rates.
    CHECK(rep.slope_y_sup.has_value());
    CHECK(rep.slope_y_pathsup.has_value());
    CHECK(rep.slope_z.has_value());
    CHECK(rep.slope_k.has_value());
    CHECK(rep.exp_y == doctest::Approx(0.5));
    CHECK(rep.exp_z == doctest::Approx(0.5));
    CHECK(rep.exp_k == doctest::Approx(0.25));
    CHECK(rep.exit_fraction >= 0.0);
    CHECK(rep.reference_max_abs_u > 0.0);

    std::ostringstream os;
    write_report_csv(os, rep);
    std::istringstream is(os.str());
    std::string line;
    REQUIRE(std::getline(is, line));
    CHECK(line == "n,mesh,err_y_sup_sq,err_y_pathsup_sq,err_z_l2_sq,err_k_sup,seconds");
    int rows = 0;
    while (std::getline(is, line)) {
        int n = 0;
        double mesh = 0, a = 0, b = 0, c = 0, d = 0, sec = 0;
        const int got = std::sscanf(line.c_str(), "%d,%lf,%lf,%lf,%lf,%lf,%lf", &n, &mesh,
                                    &a, &b, &c, &d, &sec);
        CHECK(got == 7);
        ++rows;
    }
    CHECK(rows == 4);
}

TEST_CASE("smooth payoff variant selects the smooth exponents") {
    Setup s = reduced("sf-example", 64, 0.1);
    apply_obstacle_variant(s.prob, "c2b");
    SweepSetup setup;
    setup.ns = {2, 4};
    setup.M = 150;
    setup.seed = 1;
    setup.substeps = 64;
    setup.gx = s.gx;
    ConvergenceReport rep = run_sweep(s.prob, setup);
    CHECK(rep.exp_y == doctest::Approx(1.0));
    CHECK(rep.exp_z == doctest::Approx(1.0));
    CHECK(rep.exp_k == doctest::Approx(0.5));
    // Two points only: no fitted slopes, but a warning explains why.
    CHECK_FALSE(rep.slope_y_sup.has_value());
    CHECK(!rep.warnings.empty());
}
