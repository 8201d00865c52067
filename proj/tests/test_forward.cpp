// Forward-simulation tests: reproducibility across thread counts, Gaussian
// increment statistics, the closed-form terminal law, quadrature versus
// Monte Carlo agreement, and the paths CSV schema.
#include <cmath>
#include <cstdlib>
#include <sstream>
#include <string>
#include <vector>

#include "doctest.h"
#include "qrbsde/common.hpp"
#include "qrbsde/forward.hpp"
#include "qrbsde/oracles.hpp"

using namespace qrbsde;

namespace {

ForwardModel driftless_model(double s1, double s2) {
    ForwardModel f;
    f.m = 2;
    f.x0 = 0.0;
    f.b = [](double, double) { return 0.0; };
    f.sigma = [s1, s2](double, std::span<double> out) {
        out[0] = s1;
        out[1] = s2;
    };
    f.Mb = 0.0;
    f.Kb = 0.0;
    f.Msigma = std::sqrt(s1 * s1 + s2 * s2);
    return f;
}

}  // namespace

TEST_CASE("substep grid and partition snapping") {
    SubstepGrid g = SubstepGrid::uniform(1.0, 8);
    CHECK(g.dt == doctest::Approx(0.125));
    CHECK(g.time(0) == doctest::Approx(0.0));
    CHECK(g.time(8) == doctest::Approx(1.0));
    CHECK(g.snap_index(0.26) == 2);

    std::vector<int> idx = snap_partition(Partition::uniform(1.0, 4), g);
    CHECK(idx == std::vector<int>{0, 2, 4, 6, 8});

    // More dates than substeps must collide.
    CHECK_THROWS_AS(snap_partition(Partition::uniform(1.0, 8), SubstepGrid::uniform(1.0, 4)),
                    ConfigError);
    CHECK_THROWS_AS(SubstepGrid::uniform(1.0, 0), ConfigError);
}

TEST_CASE("paths start at x0 and are bitwise reproducible across thread counts") {
    ForwardModel f = driftless_model(0.6, 0.8);
    f.x0 = 0.37;
    SubstepGrid g = SubstepGrid::uniform(1.0, 64);

    setenv("QRBSDE_THREADS", "1", 1);
    PathBatch a = simulate(f, g, 700, 42, true);
    setenv("QRBSDE_THREADS", "3", 1);
    PathBatch b = simulate(f, g, 700, 42, true);
    unsetenv("QRBSDE_THREADS");

    for (int p = 0; p < a.M; ++p) CHECK(a.state(p, 0) == 0.37);
    CHECK(a.states == b.states);
    CHECK(a.increments == b.increments);

    // A different seed must give a different batch.
    PathBatch c = simulate(f, g, 700, 43, true);
    CHECK(c.states != a.states);
}

TEST_CASE("brownian increments have the right moments") {
    ForwardModel f = driftless_model(1.0, 0.0);
    SubstepGrid g = SubstepGrid::uniform(1.0, 4);
    const int M = 20000;
    PathBatch batch = simulate(f, g, M, 7, true);
    REQUIRE(batch.has_increments());

    const double dt = g.dt;
    const std::size_t N = batch.increments.size();
    REQUIRE(N == static_cast<std::size_t>(M) * 4 * 2);
    double sum = 0.0, sumsq = 0.0;
    for (double v : batch.increments) {
        sum += v;
        sumsq += v * v;
    }
    const double mean = sum / static_cast<double>(N);
    const double var = sumsq / static_cast<double>(N) - mean * mean;
    CHECK(std::abs(mean) <= 4.0 * std::sqrt(dt / static_cast<double>(N)));
    CHECK(std::abs(var - dt) <= 4.0 * dt * std::sqrt(2.0 / static_cast<double>(N)));
}

TEST_CASE("closed-form terminal law for driftless constant-vol models") {
    ForwardModel f = driftless_model(0.3, 0.4);
    auto [mean, var] = gaussian_terminal_law(f, 0.0, 2.0, 4.0);
    CHECK(mean == doctest::Approx(2.0));
    CHECK(var == doctest::Approx(1.0).epsilon(1e-12));

    ForwardModel drifted = driftless_model(1.0, 0.0);
    drifted.b = [](double, double) { return 0.1; };
    drifted.Mb = 0.1;
    CHECK_THROWS_AS(gaussian_terminal_law(drifted, 0.0, 0.0, 1.0), ConfigError);

    ForwardModel timevar = driftless_model(1.0, 0.0);
    timevar.sigma = [](double t, std::span<double> out) {
        out[0] = 1.0 + 0.1 * t;
        out[1] = 0.0;
    };
    CHECK_THROWS_AS(gaussian_terminal_law(timevar, 0.0, 0.0, 1.0), ConfigError);
    CHECK_THROWS_AS(gaussian_terminal_law(f, 1.0, 0.0, 1.0), ConfigError);
}

TEST_CASE("quadrature matches Monte Carlo for a smooth functional") {
    ForwardModel f = driftless_model(0.6, 0.8);
    SubstepGrid g = SubstepGrid::uniform(1.0, 32);
    const int M = 40000;
    PathBatch batch = simulate(f, g, M, 11);

    double sum = 0.0, sumsq = 0.0;
    for (int p = 0; p < M; ++p) {
        const double v = std::cos(batch.state(p, g.S));
        sum += v;
        sumsq += v * v;
    }
    const double mc = sum / M;
    const double sd = std::sqrt((sumsq / M - mc * mc) / M);

    auto [mean, var] = gaussian_terminal_law(f, 0.0, f.x0, 1.0);
    const double quad = gaussian_expectation([](double x) { return std::cos(x); }, mean, var);
    CHECK(std::abs(quad - mc) <= 5.0 * sd);
    // And against the exact lognormal-cosine identity E cos(xi) = e^{-var/2} cos(mean).
    CHECK(quad == doctest::Approx(std::exp(-var / 2.0) * std::cos(mean)).epsilon(1e-10));
}

TEST_CASE("mean reversion: Euler mean matches the exact Euler recursion") {
    // dX = -clamp(X, -5, 5) dt + dB from x0 = 1. While the clamp never binds
    // the Euler mean is exactly x0 (1 - dt)^S.
    ForwardModel f;
    f.m = 1;
    f.x0 = 1.0;
    f.b = [](double, double x) { return -std::clamp(x, -5.0, 5.0); };
    f.sigma = [](double, std::span<double> out) { out[0] = 1.0; };
    f.Mb = 5.0;
    f.Kb = 1.0;
    f.Msigma = 1.0;

    SubstepGrid g = SubstepGrid::uniform(1.0, 512);
    const int M = 20000;
    PathBatch batch = simulate(f, g, M, 5);
    double sum = 0.0, sumsq = 0.0;
    for (int p = 0; p < M; ++p) {
        const double v = batch.state(p, g.S);
        sum += v;
        sumsq += v * v;
    }
    const double mean = sum / M;
    const double sd = std::sqrt((sumsq / M - mean * mean) / M);
    const double exact = std::pow(1.0 - g.dt, g.S);
    CHECK(std::abs(mean - exact) <= 4.0 * sd);
}

TEST_CASE("paths CSV schema and stride decimation") {
    ForwardModel f = driftless_model(1.0, 0.0);
    SubstepGrid g = SubstepGrid::uniform(1.0, 8);
    PathBatch batch = simulate(f, g, 3, 1);

    std::ostringstream os;
    write_paths_csv(os, batch, 4);
    std::istringstream is(os.str());
    std::string line;
    REQUIRE(std::getline(is, line));
    CHECK(line == "path_id,time,state");
    int rows = 0;
    std::string last;
    while (std::getline(is, line)) {
        ++rows;
        last = line;
    }
    // Stride 4 keeps k = 0, 4, 8 for each of the 3 paths.
    CHECK(rows == 9);
    CHECK(last.rfind("2,1,", 0) == 0);  // final time is always written
}
