// Valuation-layer tests: the exponential-utility map and its saturation
// flag, the exercise region of the reference solution, first-entry times
// along simulated paths, the optimality of stopping at first contact for a
// pure optimal-stopping problem, and the investment strategy along paths.
#include <cmath>
#include <sstream>
#include <vector>

#include "doctest.h"
#include "qrbsde/common.hpp"
#include "qrbsde/presets.hpp"
#include "qrbsde/reflected.hpp"
#include "qrbsde/valuation.hpp"

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

TEST_CASE("exponential utility map") {
    ValueResult v = value_function(1.0, 0.25, 0.5);
    CHECK(v.value == doctest::Approx(-0.4723665527410147).epsilon(1e-14));
    CHECK_FALSE(v.saturated);

    ValueResult big = value_function(1.0, -5.0, 0.0);
    CHECK(big.value == doctest::Approx(-148.4131591025766).epsilon(1e-13));
    CHECK_FALSE(big.saturated);

    // alpha (w + y) beyond the exp range underflows cleanly and is flagged.
    ValueResult sat = value_function(50.0, 10.0, 10.0);
    CHECK(sat.value == 0.0);
    CHECK(sat.saturated);
}

TEST_CASE("exercise region structure") {
    Setup s = reduced("american-oracle", 128, 0.04);
    ContinuousReference ref = solve_continuous_reference(s.prob, s.gt, s.gx);
    ExerciseRegion region = exercise_region(ref, s.prob, 1e-6);

    REQUIRE(static_cast<int>(region.contact.size()) == s.gt.S + 1);
    // Terminal layer: everything is exercised.
    for (auto flag : region.contact.back()) CHECK(flag == 1);
    // The region flags exactly the nodes where the value touches the barrier.
    int on = 0, off = 0;
    for (int k = 0; k < s.gt.S; ++k) {
        for (int j = 0; j < s.gx.nx; ++j) {
            const std::size_t ks = static_cast<std::size_t>(k), js = static_cast<std::size_t>(j);
            const bool touch = ref.layers[ks].u[js] <= s.prob.barrier(s.gx.x(j)) + 1e-6;
            CHECK(static_cast<bool>(region.contact[ks][js]) == touch);
            (touch ? on : off) += 1;
        }
    }
    CHECK(on > 0);   // an optimal-stopping problem has a contact set
    CHECK(off > 0);  // and a continuation set

    // Without reflection there is nothing to exercise before the end.
    Problem offp = s.prob;
    offp.mode = ReflectMode::Off;
    ContinuousReference ref_off = solve_continuous_reference(offp, s.gt, s.gx);
    ExerciseRegion reg_off = exercise_region(ref_off, offp, 1e-6);
    for (int k = 0; k < s.gt.S; ++k)
        for (auto flag : reg_off.contact[static_cast<std::size_t>(k)]) CHECK(flag == 0);
}

TEST_CASE("first entry times match a direct scan") {
    Setup s = reduced("american-oracle", 128, 0.04);
    ContinuousReference ref = solve_continuous_reference(s.prob, s.gt, s.gx);
    PathBatch batch = simulate(s.prob.forward, s.gt, 200, 6);
    const double tol = 1e-3;
    ExerciseRegion region = exercise_region(ref, s.prob, tol, &batch);
    REQUIRE(static_cast<int>(region.first_entry.size()) == batch.M);

    for (int p = 0; p < batch.M; ++p) {
        int want = s.gt.S;
        for (int k = 0; k < s.gt.S; ++k) {
            const double x = batch.state(p, k);
            const double u = s.gx.interp(ref.layers[static_cast<std::size_t>(k)].u, x);
            if (u <= s.prob.barrier(x) + tol) {
                want = k;
                break;
            }
        }
        CHECK(region.first_entry[static_cast<std::size_t>(p)] == want);
    }

    // Without reflection entry happens only at the end.
    Problem offp = s.prob;
    offp.mode = ReflectMode::Off;
    ContinuousReference ref_off = solve_continuous_reference(offp, s.gt, s.gx);
    ExerciseRegion reg_off = exercise_region(ref_off, offp, tol, &batch);
    for (int e : reg_off.first_entry) CHECK(e == s.gt.S);
}

TEST_CASE("stopping at first contact attains the optimal value") {
    // With a zero driver the backward value is the optimal-stopping value,
    // so the payoff collected at the first-contact time must average to it.
    Setup s = reduced("american-oracle", 512, 0.02);
    ContinuousReference ref = solve_continuous_reference(s.prob, s.gt, s.gx);
    const int M = 4000;
    PathBatch batch = simulate(s.prob.forward, s.gt, M, 31);
    ExerciseRegion region = exercise_region(ref, s.prob, 1e-3, &batch);

    double sum = 0.0, sumsq = 0.0;
    int used = 0;
    for (int p = 0; p < M; ++p) {
        const int d = region.first_entry[static_cast<std::size_t>(p)];
        const double v = s.prob.payoff.g(batch.state(p, d));
        sum += v;
        sumsq += v * v;
        ++used;
    }
    const double mean = sum / used;
    const double sd = std::sqrt((sumsq / used - mean * mean) / used);
    const double y0 = s.gx.interp(ref.layers.front().u, s.prob.forward.x0);
    CHECK(std::abs(mean - y0) <= 4.0 * sd + 5e-3);
}

TEST_CASE("strategy along paths: projection before entry, flat zero after") {
    Setup s = reduced("sf-example", 128, 0.05);
    ContinuousReference ref = solve_continuous_reference(s.prob, s.gt, s.gx);
    PathBatch batch = simulate(s.prob.forward, s.gt, 40, 8);
    ExerciseRegion region = exercise_region(ref, s.prob, 1e-3, &batch);
    REQUIRE(s.prob.market.has_value());

    std::vector<double> sig0 = s.prob.forward.sigma_at(0.0);
    for (int p = 0; p < 10; ++p) {
        std::vector<double> pi = strategy_path(s.prob, ref, batch, region, p);
        REQUIRE(static_cast<int>(pi.size()) == s.gt.S + 1);
        const int entry = region.first_entry[static_cast<std::size_t>(p)];
        for (int k = entry; k <= s.gt.S; ++k) CHECK(pi[static_cast<std::size_t>(k)] == 0.0);
        if (entry > 0) {
            // Recompute the first step by hand.
            const double x = batch.state(p, 0);
            const double zm = s.gx.interp(ref.layers.front().zmag, x);
            std::vector<double> z(sig0.size());
            for (std::size_t d = 0; d < z.size(); ++d) z[d] = zm * sig0[d];
            auto best = optimal_strategy(*s.prob.market, 0.0, x, z);
            REQUIRE(best.has_value());
            CHECK(pi[0] == doctest::Approx(*best).epsilon(1e-14));
        }
    }

    // No market specification means no strategy.
    Setup a = reduced("american-oracle", 32, 0.1);
    ContinuousReference ref_a = solve_continuous_reference(a.prob, a.gt, a.gx);
    PathBatch batch_a = simulate(a.prob.forward, a.gt, 4, 1);
    ExerciseRegion region_a = exercise_region(ref_a, a.prob, 1e-3, &batch_a);
    CHECK_THROWS_AS(strategy_path(a.prob, ref_a, batch_a, region_a, 0), ConfigError);
    // A region built without a batch cannot drive a strategy either.
    ExerciseRegion no_paths = exercise_region(ref, s.prob, 1e-3);
    CHECK_THROWS_AS(strategy_path(s.prob, ref, batch, no_paths, 0), ConfigError);
}

TEST_CASE("region CSV schema") {
    Setup s = reduced("american-oracle", 32, 0.1);
    ContinuousReference ref = solve_continuous_reference(s.prob, s.gt, s.gx);
    ExerciseRegion region = exercise_region(ref, s.prob, 1e-6);
    std::ostringstream os;
    write_region_csv(os, ref, region, 16);
    std::istringstream is(os.str());
    std::string line;
    REQUIRE(std::getline(is, line));
    CHECK(line == "time,x,contact");
    int rows = 0;
    while (std::getline(is, line)) ++rows;
    // Layers 0, 16, 32 retained, one row per node each.
    CHECK(rows == 3 * s.gx.nx);
}
