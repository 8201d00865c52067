// Built-in problem presets, obstacle variants, and the run configuration
// (JSON file plus programmatic overrides) shared by the command-line tool
// and the test harness.
//
// Config file keys:
//   preset                     start from a built-in, then override
//   horizon.T                  positive real
//   forward.b                  "zero" | {kind:"tanh_meanrev", rate, level}
//                              | {kind:"ou", rate, clip}
//   forward.sigma              array of reals (constant row, length m)
//   forward.{x0,Mb,Kb,Msigma}  reals (Mb/Kb/Msigma default from the kind)
//   driver.kind                "zero" | "quadratic" | "market"
//   driver.{alpha,Mf,Kx,Kz}    overrides for the derived constants
//   market.{theta0,theta1}     theta(t,x) = (theta0 + theta1 tanh(x), 0, ...)
//   market.{vol0,vol1}         constant stock-vol row (length m, rest zero)
//   market.{pi_lo,pi_hi}       constraint interval, omitted side unbounded
//   obstacle.kind              "tent" | "gauss" | "cos" | {kind:"const", value}
//   obstacle.{Kg,Mg}           overrides
//   mode                       "active" | "off" | "shift"   (+ top-level shift)
//   run.{sweep,n,M,seed,out,wealth,contact_tol,export_stride,substeps,
//        dx,R,nx,lipschitz_constant,flatoff_tol}
#pragma once

#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "qrbsde/model.hpp"
#include "qrbsde/pde.hpp"

namespace qrbsde {

struct GridOverrides {
    double dx = 0.0;     // > 0 replaces the default node spacing
    double R = 0.0;      // > 0 replaces the default half-width
    int nx = 0;          // > 0 replaces the derived node count
    int substeps = 4096; // internal backward/simulation grid size
};

struct RunConfig {
    std::string preset = "custom";
    Problem problem;
    GridOverrides grid;
    std::vector<int> sweep = {2, 4, 8, 16, 32, 64};
    int n_solve = 16;        // partition size used by single solves
    int M = 10000;
    std::uint64_t seed = 1;
    std::string out = ".";
    double wealth = 0.0;
    double contact_tol = 0.0;  // <= 0 resolves to 10 (dx + dt)
    int export_stride = 64;    // layer/substep decimation in CSV exports
    double lipschitz_constant = 1.0;  // scale knob inside K1, K2 (reported only)
    double flatoff_tol = 1e-3;
    std::string obstacle_variant;  // "" | "lipschitz" | "c2b" (as requested)
    std::string source;            // raw config file text when loaded from disk

    void validate() const;  // throws ConfigError naming the offending key
    SpaceGrid resolve_grid() const;
    double resolve_contact_tol(const SpaceGrid& gx) const;
    // K1 = c + Kb and K2 = c exp(Kb T) with c = lipschitz_constant.
    double k1() const { return lipschitz_constant + problem.forward.Kb; }
    double k2() const {
        return lipschitz_constant * std::exp(problem.forward.Kb * problem.T);
    }
};

const std::vector<std::string>& preset_names();
RunConfig make_preset(const std::string& name);

// Swap the payoff/obstacle: "lipschitz" -> tent, "c2b" -> Gaussian bump.
void apply_obstacle_variant(Problem& prob, const std::string& which);

RunConfig load_config(const std::string& path);

}  // namespace qrbsde
