// Discrete-to-continuous error metrics along simulated paths and the
// mesh-refinement sweep with log-log rate fitting.
//
// Columns reported per partition size n:
//   err_y_sup_sq      max over substep times of mean squared Y gap
//   err_y_pathsup_sq  max over partition intervals of the mean of the
//                     within-interval running sup of the squared Y gap
//                     (interval endpoints included)
//   err_z_l2_sq       mean of the left-endpoint Riemann sum of the squared
//                     z gap over [0, T]
//   err_k_sup         max over partition intervals of the mean of the
//                     within-interval sup of |Khat - K| (endpoints included)
#pragma once

#include <cstdint>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include "qrbsde/reflected.hpp"

namespace qrbsde {

struct ErrorRecord {
    int n = 0;
    double mesh = 0.0;
    double err_y_sup_sq = 0.0;
    double err_y_pathsup_sq = 0.0;
    double err_z_l2_sq = 0.0;
    double err_k_sup = 0.0;
    double seconds = 0.0;
    int valid_paths = 0;
};

// Adds one path's contributions to the running accumulators:
//   ysq_acc[k]  += squared Y gap at substep k           (size S+1)
//   ysup_acc[i] += sup of squared Y gap over interval i (size n, endpoints in)
//   ksup_acc[i] += sup of |Khat - K| over interval i    (size n, endpoints in)
//   z_acc       += sum_{k<S} squared z gap * dt
void accumulate_series(const PathSeries& s, const std::vector<int>& pidx, double dt,
                       std::span<double> ysq_acc, std::span<double> ysup_acc,
                       std::span<double> ksup_acc, double& z_acc);

// Aggregates over the valid paths of `pp`. Throws NumericalError when fewer
// than 100 paths stay inside the space grid. Deterministic for a fixed batch
// regardless of thread count. `seconds` is left at zero.
ErrorRecord error_metrics(const PathProcesses& pp);

// Least-squares slope of log(err) against log(mesh). Nonpositive errors are
// dropped (noted in `warnings`); fewer than 4 surviving points yields nullopt.
std::optional<double> fit_rate(const std::vector<double>& mesh,
                               const std::vector<double>& err,
                               std::vector<std::string>* warnings = nullptr);

struct SweepSetup {
    std::vector<int> ns = {2, 4, 8, 16, 32, 64};
    int M = 10000;
    std::uint64_t seed = 1;
    int substeps = 4096;
    SpaceGrid gx;
};

struct ConvergenceReport {
    std::vector<ErrorRecord> records;
    std::optional<double> slope_y_sup, slope_y_pathsup, slope_z, slope_k;
    double exp_y = 0.0, exp_z = 0.0, exp_k = 0.0;  // theoretical exponents
    std::vector<std::string> warnings;
    double reference_max_abs_u = 0.0;
    int fixedpoint_warnings = 0;
    double exit_fraction = 0.0;
    double seconds_total = 0.0;
};

// Solves the reference once, simulates one shared path batch, then runs the
// discretely reflected solve for every n in the sweep and fits rates.
ConvergenceReport run_sweep(const Problem& prob, const SweepSetup& setup);

// CSV schema: n,mesh,err_y_sup_sq,err_y_pathsup_sq,err_z_l2_sq,err_k_sup,seconds.
void write_report_csv(std::ostream& os, const ConvergenceReport& rep);

}  // namespace qrbsde
