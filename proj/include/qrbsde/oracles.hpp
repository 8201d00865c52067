// Independent reference values the solver is checked against: Gaussian
// quadrature for terminal-law expectations, the closed-form heat solution
// with cosine data, the log-exponential transform of the purely quadratic
// driver, and a trinomial tree for the optimal-stopping value.
#pragma once

#include <functional>
#include <ostream>
#include <string>
#include <vector>

namespace qrbsde {

struct QuadratureRule {
    std::vector<double> nodes;    // ascending
    std::vector<double> weights;  // sum to 1
};

// Probabilists' Gauss-Hermite rule: integrates polynomials of degree
// 2n-1 exactly against the standard normal density.
QuadratureRule gauss_hermite(int n);

// E[h(xi)] for xi ~ N(mean, var).
double gaussian_expectation(const std::function<double(double)>& h, double mean,
                            double var, int nodes = 200);

// Heat equation u_t + (1/2) signorm^2 u_xx = 0 with u(T, x) = cos(x).
double heat_cos_value(double t, double x, double T, double signorm);

// Value at time 0 of the purely quadratic driver -(alpha/2)|z|^2 with
// terminal g and Gaussian terminal law N(mean, var):
//   -(1/alpha) ln E[exp(-alpha g(xi))].
double colehopf_value(double alpha, const std::function<double(double)>& g,
                      double mean, double var, int nodes = 200);

// Driftless trinomial tree (up/down probability 1/6, middle 2/3, spacing
// vol*sqrt(3 dt)) for sup_tau E[g(X_tau)], X from x0 with volatility vol.
double american_tree_value(const std::function<double(double)>& g, double x0,
                           double vol, double T, int steps);

struct CheckResult {
    std::string name;
    double expected = 0.0;
    double actual = 0.0;
    double tol = 0.0;
    bool pass() const;
};

// One fixed-width row per check, PASS/FAIL up front; returns overall pass.
bool write_check_table(std::ostream& os, const std::vector<CheckResult>& checks);

}  // namespace qrbsde
