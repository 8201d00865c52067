// Problem data: forward SDE coefficients, driver, obstacle, market data and
// the closed-form a priori bounds used as solver guards. Coefficient
// callbacks are black boxes; stated constants are validated by sampling.
#pragma once

#include <cmath>
#include <functional>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "qrbsde/common.hpp"

namespace qrbsde {

// Strictly increasing reflection dates t_0 = 0 < ... < t_n = T.
class Partition {
public:
    explicit Partition(std::vector<double> dates);
    static Partition uniform(double T, int n);

    int n() const { return static_cast<int>(t_.size()) - 1; }
    double T() const { return t_.back(); }
    double mesh() const;
    const std::vector<double>& dates() const { return t_; }
    double operator[](int i) const { return t_[static_cast<std::size_t>(i)]; }

private:
    std::vector<double> t_;
};

// Scalar state X, m-dimensional Brownian motion. sigma depends on time only.
struct ForwardModel {
    std::function<double(double, double)> b;            // (t, x)
    std::function<void(double, std::span<double>)> sigma;  // fills row of length m
    int m = 1;
    double x0 = 0.0;
    double Mb = 0.0;      // |b(t,x)| <= Mb (1 + |x|)
    double Kb = 0.0;      // |b(t,x)-b(t,x')| <= Kb |x-x'|
    double Msigma = 1.0;  // |sigma(t)| <= Msigma

    std::vector<double> sigma_at(double t) const;
    double sigma_norm(double t) const;
    // Spot-checks the stated constants on sampled points; throws ConfigError.
    void validate(double T, double x_lo, double x_hi, int samples = 512) const;
};

// Generator f(t, x, z) with quadratic growth in z.
struct Driver {
    std::function<double(double, double, std::span<const double>)> f;
    double alpha = 1.0;  // quadratic growth coefficient, > 0
    double Mf = 0.0;     // |f| <= Mf + (alpha/2)|z|^2
    double Kx = 0.0;     // |f(t,x,z)-f(t,x',z)| <= Kx (1+|z|) |x-x'|
    double Kz = 0.0;     // |f(t,x,z)-f(t,x,z')| <= Kz (1+|z|+|z'|) |z-z'|
    void validate(double T, double x_lo, double x_hi, int m, int samples = 2048) const;
};

enum class Regularity { Lipschitz, C2b };

// Lower obstacle; doubles as the terminal payoff.
struct Obstacle {
    std::function<double(double)> g;
    double Kg = 1.0;  // Lipschitz constant
    double Mg = 1.0;  // sup |g|
    Regularity reg = Regularity::Lipschitz;
    double d1_bound = 0.0;  // sup |g'|, C2b only
    double d2_bound = 0.0;  // sup |g''|, C2b only
    void validate(double x_lo, double x_hi, int samples = 4096) const;
};

// How the obstacle participates in the solve. `Active` is the standard
// coupled problem (obstacle == terminal). `Shifted` lowers only the
// reflection barrier by `shift` (diagnostics: barrier never binds for large
// shifts). `Off` disables reflection entirely (plain BSDE; oracle presets).
enum class ReflectMode { Active, Shifted, Off };

// Market data for the utility problem: risk premium theta(t,x), one traded
// stock volatility row s(t,x), strategy constraint C = [pi_lo, pi_hi]
// (either side may be infinite; 0 must lie in C), risk aversion alpha.
struct MarketSpec {
    std::function<void(double, double, std::span<double>)> theta;
    std::function<void(double, double, std::span<double>)> stock_vol;
    int m = 1;
    double pi_lo = -std::numeric_limits<double>::infinity();
    double pi_hi = std::numeric_limits<double>::infinity();
    double alpha = 1.0;

    bool bounded() const { return std::isfinite(pi_lo) && std::isfinite(pi_hi); }
    void validate() const;  // pi_lo <= pi_hi, 0 in C, alpha > 0
};

// Full problem bundle handed to the solvers.
struct Problem {
    ForwardModel forward;
    Driver driver;
    Obstacle payoff;
    double T = 1.0;
    ReflectMode mode = ReflectMode::Active;
    double shift = 0.0;  // used when mode == Shifted
    std::optional<MarketSpec> market;  // present when driver was market-built

    bool reflected() const { return mode != ReflectMode::Off; }
    // Reflection barrier value at x (terminal is always payoff.g).
    double barrier(double x) const {
        double v = payoff.g(x);
        return mode == ReflectMode::Shifted ? v - shift : v;
    }
};

// ---- closed-form a priori bounds -------------------------------------------

// sup |Y| <= Mg + Mf T.
double y_sup_bound(double Mg, double Mf, double T);

// Exponential rate K = Msigma Kx exp(2 Kb T) entering the gradient bound.
double z_growth_rate(double Msigma, double Kx, double Kb, double T);

// sup |Z| <= exp(K T) (Msigma exp(2 Kb T) Kg + 1) with K as above. `Kg` is
// the Lipschitz constant of the terminal condition of the system considered.
double z_sup_bound(double Msigma, double Kx, double Kb, double Kg, double T);

// Backward discrete envelope: if a_{i-1} <= exp(C dt_i) a_i + b_i then
// max_i a_i <= exp(C T)(a_n + sum_i b_i).
double gronwall_envelope(double C, double T, double a_n, double b_sum);

// One step of the terminal-function Lipschitz recursion:
// L_{i-1} = max(L_i exp(K1 dt) + K2 dt, L_n).
double lipschitz_step(double L_i, double dt, double K1, double K2, double L_n);

// Closed form dominating the recursion: exp(K1 T)(Kg + K2 T).
double lipschitz_envelope(double K1, double K2, double Kg, double T);

// Bound bundle for one problem instance.
struct TheoreticalBounds {
    double T = 0, Mb = 0, Kb = 0, Msigma = 0, Mf = 0, alpha = 0, Kg = 0, Mg = 0;
    static TheoreticalBounds from(const Problem& p);
    double y_bound() const { return y_sup_bound(Mg, Mf, T); }
    double z_rate(double Kx) const { return z_growth_rate(Msigma, Kx, Kb, T); }
    // Gradient bound over a window of length `len` with terminal Lipschitz
    // constant `L` (len = T, L = Kg gives the global version).
    double z_bound_window(double Kx, double len, double L) const {
        return z_sup_bound(Msigma, Kx, Kb, L, len);
    }
    double lipschitz_bound(double K1, double K2) const {
        return lipschitz_envelope(K1, K2, Kg, T);
    }
};

// ---- market operations ------------------------------------------------------

// Builds the generator
//   f(t,x,z) = -(alpha/2) dist^2(theta/alpha - z, {s^T pi : pi in C})
//              - z.theta + |theta|^2 / (2 alpha)
// and estimates (Mf, Kx, Kz) by sampling over t in [0,T], x in [x_lo, x_hi].
Driver build_driver_from_market(const MarketSpec& spec, double T,
                                double x_lo, double x_hi);

// Minimizer pi* = clamp(s.(theta/alpha - z)/|s|^2, C). Empty optional means
// indeterminate (|s| = 0 with unbounded C).
std::optional<double> optimal_strategy(const MarketSpec& spec, double t, double x,
                                       std::span<const double> z);

// Distance-to-constraint part of the generator, exposed for tests.
double constrained_dist_sq(const MarketSpec& spec, double t, double x,
                           std::span<const double> z);

}  // namespace qrbsde
