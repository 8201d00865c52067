// One-dimensional backward PDE solver for
//   u_t + b(t,x) u_x + (1/2)|sigma(t)|^2 u_xx + f(t, x, u_x sigma(t)) = 0.
// Implicit step for drift+diffusion (tridiagonal), fixed-point sweeps for the
// nonlinear source with the gradient clipped at a theoretical cap. Boundary
// rows impose u_xx = 0 (linear extrapolation), which reduces to one-sided
// drift differences.
#pragma once

#include <vector>

#include "qrbsde/model.hpp"

namespace qrbsde {

// Uniform grid with x0 at the center node (nx odd).
struct SpaceGrid {
    double x_min = -1.0;
    double dx = 0.01;
    int nx = 201;

    static SpaceGrid centered(double x0, double half_width, int nx);
    // Default sizing: half-width R = 6 Msigma sqrt(T) + T Mb (1+|x0|+6 Msigma sqrt(T)),
    // dx = 0.01 R / 3; overrides replace individual pieces when positive.
    static SpaceGrid default_for(const ForwardModel& f, double T,
                                 double dx_override = 0.0, double R_override = 0.0,
                                 int nx_override = 0);

    double x(int j) const { return x_min + dx * j; }
    double x_max() const { return x(nx - 1); }
    bool contains(double xq) const { return xq >= x_min && xq <= x_max(); }
    double interp(std::span<const double> values, double xq) const;
};

// One time layer: values and their central-difference gradient.
struct Layer {
    double t = 0.0;
    std::vector<double> u;
    std::vector<double> zmag;  // du/dx; the z vector at a node is zmag * sigma(t)
};

// All layers of one backward solve over [t_lo, t_hi], terminal included,
// ordered by time (layers.front().t == t_lo).
struct IntervalSurface {
    double t_lo = 0.0, t_hi = 1.0;
    std::vector<Layer> layers;
    int fixedpoint_warnings = 0;
    double max_residual = 0.0;
};

// du/dx by central differences, one-sided at the boundary rows.
std::vector<double> extract_z(std::span<const double> u, const SpaceGrid& g);
double lipschitz_of(std::span<const double> u, const SpaceGrid& g);

class PdeSolver {
public:
    PdeSolver(const ForwardModel& fwd, const Driver& drv, const SpaceGrid& grid);

    // Gradient cap |zmag * sigma| <= z_cap applied inside f. <= 0 disables.
    void set_z_cap(double cap) { z_cap_ = cap; }
    void set_sweeps(int s) { sweeps_ = s < 1 ? 1 : s; }
    void set_residual_tol(double tol) { fp_tol_ = tol; }

    const SpaceGrid& grid() const { return gx_; }
    int fixedpoint_warnings() const { return fp_warnings_; }
    double worst_residual() const { return worst_residual_; }

    // One implicit step from the layer at t+dt down to t. Writes values into
    // `out` (resized); `u_next` is the layer at t+dt.
    void substep(std::span<const double> u_next, double t, double dt,
                 std::vector<double>& out);

    // Backward solve with `steps` uniform substeps; keeps every layer.
    IntervalSurface solve_interval(std::span<const double> terminal,
                                   double t_lo, double t_hi, int steps);

private:
    ForwardModel fwd_;
    Driver drv_;
    SpaceGrid gx_;
    double z_cap_ = 0.0;
    int sweeps_ = 2;
    double fp_tol_ = 1e-7;
    int fp_warnings_ = 0;
    double worst_residual_ = 0.0;
    // scratch
    std::vector<double> lo_, di_, up_, rhs_, zbuf_, uit_, cp_, sig_, zvec_;

    void assemble(double t, double dt);
    void thomas(std::vector<double>& x);
};

}  // namespace qrbsde
