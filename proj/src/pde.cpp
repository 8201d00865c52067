#include "qrbsde/pde.hpp"

#include <algorithm>
#include <cmath>

namespace qrbsde {

SpaceGrid SpaceGrid::centered(double x0, double half_width, int nx) {
    if (!(half_width > 0) || nx < 5) throw ConfigError("space grid: need R > 0, nx >= 5");
    if (nx % 2 == 0) ++nx;  // keep x0 on the center node
    SpaceGrid g;
    g.nx = nx;
    g.dx = 2.0 * half_width / (nx - 1);
    g.x_min = x0 - half_width;
    return g;
}

SpaceGrid SpaceGrid::default_for(const ForwardModel& f, double T,
                                 double dx_override, double R_override,
                                 int nx_override) {
    double sw = 6.0 * f.Msigma * std::sqrt(T);
    double R = R_override > 0 ? R_override : sw + T * f.Mb * (1.0 + std::abs(f.x0) + sw);
    if (!(R > 0)) throw ConfigError("space grid: computed half-width is not positive");
    int nx;
    if (nx_override > 0) {
        nx = nx_override;
    } else {
        double dx = dx_override > 0 ? dx_override : 0.01 * R / 3.0;
        nx = static_cast<int>(std::lround(2.0 * R / dx)) + 1;
    }
    return centered(f.x0, R, nx);
}

double SpaceGrid::interp(std::span<const double> values, double xq) const {
    double s = (xq - x_min) / dx;
    int j = static_cast<int>(s);
    if (j < 0) j = 0;
    if (j > nx - 2) j = nx - 2;
    double w = s - j;
    if (w < 0) w = 0;
    if (w > 1) w = 1;
    return values[static_cast<std::size_t>(j)] * (1.0 - w) +
           values[static_cast<std::size_t>(j) + 1] * w;
}

std::vector<double> extract_z(std::span<const double> u, const SpaceGrid& g) {
    std::vector<double> z(u.size());
    const int n = g.nx;
    for (int j = 1; j + 1 < n; ++j)
        z[static_cast<std::size_t>(j)] =
            (u[static_cast<std::size_t>(j) + 1] - u[static_cast<std::size_t>(j) - 1]) /
            (2.0 * g.dx);
    z[0] = (u[1] - u[0]) / g.dx;
    z[static_cast<std::size_t>(n) - 1] =
        (u[static_cast<std::size_t>(n) - 1] - u[static_cast<std::size_t>(n) - 2]) / g.dx;
    return z;
}

double lipschitz_of(std::span<const double> u, const SpaceGrid& g) {
    double L = 0.0;
    for (std::size_t j = 0; j + 1 < u.size(); ++j)
        L = std::max(L, std::abs(u[j + 1] - u[j]) / g.dx);
    return L;
}

PdeSolver::PdeSolver(const ForwardModel& fwd, const Driver& drv, const SpaceGrid& grid)
    : fwd_(fwd), drv_(drv), gx_(grid) {
    const std::size_t n = static_cast<std::size_t>(gx_.nx);
    lo_.resize(n);
    di_.resize(n);
    up_.resize(n);
    rhs_.resize(n);
    zbuf_.resize(n);
    uit_.resize(n);
    cp_.resize(n);
    sig_.resize(static_cast<std::size_t>(fwd_.m));
    zvec_.resize(static_cast<std::size_t>(fwd_.m));
}

// A = I - dt L with L = b d_x + nu d_xx, central differences inside, u_xx = 0
// at the boundary rows (one-sided drift). Checks diagonal dominance.
void PdeSolver::assemble(double t, double dt) {
    const int n = gx_.nx;
    fwd_.sigma(t, sig_);
    double s2 = 0.0;
    for (double v : sig_) s2 += v * v;
    const double nu = 0.5 * s2;
    const double cn = dt * nu / (gx_.dx * gx_.dx);
    for (int j = 0; j < n; ++j) {
        const std::size_t js = static_cast<std::size_t>(j);
        const double bj = fwd_.b(t, gx_.x(j));
        if (j == 0) {
            const double c = dt * bj / gx_.dx;
            lo_[js] = 0.0;
            di_[js] = 1.0 + c;
            up_[js] = -c;
        } else if (j == n - 1) {
            const double c = dt * bj / gx_.dx;
            lo_[js] = c;
            di_[js] = 1.0 - c;
            up_[js] = 0.0;
        } else {
            const double cb = dt * bj / (2.0 * gx_.dx);
            lo_[js] = -(cn - cb);
            di_[js] = 1.0 + 2.0 * cn;
            up_[js] = -(cn + cb);
        }
        if (std::abs(di_[js]) + 1e-12 < std::abs(lo_[js]) + std::abs(up_[js]))
            throw NumericalError(
                "implicit step lost diagonal dominance: dt=" + fmt_full(dt) +
                " dx=" + fmt_full(gx_.dx) + " |b|=" + fmt_full(std::abs(bj)) +
                " nu=" + fmt_full(nu) + " at node " + std::to_string(j));
    }
}

void PdeSolver::thomas(std::vector<double>& x) {
    const int n = gx_.nx;
    double den = di_[0];
    if (std::abs(den) < 1e-300) throw NumericalError("tridiagonal solve: zero pivot");
    cp_[0] = up_[0] / den;
    x[0] = x[0] / den;
    for (int j = 1; j < n; ++j) {
        const std::size_t js = static_cast<std::size_t>(j);
        den = di_[js] - lo_[js] * cp_[js - 1];
        if (std::abs(den) < 1e-300) throw NumericalError("tridiagonal solve: zero pivot");
        cp_[js] = up_[js] / den;
        x[js] = (x[js] - lo_[js] * x[js - 1]) / den;
    }
    for (int j = n - 2; j >= 0; --j) {
        const std::size_t js = static_cast<std::size_t>(j);
        x[js] -= cp_[js] * x[js + 1];
    }
}

void PdeSolver::substep(std::span<const double> u_next, double t, double dt,
                        std::vector<double>& out) {
    const int n = gx_.nx;
    assemble(t, dt);
    double s2 = 0.0;
    for (double v : sig_) s2 += v * v;
    const double snorm = std::sqrt(s2);
    const double zlim = (z_cap_ > 0 && snorm > 0)
                            ? z_cap_ / snorm
                            : std::numeric_limits<double>::infinity();

    // Fixed point: gradient source from the latest iterate, starting at the
    // layer above.
    uit_.assign(u_next.begin(), u_next.end());
    out.resize(static_cast<std::size_t>(n));
    double resid = 0.0;
    for (int sweep = 0; sweep < sweeps_; ++sweep) {
        // gradient of current iterate, clipped
        for (int j = 1; j + 1 < n; ++j)
            zbuf_[static_cast<std::size_t>(j)] =
                (uit_[static_cast<std::size_t>(j) + 1] - uit_[static_cast<std::size_t>(j) - 1]) /
                (2.0 * gx_.dx);
        zbuf_[0] = (uit_[1] - uit_[0]) / gx_.dx;
        zbuf_[static_cast<std::size_t>(n) - 1] =
            (uit_[static_cast<std::size_t>(n) - 1] - uit_[static_cast<std::size_t>(n) - 2]) /
            gx_.dx;
        for (int j = 0; j < n; ++j) {
            const std::size_t js = static_cast<std::size_t>(j);
            double zm = zbuf_[js];
            if (zm > zlim) zm = zlim;
            if (zm < -zlim) zm = -zlim;
            for (int d = 0; d < fwd_.m; ++d)
                zvec_[static_cast<std::size_t>(d)] = zm * sig_[static_cast<std::size_t>(d)];
            rhs_[js] = u_next[js] + dt * drv_.f(t, gx_.x(j), zvec_);
        }
        thomas(rhs_);
        resid = 0.0;
        for (int j = 0; j < n; ++j) {
            const std::size_t js = static_cast<std::size_t>(j);
            resid = std::max(resid, std::abs(rhs_[js] - uit_[js]));
            uit_[js] = rhs_[js];
        }
    }
    // First sweep's "residual" is the full update; only meaningful with >= 2.
    if (sweeps_ >= 2) {
        worst_residual_ = std::max(worst_residual_, resid);
        if (resid > fp_tol_) ++fp_warnings_;
    }
    std::copy(uit_.begin(), uit_.end(), out.begin());
}

IntervalSurface PdeSolver::solve_interval(std::span<const double> terminal,
                                          double t_lo, double t_hi, int steps) {
    if (!(t_hi > t_lo) || steps < 1)
        throw ConfigError("solve_interval: need t_hi > t_lo and steps >= 1");
    if (terminal.size() != static_cast<std::size_t>(gx_.nx))
        throw ConfigError("solve_interval: terminal size does not match the grid");
    IntervalSurface out;
    out.t_lo = t_lo;
    out.t_hi = t_hi;
    out.layers.resize(static_cast<std::size_t>(steps) + 1);
    const double dt = (t_hi - t_lo) / steps;

    Layer& top = out.layers.back();
    top.t = t_hi;
    top.u.assign(terminal.begin(), terminal.end());
    top.zmag = extract_z(top.u, gx_);

    std::vector<double> cur(terminal.begin(), terminal.end());
    std::vector<double> nxt;
    for (int k = steps - 1; k >= 0; --k) {
        const double t = t_lo + dt * k;
        substep(cur, t, dt, nxt);
        Layer& L = out.layers[static_cast<std::size_t>(k)];
        L.t = t;
        L.u = nxt;
        L.zmag = extract_z(L.u, gx_);
        cur.swap(nxt);
    }
    out.fixedpoint_warnings = fp_warnings_;
    out.max_residual = worst_residual_;
    return out;
}

}  // namespace qrbsde
