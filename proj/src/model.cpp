#include "qrbsde/model.hpp"

#include <algorithm>
#include <cmath>

#include "qrbsde/rng.hpp"

namespace qrbsde {

Partition::Partition(std::vector<double> dates) : t_(std::move(dates)) {
    if (t_.size() < 2) throw ConfigError("partition needs at least two dates");
    if (t_.front() != 0.0) throw ConfigError("partition must start at 0");
    for (std::size_t i = 1; i < t_.size(); ++i)
        if (!(t_[i] > t_[i - 1]))
            throw ConfigError("partition dates must be strictly increasing");
}

Partition Partition::uniform(double T, int n) {
    if (!(T > 0) || n < 1) throw ConfigError("uniform partition needs T > 0, n >= 1");
    std::vector<double> t(static_cast<std::size_t>(n) + 1);
    for (int i = 0; i <= n; ++i) t[static_cast<std::size_t>(i)] = T * i / n;
    t.back() = T;
    return Partition(std::move(t));
}

double Partition::mesh() const {
    double m = 0.0;
    for (std::size_t i = 1; i < t_.size(); ++i) m = std::max(m, t_[i] - t_[i - 1]);
    return m;
}

std::vector<double> ForwardModel::sigma_at(double t) const {
    std::vector<double> s(static_cast<std::size_t>(m));
    sigma(t, s);
    return s;
}

double ForwardModel::sigma_norm(double t) const {
    auto s = sigma_at(t);
    double q = 0.0;
    for (double v : s) q += v * v;
    return std::sqrt(q);
}

void ForwardModel::validate(double T, double x_lo, double x_hi, int samples) const {
    if (m < 1) throw ConfigError("forward model: m >= 1 required");
    if (Mb < 0 || Kb < 0 || Msigma < 0) throw ConfigError("forward constants must be >= 0");
    NormalStream rs(0x9a11, 0);
    auto unif = [&](double lo, double hi) {
        double u = 0.5 + 0.5 * std::erf(rs.next() * 0.70710678118654752);
        return lo + (hi - lo) * u;
    };
    const double tol = 1e-9;
    for (int i = 0; i < samples; ++i) {
        double t = unif(0, T), x = unif(x_lo, x_hi), y = unif(x_lo, x_hi);
        double bv = b(t, x);
        if (!(std::abs(bv) <= Mb * (1 + std::abs(x)) + tol))
            throw ConfigError("forward model: |b| exceeds Mb(1+|x|) at sampled point");
        if (!(std::abs(bv - b(t, y)) <= Kb * std::abs(x - y) + tol))
            throw ConfigError("forward model: b violates the stated Lipschitz constant");
        if (!(sigma_norm(t) <= Msigma + tol))
            throw ConfigError("forward model: |sigma| exceeds Msigma at sampled point");
    }
}

void Driver::validate(double T, double x_lo, double x_hi, int m, int samples) const {
    if (!(alpha > 0)) throw ConfigError("driver: alpha > 0 required");
    if (Mf < 0 || Kx < 0 || Kz < 0) throw ConfigError("driver constants must be >= 0");
    NormalStream rs(0x9a12, 0);
    auto unif = [&](double lo, double hi) {
        double u = 0.5 + 0.5 * std::erf(rs.next() * 0.70710678118654752);
        return lo + (hi - lo) * u;
    };
    std::vector<double> z(static_cast<std::size_t>(m));
    const double tol = 1e-9;
    for (int i = 0; i < samples; ++i) {
        double t = unif(0, T), x = unif(x_lo, x_hi);
        double zn = 0;
        for (auto& c : z) { c = rs.next(); zn += c * c; }
        double fv = f(t, x, z);
        if (!(std::abs(fv) <= Mf + 0.5 * alpha * zn + tol))
            throw ConfigError("driver: |f| exceeds Mf + (alpha/2)|z|^2 at sampled point");
    }
}

void Obstacle::validate(double x_lo, double x_hi, int samples) const {
    if (Kg < 0 || Mg < 0) throw ConfigError("obstacle constants must be >= 0");
    NormalStream rs(0x9a13, 0);
    auto unif = [&](double lo, double hi) {
        double u = 0.5 + 0.5 * std::erf(rs.next() * 0.70710678118654752);
        return lo + (hi - lo) * u;
    };
    const double tol = 1e-9;
    for (int i = 0; i < samples; ++i) {
        double x = unif(x_lo, x_hi), y = unif(x_lo, x_hi);
        if (!(std::abs(g(x)) <= Mg + tol))
            throw ConfigError("obstacle: |g| exceeds Mg at sampled point");
        if (!(std::abs(g(x) - g(y)) <= Kg * std::abs(x - y) + tol))
            throw ConfigError("obstacle: g violates the stated Lipschitz constant");
    }
}

void MarketSpec::validate() const {
    if (m < 1) throw ConfigError("market: m >= 1 required");
    if (!(alpha > 0)) throw ConfigError("market: alpha > 0 required");
    if (std::isnan(pi_lo) || std::isnan(pi_hi) || !(pi_lo <= pi_hi))
        throw ConfigError("market: constraint interval is empty");
    if (!(pi_lo <= 0.0 && 0.0 <= pi_hi))
        throw ConfigError("market: constraint interval must contain 0");
}

double y_sup_bound(double Mg, double Mf, double T) { return Mg + Mf * T; }

double z_growth_rate(double Msigma, double Kx, double Kb, double T) {
    return Msigma * Kx * std::exp(2.0 * Kb * T);
}

double z_sup_bound(double Msigma, double Kx, double Kb, double Kg, double T) {
    double K = z_growth_rate(Msigma, Kx, Kb, T);
    return std::exp(K * T) * (Msigma * std::exp(2.0 * Kb * T) * Kg + 1.0);
}

double gronwall_envelope(double C, double T, double a_n, double b_sum) {
    return std::exp(C * T) * (a_n + b_sum);
}

double lipschitz_step(double L_i, double dt, double K1, double K2, double L_n) {
    return std::max(L_i * std::exp(K1 * dt) + K2 * dt, L_n);
}

double lipschitz_envelope(double K1, double K2, double Kg, double T) {
    return std::exp(K1 * T) * (Kg + K2 * T);
}

TheoreticalBounds TheoreticalBounds::from(const Problem& p) {
    TheoreticalBounds b;
    b.T = p.T;
    b.Mb = p.forward.Mb;
    b.Kb = p.forward.Kb;
    b.Msigma = p.forward.Msigma;
    b.Mf = p.driver.Mf;
    b.alpha = p.driver.alpha;
    b.Kg = p.payoff.Kg;
    b.Mg = p.payoff.Mg;
    return b;
}

namespace {

// Core of the market generator at one point; buffers supplied by the caller.
double market_f(const MarketSpec& s, double t, double x, std::span<const double> z,
                std::span<double> th, std::span<double> sv) {
    s.theta(t, x, th);
    s.stock_vol(t, x, sv);
    const double a = s.alpha;
    double th2 = 0, sn2 = 0, sv_dot_v = 0, zth = 0;
    for (int d = 0; d < s.m; ++d) {
        th2 += th[d] * th[d];
        sn2 += sv[d] * sv[d];
        double vd = th[d] / a - z[d];
        sv_dot_v += sv[d] * vd;
        zth += z[d] * th[d];
    }
    double dist2;
    if (sn2 > 0) {
        double pi = sv_dot_v / sn2;
        pi = std::min(std::max(pi, s.pi_lo), s.pi_hi);
        dist2 = 0;
        for (int d = 0; d < s.m; ++d) {
            double r = th[d] / a - z[d] - pi * sv[d];
            dist2 += r * r;
        }
    } else {
        dist2 = 0;
        for (int d = 0; d < s.m; ++d) {
            double vd = th[d] / a - z[d];
            dist2 += vd * vd;
        }
    }
    return -0.5 * a * dist2 - zth + th2 / (2.0 * a);
}

}  // namespace

double constrained_dist_sq(const MarketSpec& spec, double t, double x,
                           std::span<const double> z) {
    std::vector<double> th(static_cast<std::size_t>(spec.m)), sv(th.size());
    spec.theta(t, x, th);
    spec.stock_vol(t, x, sv);
    double sn2 = 0, sv_dot_v = 0;
    for (int d = 0; d < spec.m; ++d) {
        sn2 += sv[d] * sv[d];
        sv_dot_v += sv[d] * (th[d] / spec.alpha - z[d]);
    }
    double dist2 = 0;
    double pi = sn2 > 0 ? std::min(std::max(sv_dot_v / sn2, spec.pi_lo), spec.pi_hi) : 0.0;
    if (sn2 == 0) pi = 0.0;
    for (int d = 0; d < spec.m; ++d) {
        double r = th[d] / spec.alpha - z[d] - pi * sv[d];
        dist2 += r * r;
    }
    return dist2;
}

Driver build_driver_from_market(const MarketSpec& spec, double T,
                                double x_lo, double x_hi) {
    spec.validate();
    if (!(T > 0)) throw ConfigError("market driver: T > 0 required");

    const MarketSpec s = spec;  // captured by value
    Driver d;
    d.alpha = s.alpha;
    d.f = [s](double t, double x, std::span<const double> z) {
        thread_local std::vector<double> th, sv;
        th.resize(static_cast<std::size_t>(s.m));
        sv.resize(static_cast<std::size_t>(s.m));
        return market_f(s, t, x, z, th, sv);
    };

    // Constants estimated by sampling; reported, never silently trusted.
    NormalStream rs(0x9a14, 1);
    auto unif = [&](double lo, double hi) {
        double u = 0.5 + 0.5 * std::erf(rs.next() * 0.70710678118654752);
        return lo + (hi - lo) * u;
    };
    std::vector<double> th(static_cast<std::size_t>(s.m)), sv(th.size());
    std::vector<double> z(th.size()), z2(th.size());
    double Mf = 0, Kx = 0, Kz = 0;
    // Coarse deterministic grid including the range endpoints, so the
    // theta sup behind Mf is exact for coefficients monotone in x.
    for (int it = 0; it <= 16; ++it) {
        for (int ix = 0; ix <= 32; ++ix) {
            const double t = T * it / 16.0;
            const double x = x_lo + (x_hi - x_lo) * ix / 32.0;
            s.theta(t, x, th);
            double th2 = 0;
            for (double v : th) th2 += v * v;
            Mf = std::max(Mf, th2 / s.alpha);
        }
    }
    for (int i = 0; i < 4096; ++i) {
        double t = unif(0, T), x = unif(x_lo, x_hi), y = unif(x_lo, x_hi);
        s.theta(t, x, th);
        double th2 = 0;
        for (double v : th) th2 += v * v;
        Mf = std::max(Mf, th2 / s.alpha);
        double zn = 0, z2n = 0;
        for (std::size_t dd = 0; dd < z.size(); ++dd) {
            z[dd] = 1.5 * rs.next();
            z2[dd] = 1.5 * rs.next();
            zn += z[dd] * z[dd];
            z2n += z2[dd] * z2[dd];
        }
        zn = std::sqrt(zn);
        z2n = std::sqrt(z2n);
        double f1 = market_f(s, t, x, z, th, sv);
        double f2 = market_f(s, t, y, z, th, sv);
        double f3 = market_f(s, t, x, z2, th, sv);
        if (std::abs(x - y) > 1e-12)
            Kx = std::max(Kx, std::abs(f1 - f2) / ((1 + zn) * std::abs(x - y)));
        double dz = 0;
        for (std::size_t dd = 0; dd < z.size(); ++dd) {
            double q = z[dd] - z2[dd];
            dz += q * q;
        }
        dz = std::sqrt(dz);
        if (dz > 1e-12)
            Kz = std::max(Kz, std::abs(f1 - f3) / ((1 + zn + z2n) * dz));
    }
    d.Mf = Mf;
    d.Kx = Kx;
    d.Kz = Kz;
    return d;
}

std::optional<double> optimal_strategy(const MarketSpec& spec, double t, double x,
                                       std::span<const double> z) {
    std::vector<double> th(static_cast<std::size_t>(spec.m)), sv(th.size());
    spec.theta(t, x, th);
    spec.stock_vol(t, x, sv);
    double sn2 = 0, sv_dot_v = 0;
    for (int d = 0; d < spec.m; ++d) {
        sn2 += sv[d] * sv[d];
        sv_dot_v += sv[d] * (th[d] / spec.alpha - z[d]);
    }
    if (sn2 == 0) {
        if (!spec.bounded()) return std::nullopt;  // indeterminate
        return std::min(std::max(0.0, spec.pi_lo), spec.pi_hi);
    }
    double pi = sv_dot_v / sn2;
    return std::min(std::max(pi, spec.pi_lo), spec.pi_hi);
}

}  // namespace qrbsde
