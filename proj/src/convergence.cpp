#include "qrbsde/convergence.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>

namespace qrbsde {

void accumulate_series(const PathSeries& s, const std::vector<int>& pidx, double dt,
                       std::span<double> ysq_acc, std::span<double> ysup_acc,
                       std::span<double> ksup_acc, double& z_acc) {
    const int S = static_cast<int>(s.y_d.size()) - 1;
    const int n = static_cast<int>(pidx.size()) - 1;
    for (int k = 0; k <= S; ++k) {
        const std::size_t ks = static_cast<std::size_t>(k);
        const double dy = s.y_d[ks] - s.y_r[ks];
        ysq_acc[ks] += dy * dy;
        if (k < S) {
            const double dz = s.z_d[ks] - s.z_r[ks];
            z_acc += dz * dz * dt;
        }
    }
    for (int i = 1; i <= n; ++i) {
        const int klo = pidx[static_cast<std::size_t>(i) - 1];
        const int khi = pidx[static_cast<std::size_t>(i)];
        double ysup = 0.0, ksup = 0.0;
        for (int k = klo; k <= khi; ++k) {
            const std::size_t ks = static_cast<std::size_t>(k);
            const double dy = s.y_d[ks] - s.y_r[ks];
            ysup = std::max(ysup, dy * dy);
            ksup = std::max(ksup, std::abs(s.k_d[ks] - s.k_r[ks]));
        }
        ysup_acc[static_cast<std::size_t>(i) - 1] += ysup;
        ksup_acc[static_cast<std::size_t>(i) - 1] += ksup;
    }
}

ErrorRecord error_metrics(const PathProcesses& pp) {
    const int M = pp.paths();
    const int S = pp.substeps();
    const int n = pp.disc().n();
    const double dt = pp.batch().grid.dt;
    const std::vector<int>& pidx = pp.disc().pidx;
    if (pp.valid_count() < 100)
        throw NumericalError("error metrics: fewer than 100 valid paths (" +
                             std::to_string(pp.valid_count()) + " of " +
                             std::to_string(M) + " stayed inside the grid)");

    const std::size_t bs = default_block();
    const std::size_t nblocks = (static_cast<std::size_t>(M) + bs - 1) / bs;
    const std::size_t ys = static_cast<std::size_t>(S) + 1;
    const std::size_t ns = static_cast<std::size_t>(n);
    std::vector<double> ysq(nblocks * ys, 0.0);
    std::vector<double> ysup(nblocks * ns, 0.0);
    std::vector<double> ksup(nblocks * ns, 0.0);
    std::vector<double> zint(nblocks, 0.0);

    parallel_blocks(static_cast<std::size_t>(M), bs,
                    [&](std::size_t bi, std::size_t lo, std::size_t hi) {
        PathSeries s;
        std::span<double> ysq_b(ysq.data() + bi * ys, ys);
        std::span<double> ysup_b(ysup.data() + bi * ns, ns);
        std::span<double> ksup_b(ksup.data() + bi * ns, ns);
        for (std::size_t p = lo; p < hi; ++p) {
            if (pp.excluded(static_cast<int>(p))) continue;
            pp.series(static_cast<int>(p), s);
            accumulate_series(s, pidx, dt, ysq_b, ysup_b, ksup_b, zint[bi]);
        }
    });

    // combine in block order so the result is independent of thread count
    std::vector<double> ysq_tot(ys, 0.0), ysup_tot(ns, 0.0), ksup_tot(ns, 0.0);
    double z_tot = 0.0;
    for (std::size_t bi = 0; bi < nblocks; ++bi) {
        for (std::size_t k = 0; k < ys; ++k) ysq_tot[k] += ysq[bi * ys + k];
        for (std::size_t i = 0; i < ns; ++i) {
            ysup_tot[i] += ysup[bi * ns + i];
            ksup_tot[i] += ksup[bi * ns + i];
        }
        z_tot += zint[bi];
    }

    const double inv = 1.0 / pp.valid_count();
    ErrorRecord rec;
    rec.n = n;
    rec.valid_paths = pp.valid_count();
    for (double v : ysq_tot) rec.err_y_sup_sq = std::max(rec.err_y_sup_sq, v * inv);
    for (double v : ysup_tot)
        rec.err_y_pathsup_sq = std::max(rec.err_y_pathsup_sq, v * inv);
    for (double v : ksup_tot) rec.err_k_sup = std::max(rec.err_k_sup, v * inv);
    rec.err_z_l2_sq = z_tot * inv;
    const std::vector<double>& pd = pp.disc().pdates;
    for (std::size_t i = 1; i < pd.size(); ++i)
        rec.mesh = std::max(rec.mesh, pd[i] - pd[i - 1]);
    return rec;
}

std::optional<double> fit_rate(const std::vector<double>& mesh,
                               const std::vector<double>& err,
                               std::vector<std::string>* warnings) {
    std::vector<double> lx, ly;
    for (std::size_t i = 0; i < mesh.size() && i < err.size(); ++i) {
        if (!(err[i] > 0.0) || !(mesh[i] > 0.0)) {
            if (warnings)
                warnings->push_back("rate fit: dropped nonpositive point at mesh " +
                                    std::to_string(mesh[i]));
            continue;
        }
        lx.push_back(std::log(mesh[i]));
        ly.push_back(std::log(err[i]));
    }
    const std::size_t m = lx.size();
    if (m < 4) {
        if (warnings)
            warnings->push_back("rate fit: only " + std::to_string(m) +
                                " usable points, need 4");
        return std::nullopt;
    }
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    for (std::size_t i = 0; i < m; ++i) {
        sx += lx[i];
        sy += ly[i];
        sxx += lx[i] * lx[i];
        sxy += lx[i] * ly[i];
    }
    const double denom = m * sxx - sx * sx;
    if (denom == 0.0) return std::nullopt;
    return (m * sxy - sx * sy) / denom;
}

ConvergenceReport run_sweep(const Problem& prob, const SweepSetup& setup) {
    using clock = std::chrono::steady_clock;
    const auto t0 = clock::now();
    ConvergenceReport rep;
    const SubstepGrid gt = SubstepGrid::uniform(prob.T, setup.substeps);

    const ContinuousReference ref = solve_continuous_reference(prob, gt, setup.gx);
    rep.reference_max_abs_u = ref.max_abs_u;
    rep.fixedpoint_warnings = ref.fixedpoint_warnings;

    const PathBatch batch = simulate(prob.forward, gt, setup.M, setup.seed);

    for (int n : setup.ns) {
        const auto tn = clock::now();
        const Partition part = Partition::uniform(prob.T, n);
        const DiscreteSolution disc = solve_discrete(prob, gt, setup.gx, part);
        const PathProcesses pp = evaluate_along_paths(prob, disc, ref, batch);
        ErrorRecord rec = error_metrics(pp);
        rec.seconds = std::chrono::duration<double>(clock::now() - tn).count();
        rep.records.push_back(rec);
        rep.fixedpoint_warnings += disc.fixedpoint_warnings;
        rep.exit_fraction = pp.exit_fraction();
    }

    std::vector<double> mesh, e1, e2, e3, e4;
    for (const ErrorRecord& r : rep.records) {
        mesh.push_back(r.mesh);
        e1.push_back(r.err_y_sup_sq);
        e2.push_back(r.err_y_pathsup_sq);
        e3.push_back(r.err_z_l2_sq);
        e4.push_back(r.err_k_sup);
    }
    rep.slope_y_sup = fit_rate(mesh, e1, &rep.warnings);
    rep.slope_y_pathsup = fit_rate(mesh, e2, &rep.warnings);
    rep.slope_z = fit_rate(mesh, e3, &rep.warnings);
    rep.slope_k = fit_rate(mesh, e4, &rep.warnings);

    const bool smooth = prob.payoff.reg == Regularity::C2b;
    rep.exp_y = smooth ? 1.0 : 0.5;
    rep.exp_z = smooth ? 1.0 : 0.5;
    rep.exp_k = smooth ? 0.5 : 0.25;
    rep.seconds_total = std::chrono::duration<double>(clock::now() - t0).count();
    return rep;
}

void write_report_csv(std::ostream& os, const ConvergenceReport& rep) {
    os << "n,mesh,err_y_sup_sq,err_y_pathsup_sq,err_z_l2_sq,err_k_sup,seconds\n";
    for (const ErrorRecord& r : rep.records)
        os << r.n << ',' << fmt_full(r.mesh) << ',' << fmt_full(r.err_y_sup_sq) << ','
           << fmt_full(r.err_y_pathsup_sq) << ',' << fmt_full(r.err_z_l2_sq) << ','
           << fmt_full(r.err_k_sup) << ',' << fmt_full(r.seconds) << '\n';
}

}  // namespace qrbsde
