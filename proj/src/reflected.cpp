#include "qrbsde/reflected.hpp"

#include <algorithm>
#include <cmath>

namespace qrbsde {

namespace {

// Gradient cap used inside the driver: 1.5x the closed-form bound with the
// measured Lipschitz constant of the function the current backward pass
// terminates at.
double make_z_cap(const Problem& p, double L_terminal) {
    return 1.5 * z_sup_bound(p.forward.Msigma, p.driver.Kx, p.forward.Kb,
                             L_terminal, p.T);
}

std::vector<double> nodal_payoff(const Problem& p, const SpaceGrid& gx) {
    std::vector<double> g(static_cast<std::size_t>(gx.nx));
    for (int j = 0; j < gx.nx; ++j) g[static_cast<std::size_t>(j)] = p.payoff.g(gx.x(j));
    return g;
}

std::vector<double> nodal_barrier(const Problem& p, const SpaceGrid& gx) {
    std::vector<double> g(static_cast<std::size_t>(gx.nx));
    for (int j = 0; j < gx.nx; ++j) g[static_cast<std::size_t>(j)] = p.barrier(gx.x(j));
    return g;
}

}  // namespace

double DiscreteSolution::value_at(int k, double x) const {
    int di = date_of[static_cast<std::size_t>(k)];
    if (di >= 0) return gx.interp(post[static_cast<std::size_t>(di)], x);
    return gx.interp(pre[static_cast<std::size_t>(k)].u, x);
}

double DiscreteSolution::jump_at_date(int i, double x) const {
    int k = pidx[static_cast<std::size_t>(i)];
    return gx.interp(post[static_cast<std::size_t>(i)], x) -
           gx.interp(pre[static_cast<std::size_t>(k)].u, x);
}

DiscreteSolution solve_discrete(const Problem& prob, const SubstepGrid& gt,
                                const SpaceGrid& gx, const Partition& part) {
    DiscreteSolution out;
    out.gt = gt;
    out.gx = gx;
    out.pdates = part.dates();
    out.pidx = snap_partition(part, gt);
    out.date_of.assign(static_cast<std::size_t>(gt.S) + 1, -1);
    for (int i = 0; i <= part.n(); ++i)
        out.date_of[static_cast<std::size_t>(out.pidx[static_cast<std::size_t>(i)])] = i;

    const int n = part.n();
    const bool reflect = prob.reflected();
    const auto gterm = nodal_payoff(prob, gx);
    const auto gbar = nodal_barrier(prob, gx);

    PdeSolver solver(prob.forward, prob.driver, gx);
    out.pre.resize(static_cast<std::size_t>(gt.S) + 1);
    out.post.resize(static_cast<std::size_t>(n) + 1);
    out.post_lipschitz.resize(static_cast<std::size_t>(n) + 1);
    out.max_z_interval.assign(static_cast<std::size_t>(n), 0.0);

    // terminal layer
    Layer& top = out.pre[static_cast<std::size_t>(gt.S)];
    top.t = gt.T;
    top.u = gterm;
    top.zmag = extract_z(top.u, gx);
    out.post[static_cast<std::size_t>(n)] = gterm;
    out.post_lipschitz[static_cast<std::size_t>(n)] = lipschitz_of(gterm, gx);

    std::vector<double> cur = gterm;
    std::vector<double> nxt;
    for (int i = n; i >= 1; --i) {
        const int klo = out.pidx[static_cast<std::size_t>(i) - 1];
        const int khi = out.pidx[static_cast<std::size_t>(i)];
        solver.set_z_cap(make_z_cap(prob, out.post_lipschitz[static_cast<std::size_t>(i)]));
        double zmax = 0.0;
        for (int k = khi - 1; k >= klo; --k) {
            const double t = gt.time(k);
            solver.substep(cur, t, gt.dt, nxt);
            Layer& L = out.pre[static_cast<std::size_t>(k)];
            L.t = t;
            L.u = nxt;
            L.zmag = extract_z(L.u, gx);
            const double sn = prob.forward.sigma_norm(t);
            for (double z : L.zmag) zmax = std::max(zmax, std::abs(z) * sn);
            cur.swap(nxt);
        }
        out.max_z_interval[static_cast<std::size_t>(i) - 1] = zmax;
        // reflect at the left endpoint
        std::vector<double>& p = out.post[static_cast<std::size_t>(i) - 1];
        p = cur;
        if (reflect)
            for (int j = 0; j < gx.nx; ++j)
                p[static_cast<std::size_t>(j)] =
                    std::max(p[static_cast<std::size_t>(j)], gbar[static_cast<std::size_t>(j)]);
        out.post_lipschitz[static_cast<std::size_t>(i) - 1] = lipschitz_of(p, gx);
        cur = p;
    }

    out.fixedpoint_warnings = solver.fixedpoint_warnings();
    double mu = 0.0;
    for (const auto& L : out.pre)
        for (double v : L.u) mu = std::max(mu, std::abs(v));
    for (const auto& p : out.post)
        for (double v : p) mu = std::max(mu, std::abs(v));
    out.max_abs_u = mu;
    return out;
}

ContinuousReference solve_continuous_reference(const Problem& prob,
                                               const SubstepGrid& gt,
                                               const SpaceGrid& gx) {
    ContinuousReference out;
    out.gt = gt;
    out.gx = gx;
    const bool reflect = prob.reflected();
    const auto gterm = nodal_payoff(prob, gx);
    const auto gbar = nodal_barrier(prob, gx);

    PdeSolver solver(prob.forward, prob.driver, gx);
    out.layers.resize(static_cast<std::size_t>(gt.S) + 1);
    out.kinc.resize(static_cast<std::size_t>(gt.S));

    Layer& top = out.layers[static_cast<std::size_t>(gt.S)];
    top.t = gt.T;
    top.u = gterm;
    top.zmag = extract_z(top.u, gx);

    std::vector<double> cur = gterm;
    std::vector<double> nxt;
    for (int k = gt.S - 1; k >= 0; --k) {
        solver.set_z_cap(make_z_cap(prob, lipschitz_of(cur, gx)));
        const double t = gt.time(k);
        solver.substep(cur, t, gt.dt, nxt);
        Layer& L = out.layers[static_cast<std::size_t>(k)];
        L.t = t;
        // The gradient feeding the Z process on [t_k, t_{k+1}) belongs to the
        // value computed on that interval, i.e. before the lift is applied.
        L.zmag = extract_z(nxt, gx);
        std::vector<double>& inc = out.kinc[static_cast<std::size_t>(k)];
        inc.assign(static_cast<std::size_t>(gx.nx), 0.0);
        if (reflect) {
            for (int j = 0; j < gx.nx; ++j) {
                const std::size_t js = static_cast<std::size_t>(j);
                double lift = gbar[js] - nxt[js];
                if (lift > 0) {
                    inc[js] = lift;
                    nxt[js] = gbar[js];
                }
            }
        }
        L.u = nxt;
        cur.swap(nxt);
    }

    out.fixedpoint_warnings = solver.fixedpoint_warnings();
    double mu = 0.0;
    for (const auto& L : out.layers)
        for (double v : L.u) mu = std::max(mu, std::abs(v));
    out.max_abs_u = mu;
    return out;
}

PathProcesses::PathProcesses(const Problem& prob, const DiscreteSolution& disc,
                             const ContinuousReference& ref, const PathBatch& batch)
    : prob_(&prob), disc_(&disc), ref_(&ref), batch_(&batch) {
    if (disc.gt.S != batch.grid.S || ref.gt.S != batch.grid.S)
        throw ConfigError("path evaluation: solver and batch substep grids differ");
    const int S = batch.grid.S;
    signorm_.resize(static_cast<std::size_t>(S) + 1);
    for (int k = 0; k <= S; ++k)
        signorm_[static_cast<std::size_t>(k)] = prob.forward.sigma_norm(batch.grid.time(k));
    excluded_.assign(static_cast<std::size_t>(batch.M), 0);
    const SpaceGrid& gx = disc.gx;
    int valid = 0;
    for (int p = 0; p < batch.M; ++p) {
        bool ok = true;
        for (int k = 0; k <= S; ++k)
            if (!gx.contains(batch.state(p, k))) { ok = false; break; }
        excluded_[static_cast<std::size_t>(p)] = ok ? 0 : 1;
        if (ok) ++valid;
    }
    valid_ = valid;
}

void PathProcesses::series(int p, PathSeries& out) const {
    const int S = batch_->grid.S;
    const SpaceGrid& gx = disc_->gx;
    auto resize = [S](std::vector<double>& v) { v.resize(static_cast<std::size_t>(S) + 1); };
    resize(out.y_d); resize(out.z_d); resize(out.k_d);
    resize(out.y_r); resize(out.z_r); resize(out.k_r);

    double acc_d = 0.0, acc_r = 0.0;
    for (int k = 0; k <= S; ++k) {
        const std::size_t ks = static_cast<std::size_t>(k);
        const double x = batch_->state(p, k);
        const double sn = signorm_[ks];
        const int di = disc_->date_of[ks];
        out.y_d[ks] = di >= 0 ? gx.interp(disc_->post[static_cast<std::size_t>(di)], x)
                              : gx.interp(disc_->pre[ks].u, x);
        out.z_d[ks] = gx.interp(disc_->pre[ks].zmag, x) * sn;
        out.y_r[ks] = gx.interp(ref_->layers[ks].u, x);
        out.z_r[ks] = gx.interp(ref_->layers[ks].zmag, x) * sn;
        out.k_d[ks] = acc_d;
        out.k_r[ks] = acc_r;
        if (k < S) {
            if (di >= 0) {
                double jump = gx.interp(disc_->post[static_cast<std::size_t>(di)], x) -
                              gx.interp(disc_->pre[ks].u, x);
                if (jump > 0) acc_d += jump;
            }
            acc_r += gx.interp(ref_->kinc[ks], x);
        }
    }
}

PathProcesses evaluate_along_paths(const Problem& prob, const DiscreteSolution& disc,
                                   const ContinuousReference& ref,
                                   const PathBatch& batch) {
    return PathProcesses(prob, disc, ref, batch);
}

double flatoff_residual(const PathProcesses& pp) {
    const int M = pp.paths();
    const int S = pp.substeps();
    if (pp.valid_count() == 0) throw NumericalError("flat-off residual: no valid paths");
    const Problem& prob = pp.problem();
    const std::size_t nblocks = (static_cast<std::size_t>(M) + default_block() - 1) / default_block();
    std::vector<double> partial(nblocks, 0.0);
    parallel_blocks(static_cast<std::size_t>(M), default_block(),
                    [&](std::size_t bi, std::size_t lo, std::size_t hi) {
        PathSeries s;
        double acc = 0.0;
        for (std::size_t p = lo; p < hi; ++p) {
            if (pp.excluded(static_cast<int>(p))) continue;
            pp.series(static_cast<int>(p), s);
            double r = 0.0;
            for (int k = 0; k < S; ++k) {
                const std::size_t ks = static_cast<std::size_t>(k);
                double gap = s.y_r[ks] - prob.barrier(pp.batch().state(static_cast<int>(p), k));
                if (gap > 0) r += gap * (s.k_r[ks + 1] - s.k_r[ks]);
            }
            acc += r;
        }
        partial[bi] = acc;
    });
    double total = 0.0;
    for (double v : partial) total += v;
    return total / pp.valid_count();
}

void write_processes_csv(std::ostream& os, const PathProcesses& pp,
                         int stride, int max_paths) {
    if (stride < 1) stride = 1;
    const int S = pp.substeps();
    const int P = max_paths < 0 ? pp.paths() : std::min(max_paths, pp.paths());
    os << "path_id,time,y_disc,z_disc_mag,k_disc,y_ref,z_ref_mag,k_ref\n";
    PathSeries s;
    for (int p = 0; p < P; ++p) {
        if (pp.excluded(p)) continue;
        pp.series(p, s);
        for (int k = 0; k <= S; ++k) {
            if (k % stride != 0 && k != S) continue;
            const std::size_t ks = static_cast<std::size_t>(k);
            os << p << ',' << fmt_full(pp.batch().grid.time(k)) << ','
               << fmt_full(s.y_d[ks]) << ',' << fmt_full(std::abs(s.z_d[ks])) << ','
               << fmt_full(s.k_d[ks]) << ',' << fmt_full(s.y_r[ks]) << ','
               << fmt_full(std::abs(s.z_r[ks])) << ',' << fmt_full(s.k_r[ks]) << '\n';
        }
    }
}

}  // namespace qrbsde
