#include "qrbsde/forward.hpp"

#include <cmath>

#include "qrbsde/rng.hpp"

namespace qrbsde {

SubstepGrid SubstepGrid::uniform(double T, int S) {
    if (!(T > 0) || S < 1) throw ConfigError("substep grid needs T > 0, S >= 1");
    SubstepGrid g;
    g.T = T;
    g.S = S;
    g.dt = T / S;
    return g;
}

int SubstepGrid::snap_index(double t) const {
    int k = static_cast<int>(std::lround(t / T * S));
    if (k < 0) k = 0;
    if (k > S) k = S;
    return k;
}

std::vector<int> snap_partition(const Partition& p, const SubstepGrid& g) {
    if (std::abs(p.T() - g.T) > 1e-12 * (1 + g.T))
        throw ConfigError("partition horizon does not match the substep grid");
    std::vector<int> idx(static_cast<std::size_t>(p.n()) + 1);
    for (int i = 0; i <= p.n(); ++i) idx[static_cast<std::size_t>(i)] = g.snap_index(p[i]);
    idx.front() = 0;
    idx.back() = g.S;
    for (std::size_t i = 1; i < idx.size(); ++i)
        if (idx[i] <= idx[i - 1])
            throw ConfigError("partition too fine for the substep grid (dates collide)");
    return idx;
}

PathBatch simulate(const ForwardModel& model, const SubstepGrid& grid, int M,
                   std::uint64_t seed, bool keep_increments) {
    if (M < 1) throw ConfigError("simulate: M >= 1 required");
    PathBatch batch;
    batch.grid = grid;
    batch.m = model.m;
    batch.M = M;
    batch.seed = seed;
    batch.states.resize(static_cast<std::size_t>(M) * (grid.S + 1));
    if (keep_increments)
        batch.increments.resize(static_cast<std::size_t>(M) * grid.S * model.m);

    // sigma depends on t only: precompute one row per step.
    const int m = model.m;
    std::vector<double> sig(static_cast<std::size_t>(grid.S) * m);
    for (int k = 0; k < grid.S; ++k) {
        std::span<double> row(sig.data() + static_cast<std::size_t>(k) * m, m);
        model.sigma(grid.time(k), row);
    }
    const double sq_dt = std::sqrt(grid.dt);

    parallel_blocks(static_cast<std::size_t>(M), default_block(),
                    [&](std::size_t, std::size_t lo, std::size_t hi) {
        for (std::size_t p = lo; p < hi; ++p) {
            NormalStream rs(seed, p);
            double* xs = batch.states.data() + p * (grid.S + 1);
            xs[0] = model.x0;
            for (int k = 0; k < grid.S; ++k) {
                double t = grid.time(k);
                double drift = model.b(t, xs[k]) * grid.dt;
                double diff = 0.0;
                const double* srow = sig.data() + static_cast<std::size_t>(k) * m;
                for (int d = 0; d < m; ++d) {
                    double db = sq_dt * rs.next();
                    if (keep_increments)
                        batch.increments[(p * grid.S + k) * m + d] = db;
                    diff += srow[d] * db;
                }
                xs[k + 1] = xs[k] + drift + diff;
            }
        }
    });
    return batch;
}

std::pair<double, double> gaussian_terminal_law(const ForwardModel& model,
                                                double t, double x, double T) {
    if (!(T > t)) throw ConfigError("gaussian terminal law: T > t required");
    // Verify the model is actually driftless with time-constant sigma.
    auto s0 = model.sigma_at(t);
    for (int i = 0; i <= 16; ++i) {
        double ti = t + (T - t) * i / 16.0;
        double xi = x + (i - 8) * 0.37;
        if (model.b(ti, xi) != 0.0)
            throw ConfigError("gaussian terminal law: drift is not identically zero");
        auto si = model.sigma_at(ti);
        for (int d = 0; d < model.m; ++d)
            if (si[static_cast<std::size_t>(d)] != s0[static_cast<std::size_t>(d)])
                throw ConfigError("gaussian terminal law: sigma is not constant in time");
    }
    double q = 0.0;
    for (double v : s0) q += v * v;
    return {x, q * (T - t)};
}

void write_paths_csv(std::ostream& os, const PathBatch& batch, int stride) {
    if (stride < 1) stride = 1;
    os << "path_id,time,state\n";
    for (int p = 0; p < batch.M; ++p) {
        for (int k = 0; k <= batch.grid.S; ++k) {
            if (k % stride != 0 && k != batch.grid.S) continue;
            os << p << ',' << fmt_full(batch.grid.time(k)) << ','
               << fmt_full(batch.state(p, k)) << '\n';
        }
    }
}

}  // namespace qrbsde
