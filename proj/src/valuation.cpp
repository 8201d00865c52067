#include "qrbsde/valuation.hpp"

#include <cmath>
#include <limits>

namespace qrbsde {

ValueResult value_function(double alpha, double wealth, double y) {
    ValueResult r;
    const double a = alpha * (wealth + y);
    r.saturated = std::abs(a) > 700.0;
    r.value = -std::exp(-a);
    return r;
}

ExerciseRegion exercise_region(const ContinuousReference& ref, const Problem& prob,
                               double contact_tol, const PathBatch* batch) {
    if (contact_tol < 0) throw ConfigError("exercise region: contact_tol must be >= 0");
    ExerciseRegion out;
    out.contact_tol = contact_tol;
    const int S = ref.gt.S;
    const SpaceGrid& gx = ref.gx;
    out.contact.resize(static_cast<std::size_t>(S) + 1);
    const bool stopping = prob.reflected();
    for (int k = 0; k <= S; ++k) {
        std::vector<std::uint8_t>& row = out.contact[static_cast<std::size_t>(k)];
        row.assign(static_cast<std::size_t>(gx.nx), 0);
        if (k == S) {
            for (auto& c : row) c = 1;
            continue;
        }
        if (!stopping) continue;
        const std::vector<double>& u = ref.layers[static_cast<std::size_t>(k)].u;
        for (int j = 0; j < gx.nx; ++j) {
            const std::size_t js = static_cast<std::size_t>(j);
            if (u[js] <= prob.barrier(gx.x(j)) + contact_tol) row[js] = 1;
        }
    }
    if (batch) {
        if (batch->grid.S != S)
            throw ConfigError("exercise region: batch substep grid differs from solution");
        out.first_entry.assign(static_cast<std::size_t>(batch->M), S);
        for (int p = 0; p < batch->M; ++p) {
            if (!stopping) continue;  // entry only at the end
            for (int k = 0; k < S; ++k) {
                const double x = batch->state(p, k);
                const double u = gx.interp(ref.layers[static_cast<std::size_t>(k)].u, x);
                if (u <= prob.barrier(x) + contact_tol) {
                    out.first_entry[static_cast<std::size_t>(p)] = k;
                    break;
                }
            }
        }
    }
    return out;
}

std::vector<double> strategy_path(const Problem& prob, const ContinuousReference& ref,
                                  const PathBatch& batch, const ExerciseRegion& region,
                                  int path) {
    if (!prob.market)
        throw ConfigError("strategy: problem carries no market specification");
    if (region.first_entry.empty())
        throw ConfigError("strategy: region was built without path entry times");
    const MarketSpec& spec = *prob.market;
    const int S = batch.grid.S;
    const int entry = region.first_entry[static_cast<std::size_t>(path)];
    std::vector<double> pi(static_cast<std::size_t>(S) + 1, 0.0);
    std::vector<double> z(static_cast<std::size_t>(prob.forward.m));
    for (int k = 0; k < entry; ++k) {
        const double t = batch.grid.time(k);
        const double x = batch.state(path, k);
        const double zm = ref.gx.interp(ref.layers[static_cast<std::size_t>(k)].zmag, x);
        std::vector<double> sig = prob.forward.sigma_at(t);
        for (int d = 0; d < prob.forward.m; ++d)
            z[static_cast<std::size_t>(d)] = zm * sig[static_cast<std::size_t>(d)];
        auto best = optimal_strategy(spec, t, x, z);
        pi[static_cast<std::size_t>(k)] =
            best ? *best : std::numeric_limits<double>::quiet_NaN();
    }
    return pi;
}

void write_region_csv(std::ostream& os, const ContinuousReference& ref,
                      const ExerciseRegion& region, int stride) {
    if (stride < 1) stride = 1;
    const int S = ref.gt.S;
    os << "time,x,contact\n";
    for (int k = 0; k <= S; ++k) {
        if (k % stride != 0 && k != S) continue;
        const double t = ref.gt.time(k);
        const std::vector<std::uint8_t>& row = region.contact[static_cast<std::size_t>(k)];
        for (int j = 0; j < ref.gx.nx; ++j)
            os << fmt_full(t) << ',' << fmt_full(ref.gx.x(j)) << ','
               << static_cast<int>(row[static_cast<std::size_t>(j)]) << '\n';
    }
}

void write_strategy_csv(std::ostream& os, const Problem& prob,
                        const ContinuousReference& ref, const PathBatch& batch,
                        const ExerciseRegion& region, int stride, int max_paths) {
    if (stride < 1) stride = 1;
    const int S = batch.grid.S;
    const int P = max_paths < 0 ? batch.M : std::min(max_paths, batch.M);
    os << "path_id,time,pi\n";
    for (int p = 0; p < P; ++p) {
        std::vector<double> pi = strategy_path(prob, ref, batch, region, p);
        for (int k = 0; k <= S; ++k) {
            if (k % stride != 0 && k != S) continue;
            os << p << ',' << fmt_full(batch.grid.time(k)) << ','
               << fmt_full(pi[static_cast<std::size_t>(k)]) << '\n';
        }
    }
}

}  // namespace qrbsde
