// Forward simulation: Euler scheme on a uniform internal grid that refines
// every reflection partition. One counter-based stream per path, so the batch
// is reproducible bit-for-bit regardless of the parallel decomposition.
#pragma once

#include <cstdint>
#include <ostream>
#include <utility>
#include <vector>

#include "qrbsde/model.hpp"

namespace qrbsde {

// Uniform time grid 0 = tau_0 < ... < tau_S = T with step dt = T/S.
struct SubstepGrid {
    double T = 1.0;
    int S = 1;
    double dt = 1.0;

    static SubstepGrid uniform(double T, int S);
    double time(int k) const { return k == S ? T : T * k / S; }
    // Index of the grid time nearest to t.
    int snap_index(double t) const;
};

// Maps partition dates onto grid indices; every date must land on the grid
// strictly increasingly.
std::vector<int> snap_partition(const Partition& p, const SubstepGrid& g);

// M Euler paths on the substep grid. `states` is row-major per path; the
// optional `increments` block keeps the Brownian increments (per path, per
// step, per Brownian dimension).
struct PathBatch {
    SubstepGrid grid;
    int m = 1;
    int M = 0;
    std::uint64_t seed = 0;
    std::vector<double> states;      // M * (S+1)
    std::vector<double> increments;  // M * S * m when kept, else empty

    double state(int p, int k) const {
        return states[static_cast<std::size_t>(p) * (grid.S + 1) + k];
    }
    double increment(int p, int k, int d) const {
        return increments[(static_cast<std::size_t>(p) * grid.S + k) * m + d];
    }
    bool has_increments() const { return !increments.empty(); }
};

// X_{k+1} = X_k + b(t_k, X_k) dt + sigma(t_k) . dB_k. Deterministic per
// (seed, path index), independent of thread count.
PathBatch simulate(const ForwardModel& model, const SubstepGrid& grid, int M,
                   std::uint64_t seed, bool keep_increments = false);

// Terminal law (mean, variance) of X_T given X_t = x for driftless models
// with time-constant sigma; rejects anything else (checked by sampling).
std::pair<double, double> gaussian_terminal_law(const ForwardModel& model,
                                                double t, double x, double T);

// CSV schema: path_id,time,state. `stride` decimates time layers (the final
// time is always written).
void write_paths_csv(std::ostream& os, const PathBatch& batch, int stride = 1);

}  // namespace qrbsde
