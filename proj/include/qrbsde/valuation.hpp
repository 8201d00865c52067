// Exponential-utility valuation of the solved problem: indirect utility from
// the backward value, the exercise (contact) region of the reference
// solution, first-entry stopping times along simulated paths, and the
// induced trading strategy up to the stopping time.
#pragma once

#include <cstdint>
#include <ostream>
#include <vector>

#include "qrbsde/forward.hpp"
#include "qrbsde/model.hpp"
#include "qrbsde/reflected.hpp"

namespace qrbsde {

struct ValueResult {
    double value = 0.0;
    // |alpha (wealth + y)| exceeded 700, so the exponential under/overflowed;
    // the value is still returned (0- or -inf in the limit cases).
    bool saturated = false;
};

// -exp(-alpha (wealth + y)).
ValueResult value_function(double alpha, double wealth, double y);

// Contact set of the reference solution: node (k, j) is flagged when
// u(t_k, x_j) <= barrier(x_j) + contact_tol for k < S; every node is flagged
// at the terminal layer. When reflection is off, only the terminal layer is
// flagged. `first_entry[p]` is the first substep at which the interpolated
// value at the path state touches the barrier (S if only at the end); filled
// when a batch is supplied.
struct ExerciseRegion {
    double contact_tol = 0.0;
    std::vector<std::vector<std::uint8_t>> contact;  // [k][j], k = 0..S
    std::vector<int> first_entry;                    // per path, substep index
};

ExerciseRegion exercise_region(const ContinuousReference& ref, const Problem& prob,
                               double contact_tol,
                               const PathBatch* batch = nullptr);

// Strategy along one path: before the path's first entry, the constrained
// minimizer evaluated at z = du/dx(t_k, X_k) sigma(t_k); zero from the entry
// substep on; NaN where the minimizer is indeterminate. Requires the problem
// to carry a market specification and the region to carry first-entry times.
std::vector<double> strategy_path(const Problem& prob, const ContinuousReference& ref,
                                  const PathBatch& batch, const ExerciseRegion& region,
                                  int path);

// CSV schema: time,x,contact (one row per retained layer and node).
void write_region_csv(std::ostream& os, const ContinuousReference& ref,
                      const ExerciseRegion& region, int stride = 1);

// CSV schema: path_id,time,pi.
void write_strategy_csv(std::ostream& os, const Problem& prob,
                        const ContinuousReference& ref, const PathBatch& batch,
                        const ExerciseRegion& region, int stride = 1,
                        int max_paths = -1);

}  // namespace qrbsde
