// Discretely and continuously reflected backward solves plus pathwise
// evaluation. The discrete scheme projects onto the obstacle only at
// partition dates; the continuous reference projects at every substep of the
// shared internal grid. Both run the same substep kernel, so a partition that
// coincides with the internal grid reproduces the reference bit-for-bit.
#pragma once

#include <cstdint>
#include <ostream>
#include <vector>

#include "qrbsde/forward.hpp"
#include "qrbsde/model.hpp"
#include "qrbsde/pde.hpp"

namespace qrbsde {

// Backward solution reflected at partition dates. `pre` holds the
// pre-reflection layer at every substep (index k owned by the interval
// (t_{i-1}, t_i] covering it; pre[S] is the terminal payoff layer). `post[i]`
// is the reflected function at date t_i.
struct DiscreteSolution {
    SubstepGrid gt;
    SpaceGrid gx;
    std::vector<double> pdates;
    std::vector<int> pidx;         // partition indices into the substep grid
    std::vector<int> date_of;      // substep index -> partition index or -1
    std::vector<Layer> pre;        // k = 0..S
    std::vector<std::vector<double>> post;  // i = 0..n
    std::vector<double> post_lipschitz;     // measured L_i of post[i]
    std::vector<double> max_z_interval;     // max |zmag|*|sigma| per interval, size n
    double max_abs_u = 0.0;
    int fixedpoint_warnings = 0;

    int n() const { return static_cast<int>(post.size()) - 1; }
    double value_at(int k, double x) const;   // post at dates, pre inside
    double jump_at_date(int i, double x) const;  // (post - pre)(t_i, x), i < n
};

// Reference solution: projection at every substep. `layers[k].u` is
// post-projection while `layers[k].zmag` is the gradient of the layer before
// the lift (the value computed on [t_k, t_{k+1}) owns that interval's z);
// `kinc[k]` is the nodewise projection increment applied at layer k (zero
// block when reflection is off).
struct ContinuousReference {
    SubstepGrid gt;
    SpaceGrid gx;
    std::vector<Layer> layers;              // k = 0..S
    std::vector<std::vector<double>> kinc;  // k = 0..S-1
    double max_abs_u = 0.0;
    int fixedpoint_warnings = 0;
};

DiscreteSolution solve_discrete(const Problem& prob, const SubstepGrid& gt,
                                const SpaceGrid& gx, const Partition& part);

ContinuousReference solve_continuous_reference(const Problem& prob,
                                               const SubstepGrid& gt,
                                               const SpaceGrid& gx);

// Pathwise processes, evaluated lazily per path. z entries carry the signed
// gradient component times |sigma(t)| (so differences equal |Zhat - Z|).
struct PathSeries {
    std::vector<double> y_d, z_d, k_d, y_r, z_r, k_r;  // each length S+1
};

class PathProcesses {
public:
    PathProcesses(const Problem& prob, const DiscreteSolution& disc,
                  const ContinuousReference& ref, const PathBatch& batch);

    int paths() const { return batch_->M; }
    int substeps() const { return batch_->grid.S; }
    bool excluded(int p) const { return excluded_[static_cast<std::size_t>(p)] != 0; }
    int valid_count() const { return valid_; }
    double exit_fraction() const {
        return batch_->M ? 1.0 - static_cast<double>(valid_) / batch_->M : 0.0;
    }
    const DiscreteSolution& disc() const { return *disc_; }
    const ContinuousReference& ref() const { return *ref_; }
    const PathBatch& batch() const { return *batch_; }
    const Problem& problem() const { return *prob_; }

    void series(int p, PathSeries& out) const;

private:
    const Problem* prob_;
    const DiscreteSolution* disc_;
    const ContinuousReference* ref_;
    const PathBatch* batch_;
    std::vector<std::uint8_t> excluded_;
    std::vector<double> signorm_;  // |sigma| per substep time, k = 0..S
    int valid_ = 0;
};

PathProcesses evaluate_along_paths(const Problem& prob, const DiscreteSolution& disc,
                                   const ContinuousReference& ref,
                                   const PathBatch& batch);

// Mean over valid paths of sum_k (Y_k - barrier(X_k))^+ dK_k on the
// reference processes.
double flatoff_residual(const PathProcesses& pp);

// CSV schema: path_id,time,y_disc,z_disc_mag,k_disc,y_ref,z_ref_mag,k_ref.
void write_processes_csv(std::ostream& os, const PathProcesses& pp,
                         int stride = 1, int max_paths = -1);

}  // namespace qrbsde
