#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

// Trajectory containers, subplan partitions, diffusion noise schedules and the
// causal scheduling grid shared by the samplers and the planners.

namespace mctd {

struct trajectory_error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// A horizon-length sequence of D-dimensional state tokens, row-major
// [token * dim + d]. Positions are in maze cells, velocities in cells/step.
struct Trajectory {
    int horizon = 0;
    int dim = 0;
    std::vector<double> data;

    Trajectory() = default;
    Trajectory(int horizon_, int dim_)
        : horizon(horizon_), dim(dim_), data(static_cast<std::size_t>(horizon_) * dim_, 0.0) {}

    double* token(int n) { return data.data() + static_cast<std::size_t>(n) * dim; }
    const double* token(int n) const { return data.data() + static_cast<std::size_t>(n) * dim; }
};

// S contiguous, non-empty chunks covering [0, N) exactly.
struct SubplanPartition {
    int horizon = 0;
    std::vector<int> boundaries;  // S+1 entries, 0 = first, N = last

    int count() const { return static_cast<int>(boundaries.size()) - 1; }
    int begin(int s) const { return boundaries[s]; }
    int end(int s) const { return boundaries[s + 1]; }
    int size(int s) const { return end(s) - begin(s); }

    // Subplan owning token n.
    int subplan_of(int n) const;
};

// Balanced partition: chunk sizes differ by at most one, larger chunks first.
SubplanPartition partition(int horizon, int subplans);

enum class BetaKind { Linear, Cosine };

// Diffusion schedule over K levels. Level 0 is clean data; level K is maximal
// noise. alpha_bars has K+1 entries with alpha_bars[0] == 1 and
// alpha_bars[k] = prod_{j<k} (1 - betas[j]).
struct BetaSchedule {
    BetaKind kind = BetaKind::Linear;
    int levels = 0;  // K
    double beta_min = 0.0;
    double beta_max = 0.0;
    std::vector<double> betas;       // K entries in (0, 1)
    std::vector<double> alpha_bars;  // K+1 entries, strictly decreasing

    double alpha_bar(int level) const {
        if (level < 0 || level > levels) {
            throw trajectory_error("noise level out of range: " + std::to_string(level));
        }
        return alpha_bars[static_cast<std::size_t>(level)];
    }
};

BetaSchedule build_beta_schedule(BetaKind kind, int levels, double beta_min = 1e-4,
                                 double beta_max = 0.02);

// Per-round, per-subplan noise indices realizing the causal staircase: the
// active subplan descends by steps_per_expansion indices per row while earlier
// subplans are held at the stabilization level and later ones stay at K.
struct NoiseLevelGrid {
    int subplans = 0;
    int levels = 0;         // K
    int stabilization = 0;  // committed subplans are conditioned at this index
    std::vector<int> entries;  // rows x subplans, row-major

    int rows() const {
        return subplans == 0 ? 0 : static_cast<int>(entries.size()) / subplans;
    }
    int at(int row, int subplan) const {
        return entries[static_cast<std::size_t>(row) * subplans + subplan];
    }
};

// stabilization_level >= levels collapses to 0 (no room to stabilize).
NoiseLevelGrid build_pyramid_grid(int subplans, int levels, int steps_per_expansion,
                                  int stabilization_level = 10);

// DDIM step list for one subplan expansion: levels from K down to the grid's
// stabilization level, decrementing by steps_per_expansion, then a final step
// to 0 that commits the subplan (conditioning stays at the stabilization
// level; see sampler).
std::vector<int> expansion_step_levels(int levels, int steps_per_expansion,
                                       int stabilization_level);

// Jumpy completion step list: {from, from-C, from-2C, ..., 0}.
std::vector<int> jumpy_step_levels(int from_level, int skip_interval);

// One guidance scale per subplan; scale 0 is the NO_GUIDE meta-action.
struct GuidanceSchedule {
    std::vector<double> scales;

    int count() const { return static_cast<int>(scales.size()); }
    double scale(int s) const { return scales[static_cast<std::size_t>(s)]; }
};

}  // namespace mctd
