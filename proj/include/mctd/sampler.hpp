#pragma once

#include <stdexcept>
#include <vector>

#include "mctd/denoiser.hpp"
#include "mctd/rng.hpp"
#include "mctd/trajectory.hpp"

// Guided DDIM machinery: guidance values and gradients, the skip-step DDIM
// update, per-subplan partial denoising under the causal schedule, and jumpy
// completion. Everything here operates in the model's normalized token space
// with eta = 0, so randomness enters only through a plan state's initial
// noise.

namespace mctd {

struct guidance_error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct sampler_error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Goal and strength for classifier-style guidance; scale 0 must leave the
// sampling path bit-identical to the unguided one.
struct GuidanceContext {
    double goal_x = 0.0;
    double goal_y = 0.0;
    double scale = 0.0;
};

// J = -sum_i ||pos_i - goal||, computed over the first two dims of each token.
// Zero iff every position sits on the goal.
double guidance_value(const double* tokens, int count, int dim, double goal_x,
                      double goal_y);

// dJ/d(pos_i) = (goal - pos_i)/||goal - pos_i||, zero at the goal itself and
// on non-position dims.
void guidance_gradient(const double* tokens, int count, int dim, double goal_x,
                       double goal_y, double* grad);

// eps <- eps - scale * sigma_i * dJ/d(token_i), the eta=0 mean of the guided
// noise. sigma is one covariance factor per token (we use 1 - alpha_bar_t).
void guided_epsilon(double* eps, const double* tokens, int count, int dim,
                    const GuidanceContext& ctx, const double* sigma);

// x_{t'} = sqrt(ab_t'/ab_t) (x_t - sqrt(1-ab_t) eps) + sqrt(1-ab_t') eps,
// elementwise over count*dim values. Requires t_to < t_from.
void ddim_step(double* x, const double* eps, int t_from, int t_to,
               const BetaSchedule& schedule, int count, int dim);

// A partially denoised plan: normalized tokens plus the per-token noise index
// the model conditions on. Committed tokens hold fully denoised values and are
// conditioned at the stabilization level.
struct PlanState {
    int horizon = 0;
    int dim = 0;
    std::vector<double> tokens;
    std::vector<int> level;
    int committed = 0;  // committed subplans (causal) or finished chunks (flat)

    double* token(int n) { return tokens.data() + static_cast<std::size_t>(n) * dim; }
    const double* token(int n) const {
        return tokens.data() + static_cast<std::size_t>(n) * dim;
    }
};

// Everything the sampling ops share for one planning problem.
struct DenoiseContext {
    const Denoiser* model = nullptr;
    const SubplanPartition* part = nullptr;
    int steps_per_expansion = 10;  // noise-index decrement per DDIM call
    int stabilization = 10;
    bool causal = true;
    double goal_x = 0.0;  // normalized goal, consumed by guidance
    double goal_y = 0.0;
    CallCounter* counter = nullptr;  // optional
};

// Fresh plan state: gaussian tokens at level K, with token 0 clamped to the
// (normalized) start state and conditioned at the stabilization level.
PlanState init_plan_state(const SubplanPartition& part, int dim,
                          const BetaSchedule& schedule, int stabilization,
                          const double* start_token, Rng& rng);

// Redraws the initial noise of every still-maximal-noise token. Used to give
// each root child an independent starting noise.
void resample_open_noise(PlanState& state, const BetaSchedule& schedule, Rng& rng);

// Overlap-averaged sliding-window x0 prediction for tokens [begin, end).
void predict_x0_range(const PlanState& state, int begin, int end,
                      const DenoiseContext& ctx, double* out);

// Expands one subplan: walks it from max noise to the stabilization level in
// steps_per_expansion-index DDIM decrements under the given guidance scale,
// then commits it (values fully denoised, conditioning held at the
// stabilization level). In non-causal mode the same call advances the whole
// trajectory through chunk `subplan` of a flat schedule instead.
void denoise_subplan(PlanState& state, int subplan, double guidance_scale,
                     const DenoiseContext& ctx);

// Completes all remaining tokens to level 0 with skip-interval DDIM steps and
// per-subplan guidance; committed tokens are preserved verbatim. Returns the
// full (still normalized) trajectory.
Trajectory jumpy_denoise(const PlanState& state, int skip_interval,
                         const GuidanceSchedule& guidance, const DenoiseContext& ctx);

}  // namespace mctd
