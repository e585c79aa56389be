#include "mctd/sampler.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>

#include "mctd/kernels.hpp"

namespace mctd {

namespace {

// Tokens below this index are clamped conditioning (the start state).
constexpr int kClampedPrefix = 2;

// Scales the guidance covariance so meta-action scales in the paper-quoted
// ranges steer without tearing the sample off the prior manifold.
constexpr double kGuidanceUnit = 0.25;

int flat_chunk_level(const SubplanPartition& part, const BetaSchedule& schedule,
                     int chunk) {
    const int s = part.count();
    const int k = schedule.levels;
    const long long num = static_cast<long long>(k) * (s - chunk);
    return static_cast<int>((num + s / 2) / s);
}

}  // namespace

double guidance_value(const double* tokens, int count, int dim, double goal_x,
                      double goal_y) {
    if (dim < 2) {
        throw guidance_error("tokens need a 2-d position sub-vector");
    }
    double value = 0.0;
    for (int i = 0; i < count; ++i) {
        const double dx = tokens[static_cast<std::size_t>(i) * dim] - goal_x;
        const double dy = tokens[static_cast<std::size_t>(i) * dim + 1] - goal_y;
        value -= std::sqrt(dx * dx + dy * dy);
    }
    return value;
}

void guidance_gradient(const double* tokens, int count, int dim, double goal_x,
                       double goal_y, double* grad) {
    if (dim < 2) {
        throw guidance_error("tokens need a 2-d position sub-vector");
    }
    std::fill(grad, grad + static_cast<std::size_t>(count) * dim, 0.0);
    for (int i = 0; i < count; ++i) {
        const double dx = goal_x - tokens[static_cast<std::size_t>(i) * dim];
        const double dy = goal_y - tokens[static_cast<std::size_t>(i) * dim + 1];
        const double dist = std::sqrt(dx * dx + dy * dy);
        if (dist > 0.0) {
            grad[static_cast<std::size_t>(i) * dim] = dx / dist;
            grad[static_cast<std::size_t>(i) * dim + 1] = dy / dist;
        }
    }
}

void guided_epsilon(double* eps, const double* tokens, int count, int dim,
                    const GuidanceContext& ctx, const double* sigma) {
    if (!std::isfinite(ctx.scale)) {
        throw guidance_error("guidance scale must be finite");
    }
    if (ctx.scale == 0.0) {
        return;  // NO_GUIDE is exactly the unguided path
    }
    for (int i = 0; i < count; ++i) {
        const double dx = ctx.goal_x - tokens[static_cast<std::size_t>(i) * dim];
        const double dy = ctx.goal_y - tokens[static_cast<std::size_t>(i) * dim + 1];
        const double dist = std::sqrt(dx * dx + dy * dy);
        if (!std::isfinite(dist)) {
            throw guidance_error("non-finite guidance gradient");
        }
        if (dist == 0.0) {
            continue;
        }
        const double c = ctx.scale * sigma[i] / dist;
        eps[static_cast<std::size_t>(i) * dim] -= c * dx;
        eps[static_cast<std::size_t>(i) * dim + 1] -= c * dy;
    }
}

void ddim_step(double* x, const double* eps, int t_from, int t_to,
               const BetaSchedule& schedule, int count, int dim) {
    if (t_to >= t_from) {
        throw sampler_error("ddim step order: need t_to < t_from");
    }
    const double ab_from = schedule.alpha_bar(t_from);
    const double ab_to = schedule.alpha_bar(t_to);
    const double c1 = std::sqrt(ab_to / ab_from);
    const double c2 = std::sqrt(1.0 - ab_to) - c1 * std::sqrt(1.0 - ab_from);
    kernels::scale_mix(x, c1, x, c2, eps, static_cast<std::size_t>(count) * dim);
}

PlanState init_plan_state(const SubplanPartition& part, int dim,
                          const BetaSchedule& schedule, int stabilization,
                          const double* start_token, Rng& rng) {
    PlanState state;
    state.horizon = part.horizon;
    state.dim = dim;
    state.tokens.resize(static_cast<std::size_t>(part.horizon) * dim);
    state.level.assign(static_cast<std::size_t>(part.horizon), schedule.levels);
    const int stab = stabilization < schedule.levels ? stabilization : 0;
    // The clamped prefix is the start state at rest.
    for (int n = 0; n < kClampedPrefix && n < part.horizon; ++n) {
        for (int d = 0; d < dim; ++d) {
            state.token(n)[d] = start_token[d];
        }
        state.level[static_cast<std::size_t>(n)] = stab;
    }
    for (int n = kClampedPrefix; n < part.horizon; ++n) {
        double* tok = state.token(n);
        for (int d = 0; d < dim; ++d) {
            tok[d] = rng.gaussian();
        }
    }
    return state;
}

void resample_open_noise(PlanState& state, const BetaSchedule& schedule, Rng& rng) {
    for (int n = kClampedPrefix; n < state.horizon; ++n) {
        if (state.level[static_cast<std::size_t>(n)] == schedule.levels) {
            double* tok = state.token(n);
            for (int d = 0; d < state.dim; ++d) {
                tok[d] = rng.gaussian();
            }
        }
    }
}

void predict_x0_range(const PlanState& state, int begin, int end,
                      const DenoiseContext& ctx, double* out) {
    const Denoiser& model = *ctx.model;
    const int f = model.arch().frame_stack;
    const int d = model.arch().token_dim;
    if (state.dim != d) {
        throw model_error("plan state dim does not match model token dim");
    }
    if (state.horizon < f) {
        throw model_error("plan horizon shorter than the model window");
    }
    // Dense overlap: every token averages several window hypotheses, which
    // suppresses seam discontinuities at window boundaries.
    const int stride = std::max(1, f / 4);
    const int last_start = state.horizon - f;

    const int range = end - begin;
    std::vector<double> sum(static_cast<std::size_t>(range) * d, 0.0);
    std::vector<double> hits(static_cast<std::size_t>(range), 0.0);
    std::vector<double> pred(static_cast<std::size_t>(f) * d);
    DenoiserWorkspace ws = model.make_workspace();

    double goal[2] = {ctx.goal_x, ctx.goal_y};
    const double* goal_ptr = model.arch().goal_dim > 0 ? goal : nullptr;

    if (ctx.counter) {
        ctx.counter->step_calls += 1;
    }
    // Triangular blend weights: a window speaks loudest about its center, so
    // overlapping hypotheses hand off smoothly.
    auto run_window = [&](int w) {
        model.predict_x0(state.tokens.data() + static_cast<std::size_t>(w) * d,
                         state.level.data() + w, goal_ptr, pred.data(), ws);
        if (ctx.counter) {
            ctx.counter->window_calls += 1;
        }
        const int lo = std::max(w, begin);
        const int hi = std::min(w + f, end);
        for (int n = lo; n < hi; ++n) {
            const int off = n - w;
            const double weight = static_cast<double>(std::min(off + 1, f - off));
            kernels::axpy(sum.data() + static_cast<std::size_t>(n - begin) * d, weight,
                          pred.data() + static_cast<std::size_t>(off) * d,
                          static_cast<std::size_t>(d));
            hits[static_cast<std::size_t>(n - begin)] += weight;
        }
    };

    int first = begin - f + 1;
    if (first < 0) {
        first = 0;
    }
    first = (first + stride - 1) / stride * stride;
    bool covered_last = false;
    for (int w = first; w <= last_start && w < end; w += stride) {
        run_window(w);
        covered_last = covered_last || w == last_start;
    }
    if (!covered_last && end > last_start) {
        run_window(last_start);
    }

    for (int n = 0; n < range; ++n) {
        const double inv = 1.0 / hits[static_cast<std::size_t>(n)];
        for (int c = 0; c < d; ++c) {
            out[static_cast<std::size_t>(n) * d + c] =
                sum[static_cast<std::size_t>(n) * d + c] * inv;
        }
    }
}

namespace {

// One guided DDIM step for tokens [begin, end): predict, convert to implied
// noise, shift by guidance, update. scale_for(token) supplies the per-token
// guidance scale.
template <typename ScaleFn>
void guided_range_step(PlanState& state, int begin, int end, int from, int to,
                       const DenoiseContext& ctx, ScaleFn scale_for) {
    const int d = state.dim;
    const int count = end - begin;
    const BetaSchedule& sched = ctx.model->schedule();

    std::vector<double> x0hat(static_cast<std::size_t>(count) * d);
    predict_x0_range(state, begin, end, ctx, x0hat.data());

    std::vector<double> eps(static_cast<std::size_t>(count) * d);
    std::vector<int> levels(static_cast<std::size_t>(count), from);
    epsilon_from_x0(state.tokens.data() + static_cast<std::size_t>(begin) * d,
                    x0hat.data(), levels.data(), sched, eps.data(), count, d);

    // Guidance covariance factor: the per-step beta at this level, calibrated
    // so a unit guidance scale nudges rather than overwhelms the prior. The
    // epsilon-to-sample amplification at high noise makes (1 - alpha_bar)
    // overwhelm the model by orders of magnitude.
    const double sigma = kGuidanceUnit * sched.betas[static_cast<std::size_t>(from) - 1];
    std::vector<double> sigmas;
    GuidanceContext gctx;
    gctx.goal_x = ctx.goal_x;
    gctx.goal_y = ctx.goal_y;
    int seg = begin;
    while (seg < end) {
        const int sp = ctx.part->subplan_of(seg);
        const int seg_end = std::min(end, ctx.part->end(sp));
        gctx.scale = scale_for(sp);
        if (gctx.scale != 0.0) {
            sigmas.assign(static_cast<std::size_t>(seg_end - seg), sigma);
            guided_epsilon(eps.data() + static_cast<std::size_t>(seg - begin) * d,
                           x0hat.data() + static_cast<std::size_t>(seg - begin) * d,
                           seg_end - seg, d, gctx, sigmas.data());
        }
        seg = seg_end;
    }

    ddim_step(state.tokens.data() + static_cast<std::size_t>(begin) * d, eps.data(),
              from, to, sched, count, d);
    for (int n = begin; n < end; ++n) {
        state.level[static_cast<std::size_t>(n)] = to;
    }
}

void restore_clamped(PlanState& state, const PlanState& reference) {
    for (int n = 0; n < kClampedPrefix; ++n) {
        std::memcpy(state.token(n), reference.token(n),
                    static_cast<std::size_t>(state.dim) * sizeof(double));
        state.level[static_cast<std::size_t>(n)] =
            reference.level[static_cast<std::size_t>(n)];
    }
}

}  // namespace

void denoise_subplan(PlanState& state, int subplan, double guidance_scale,
                     const DenoiseContext& ctx) {
    const SubplanPartition& part = *ctx.part;
    const BetaSchedule& sched = ctx.model->schedule();
    if (subplan < 0 || subplan >= part.count()) {
        throw sampler_error("subplan index out of range");
    }
    if (subplan != state.committed) {
        throw sampler_error("tree contract: subplan " + std::to_string(subplan) +
                            " is not the next expandable subplan");
    }
    const PlanState clamped = state;  // keeps the conditioning prefix verbatim

    if (ctx.causal) {
        const int begin = part.begin(subplan);
        const int end = part.end(subplan);
        const std::vector<int> levels =
            expansion_step_levels(sched.levels, ctx.steps_per_expansion, ctx.stabilization);
        for (std::size_t j = 0; j + 1 < levels.size(); ++j) {
            guided_range_step(state, begin, end, levels[j], levels[j + 1], ctx,
                              [&](int) { return guidance_scale; });
            restore_clamped(state, clamped);
        }
        // Committed: values fully denoised, conditioning held at stabilization.
        const int stab = ctx.stabilization < sched.levels ? ctx.stabilization : 0;
        for (int n = begin; n < end; ++n) {
            state.level[static_cast<std::size_t>(n)] = stab;
        }
    } else {
        // Flat schedule: the whole trajectory advances through chunk s.
        const int from_level = flat_chunk_level(part, sched, subplan);
        const int to_level = flat_chunk_level(part, sched, subplan + 1);
        int level = from_level;
        while (level > to_level) {
            const int next = std::max(to_level, level - ctx.steps_per_expansion);
            guided_range_step(state, 0, state.horizon, level, next, ctx,
                              [&](int) { return guidance_scale; });
            restore_clamped(state, clamped);
            level = next;
        }
    }
    restore_clamped(state, clamped);
    state.committed = subplan + 1;
}

Trajectory jumpy_denoise(const PlanState& state, int skip_interval,
                         const GuidanceSchedule& guidance, const DenoiseContext& ctx) {
    const SubplanPartition& part = *ctx.part;
    if (guidance.count() != 0 && guidance.count() != part.count()) {
        throw sampler_error("guidance schedule length does not match subplan count");
    }
    auto scale_for = [&](int sp) {
        return guidance.count() == 0 ? 0.0 : guidance.scale(sp);
    };

    PlanState work = state;
    const int first_open =
        ctx.causal ? std::max(kClampedPrefix, part.boundaries[static_cast<std::size_t>(
                                  state.committed)])
                   : kClampedPrefix;

    Trajectory out(state.horizon, state.dim);
    if (first_open >= state.horizon) {
        std::copy(work.tokens.begin(), work.tokens.end(), out.data.begin());
        return out;
    }

    const int from_level = work.level[static_cast<std::size_t>(first_open)];
    if (from_level > 0) {
        const std::vector<int> levels = jumpy_step_levels(from_level, skip_interval);
        const PlanState clamped = work;
        for (std::size_t j = 0; j + 1 < levels.size(); ++j) {
            guided_range_step(work, first_open, state.horizon, levels[j], levels[j + 1],
                              ctx, scale_for);
            restore_clamped(work, clamped);
        }
    }
    std::copy(work.tokens.begin(), work.tokens.end(), out.data.begin());
    return out;
}

}  // namespace mctd
