#include "mctd/baselines.hpp"

#include <limits>

namespace mctd {

PlanResult diffuser_oneshot(const PlanningProblem& problem, double lambda,
                            int oneshot_interval, std::uint64_t seed) {
    PlanResult result;
    DenoiseContext ctx;
    ctx.model = problem.model;
    ctx.part = &problem.part;
    ctx.causal = true;
    ctx.goal_x = problem.goal_x;
    ctx.goal_y = problem.goal_y;
    ctx.counter = &result.calls;

    Rng rng(derive_seed(seed, 0x6f6e65ull));
    PlanState state = init_plan_state(problem.part, problem.model->arch().token_dim,
                                      problem.model->schedule(), 0,
                                      problem.start_token.data(), rng);
    GuidanceSchedule sched;
    sched.scales.assign(static_cast<std::size_t>(problem.part.count()), lambda);
    const Trajectory plan_norm = jumpy_denoise(state, oneshot_interval, sched, ctx);
    result.plan = problem.model->norm().denormalize(plan_norm);
    result.eval = evaluate_plan_detail(result.plan, problem.maze);
    result.reward = result.eval.reward;
    result.iterations = 1;
    result.best_iteration = 1;
    return result;
}

PlanResult random_search(const PlanningProblem& problem, const BaselineConfig& config,
                         std::uint64_t seed) {
    if (config.samples < 1) {
        throw search_error("random search needs M >= 1");
    }
    if (config.scale_set.empty()) {
        throw search_error("random search needs a non-empty scale set");
    }
    PlanResult best;
    best.reward = -std::numeric_limits<double>::infinity();
    std::vector<TraceRow> trace;
    CallCounter calls;
    int ran = 0;
    for (int i = 0; i < config.samples; ++i) {
        if (config.max_denoiser_steps > 0 && calls.step_calls >= config.max_denoiser_steps) {
            break;
        }
        Rng pick(derive_seed(seed, 0x7273ull, static_cast<std::uint64_t>(i)));
        const double lambda =
            config.scale_set[pick.uniform_index(config.scale_set.size())];
        PlanResult sample = diffuser_oneshot(problem, lambda, config.oneshot_interval,
                                             derive_seed(seed, 0x73616d70ull,
                                                         static_cast<std::uint64_t>(i)));
        calls.step_calls += sample.calls.step_calls;
        calls.window_calls += sample.calls.window_calls;
        ++ran;
        trace.push_back({i + 1, i, 0, lambda, sample.reward, ""});
        if (sample.reward > best.reward) {
            const int kept = i + 1;
            best = std::move(sample);
            best.best_iteration = kept;
        }
    }
    best.calls = calls;
    best.iterations = ran;
    best.trace = std::move(trace);
    return best;
}

PlanResult diffusion_forcing_plan(const PlanningProblem& problem, double lambda,
                                  const SearchConfig& base, std::uint64_t seed) {
    SearchConfig config = base;
    config.guidance_set = {lambda};
    config.max_iterations = config.subplans;
    return mctd_plan(problem, config, seed);
}

AblationPlanner ablation_variant(const SearchConfig& base, bool causal, bool tree) {
    AblationPlanner planner;
    planner.tree = tree;
    planner.config = base;
    planner.config.causal = causal;
    if (!tree) {
        planner.config.max_iterations = base.subplans;
    }
    return planner;
}

}  // namespace mctd
