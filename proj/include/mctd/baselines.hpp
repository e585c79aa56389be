#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "mctd/tree.hpp"

// Comparison planners sharing the denoiser, sampler and evaluator: one-shot
// Diffuser, Diffuser random search, the Diffusion-Forcing-style causal planner
// and the causal/tree factorial switches. Replanning variants are built by the
// experiment harness around execute_plan.

namespace mctd {

enum class BaselineVariant {
    Oneshot,
    Replanning,
    RandomSearch,
    DiffusionForcing,
    MctdNoCausal,
    DfNoCausal,
};

struct BaselineConfig {
    BaselineVariant variant = BaselineVariant::Oneshot;
    double guidance_scale = 0.1;  // single lambda
    std::vector<double> scale_set = {0.01, 0.05, 0.1, 0.2, 0.3};
    int samples = 16;          // M for random search
    int replan_interval = 50;  // open-loop horizon
    int oneshot_interval = 2;  // skip interval of the flat one-pass schedule
    std::uint64_t max_denoiser_steps = 0;
};

// Single flat pass over all tokens from max to zero noise with guidance
// lambda applied at every step.
PlanResult diffuser_oneshot(const PlanningProblem& problem, double lambda,
                            int oneshot_interval, std::uint64_t seed);

// Sample-score-rank: M independent one-shot samples, each with a scale drawn
// uniformly from the set; returns the evaluator argmax (ties by first index).
PlanResult random_search(const PlanningProblem& problem, const BaselineConfig& config,
                         std::uint64_t seed);

// The causal pyramid schedule with a fixed guidance scale and no branching:
// exactly mctd_plan with a singleton guidance set and max_iterations = S.
PlanResult diffusion_forcing_plan(const PlanningProblem& problem, double lambda,
                                  const SearchConfig& base, std::uint64_t seed);

// Factorial switches of §causal-denoising x tree-search. causal=false swaps
// the pyramid grid for a flat all-tokens schedule; tree=false removes
// branching (diffusion-forcing behavior).
struct AblationPlanner {
    bool tree = true;
    SearchConfig config;
};

AblationPlanner ablation_variant(const SearchConfig& base, bool causal, bool tree);

}  // namespace mctd
