#pragma once

#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include "mctd/denoiser.hpp"
#include "mctd/maze.hpp"
#include "mctd/sampler.hpp"
#include "mctd/trajectory.hpp"

// The four-step MCTD search: UCT selection over partially denoised nodes,
// meta-action expansion, jumpy simulation, backpropagation and early
// termination, plus the greedy-search ablation variant.

namespace mctd {

struct search_error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct SearchConfig {
    std::vector<double> guidance_set = {0.0, 0.1, 0.5, 1.0, 2.0};
    int max_iterations = 500;
    double uct_weight = 1.4142135623730951;
    int children_per_node = 0;  // 0 means one child per guidance value
    int jump_interval = 10;     // C
    int steps_per_expansion = 10;
    int stabilization = 10;
    int subplans = 5;
    double early_stop_threshold = 0.0;  // minimum reward of a clean success
    bool causal = true;
    std::uint64_t max_denoiser_steps = 0;  // budget in predict passes; 0 = off

    int branching() const {
        const int g = static_cast<int>(guidance_set.size());
        return children_per_node > 0 && children_per_node < g ? children_per_node : g;
    }
};

struct TreeNode {
    int id = 0;
    int depth = 0;  // committed subplans along this path
    int meta_index = -1;
    double meta_action = 0.0;
    int visit_count = 0;
    double value_sum = 0.0;
    TreeNode* parent = nullptr;
    std::vector<std::unique_ptr<TreeNode>> children;
    PlanState plan;

    double value_mean() const { return visit_count > 0 ? value_sum / visit_count : 0.0; }
};

// v_i + W sqrt(ln N / n_i); unvisited children sort first (+inf).
double uct_score(double value_mean, int child_visits, int parent_visits, double weight);

// UCT-greedy descent to the first expandable node or terminal leaf; performs
// no denoising. Ties break toward the lowest child index.
TreeNode* select_node(TreeNode* root, const SearchConfig& config);

// Planning problem with the task's start/goal substituted and everything the
// samplers need (normalized start token and goal).
struct PlanningProblem {
    Maze maze;
    const Denoiser* model = nullptr;
    SubplanPartition part;
    int plan_horizon = 0;
    std::vector<double> start_token;  // normalized
    double goal_x = 0.0;              // normalized goal position
    double goal_y = 0.0;
};

PlanningProblem make_problem(const Maze& maze, const Task& task, const Denoiser& model,
                             int subplans, int plan_horizon = 0);

struct TraceRow {
    int iteration = 0;
    int node_id = 0;
    int depth = 0;
    double meta_action = 0.0;
    double reward = 0.0;
    std::string path;  // meta-action indices from the root, '/'-separated
};

struct PlanResult {
    Trajectory plan;  // world space
    double reward = 0.0;
    PlanEval eval;
    int iterations = 0;
    bool early_stopped = false;
    int best_iteration = 0;
    CallCounter calls;
    std::vector<TraceRow> trace;
    std::shared_ptr<TreeNode> tree;  // search tree, kept for inspection/plots
};

// Up to max_iterations select/expand/simulate/backpropagate rounds, stopping
// early on the first clean success at or above the threshold. Returns the
// best simulated plan (ties by earliest discovery) and the search trace.
PlanResult mctd_plan(const PlanningProblem& problem, const SearchConfig& config,
                     std::uint64_t seed);

// Greedy ablation: at each depth keeps only the best of children_per_branch
// simulated candidates; no backtracking.
PlanResult greedy_tree_plan(const PlanningProblem& problem, const SearchConfig& config,
                            int children_per_branch, std::uint64_t seed);

void write_trace_csv(const std::vector<TraceRow>& trace, const std::string& path);

}  // namespace mctd
