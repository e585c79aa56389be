#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "mctd/baselines.hpp"
#include "mctd/maze.hpp"
#include "mctd/tree.hpp"

// Seed-averaged evaluation: planner registry, closed-loop episode runner with
// optional replanning, parallel grids and summary statistics.

namespace mctd {

enum class PlannerKind {
    Diffuser,
    DiffuserReplan,
    RandomSearch,
    DiffusionForcing,
    DfNoCausal,
    Mctd,
    MctdNoCausal,
    MctdReplan,
    Greedy,
};

PlannerKind planner_from_name(const std::string& name);
std::string planner_name(PlannerKind kind);

struct PlannerSetup {
    PlannerKind kind = PlannerKind::Mctd;
    SearchConfig search;
    BaselineConfig base;
    double df_scale = 2.0;
    int greedy_children = 5;
    int subgoal_stride = 10;
    int replan_interval = 50;  // used by the *_replan kinds and DF
    bool df_replans = true;    // Diffusion Forcing evaluates with replanning
};

struct ResultRow {
    std::string maze;
    std::string planner;
    int task = 0;
    std::uint64_t seed = 0;
    int success = 0;
    double reward = 0.0;  // evaluator reward of the returned plan
    double wall_seconds = 0.0;
    std::uint64_t denoiser_calls = 0;
    int search_iterations = 0;
    int early_stopped = 0;
};

ResultRow run_episode(const Maze& maze, const Task& task, int task_id,
                      const Denoiser& model, const PlannerSetup& setup,
                      std::uint64_t seed);

// All (task, seed) pairs, optionally across threads; row order is by
// (task, seed) regardless of jobs.
std::vector<ResultRow> run_many(const Maze& maze, const Denoiser& model,
                                const PlannerSetup& setup, int tasks,
                                const std::vector<std::uint64_t>& seeds, int jobs);

struct Summary {
    int runs = 0;
    double mean_success = 0.0;  // percentage points
    double std_success = 0.0;   // across seeds of per-seed task averages
    double mean_reward = 0.0;
    double mean_seconds = 0.0;
    double mean_calls = 0.0;
    double mean_iterations = 0.0;
};

Summary summarize(const std::vector<ResultRow>& rows);

void write_results_csv(const std::vector<ResultRow>& rows, const std::string& path,
                       const std::string& config_hash);
std::vector<ResultRow> read_results_csv(const std::string& path);

}  // namespace mctd
