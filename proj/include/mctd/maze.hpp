#pragma once

#include <cmath>
#include <cstdint>
#include <functional>
#include <stdexcept>
#include <string>
#include <vector>

#include "mctd/rng.hpp"
#include "mctd/trajectory.hpp"

// Synthetic point-mass maze worlds: grid definitions, double-integrator
// dynamics, the heuristic PD controller, offline dataset generation, plan
// scoring and closed-loop execution.

namespace mctd {

struct maze_error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct Cell {
    int row = 0;
    int col = 0;

    bool operator==(const Cell&) const = default;
};

// Controller and dynamics constants, tuned once and frozen.
inline constexpr double kControllerKp = 1.0;
inline constexpr double kControllerKd = 0.5;
inline constexpr double kActionClamp = 0.5;

struct PointState {
    double px = 0.0;
    double py = 0.0;
    double vx = 0.0;
    double vy = 0.0;
};

struct Maze {
    std::string name;
    int rows = 0;
    int cols = 0;
    std::vector<std::uint8_t> walls;  // row-major, 1 = wall
    Cell start;
    Cell goal;
    int horizon = 500;         // episode length H in env steps
    double goal_radius = 0.5;  // cells
    double v_max = 1.0;        // cells/step
    double penalty_weight = 0.1;
    int plan_horizon = 0;  // planner token count N; 0 = unset

    bool wall(int row, int col) const {
        if (row < 0 || row >= rows || col < 0 || col >= cols) {
            return true;
        }
        return walls[static_cast<std::size_t>(row) * cols + col] != 0;
    }
    bool wall_at(double x, double y) const {
        return wall(static_cast<int>(std::floor(y)), static_cast<int>(std::floor(x)));
    }
    static double center_x(const Cell& c) { return c.col + 0.5; }
    static double center_y(const Cell& c) { return c.row + 0.5; }

    // BFS distance (4-connected, free cells) from `from` to every cell;
    // -1 where unreachable.
    std::vector<int> bfs_distances(const Cell& from) const;
    std::vector<Cell> shortest_path(const Cell& from, const Cell& to) const;
    std::vector<Cell> free_cells_reachable_from_start() const;
};

// Parses the ASCII maze format: key=value header lines followed by a
// rectangular grid of '#' (wall), '.' (free), 'S' (start), 'G' (goal).
Maze parse_maze(const std::string& text, const std::string& name = "maze");
Maze load_maze(const std::string& path);

// Double-integrator step: clamped acceleration, clamped speed, axis-separable
// wall collision that zeroes the blocked velocity component.
PointState step(const PointState& state, double ax, double ay, const Maze& maze);

// PD law toward the subgoal position, clamped to the action limit.
void heuristic_controller(const PointState& state, double subgoal_x, double subgoal_y,
                          double& ax, double& ay);

struct Normalization {
    std::vector<double> mean;
    std::vector<double> stddev;

    void normalize_token(double* token, int dim) const;
    void denormalize_token(double* token, int dim) const;
    Trajectory normalize(const Trajectory& t) const;
    Trajectory denormalize(const Trajectory& t) const;
};

struct Dataset {
    std::string maze_name;
    std::uint64_t maze_hash = 0;
    int dim = 4;
    int horizon = 0;  // window length of the stored trajectories
    int episodes = 0;
    std::uint64_t seed = 0;
    Normalization norm;
    std::vector<Trajectory> trajectories;
};

std::uint64_t maze_hash(const Maze& maze);

// Goal-agnostic exploration data: waypoint-hopping episodes of maze.horizon
// steps, then cut into window-length trajectories with the given stride.
// window 0 keeps whole episodes.
Dataset generate_dataset(const Maze& maze, int episodes, Rng rng, int window = 0,
                         int stride = 0);

void save_dataset(const Dataset& dataset, const std::string& path);
Dataset load_dataset(const std::string& path);

struct PlanEval {
    double reward = 0.0;
    double goal_term = 0.0;
    int infeasible_jumps = 0;
    int wall_states = 0;
    bool reached = false;
    int reach_index = -1;

    int violations() const { return infeasible_jumps + wall_states; }
    bool clean_success() const { return reached && violations() == 0; }
};

// Reward = goal term (H - t*)/H minus penalty_weight per infeasible jump or
// wall-interior state, clipped to [-1, 1].
PlanEval evaluate_plan_detail(const Trajectory& plan, const Maze& maze);
double evaluate_plan(const Trajectory& plan, const Maze& maze);

struct EpisodeOutcome {
    bool success = false;
    int steps = 0;
    double final_distance = 0.0;
    std::vector<PointState> executed;
};

// Invoked as replanner(current_state, env_step) -> fresh plan.
using Replanner = std::function<Trajectory(const PointState&, int)>;

// Closed-loop execution: the controller chases the plan state k steps ahead,
// advancing the subgoal when reached; an optional replanner is invoked every
// replan_interval env steps.
EpisodeOutcome execute_plan(const Maze& maze, const Trajectory& plan, int subgoal_stride,
                            const Replanner& replanner = nullptr, int replan_interval = 0);

struct Task {
    Cell start;
    Cell goal;
};

// Deterministic start/goal pairs: task 0 is the maze's own pair, the rest are
// sampled far-apart free cells (stable across runs for a given maze).
std::vector<Task> derive_tasks(const Maze& maze, int count);

}  // namespace mctd
