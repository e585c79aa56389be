#include "mctd/maze.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <deque>
#include <fstream>
#include <sstream>

namespace mctd {

namespace {

constexpr double kWallEps = 1e-6;

double clamp_norm2(double& x, double& y, double limit) {
    const double n = std::sqrt(x * x + y * y);
    if (n > limit && n > 0.0) {
        const double s = limit / n;
        x *= s;
        y *= s;
    }
    return n;
}

bool grid_line(const std::string& line) {
    if (line.empty()) {
        return false;
    }
    for (char c : line) {
        if (c != '#' && c != '.' && c != 'S' && c != 'G') {
            return false;
        }
    }
    return true;
}

}  // namespace

std::vector<int> Maze::bfs_distances(const Cell& from) const {
    std::vector<int> dist(static_cast<std::size_t>(rows) * cols, -1);
    if (wall(from.row, from.col)) {
        return dist;
    }
    std::deque<Cell> queue;
    dist[static_cast<std::size_t>(from.row) * cols + from.col] = 0;
    queue.push_back(from);
    const int dr[4] = {1, -1, 0, 0};
    const int dc[4] = {0, 0, 1, -1};
    while (!queue.empty()) {
        const Cell c = queue.front();
        queue.pop_front();
        const int d = dist[static_cast<std::size_t>(c.row) * cols + c.col];
        for (int k = 0; k < 4; ++k) {
            const int nr = c.row + dr[k];
            const int nc = c.col + dc[k];
            if (wall(nr, nc)) {
                continue;
            }
            int& slot = dist[static_cast<std::size_t>(nr) * cols + nc];
            if (slot < 0) {
                slot = d + 1;
                queue.push_back({nr, nc});
            }
        }
    }
    return dist;
}

std::vector<Cell> Maze::shortest_path(const Cell& from, const Cell& to) const {
    const std::vector<int> dist = bfs_distances(to);
    if (dist[static_cast<std::size_t>(from.row) * cols + from.col] < 0) {
        return {};
    }
    std::vector<Cell> path;
    Cell cur = from;
    path.push_back(cur);
    const int dr[4] = {1, -1, 0, 0};
    const int dc[4] = {0, 0, 1, -1};
    while (!(cur == to)) {
        const int d = dist[static_cast<std::size_t>(cur.row) * cols + cur.col];
        for (int k = 0; k < 4; ++k) {
            const int nr = cur.row + dr[k];
            const int nc = cur.col + dc[k];
            if (!wall(nr, nc) && dist[static_cast<std::size_t>(nr) * cols + nc] == d - 1) {
                cur = {nr, nc};
                break;
            }
        }
        path.push_back(cur);
    }
    return path;
}

std::vector<Cell> Maze::free_cells_reachable_from_start() const {
    const std::vector<int> dist = bfs_distances(start);
    std::vector<Cell> cells;
    for (int r = 0; r < rows; ++r) {
        for (int c = 0; c < cols; ++c) {
            if (dist[static_cast<std::size_t>(r) * cols + c] >= 0) {
                cells.push_back({r, c});
            }
        }
    }
    return cells;
}

Maze parse_maze(const std::string& text, const std::string& name) {
    Maze maze;
    maze.name = name;
    std::istringstream in(text);
    std::string line;
    std::vector<std::string> grid;
    int line_no = 0;
    bool have_start = false;
    bool have_goal = false;
    while (std::getline(in, line)) {
        ++line_no;
        while (!line.empty() && (line.back() == '\r' || line.back() == ' ')) {
            line.pop_back();
        }
        if (line.empty()) {
            continue;
        }
        if (grid_line(line)) {
            grid.push_back(line);
            continue;
        }
        const auto eq = line.find('=');
        if (eq == std::string::npos) {
            throw maze_error("maze line " + std::to_string(line_no) +
                             ": neither header key=value nor grid row: '" + line + "'");
        }
        if (!grid.empty()) {
            throw maze_error("maze line " + std::to_string(line_no) +
                             ": header after grid rows");
        }
        const std::string key = line.substr(0, eq);
        const std::string value = line.substr(eq + 1);
        try {
            if (key == "horizon") {
                maze.horizon = std::stoi(value);
            } else if (key == "goal_radius") {
                maze.goal_radius = std::stod(value);
            } else if (key == "v_max") {
                maze.v_max = std::stod(value);
            } else if (key == "penalty_weight") {
                maze.penalty_weight = std::stod(value);
            } else if (key == "plan_horizon") {
                maze.plan_horizon = std::stoi(value);
            } else {
                throw maze_error("maze line " + std::to_string(line_no) +
                                 ": unknown header key '" + key + "'");
            }
        } catch (const maze_error&) {
            throw;
        } catch (const std::exception&) {
            throw maze_error("maze line " + std::to_string(line_no) + ": bad value for '" +
                             key + "'");
        }
    }
    if (grid.empty()) {
        throw maze_error("maze has no grid rows");
    }
    maze.rows = static_cast<int>(grid.size());
    maze.cols = static_cast<int>(grid[0].size());
    maze.walls.assign(static_cast<std::size_t>(maze.rows) * maze.cols, 0);
    for (int r = 0; r < maze.rows; ++r) {
        if (static_cast<int>(grid[static_cast<std::size_t>(r)].size()) != maze.cols) {
            throw maze_error("maze grid row " + std::to_string(r + 1) +
                             " is ragged: expected width " + std::to_string(maze.cols));
        }
        for (int c = 0; c < maze.cols; ++c) {
            const char ch = grid[static_cast<std::size_t>(r)][static_cast<std::size_t>(c)];
            if (ch == '#') {
                maze.walls[static_cast<std::size_t>(r) * maze.cols + c] = 1;
            } else if (ch == 'S') {
                if (have_start) {
                    throw maze_error("maze has multiple start cells");
                }
                maze.start = {r, c};
                have_start = true;
            } else if (ch == 'G') {
                if (have_goal) {
                    throw maze_error("maze has multiple goal cells");
                }
                maze.goal = {r, c};
                have_goal = true;
            }
        }
    }
    if (!have_start || !have_goal) {
        throw maze_error("maze is missing " + std::string(!have_start ? "start" : "goal") +
                         " marker");
    }
    if (maze.horizon < 1) {
        throw maze_error("maze horizon must be >= 1");
    }
    const std::vector<int> dist = maze.bfs_distances(maze.start);
    if (dist[static_cast<std::size_t>(maze.goal.row) * maze.cols + maze.goal.col] < 0) {
        throw maze_error("goal is unreachable from start");
    }
    return maze;
}

Maze load_maze(const std::string& path) {
    std::ifstream in(path);
    if (!in) {
        throw maze_error("cannot open maze file: " + path);
    }
    std::stringstream buffer;
    buffer << in.rdbuf();
    std::string name = path;
    const auto slash = name.find_last_of('/');
    if (slash != std::string::npos) {
        name = name.substr(slash + 1);
    }
    const auto dot = name.find_last_of('.');
    if (dot != std::string::npos) {
        name = name.substr(0, dot);
    }
    return parse_maze(buffer.str(), name);
}

PointState step(const PointState& state, double ax, double ay, const Maze& maze) {
    clamp_norm2(ax, ay, kActionClamp);
    PointState next = state;
    next.vx += ax;
    next.vy += ay;
    clamp_norm2(next.vx, next.vy, maze.v_max);

    // x axis first, then y; each axis clips at the wall face it would enter.
    double nx = next.px + next.vx;
    const int row = static_cast<int>(std::floor(next.py));
    if (maze.wall(row, static_cast<int>(std::floor(nx)))) {
        if (next.vx > 0.0) {
            nx = std::floor(nx) - kWallEps;
        } else {
            nx = std::floor(next.px) + kWallEps;
        }
        next.vx = 0.0;
    }
    next.px = nx;

    double ny = next.py + next.vy;
    const int col = static_cast<int>(std::floor(next.px));
    if (maze.wall(static_cast<int>(std::floor(ny)), col)) {
        if (next.vy > 0.0) {
            ny = std::floor(ny) - kWallEps;
        } else {
            ny = std::floor(next.py) + kWallEps;
        }
        next.vy = 0.0;
    }
    next.py = ny;
    return next;
}

void heuristic_controller(const PointState& state, double subgoal_x, double subgoal_y,
                          double& ax, double& ay) {
    ax = kControllerKp * (subgoal_x - state.px) - kControllerKd * state.vx;
    ay = kControllerKp * (subgoal_y - state.py) - kControllerKd * state.vy;
    clamp_norm2(ax, ay, kActionClamp);
}

void Normalization::normalize_token(double* token, int dim) const {
    for (int d = 0; d < dim; ++d) {
        token[d] = (token[d] - mean[static_cast<std::size_t>(d)]) /
                   stddev[static_cast<std::size_t>(d)];
    }
}

void Normalization::denormalize_token(double* token, int dim) const {
    for (int d = 0; d < dim; ++d) {
        token[d] = token[d] * stddev[static_cast<std::size_t>(d)] +
                   mean[static_cast<std::size_t>(d)];
    }
}

Trajectory Normalization::normalize(const Trajectory& t) const {
    Trajectory out = t;
    for (int n = 0; n < out.horizon; ++n) {
        normalize_token(out.token(n), out.dim);
    }
    return out;
}

Trajectory Normalization::denormalize(const Trajectory& t) const {
    Trajectory out = t;
    for (int n = 0; n < out.horizon; ++n) {
        denormalize_token(out.token(n), out.dim);
    }
    return out;
}

std::uint64_t maze_hash(const Maze& maze) {
    std::uint64_t h = 0xcbf29ce484222325ull;
    auto mix = [&h](std::uint64_t v) {
        h ^= v;
        h *= 0x100000001b3ull;
    };
    mix(static_cast<std::uint64_t>(maze.rows));
    mix(static_cast<std::uint64_t>(maze.cols));
    for (std::uint8_t w : maze.walls) {
        mix(w);
    }
    mix(static_cast<std::uint64_t>(maze.start.row * 8191 + maze.start.col));
    mix(static_cast<std::uint64_t>(maze.goal.row * 8191 + maze.goal.col));
    mix(static_cast<std::uint64_t>(maze.horizon));
    return h;
}

Dataset generate_dataset(const Maze& maze, int episodes, Rng rng, int window,
                         int stride) {
    if (episodes < 1) {
        throw maze_error("episodes must be >= 1");
    }
    const std::vector<Cell> cells = maze.free_cells_reachable_from_start();
    if (cells.empty()) {
        throw maze_error("maze has no reachable free cells");
    }

    Dataset dataset;
    dataset.maze_name = maze.name;
    dataset.maze_hash = maze_hash(maze);
    dataset.episodes = episodes;
    dataset.horizon = window > 0 && window < maze.horizon ? window : maze.horizon;

    // Exploration drives below the speed limit so learned trajectories keep
    // headroom under the evaluator's jump threshold.
    Maze gentle = maze;
    gentle.v_max = 0.7 * maze.v_max;

    std::vector<Trajectory> raw;
    raw.reserve(static_cast<std::size_t>(episodes));
    for (int ep = 0; ep < episodes; ++ep) {
        Trajectory traj(maze.horizon, 4);
        const Cell start = cells[rng.uniform_index(cells.size())];
        PointState s;
        s.px = Maze::center_x(start);
        s.py = Maze::center_y(start);

        std::vector<Cell> waypoints;
        std::size_t wp = 0;
        Cell at = start;
        auto refill = [&] {
            Cell target = cells[rng.uniform_index(cells.size())];
            waypoints = maze.shortest_path(at, target);
            wp = waypoints.size() > 1 ? 1 : 0;
            at = target;
        };
        refill();
        for (int t = 0; t < maze.horizon; ++t) {
            double* tok = traj.token(t);
            tok[0] = s.px;
            tok[1] = s.py;
            tok[2] = s.vx;
            tok[3] = s.vy;
            if (wp >= waypoints.size()) {
                refill();
            }
            const Cell target = waypoints.empty() ? at : waypoints[wp];
            const double gx = Maze::center_x(target);
            const double gy = Maze::center_y(target);
            double ax = 0.0;
            double ay = 0.0;
            heuristic_controller(s, gx, gy, ax, ay);
            s = step(s, ax, ay, gentle);
            const double dx = s.px - gx;
            const double dy = s.py - gy;
            if (dx * dx + dy * dy < 0.4 * 0.4) {
                ++wp;
            }
        }
        raw.push_back(std::move(traj));
    }

    // Sliding windows of the planning horizon give the planner more sequences
    // than whole episodes would.
    if (dataset.horizon < maze.horizon) {
        const int st = stride > 0 ? stride : std::max(1, dataset.horizon / 2);
        for (const Trajectory& traj : raw) {
            for (int begin = 0; begin + dataset.horizon <= traj.horizon; begin += st) {
                Trajectory win(dataset.horizon, traj.dim);
                std::copy(traj.token(begin), traj.token(begin) + dataset.horizon * traj.dim,
                          win.data.begin());
                dataset.trajectories.push_back(std::move(win));
            }
        }
    } else {
        dataset.trajectories = std::move(raw);
    }

    dataset.norm.mean.assign(4, 0.0);
    dataset.norm.stddev.assign(4, 0.0);
    std::size_t count = 0;
    for (const Trajectory& traj : dataset.trajectories) {
        for (int n = 0; n < traj.horizon; ++n) {
            const double* tok = traj.token(n);
            for (int d = 0; d < 4; ++d) {
                dataset.norm.mean[static_cast<std::size_t>(d)] += tok[d];
            }
            ++count;
        }
    }
    for (double& m : dataset.norm.mean) {
        m /= static_cast<double>(count);
    }
    for (const Trajectory& traj : dataset.trajectories) {
        for (int n = 0; n < traj.horizon; ++n) {
            const double* tok = traj.token(n);
            for (int d = 0; d < 4; ++d) {
                const double delta = tok[d] - dataset.norm.mean[static_cast<std::size_t>(d)];
                dataset.norm.stddev[static_cast<std::size_t>(d)] += delta * delta;
            }
        }
    }
    for (double& sd : dataset.norm.stddev) {
        sd = std::sqrt(sd / static_cast<double>(count));
        if (sd < 1e-8) {
            sd = 1e-8;
        }
    }
    return dataset;
}

namespace {

constexpr char kDatasetMagic[8] = {'M', 'C', 'T', 'D', 'D', 'S', '0', '1'};

void write_u64(std::ostream& out, std::uint64_t v) {
    out.write(reinterpret_cast<const char*>(&v), sizeof(v));
}

std::uint64_t read_u64(std::istream& in) {
    std::uint64_t v = 0;
    in.read(reinterpret_cast<char*>(&v), sizeof(v));
    return v;
}

void write_doubles(std::ostream& out, const double* data, std::size_t n) {
    out.write(reinterpret_cast<const char*>(data), static_cast<std::streamsize>(n * sizeof(double)));
}

void read_doubles(std::istream& in, double* data, std::size_t n) {
    in.read(reinterpret_cast<char*>(data), static_cast<std::streamsize>(n * sizeof(double)));
}

}  // namespace

void save_dataset(const Dataset& dataset, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) {
        throw maze_error("cannot write dataset file: " + path);
    }
    out.write(kDatasetMagic, sizeof(kDatasetMagic));
    write_u64(out, dataset.maze_name.size());
    out.write(dataset.maze_name.data(), static_cast<std::streamsize>(dataset.maze_name.size()));
    write_u64(out, dataset.maze_hash);
    write_u64(out, static_cast<std::uint64_t>(dataset.dim));
    write_u64(out, static_cast<std::uint64_t>(dataset.horizon));
    write_u64(out, static_cast<std::uint64_t>(dataset.episodes));
    write_u64(out, dataset.seed);
    write_doubles(out, dataset.norm.mean.data(), dataset.norm.mean.size());
    write_doubles(out, dataset.norm.stddev.data(), dataset.norm.stddev.size());
    write_u64(out, dataset.trajectories.size());
    for (const Trajectory& traj : dataset.trajectories) {
        write_u64(out, static_cast<std::uint64_t>(traj.horizon));
        write_u64(out, static_cast<std::uint64_t>(traj.dim));
        write_doubles(out, traj.data.data(), traj.data.size());
    }
    if (!out) {
        throw maze_error("write failed: " + path);
    }
}

Dataset load_dataset(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw maze_error("cannot open dataset file: " + path);
    }
    char magic[8] = {};
    in.read(magic, sizeof(magic));
    if (!in || std::memcmp(magic, kDatasetMagic, sizeof(magic)) != 0) {
        throw maze_error("not a dataset file (bad magic/version): " + path);
    }
    Dataset dataset;
    const std::uint64_t name_len = read_u64(in);
    dataset.maze_name.resize(name_len);
    in.read(dataset.maze_name.data(), static_cast<std::streamsize>(name_len));
    dataset.maze_hash = read_u64(in);
    dataset.dim = static_cast<int>(read_u64(in));
    dataset.horizon = static_cast<int>(read_u64(in));
    dataset.episodes = static_cast<int>(read_u64(in));
    dataset.seed = read_u64(in);
    dataset.norm.mean.resize(static_cast<std::size_t>(dataset.dim));
    dataset.norm.stddev.resize(static_cast<std::size_t>(dataset.dim));
    read_doubles(in, dataset.norm.mean.data(), dataset.norm.mean.size());
    read_doubles(in, dataset.norm.stddev.data(), dataset.norm.stddev.size());
    const std::uint64_t count = read_u64(in);
    dataset.trajectories.resize(count);
    for (std::uint64_t i = 0; i < count; ++i) {
        const int horizon = static_cast<int>(read_u64(in));
        const int dim = static_cast<int>(read_u64(in));
        Trajectory traj(horizon, dim);
        read_doubles(in, traj.data.data(), traj.data.size());
        dataset.trajectories[i] = std::move(traj);
    }
    if (!in) {
        throw maze_error("truncated dataset file: " + path);
    }
    return dataset;
}

PlanEval evaluate_plan_detail(const Trajectory& plan, const Maze& maze) {
    PlanEval eval;
    const double gx = Maze::center_x(maze.goal);
    const double gy = Maze::center_y(maze.goal);
    const double jump_limit = maze.v_max * (1.0 + 1e-9) + 1e-9;
    for (int n = 0; n < plan.horizon; ++n) {
        const double* tok = plan.token(n);
        const double dx = tok[0] - gx;
        const double dy = tok[1] - gy;
        if (std::sqrt(dx * dx + dy * dy) <= maze.goal_radius) {
            eval.reached = true;
            eval.reach_index = n;
            break;
        }
    }
    // Execution stops at the goal, so feasibility binds only up to the reach
    // index; a plan that never reaches is judged in full.
    const int checked = eval.reached ? eval.reach_index + 1 : plan.horizon;
    for (int n = 0; n < checked; ++n) {
        const double* tok = plan.token(n);
        if (maze.wall_at(tok[0], tok[1])) {
            ++eval.wall_states;
        }
        if (n > 0) {
            const double* prev = plan.token(n - 1);
            const double dx = tok[0] - prev[0];
            const double dy = tok[1] - prev[1];
            if (std::sqrt(dx * dx + dy * dy) > jump_limit) {
                ++eval.infeasible_jumps;
            }
        }
    }
    if (eval.reached) {
        eval.goal_term = static_cast<double>(maze.horizon - eval.reach_index) /
                         static_cast<double>(maze.horizon);
    }
    eval.reward = eval.goal_term - maze.penalty_weight * eval.violations();
    eval.reward = std::clamp(eval.reward, -1.0, 1.0);
    return eval;
}

double evaluate_plan(const Trajectory& plan, const Maze& maze) {
    return evaluate_plan_detail(plan, maze).reward;
}

EpisodeOutcome execute_plan(const Maze& maze, const Trajectory& plan, int subgoal_stride,
                            const Replanner& replanner, int replan_interval) {
    if (subgoal_stride < 1) {
        throw maze_error("subgoal stride must be >= 1");
    }
    EpisodeOutcome outcome;
    Trajectory active = plan;
    PointState s;
    s.px = Maze::center_x(maze.start);
    s.py = Maze::center_y(maze.start);
    outcome.executed.push_back(s);

    const double gx = Maze::center_x(maze.goal);
    const double gy = Maze::center_y(maze.goal);
    int plan_index = std::min(subgoal_stride, active.horizon - 1);
    for (int t = 1; t <= maze.horizon; ++t) {
        if (replanner && replan_interval > 0 && t > 1 && (t - 1) % replan_interval == 0) {
            active = replanner(s, t - 1);
            plan_index = std::min(subgoal_stride, active.horizon - 1);
        }
        const double* subgoal = active.token(plan_index);
        double ax = 0.0;
        double ay = 0.0;
        heuristic_controller(s, subgoal[0], subgoal[1], ax, ay);
        s = step(s, ax, ay, maze);
        outcome.executed.push_back(s);

        const double sdx = s.px - subgoal[0];
        const double sdy = s.py - subgoal[1];
        if (std::sqrt(sdx * sdx + sdy * sdy) <= maze.goal_radius) {
            plan_index = std::min(plan_index + subgoal_stride, active.horizon - 1);
        }
        const double dx = s.px - gx;
        const double dy = s.py - gy;
        if (std::sqrt(dx * dx + dy * dy) <= maze.goal_radius) {
            outcome.success = true;
            outcome.steps = t;
            break;
        }
    }
    if (!outcome.success) {
        outcome.steps = maze.horizon;
    }
    const PointState& last = outcome.executed.back();
    outcome.final_distance = std::sqrt((last.px - gx) * (last.px - gx) +
                                       (last.py - gy) * (last.py - gy));
    return outcome;
}

std::vector<Task> derive_tasks(const Maze& maze, int count) {
    std::vector<Task> tasks;
    tasks.push_back({maze.start, maze.goal});
    if (count <= 1) {
        tasks.resize(static_cast<std::size_t>(std::max(count, 1)));
        return tasks;
    }
    const std::vector<Cell> cells = maze.free_cells_reachable_from_start();
    // Far-apart pairs: demand at least 60% of the maze's BFS eccentricity.
    int max_dist = 0;
    const std::vector<int> from_start = maze.bfs_distances(maze.start);
    for (int d : from_start) {
        max_dist = std::max(max_dist, d);
    }
    const int min_dist = std::max(1, (max_dist * 6) / 10);
    Rng rng(derive_seed(0xBA5E11D5ull, maze_hash(maze)));
    int guard = 0;
    while (static_cast<int>(tasks.size()) < count && guard < 100000) {
        ++guard;
        const Cell a = cells[rng.uniform_index(cells.size())];
        const Cell b = cells[rng.uniform_index(cells.size())];
        if (a == b) {
            continue;
        }
        const std::vector<int> dist = maze.bfs_distances(a);
        const int d = dist[static_cast<std::size_t>(b.row) * maze.cols + b.col];
        if (d < min_dist) {
            continue;
        }
        bool duplicate = false;
        for (const Task& task : tasks) {
            if (task.start == a && task.goal == b) {
                duplicate = true;
                break;
            }
        }
        if (!duplicate) {
            tasks.push_back({a, b});
        }
    }
    if (static_cast<int>(tasks.size()) < count) {
        throw maze_error("could not derive " + std::to_string(count) + " tasks for maze " +
                         maze.name);
    }
    return tasks;
}

}  // namespace mctd
