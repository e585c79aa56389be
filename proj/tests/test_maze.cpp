#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <set>

#include "mctd/maze.hpp"
#include "mctd/rng.hpp"

using namespace mctd;

namespace {

const char* kOpenRoom =
    "horizon=200\n"
    "#########\n"
    "#S......#\n"
    "#.......#\n"
    "#.......#\n"
    "#......G#\n"
    "#########\n";

Maze open_room() {
    return parse_maze(kOpenRoom, "open");
}

}  // namespace

TEST_CASE("parse: smallest valid maze") {
    const Maze m = parse_maze(
        "horizon=10\n"
        "#####\n"
        "#SG.#\n"
        "#####\n");
    CHECK(m.rows == 3);
    CHECK(m.cols == 5);
    CHECK(m.start == Cell{1, 1});
    CHECK(m.goal == Cell{1, 2});
    CHECK(m.horizon == 10);
}

TEST_CASE("parse: header keys recognized, defaults applied") {
    const Maze m = parse_maze(
        "horizon=500\n"
        "goal_radius=0.75\n"
        "v_max=2\n"
        "penalty_weight=0.25\n"
        "plan_horizon=100\n"
        "####\n"
        "#SG#\n"
        "####\n");
    CHECK(m.goal_radius == 0.75);
    CHECK(m.v_max == 2.0);
    CHECK(m.penalty_weight == 0.25);
    CHECK(m.plan_horizon == 100);
}

TEST_CASE("parse errors carry line information") {
    CHECK_THROWS_WITH_AS(parse_maze("horizon=10\n###\n#S#\n##\n###\n"),
                         doctest::Contains("ragged"), maze_error);
    CHECK_THROWS_AS(parse_maze("horizon=10\n###\n#S#\n###\n"), maze_error);  // no goal
    CHECK_THROWS_WITH_AS(parse_maze("bogus_key=1\n###\n#S#\n###\n"),
                         doctest::Contains("unknown header key"), maze_error);
    // Goal walled off from start.
    CHECK_THROWS_WITH_AS(parse_maze("horizon=10\n#####\n#S#G#\n#####\n"),
                         doctest::Contains("unreachable"), maze_error);
}

TEST_CASE("step: fixed point at rest") {
    const Maze m = open_room();
    PointState s;
    s.px = 3.5;
    s.py = 2.5;
    const PointState next = step(s, 0.0, 0.0, m);
    CHECK(next.px == s.px);
    CHECK(next.py == s.py);
    CHECK(next.vx == 0.0);
    CHECK(next.vy == 0.0);
}

TEST_CASE("step: head-on wall approach clips at the face and zeroes velocity") {
    const Maze m = open_room();
    PointState s;
    s.px = 7.4;  // wall face at x=8
    s.py = 2.5;
    s.vx = 0.9;  // would land at 8.3 inside the wall
    const PointState next = step(s, 0.0, 0.0, m);
    CHECK(next.px < 8.0);
    CHECK(next.px > 7.4);
    CHECK(next.vx == 0.0);
    CHECK(!m.wall_at(next.px, next.py));
}

TEST_CASE("step: random rollouts stay in bounds and out of walls") {
    const Maze m = parse_maze(
        "horizon=100\n"
        "#########\n"
        "#S..#...#\n"
        "#.#.#.#.#\n"
        "#.#...#.#\n"
        "#.#####.#\n"
        "#......G#\n"
        "#########\n");
    Rng rng(123);
    PointState s;
    s.px = Maze::center_x(m.start);
    s.py = Maze::center_y(m.start);
    for (int i = 0; i < 100000; ++i) {
        const double ax = (rng.uniform() - 0.5) * 2.0;
        const double ay = (rng.uniform() - 0.5) * 2.0;
        s = step(s, ax, ay, m);
        REQUIRE(!m.wall_at(s.px, s.py));
        REQUIRE(std::sqrt(s.vx * s.vx + s.vy * s.vy) <= m.v_max * (1.0 + 1e-12));
    }
}

TEST_CASE("controller: equilibrium and proportional direction") {
    PointState s;
    s.px = 2.0;
    s.py = 3.0;
    double ax = 1.0, ay = 1.0;
    heuristic_controller(s, 2.0, 3.0, ax, ay);
    CHECK(ax == 0.0);
    CHECK(ay == 0.0);

    heuristic_controller(s, 3.0, 3.0, ax, ay);
    CHECK(ax > 0.0);
    CHECK(ay == 0.0);
}

TEST_CASE("controller: converges to a straight-line subgoal in an open room") {
    const Maze m = open_room();
    PointState s;
    s.px = 1.5;
    s.py = 1.5;
    const double gx = 6.5, gy = 3.5;
    bool reached = false;
    for (int t = 0; t < 50 && !reached; ++t) {
        double ax, ay;
        heuristic_controller(s, gx, gy, ax, ay);
        s = step(s, ax, ay, m);
        reached = std::sqrt((s.px - gx) * (s.px - gx) + (s.py - gy) * (s.py - gy)) <=
                  m.goal_radius;
    }
    CHECK(reached);
}

TEST_CASE("generate_dataset: shapes, feasibility, coverage") {
    Maze m = open_room();
    m.horizon = 300;
    const Dataset one = generate_dataset(m, 1, Rng(9));
    REQUIRE(one.trajectories.size() == 1);
    CHECK(one.trajectories[0].horizon == 300);
    CHECK(one.trajectories[0].dim == 4);

    const Dataset data = generate_dataset(m, 200, Rng(42));
    std::set<std::pair<int, int>> visited;
    for (const Trajectory& traj : data.trajectories) {
        const PlanEval eval = evaluate_plan_detail(traj, m);
        CHECK(eval.violations() == 0);  // dynamics guarantee feasibility
        for (int n = 0; n < traj.horizon; ++n) {
            const double* tok = traj.token(n);
            visited.insert({static_cast<int>(std::floor(tok[1])),
                            static_cast<int>(std::floor(tok[0]))});
            if (n > 0) {
                const double dx = tok[0] - traj.token(n - 1)[0];
                const double dy = tok[1] - traj.token(n - 1)[1];
                CHECK(std::sqrt(dx * dx + dy * dy) <= m.v_max + 1e-9);
            }
        }
    }
    int free_cells = 0;
    for (int r = 0; r < m.rows; ++r) {
        for (int c = 0; c < m.cols; ++c) {
            if (!m.wall(r, c)) {
                ++free_cells;
            }
        }
    }
    CHECK(static_cast<int>(visited.size()) * 10 >= free_cells * 9);  // >= 90% coverage
}

TEST_CASE("generate_dataset: window cutting with stride") {
    Maze m = open_room();
    m.horizon = 200;
    const Dataset data = generate_dataset(m, 3, Rng(1), 100, 50);
    CHECK(data.horizon == 100);
    CHECK(data.trajectories.size() == 9);  // 3 windows per episode
    for (const Trajectory& t : data.trajectories) {
        CHECK(t.horizon == 100);
    }
}

TEST_CASE("dataset round-trips through its file format") {
    Maze m = open_room();
    m.horizon = 120;
    Dataset data = generate_dataset(m, 2, Rng(5));
    data.seed = 77;
    const std::string path = "test_dataset_roundtrip.bin";
    save_dataset(data, path);
    const Dataset loaded = load_dataset(path);
    CHECK(loaded.maze_name == data.maze_name);
    CHECK(loaded.maze_hash == data.maze_hash);
    CHECK(loaded.seed == 77);
    REQUIRE(loaded.trajectories.size() == data.trajectories.size());
    CHECK(loaded.trajectories[0].data == data.trajectories[0].data);
    CHECK(loaded.norm.mean == data.norm.mean);
    std::remove(path.c_str());

    CHECK_THROWS_AS(load_dataset("does_not_exist.bin"), maze_error);
}

TEST_CASE("evaluate_plan: goal at half horizon gives exactly 0.5") {
    Maze m = open_room();
    m.horizon = 100;
    Trajectory plan(60, 4);
    // Walk a straight line that stays a cell away from the goal until index
    // 49, then land exactly on it at index 50.
    const double sx = Maze::center_x(m.start), sy = Maze::center_y(m.start);
    const double gx = Maze::center_x(m.goal), gy = Maze::center_y(m.goal);
    const double len = std::sqrt((gx - sx) * (gx - sx) + (gy - sy) * (gy - sy));
    const double reach = (len - 1.0) / len;  // fraction covered by index 49
    for (int n = 0; n < 60; ++n) {
        double* tok = plan.token(n);
        if (n < 50) {
            const double a = reach * n / 49.0;
            tok[0] = sx + a * (gx - sx);
            tok[1] = sy + a * (gy - sy);
        } else {
            tok[0] = gx;
            tok[1] = gy;
        }
    }
    const PlanEval eval = evaluate_plan_detail(plan, m);
    CHECK(eval.reached);
    CHECK(eval.reach_index == 50);
    CHECK(eval.goal_term == doctest::Approx(0.5));
    CHECK(eval.violations() == 0);
    CHECK(eval.reward == doctest::Approx(0.5));
}

TEST_CASE("evaluate_plan: never reaching the goal scores zero") {
    const Maze m = open_room();
    Trajectory plan(10, 4);
    for (int n = 0; n < 10; ++n) {
        plan.token(n)[0] = 1.5;
        plan.token(n)[1] = 1.5;
    }
    CHECK(evaluate_plan(plan, m) == 0.0);
}

TEST_CASE("evaluate_plan: teleports and wall states are strictly negative") {
    const Maze m = parse_maze(
        "horizon=100\n"
        "#####\n"
        "#S#G#\n"
        "#.#.#\n"
        "#...#\n"
        "#####\n");
    Trajectory plan(2, 4);
    plan.token(0)[0] = 1.5;
    plan.token(0)[1] = 1.5;
    plan.token(1)[0] = 3.5;  // jumps across the wall (to a non-goal cell)
    plan.token(1)[1] = 2.5;
    const PlanEval eval = evaluate_plan_detail(plan, m);
    CHECK(eval.infeasible_jumps == 1);
    CHECK(eval.reward < 0.0);

    Trajectory inside(1, 4);
    inside.token(0)[0] = 2.5;  // wall interior
    inside.token(0)[1] = 1.5;
    CHECK(evaluate_plan(inside, m) < 0.0);
}

TEST_CASE("evaluate_plan is translation consistent") {
    const char* base =
        "horizon=50\n"
        "######\n"
        "#S...#\n"
        "#.##.#\n"
        "#...G#\n"
        "######\n";
    const char* shifted =
        "horizon=50\n"
        "#######\n"
        "#######\n"
        "##S...#\n"
        "##.##.#\n"
        "##...G#\n"
        "#######\n";
    const Maze m1 = parse_maze(base);
    const Maze m2 = parse_maze(shifted);
    Rng rng(31);
    Trajectory plan(20, 4);
    double x = 1.5, y = 1.5;
    for (int n = 0; n < 20; ++n) {
        plan.token(n)[0] = x;
        plan.token(n)[1] = y;
        x += rng.uniform() * 0.8;
        y += rng.uniform() * 0.4;
    }
    Trajectory moved = plan;
    for (int n = 0; n < 20; ++n) {
        moved.token(n)[0] += 1.0;
        moved.token(n)[1] += 1.0;
    }
    CHECK(evaluate_plan(plan, m1) == doctest::Approx(evaluate_plan(moved, m2)).epsilon(1e-12));
}

TEST_CASE("execute_plan: tracks a straight feasible line") {
    Maze m = open_room();
    const int n_tokens = 40;
    Trajectory plan(n_tokens, 4);
    const double sx = Maze::center_x(m.start), sy = Maze::center_y(m.start);
    const double gx = Maze::center_x(m.goal), gy = Maze::center_y(m.goal);
    for (int n = 0; n < n_tokens; ++n) {
        const double a = static_cast<double>(n) / (n_tokens - 1);
        plan.token(n)[0] = sx + a * (gx - sx);
        plan.token(n)[1] = sy + a * (gy - sy);
    }
    const EpisodeOutcome outcome = execute_plan(m, plan, 10);
    CHECK(outcome.success);
    CHECK(outcome.steps <= m.horizon);
    CHECK(outcome.final_distance <= m.goal_radius);

    // Executed success implies a positive goal term on the executed states.
    Trajectory executed(static_cast<int>(outcome.executed.size()), 4);
    for (std::size_t i = 0; i < outcome.executed.size(); ++i) {
        executed.token(static_cast<int>(i))[0] = outcome.executed[i].px;
        executed.token(static_cast<int>(i))[1] = outcome.executed[i].py;
    }
    CHECK(evaluate_plan_detail(executed, m).goal_term > 0.0);
}

TEST_CASE("execute_plan invokes the replanner at the configured interval") {
    Maze m = open_room();
    m.horizon = 120;
    Trajectory bogus(20, 4);  // plan that goes nowhere
    for (int n = 0; n < 20; ++n) {
        bogus.token(n)[0] = Maze::center_x(m.start);
        bogus.token(n)[1] = Maze::center_y(m.start);
    }
    int replans = 0;
    const Replanner replanner = [&](const PointState& s, int) {
        ++replans;
        Trajectory fix(40, 4);
        const double gx = Maze::center_x(m.goal), gy = Maze::center_y(m.goal);
        for (int n = 0; n < 40; ++n) {
            const double a = static_cast<double>(n) / 39.0;
            fix.token(n)[0] = s.px + a * (gx - s.px);
            fix.token(n)[1] = s.py + a * (gy - s.py);
        }
        return fix;
    };
    const EpisodeOutcome outcome = execute_plan(m, bogus, 10, replanner, 50);
    CHECK(replans >= 1);
    CHECK(outcome.success);
}

TEST_CASE("derive_tasks is deterministic and far apart") {
    const Maze m = parse_maze(
        "horizon=100\n"
        "##########\n"
        "#S.......#\n"
        "#.######.#\n"
        "#.#......#\n"
        "#.#.###.##\n"
        "#...#...G#\n"
        "##########\n");
    const std::vector<Task> a = derive_tasks(m, 5);
    const std::vector<Task> b = derive_tasks(m, 5);
    REQUIRE(a.size() == 5);
    CHECK(a[0].start == m.start);
    CHECK(a[0].goal == m.goal);
    for (std::size_t i = 0; i < a.size(); ++i) {
        CHECK(a[i].start == b[i].start);
        CHECK(a[i].goal == b[i].goal);
        CHECK(!m.wall(a[i].start.row, a[i].start.col));
        CHECK(!m.wall(a[i].goal.row, a[i].goal.col));
    }
}
