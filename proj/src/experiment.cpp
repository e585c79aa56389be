#include "mctd/experiment.hpp"

#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>
#include <thread>

namespace mctd {

PlannerKind planner_from_name(const std::string& name) {
    if (name == "diffuser" || name == "oneshot") return PlannerKind::Diffuser;
    if (name == "diffuser_replan" || name == "replanning") return PlannerKind::DiffuserReplan;
    if (name == "random_search") return PlannerKind::RandomSearch;
    if (name == "diffusion_forcing" || name == "df") return PlannerKind::DiffusionForcing;
    if (name == "df_no_causal") return PlannerKind::DfNoCausal;
    if (name == "mctd") return PlannerKind::Mctd;
    if (name == "mctd_no_causal") return PlannerKind::MctdNoCausal;
    if (name == "mctd_replan") return PlannerKind::MctdReplan;
    if (name == "greedy") return PlannerKind::Greedy;
    throw search_error("unknown planner: " + name);
}

std::string planner_name(PlannerKind kind) {
    switch (kind) {
        case PlannerKind::Diffuser: return "diffuser";
        case PlannerKind::DiffuserReplan: return "diffuser_replan";
        case PlannerKind::RandomSearch: return "random_search";
        case PlannerKind::DiffusionForcing: return "diffusion_forcing";
        case PlannerKind::DfNoCausal: return "df_no_causal";
        case PlannerKind::Mctd: return "mctd";
        case PlannerKind::MctdNoCausal: return "mctd_no_causal";
        case PlannerKind::MctdReplan: return "mctd_replan";
        case PlannerKind::Greedy: return "greedy";
    }
    return "?";
}

namespace {

PlanningProblem problem_from_state(const Maze& task_maze, const PointState& state,
                                   const Denoiser& model, int subplans) {
    Task task;
    task.start = {static_cast<int>(std::floor(state.py)),
                  static_cast<int>(std::floor(state.px))};
    task.goal = task_maze.goal;
    PlanningProblem problem = make_problem(task_maze, task, model, subplans);
    const int d = model.arch().token_dim;
    problem.start_token.assign(static_cast<std::size_t>(d), 0.0);
    problem.start_token[0] = state.px;
    problem.start_token[1] = state.py;
    if (d > 2) problem.start_token[2] = state.vx;
    if (d > 3) problem.start_token[3] = state.vy;
    model.norm().normalize_token(problem.start_token.data(), d);
    return problem;
}

PlanResult plan_once(const PlanningProblem& problem, const PlannerSetup& setup,
                     std::uint64_t seed) {
    switch (setup.kind) {
        case PlannerKind::Diffuser:
        case PlannerKind::DiffuserReplan:
            return diffuser_oneshot(problem, setup.base.guidance_scale,
                                    setup.base.oneshot_interval, seed);
        case PlannerKind::RandomSearch:
            return random_search(problem, setup.base, seed);
        case PlannerKind::DiffusionForcing:
            return diffusion_forcing_plan(problem, setup.df_scale, setup.search, seed);
        case PlannerKind::DfNoCausal: {
            const AblationPlanner ab = ablation_variant(setup.search, false, false);
            return diffusion_forcing_plan(problem, setup.df_scale, ab.config, seed);
        }
        case PlannerKind::Mctd:
        case PlannerKind::MctdReplan:
            return mctd_plan(problem, setup.search, seed);
        case PlannerKind::MctdNoCausal: {
            const AblationPlanner ab = ablation_variant(setup.search, false, true);
            return mctd_plan(problem, ab.config, seed);
        }
        case PlannerKind::Greedy:
            return greedy_tree_plan(problem, setup.search, setup.greedy_children, seed);
    }
    throw search_error("unhandled planner kind");
}

bool planner_replans(const PlannerSetup& setup) {
    switch (setup.kind) {
        case PlannerKind::DiffuserReplan:
        case PlannerKind::MctdReplan:
            return true;
        case PlannerKind::DiffusionForcing:
        case PlannerKind::DfNoCausal:
            return setup.df_replans;
        default:
            return false;
    }
}

}  // namespace

ResultRow run_episode(const Maze& maze, const Task& task, int task_id,
                      const Denoiser& model, const PlannerSetup& setup,
                      std::uint64_t seed) {
    const auto start_time = std::chrono::steady_clock::now();

    PlanningProblem problem = make_problem(maze, task, model, setup.search.subplans);
    PlanResult planned = plan_once(problem, setup, seed);

    std::uint64_t calls = planned.calls.step_calls;
    int iterations = planned.iterations;
    Replanner replanner;
    if (planner_replans(setup) && setup.replan_interval > 0) {
        replanner = [&](const PointState& state, int env_step) {
            PlanningProblem sub = problem_from_state(problem.maze, state, model,
                                                     setup.search.subplans);
            PlanResult next = plan_once(sub, setup,
                                        derive_seed(seed, 0x7265ull,
                                                    static_cast<std::uint64_t>(env_step)));
            calls += next.calls.step_calls;
            iterations += next.iterations;
            return next.plan;
        };
    }

    const EpisodeOutcome outcome =
        execute_plan(problem.maze, planned.plan, setup.subgoal_stride, replanner,
                     replanner ? setup.replan_interval : 0);

    const auto end_time = std::chrono::steady_clock::now();
    ResultRow row;
    row.maze = maze.name;
    row.planner = planner_name(setup.kind);
    row.task = task_id;
    row.seed = seed;
    row.success = outcome.success ? 1 : 0;
    row.reward = planned.reward;
    row.wall_seconds = std::chrono::duration<double>(end_time - start_time).count();
    row.denoiser_calls = calls;
    row.search_iterations = iterations;
    row.early_stopped = planned.early_stopped ? 1 : 0;
    return row;
}

std::vector<ResultRow> run_many(const Maze& maze, const Denoiser& model,
                                const PlannerSetup& setup, int tasks,
                                const std::vector<std::uint64_t>& seeds, int jobs) {
    const std::vector<Task> task_list = derive_tasks(maze, tasks);
    struct Job {
        int task_id;
        std::uint64_t seed;
    };
    std::vector<Job> job_list;
    for (int t = 0; t < tasks; ++t) {
        for (std::uint64_t s : seeds) {
            job_list.push_back({t, s});
        }
    }
    std::vector<ResultRow> rows(job_list.size());
    const int workers = std::max(1, jobs);
    std::atomic<std::size_t> cursor{0};
    auto work = [&] {
        for (;;) {
            const std::size_t i = cursor.fetch_add(1);
            if (i >= job_list.size()) {
                return;
            }
            const Job& job = job_list[i];
            rows[i] = run_episode(maze, task_list[static_cast<std::size_t>(job.task_id)],
                                  job.task_id, model, setup,
                                  derive_seed(job.seed, static_cast<std::uint64_t>(job.task_id)));
        }
    };
    if (workers == 1) {
        work();
    } else {
        std::vector<std::thread> pool;
        for (int w = 0; w < workers; ++w) {
            pool.emplace_back(work);
        }
        for (std::thread& t : pool) {
            t.join();
        }
    }
    return rows;
}

Summary summarize(const std::vector<ResultRow>& rows) {
    Summary summary;
    summary.runs = static_cast<int>(rows.size());
    if (rows.empty()) {
        return summary;
    }
    std::map<std::uint64_t, std::pair<int, int>> per_seed;  // seed -> (successes, runs)
    for (const ResultRow& row : rows) {
        auto& slot = per_seed[row.seed];
        slot.first += row.success;
        slot.second += 1;
        summary.mean_reward += row.reward;
        summary.mean_seconds += row.wall_seconds;
        summary.mean_calls += static_cast<double>(row.denoiser_calls);
        summary.mean_iterations += row.search_iterations;
    }
    summary.mean_reward /= summary.runs;
    summary.mean_seconds /= summary.runs;
    summary.mean_calls /= summary.runs;
    summary.mean_iterations /= summary.runs;

    std::vector<double> seed_rates;
    for (const auto& [seed, counts] : per_seed) {
        seed_rates.push_back(100.0 * counts.first / counts.second);
    }
    double mean = 0.0;
    for (double r : seed_rates) {
        mean += r;
    }
    mean /= static_cast<double>(seed_rates.size());
    double var = 0.0;
    for (double r : seed_rates) {
        var += (r - mean) * (r - mean);
    }
    var /= static_cast<double>(seed_rates.size());
    summary.mean_success = mean;
    summary.std_success = std::sqrt(var);
    return summary;
}

void write_results_csv(const std::vector<ResultRow>& rows, const std::string& path,
                       const std::string& config_hash) {
    std::ofstream out(path);
    if (!out) {
        throw search_error("cannot write results csv: " + path);
    }
    out << "# config_hash=" << config_hash << '\n';
    out << "maze,planner,task,seed,success,reward,wall_seconds,denoiser_calls,"
           "search_iterations,early_stopped\n";
    char buf[64];
    for (const ResultRow& row : rows) {
        out << row.maze << ',' << row.planner << ',' << row.task << ',' << row.seed << ','
            << row.success << ',';
        std::snprintf(buf, sizeof(buf), "%.9g", row.reward);
        out << buf << ',';
        std::snprintf(buf, sizeof(buf), "%.6g", row.wall_seconds);
        out << buf << ',' << row.denoiser_calls << ',' << row.search_iterations << ','
            << row.early_stopped << '\n';
    }
}

std::vector<ResultRow> read_results_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) {
        throw search_error("cannot open results csv: " + path);
    }
    std::vector<ResultRow> rows;
    std::string line;
    bool header_seen = false;
    while (std::getline(in, line)) {
        if (line.empty() || line[0] == '#') {
            continue;
        }
        if (!header_seen) {
            header_seen = true;
            continue;
        }
        std::istringstream ls(line);
        ResultRow row;
        std::string field;
        auto next = [&]() -> std::string {
            if (!std::getline(ls, field, ',')) {
                throw search_error("malformed results csv row: " + line);
            }
            return field;
        };
        row.maze = next();
        row.planner = next();
        row.task = std::stoi(next());
        row.seed = std::stoull(next());
        row.success = std::stoi(next());
        row.reward = std::stod(next());
        row.wall_seconds = std::stod(next());
        row.denoiser_calls = std::stoull(next());
        row.search_iterations = std::stoi(next());
        row.early_stopped = std::stoi(next());
        rows.push_back(std::move(row));
    }
    return rows;
}

}  // namespace mctd
