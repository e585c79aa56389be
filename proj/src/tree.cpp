#include "mctd/tree.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>

namespace mctd {

namespace {

void validate_config(const SearchConfig& config) {
    if (config.max_iterations < 1) {
        throw search_error("config: max_iterations must be >= 1");
    }
    if (config.guidance_set.empty()) {
        throw search_error("config: guidance set must be non-empty");
    }
    if (config.uct_weight < 0.0) {
        throw search_error("config: UCT weight must be >= 0");
    }
    if (config.jump_interval < 1) {
        throw search_error("config: jump interval must be >= 1");
    }
}

struct Search {
    const PlanningProblem& problem;
    const SearchConfig& config;
    DenoiseContext ctx;
    Rng rng;
    int next_id = 1;

    bool terminal(const TreeNode& node) const {
        return node.depth >= config.subplans;
    }
    bool fully_expanded(const TreeNode& node) const {
        return static_cast<int>(node.children.size()) >= config.branching();
    }
    bool expandable(const TreeNode& node) const {
        return !terminal(node) && !fully_expanded(node);
    }

    TreeNode* expand(TreeNode* node) {
        if (!expandable(*node)) {
            throw search_error("tree contract: node is not expandable");
        }
        const int meta = static_cast<int>(node->children.size());
        auto child = std::make_unique<TreeNode>();
        child->id = next_id++;
        child->depth = node->depth + 1;
        child->meta_index = meta;
        child->meta_action = config.guidance_set[static_cast<std::size_t>(meta)];
        child->parent = node;
        child->plan = node->plan;
        if (node->depth == 0) {
            // Each root child explores from its own initial noise.
            Rng child_rng = rng.split(static_cast<std::uint64_t>(child->id));
            resample_open_noise(child->plan, problem.model->schedule(), child_rng);
        }
        denoise_subplan(child->plan, node->depth, child->meta_action, ctx);
        node->children.push_back(std::move(child));
        return node->children.back().get();
    }

    GuidanceSchedule schedule_for(const TreeNode& node) const {
        GuidanceSchedule sched;
        sched.scales.assign(static_cast<std::size_t>(config.subplans), 0.0);
        std::vector<double> path;
        for (const TreeNode* n = &node; n && n->parent; n = n->parent) {
            path.push_back(n->meta_action);
        }
        std::reverse(path.begin(), path.end());
        const double tail = path.empty() ? 0.0 : path.back();
        for (int s = 0; s < config.subplans; ++s) {
            sched.scales[static_cast<std::size_t>(s)] =
                s < static_cast<int>(path.size()) ? path[static_cast<std::size_t>(s)] : tail;
        }
        return sched;
    }

    std::string path_of(const TreeNode& node) const {
        std::string path;
        std::vector<int> metas;
        for (const TreeNode* n = &node; n && n->parent; n = n->parent) {
            metas.push_back(n->meta_index);
        }
        std::reverse(metas.begin(), metas.end());
        for (std::size_t i = 0; i < metas.size(); ++i) {
            if (i) {
                path += '/';
            }
            path += std::to_string(metas[i]);
        }
        return path;
    }
};

void backpropagate(TreeNode* node, double reward) {
    for (TreeNode* n = node; n; n = n->parent) {
        n->visit_count += 1;
        n->value_sum += reward;
    }
}

}  // namespace

double uct_score(double value_mean, int child_visits, int parent_visits, double weight) {
    if (child_visits <= 0) {
        return std::numeric_limits<double>::infinity();
    }
    const double n = parent_visits > 0 ? static_cast<double>(parent_visits) : 1.0;
    return value_mean + weight * std::sqrt(std::log(n) / child_visits);
}

TreeNode* select_node(TreeNode* root, const SearchConfig& config) {
    TreeNode* node = root;
    while (node->depth < config.subplans &&
           static_cast<int>(node->children.size()) >= config.branching()) {
        TreeNode* best = nullptr;
        double best_score = -std::numeric_limits<double>::infinity();
        for (const auto& child : node->children) {
            const double score = uct_score(child->value_mean(), child->visit_count,
                                           node->visit_count, config.uct_weight);
            if (score > best_score) {
                best_score = score;
                best = child.get();
            }
        }
        if (!best) {
            break;  // terminal leaf
        }
        node = best;
    }
    return node;
}

PlanningProblem make_problem(const Maze& maze, const Task& task, const Denoiser& model,
                             int subplans, int plan_horizon) {
    PlanningProblem problem;
    problem.maze = maze;
    problem.maze.start = task.start;
    problem.maze.goal = task.goal;
    if (problem.maze.wall(task.start.row, task.start.col) ||
        problem.maze.wall(task.goal.row, task.goal.col)) {
        throw search_error("task start/goal must be free cells");
    }
    problem.model = &model;

    int horizon = plan_horizon > 0 ? plan_horizon : maze.plan_horizon;
    if (horizon <= 0) {
        horizon = maze.horizon;
    }
    const int f = model.arch().frame_stack;
    if (horizon % f != 0) {
        throw search_error("plan horizon must be a multiple of the frame stack");
    }
    problem.plan_horizon = horizon;
    problem.part = partition(horizon, subplans);

    const int d = model.arch().token_dim;
    problem.start_token.assign(static_cast<std::size_t>(d), 0.0);
    problem.start_token[0] = Maze::center_x(task.start);
    problem.start_token[1] = Maze::center_y(task.start);
    model.norm().normalize_token(problem.start_token.data(), d);

    double goal[2] = {Maze::center_x(task.goal), Maze::center_y(task.goal)};
    goal[0] = (goal[0] - model.norm().mean[0]) / model.norm().stddev[0];
    goal[1] = (goal[1] - model.norm().mean[1]) / model.norm().stddev[1];
    problem.goal_x = goal[0];
    problem.goal_y = goal[1];
    return problem;
}

PlanResult mctd_plan(const PlanningProblem& problem, const SearchConfig& config,
                     std::uint64_t seed) {
    validate_config(config);
    PlanResult result;

    Search search{problem, config, {}, Rng(derive_seed(seed, 0x6d637464ull)), 1};
    search.ctx.model = problem.model;
    search.ctx.part = &problem.part;
    search.ctx.steps_per_expansion = config.steps_per_expansion;
    search.ctx.stabilization = config.stabilization;
    search.ctx.causal = config.causal;
    search.ctx.goal_x = problem.goal_x;
    search.ctx.goal_y = problem.goal_y;
    search.ctx.counter = &result.calls;

    auto root_holder = std::make_shared<TreeNode>();
    TreeNode& root = *root_holder;
    root.id = 0;
    Rng init_rng = search.rng.split(0xf00d);
    root.plan = init_plan_state(problem.part, problem.model->arch().token_dim,
                                problem.model->schedule(), config.stabilization,
                                problem.start_token.data(), init_rng);

    double best_reward = -std::numeric_limits<double>::infinity();
    Trajectory best_plan;
    PlanEval best_eval;

    for (int iter = 1; iter <= config.max_iterations; ++iter) {
        if (config.max_denoiser_steps > 0 &&
            result.calls.step_calls >= config.max_denoiser_steps) {
            break;
        }
        TreeNode* node = select_node(&root, config);
        if (search.expandable(*node)) {
            node = search.expand(node);
        }
        const Trajectory sim_norm =
            jumpy_denoise(node->plan, config.jump_interval, search.schedule_for(*node),
                          search.ctx);
        const Trajectory sim = problem.model->norm().denormalize(sim_norm);
        const PlanEval eval = evaluate_plan_detail(sim, problem.maze);
        backpropagate(node, eval.reward);
        result.iterations = iter;
        result.trace.push_back({iter, node->id, node->depth, node->meta_action,
                                eval.reward, search.path_of(*node)});
        if (eval.reward > best_reward) {
            best_reward = eval.reward;
            best_plan = sim;
            best_eval = eval;
            result.best_iteration = iter;
        }
        if (eval.clean_success() && eval.reward >= config.early_stop_threshold) {
            result.early_stopped = true;
            break;
        }
    }

    result.plan = std::move(best_plan);
    result.reward = best_reward;
    result.eval = best_eval;
    result.tree = std::move(root_holder);
    return result;
}

PlanResult greedy_tree_plan(const PlanningProblem& problem, const SearchConfig& config,
                            int children_per_branch, std::uint64_t seed) {
    validate_config(config);
    if (children_per_branch < 1) {
        throw search_error("children per branch must be >= 1");
    }
    PlanResult result;

    DenoiseContext ctx;
    ctx.model = problem.model;
    ctx.part = &problem.part;
    ctx.steps_per_expansion = config.steps_per_expansion;
    ctx.stabilization = config.stabilization;
    ctx.causal = config.causal;
    ctx.goal_x = problem.goal_x;
    ctx.goal_y = problem.goal_y;
    ctx.counter = &result.calls;

    Rng rng(derive_seed(seed, 0x67726479ull));
    Rng init_rng = rng.split(0xf00d);
    PlanState state = init_plan_state(problem.part, problem.model->arch().token_dim,
                                      problem.model->schedule(), config.stabilization,
                                      problem.start_token.data(), init_rng);

    double best_reward = -std::numeric_limits<double>::infinity();
    Trajectory best_plan;
    PlanEval best_eval;
    int iter = 0;
    bool stop = false;

    for (int depth = 0; depth < config.subplans && !stop; ++depth) {
        double best_child_reward = -std::numeric_limits<double>::infinity();
        PlanState best_child;
        for (int j = 0; j < children_per_branch; ++j) {
            ++iter;
            const double g =
                config.guidance_set[static_cast<std::size_t>(j) % config.guidance_set.size()];
            PlanState cand = state;
            Rng cand_rng = rng.split(derive_seed(seed, depth + 1, j + 1));
            resample_open_noise(cand, problem.model->schedule(), cand_rng);
            denoise_subplan(cand, depth, g, ctx);

            GuidanceSchedule sched;
            sched.scales.assign(static_cast<std::size_t>(config.subplans), g);
            const Trajectory sim = problem.model->norm().denormalize(
                jumpy_denoise(cand, config.jump_interval, sched, ctx));
            const PlanEval eval = evaluate_plan_detail(sim, problem.maze);
            result.trace.push_back({iter, iter, depth + 1, g, eval.reward, ""});
            if (eval.reward > best_child_reward) {
                best_child_reward = eval.reward;
                best_child = std::move(cand);
            }
            if (eval.reward > best_reward) {
                best_reward = eval.reward;
                best_plan = sim;
                best_eval = eval;
                result.best_iteration = iter;
            }
            if (eval.clean_success() && eval.reward >= config.early_stop_threshold) {
                result.early_stopped = true;
                stop = true;
                break;
            }
        }
        state = std::move(best_child);
    }

    result.iterations = iter;
    result.plan = std::move(best_plan);
    result.reward = best_reward;
    result.eval = best_eval;
    return result;
}

void write_trace_csv(const std::vector<TraceRow>& trace, const std::string& path) {
    std::ofstream out(path);
    if (!out) {
        throw search_error("cannot write trace: " + path);
    }
    out << "iteration,node_id,depth,meta_action,reward,path\n";
    char buf[64];
    for (const TraceRow& row : trace) {
        std::snprintf(buf, sizeof(buf), "%.6g", row.meta_action);
        out << row.iteration << ',' << row.node_id << ',' << row.depth << ',' << buf << ',';
        std::snprintf(buf, sizeof(buf), "%.9g", row.reward);
        out << buf << ',' << row.path << '\n';
    }
}

}  // namespace mctd
