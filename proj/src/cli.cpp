#include "mctd/cli.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <set>
#include <sstream>

#include <CLI11.hpp>

#include "mctd/svg.hpp"

namespace mctd {

namespace fs = std::filesystem;

std::string resolve_maze_path(const std::string& name) {
    if (fs::exists(name)) {
        return name;
    }
    if (const char* asset_dir = std::getenv("MCTD_ASSET_DIR")) {
        const std::string candidate = std::string(asset_dir) + "/" + name + ".maze";
        if (fs::exists(candidate)) {
            return candidate;
        }
    }
    const std::string local = "assets/mazes/" + name + ".maze";
    if (fs::exists(local)) {
        return local;
    }
    throw io_error("maze not found: " + name);
}

Maze maze_from_config(const Config& config) {
    const std::string maze = config.get_string("maze");
    if (maze.empty()) {
        throw config_error("missing required key: maze");
    }
    return load_maze(resolve_maze_path(maze));
}

SearchConfig search_from_config(const Config& config) {
    SearchConfig search;
    search.guidance_set = config.get_doubles("plan.guidance_set", search.guidance_set);
    search.max_iterations = config.get_int("plan.max_iterations", search.max_iterations);
    search.uct_weight = config.get_double("plan.uct_weight", search.uct_weight);
    search.children_per_node = config.get_int("plan.children", 0);
    search.jump_interval = config.get_int("plan.jump_interval", search.jump_interval);
    search.steps_per_expansion =
        config.get_int("plan.steps_per_expansion", search.steps_per_expansion);
    search.stabilization = config.get_int("plan.stabilization", search.stabilization);
    search.subplans = config.get_int("plan.subplans", search.subplans);
    search.early_stop_threshold =
        config.get_double("plan.early_stop_threshold", search.early_stop_threshold);
    search.max_denoiser_steps = config.get_u64("plan.max_denoiser_steps", 0);
    return search;
}

PlannerSetup setup_from_config(const Config& config) {
    PlannerSetup setup;
    try {
        setup.kind = planner_from_name(config.get_string("planner", "mctd"));
    } catch (const search_error& e) {
        throw config_error(e.what());
    }
    setup.search = search_from_config(config);
    setup.base.guidance_scale = config.get_double("base.guidance_scale", 0.1);
    setup.base.scale_set = config.get_doubles("base.scale_set", setup.base.scale_set);
    setup.base.samples = config.get_int("base.samples", setup.base.samples);
    setup.base.oneshot_interval =
        config.get_int("base.oneshot_interval", setup.base.oneshot_interval);
    setup.df_scale = config.get_double("df.guidance_scale", 2.0);
    setup.df_replans = config.get_bool("df.replans", true);
    setup.greedy_children = config.get_int("greedy.children", 5);
    setup.subgoal_stride = config.get_int("plan.subgoal_stride", 10);
    setup.replan_interval = config.get_int("plan.replan_interval", 50);
    return setup;
}

TrainConfig train_config_from(const Config& config) {
    TrainConfig train;
    train.steps = config.get_int("train.steps", train.steps);
    train.batch_size = config.get_int("train.batch", train.batch_size);
    train.learning_rate = config.get_double("train.lr", train.learning_rate);
    train.weight_decay = config.get_double("train.weight_decay", train.weight_decay);
    train.warmup_steps = config.get_int("train.warmup", train.warmup_steps);
    train.seed = config.get_u64("seed", 0);
    return train;
}

namespace {

std::string out_dir(const Config& config) {
    std::string out = config.get_string("out", "out");
    fs::create_directories(out);
    return out;
}

std::string dataset_path(const Config& config, const Maze& maze) {
    const std::string explicit_path = config.get_string("dataset");
    if (!explicit_path.empty()) {
        return explicit_path;
    }
    return out_dir(config) + "/" + maze.name + "_data.bin";
}

std::string checkpoint_path(const Config& config, const Maze& maze) {
    const std::string explicit_path = config.get_string("checkpoint");
    if (!explicit_path.empty()) {
        return explicit_path;
    }
    return out_dir(config) + "/" + maze.name + "_model.ckpt";
}

DenoiserArch arch_from_config(const Config& config) {
    DenoiserArch arch;
    arch.frame_stack = config.get_int("model.frame_stack", arch.frame_stack);
    arch.token_dim = config.get_int("model.token_dim", arch.token_dim);
    arch.emb_dim = config.get_int("model.emb_dim", arch.emb_dim);
    arch.goal_dim = config.get_int("model.goal_dim", arch.goal_dim);
    const std::vector<double> hidden =
        config.get_doubles("model.hidden", {128.0, 128.0});
    arch.hidden.clear();
    for (double h : hidden) {
        arch.hidden.push_back(static_cast<int>(h));
    }
    return arch;
}

BetaSchedule schedule_from_config(const Config& config) {
    // Desk-scale defaults: K=100 with a beta range chosen so alpha_bar(K) is
    // effectively zero (pure-noise initialization stays consistent).
    return build_beta_schedule(BetaKind::Linear, config.get_int("model.levels", 100),
                               config.get_double("model.beta_min", 1e-3),
                               config.get_double("model.beta_max", 0.2));
}

std::vector<std::uint64_t> seed_list(const Config& config) {
    const std::uint64_t base = config.get_u64("seed", 0);
    const int count = config.get_int("seeds", 10);
    if (count < 1) {
        throw config_error("seeds must be >= 1");
    }
    std::vector<std::uint64_t> seeds;
    for (int i = 0; i < count; ++i) {
        seeds.push_back(base + static_cast<std::uint64_t>(i));
    }
    return seeds;
}

void write_summary_csv(const std::map<std::string, Summary>& summaries,
                       const std::string& path, const std::string& config_hash) {
    std::ofstream out(path);
    if (!out) {
        throw io_error("cannot write summary: " + path);
    }
    out << "# config_hash=" << config_hash << '\n';
    out << "planner,runs,mean_success,std_success,mean_reward,mean_seconds,mean_calls,"
           "mean_iterations\n";
    char buf[64];
    for (const auto& [name, s] : summaries) {
        out << name << ',' << s.runs;
        const double vals[] = {s.mean_success, s.std_success, s.mean_reward,
                               s.mean_seconds, s.mean_calls, s.mean_iterations};
        for (double v : vals) {
            std::snprintf(buf, sizeof(buf), "%.6g", v);
            out << ',' << buf;
        }
        out << '\n';
    }
}

}  // namespace

int cmd_gen_data(const Config& config) {
    const Maze maze = maze_from_config(config);
    const int episodes = config.get_int("data.episodes", 200);
    if (episodes < 1) {
        throw config_error("data.episodes must be >= 1");
    }
    const std::uint64_t seed = config.get_u64("seed", 0);
    const int window = config.get_int("data.window", maze.plan_horizon);
    const int stride = config.get_int("data.stride", 0);
    Dataset dataset = generate_dataset(maze, episodes, Rng(derive_seed(seed, 0xda7aull)),
                                       window, stride);
    dataset.seed = seed;
    const std::string path = dataset_path(config, maze);
    save_dataset(dataset, path);
    std::printf("dataset %s: maze=%s hash=%016llx episodes=%d trajectories=%zu horizon=%d\n",
                path.c_str(), dataset.maze_name.c_str(),
                static_cast<unsigned long long>(dataset.maze_hash), episodes,
                dataset.trajectories.size(), dataset.horizon);
    return 0;
}

int cmd_train(const Config& config) {
    const Maze maze = maze_from_config(config);
    const std::string data_path = dataset_path(config, maze);
    if (!fs::exists(data_path)) {
        throw io_error("dataset not found (run gen-data first): " + data_path);
    }
    const Dataset dataset = load_dataset(data_path);
    const TrainConfig train_config = train_config_from(config);

    const DenoiserArch arch = arch_from_config(config);
    Normalization norm;
    norm.mean.assign(dataset.norm.mean.begin(), dataset.norm.mean.begin() + arch.token_dim);
    norm.stddev.assign(dataset.norm.stddev.begin(),
                       dataset.norm.stddev.begin() + arch.token_dim);
    Denoiser model(arch, schedule_from_config(config), norm,
                   derive_seed(train_config.seed, 0x1217ull));
    const std::vector<double> curve = train(model, dataset, train_config);

    const std::string ckpt = checkpoint_path(config, maze);
    save_checkpoint(model, ckpt);
    const std::string loss_path = out_dir(config) + "/" + maze.name + "_loss.csv";
    std::ofstream loss_csv(loss_path);
    if (!loss_csv) {
        throw io_error("cannot write loss curve: " + loss_path);
    }
    loss_csv << "step,loss\n";
    char buf[64];
    for (std::size_t i = 0; i < curve.size(); ++i) {
        std::snprintf(buf, sizeof(buf), "%.9g", curve[i]);
        loss_csv << i << ',' << buf << '\n';
    }
    std::printf("trained %s: steps=%zu final_loss=%.6g checkpoint=%s\n", maze.name.c_str(),
                curve.size(), curve.back(), ckpt.c_str());
    return 0;
}

int cmd_plan(const Config& config) {
    const Maze maze = maze_from_config(config);
    const std::string ckpt = checkpoint_path(config, maze);
    if (!fs::exists(ckpt)) {
        throw io_error("checkpoint not found (run train first): " + ckpt);
    }
    const Denoiser model = load_checkpoint(ckpt);
    const PlannerSetup setup = setup_from_config(config);
    const std::uint64_t seed = config.get_u64("seed", 0);
    const int task_id = config.get_int("tasks", 0);
    const std::vector<Task> tasks = derive_tasks(maze, std::max(1, task_id + 1));
    const Task task = tasks[static_cast<std::size_t>(task_id)];

    const PlanningProblem problem = make_problem(maze, task, model, setup.search.subplans);
    PlanResult result;
    switch (setup.kind) {
        case PlannerKind::Greedy:
            result = greedy_tree_plan(problem, setup.search, setup.greedy_children, seed);
            break;
        case PlannerKind::Diffuser:
            result = diffuser_oneshot(problem, setup.base.guidance_scale,
                                      setup.base.oneshot_interval, seed);
            break;
        case PlannerKind::RandomSearch:
            result = random_search(problem, setup.base, seed);
            break;
        case PlannerKind::DiffusionForcing:
            result = diffusion_forcing_plan(problem, setup.df_scale, setup.search, seed);
            break;
        default:
            result = mctd_plan(problem, setup.search, seed);
            break;
    }
    const EpisodeOutcome outcome =
        execute_plan(problem.maze, result.plan, setup.subgoal_stride);

    const std::string dir = out_dir(config);
    std::ofstream plan_csv(dir + "/plan.csv");
    plan_csv << "t,px,py,vx,vy\n";
    char buf[64];
    for (int n = 0; n < result.plan.horizon; ++n) {
        plan_csv << n;
        for (int d = 0; d < result.plan.dim; ++d) {
            std::snprintf(buf, sizeof(buf), "%.9g", result.plan.token(n)[d]);
            plan_csv << ',' << buf;
        }
        plan_csv << '\n';
    }
    write_trace_csv(result.trace, dir + "/trace.csv");
    std::printf(
        "plan %s task=%d: reward=%.4f iterations=%d early_stop=%d calls=%llu "
        "executed_success=%d steps=%d\n",
        maze.name.c_str(), task_id, result.reward, result.iterations,
        result.early_stopped ? 1 : 0,
        static_cast<unsigned long long>(result.calls.step_calls), outcome.success ? 1 : 0,
        outcome.steps);
    return 0;
}

int cmd_eval(const Config& config) {
    const Maze maze = maze_from_config(config);
    const std::string ckpt = checkpoint_path(config, maze);
    if (!fs::exists(ckpt)) {
        throw io_error("checkpoint not found (run train first): " + ckpt);
    }
    const Denoiser model = load_checkpoint(ckpt);
    const PlannerSetup setup = setup_from_config(config);
    const int tasks = config.get_int("tasks", 5);
    const int jobs = config.get_int("jobs", 1);
    const int trials = config.get_int("trials", 1);
    const std::vector<std::uint64_t> seeds = seed_list(config);

    std::vector<ResultRow> rows = run_many(maze, model, setup, tasks, seeds, jobs);
    for (int extra = 1; extra < trials; ++extra) {
        // Pointmaze protocol is one trial; more take the best outcome per run.
        std::vector<std::uint64_t> shifted;
        for (std::uint64_t s : seeds) {
            shifted.push_back(derive_seed(s, 0x7472ull, static_cast<std::uint64_t>(extra)));
        }
        const std::vector<ResultRow> retry = run_many(maze, model, setup, tasks, shifted, jobs);
        for (std::size_t i = 0; i < rows.size(); ++i) {
            rows[i].success = std::max(rows[i].success, retry[i].success);
        }
    }

    const std::string dir = out_dir(config);
    write_results_csv(rows, dir + "/results.csv", config.hash());
    std::map<std::string, Summary> summaries;
    summaries[planner_name(setup.kind)] = summarize(rows);
    write_summary_csv(summaries, dir + "/summary.csv", config.hash());
    const Summary& s = summaries[planner_name(setup.kind)];
    std::printf("eval %s %s: success=%.1f±%.1f reward=%.4f seconds=%.2f calls=%.0f iters=%.1f\n",
                maze.name.c_str(), planner_name(setup.kind).c_str(), s.mean_success,
                s.std_success, s.mean_reward, s.mean_seconds, s.mean_calls,
                s.mean_iterations);
    return 0;
}

int cmd_ablate(const std::string& grid, const Config& config) {
    static const std::set<std::string> grids = {"greedy",      "meta_action", "subplan",
                                                "causal_tree", "uct_w",       "jumpiness"};
    if (grids.count(grid) == 0) {
        throw config_error("unknown ablation grid: " + grid);
    }
    const Maze maze = maze_from_config(config);
    const std::string ckpt = checkpoint_path(config, maze);
    if (!fs::exists(ckpt)) {
        throw io_error("checkpoint not found (run train first): " + ckpt);
    }
    const Denoiser model = load_checkpoint(ckpt);
    const PlannerSetup base = setup_from_config(config);
    const int tasks = config.get_int("tasks", 5);
    const int jobs = config.get_int("jobs", 1);
    const std::vector<std::uint64_t> seeds = seed_list(config);

    struct CellSpec {
        std::string label;
        PlannerSetup setup;
    };
    std::vector<CellSpec> cells;
    auto mctd_cell = [&](const std::string& label) {
        CellSpec cell{label, base};
        cell.setup.kind = PlannerKind::Mctd;
        return cell;
    };

    if (grid == "greedy") {
        cells.push_back(mctd_cell("mctd"));
        for (int children : {5, 10, 15, 20}) {
            CellSpec cell{"greedy_" + std::to_string(children), base};
            cell.setup.kind = PlannerKind::Greedy;
            cell.setup.greedy_children = children;
            cells.push_back(cell);
        }
    } else if (grid == "meta_action") {
        const std::vector<std::vector<double>> sets = {
            {0.0, 0.02, 0.05, 0.07, 0.1},
            {0.0, 0.1, 0.5, 1.0, 2.0},
            {0.5, 1.0, 2.0, 3.0, 4.0},
            {4.0, 5.0, 6.0, 7.0, 8.0},
            {0.1, 0.1, 1.0, 10.0, 100.0},
        };
        for (std::size_t i = 0; i < sets.size(); ++i) {
            CellSpec cell = mctd_cell("set" + std::to_string(i + 1));
            cell.setup.search.guidance_set = sets[i];
            cells.push_back(cell);
        }
    } else if (grid == "subplan") {
        for (int s : {1, 3, 5, 20}) {
            CellSpec cell = mctd_cell("S" + std::to_string(s));
            cell.setup.search.subplans = s;
            cells.push_back(cell);
        }
    } else if (grid == "causal_tree") {
        CellSpec mctd = mctd_cell("mctd");
        CellSpec mctd_nc = mctd_cell("mctd_no_causal");
        mctd_nc.setup.kind = PlannerKind::MctdNoCausal;
        CellSpec df{"diffusion_forcing", base};
        df.setup.kind = PlannerKind::DiffusionForcing;
        df.setup.df_replans = false;
        CellSpec df_nc{"df_no_causal", base};
        df_nc.setup.kind = PlannerKind::DfNoCausal;
        df_nc.setup.df_replans = false;
        cells = {mctd, mctd_nc, df, df_nc};
    } else if (grid == "uct_w") {
        for (double w : {0.0, 1.4142135623730951, 3.0, 5.0, 10.0}) {
            char label[32];
            std::snprintf(label, sizeof(label), "W%.4g", w);
            CellSpec cell = mctd_cell(label);
            cell.setup.search.uct_weight = w;
            cells.push_back(cell);
        }
    } else if (grid == "jumpiness") {
        const int k = model.schedule().levels;
        for (int c : {1, 5, 10, 20, 50}) {
            CellSpec cell = mctd_cell("C" + std::to_string(c));
            cell.setup.search.jump_interval = c;
            cells.push_back(cell);
        }
        CellSpec oneshot = mctd_cell("one-shot");
        oneshot.setup.search.jump_interval = k;
        cells.push_back(oneshot);
    } else {
        throw config_error("unknown ablation grid: " + grid);
    }

    const std::string dir = out_dir(config);
    std::vector<ResultRow> all_rows;
    std::ofstream cell_csv(dir + "/" + grid + "_cells.csv");
    if (!cell_csv) {
        throw io_error("cannot write ablation cells csv");
    }
    cell_csv << "# config_hash=" << config.hash() << '\n';
    cell_csv << "cell,runs,mean_success,std_success,mean_seconds,mean_iterations,mean_calls\n";
    std::vector<BarDatum> bars;
    for (const CellSpec& cell : cells) {
        std::vector<ResultRow> rows = run_many(maze, model, cell.setup, tasks, seeds, jobs);
        for (ResultRow& row : rows) {
            row.planner = cell.label;
        }
        const Summary s = summarize(rows);
        char buf[160];
        std::snprintf(buf, sizeof(buf), "%s,%d,%.6g,%.6g,%.6g,%.6g,%.6g", cell.label.c_str(),
                      s.runs, s.mean_success, s.std_success, s.mean_seconds,
                      s.mean_iterations, s.mean_calls);
        cell_csv << buf << '\n';
        std::printf("ablate %s %s: success=%.1f±%.1f seconds=%.2f searches=%.1f\n",
                    grid.c_str(), cell.label.c_str(), s.mean_success, s.std_success,
                    s.mean_seconds, s.mean_iterations);
        bars.push_back({cell.label, s.mean_success, s.std_success});
        all_rows.insert(all_rows.end(), rows.begin(), rows.end());
    }
    write_results_csv(all_rows, dir + "/" + grid + "_runs.csv", config.hash());
    write_text_file(dir + "/" + grid + ".svg",
                    svg_bar_chart(bars, "ablation: " + grid, "success %", 105.0));
    return 0;
}

int cmd_scale(const Config& config) {
    const Maze maze = maze_from_config(config);
    const std::string ckpt = checkpoint_path(config, maze);
    if (!fs::exists(ckpt)) {
        throw io_error("checkpoint not found (run train first): " + ckpt);
    }
    const Denoiser model = load_checkpoint(ckpt);
    const PlannerSetup base = setup_from_config(config);
    const int tasks = config.get_int("tasks", 5);
    const int jobs = config.get_int("jobs", 1);
    const std::vector<std::uint64_t> seeds = seed_list(config);
    const std::vector<std::uint64_t> budgets =
        config.get_u64s("scale.budgets", {150, 300, 600, 1200, 2400});
    for (std::size_t i = 1; i < budgets.size(); ++i) {
        if (budgets[i] <= budgets[i - 1]) {
            throw config_error("scale.budgets must be strictly increasing");
        }
    }
    const int rs_interval = config.get_int("scale.rs_oneshot_interval", 10);
    const int rs_steps = static_cast<int>(jumpy_step_levels(model.schedule().levels,
                                                            rs_interval).size()) - 1;

    const std::string dir = out_dir(config);
    std::ofstream csv(dir + "/scaling.csv");
    if (!csv) {
        throw io_error("cannot write scaling csv");
    }
    csv << "# config_hash=" << config.hash() << '\n';
    csv << "budget,planner,mean_success,std_success,mean_seconds,mean_calls\n";

    std::vector<LineSeries> success_series(2);
    std::vector<LineSeries> runtime_series(2);
    success_series[0].name = "mctd";
    success_series[1].name = "random_search";
    runtime_series[0].name = "mctd";
    runtime_series[1].name = "random_search";

    char buf[160];
    for (std::uint64_t budget : budgets) {
        PlannerSetup mctd_setup = base;
        mctd_setup.kind = PlannerKind::Mctd;
        mctd_setup.search.max_denoiser_steps = budget;
        mctd_setup.search.max_iterations = 1000000;
        const Summary sm = summarize(run_many(maze, model, mctd_setup, tasks, seeds, jobs));

        PlannerSetup rs_setup = base;
        rs_setup.kind = PlannerKind::RandomSearch;
        rs_setup.base.oneshot_interval = rs_interval;
        rs_setup.base.samples = std::max(1, static_cast<int>(budget) / rs_steps);
        rs_setup.base.max_denoiser_steps = budget;
        const Summary sr = summarize(run_many(maze, model, rs_setup, tasks, seeds, jobs));

        std::snprintf(buf, sizeof(buf), "%llu,mctd,%.6g,%.6g,%.6g,%.6g",
                      static_cast<unsigned long long>(budget), sm.mean_success,
                      sm.std_success, sm.mean_seconds, sm.mean_calls);
        csv << buf << '\n';
        std::snprintf(buf, sizeof(buf), "%llu,random_search,%.6g,%.6g,%.6g,%.6g",
                      static_cast<unsigned long long>(budget), sr.mean_success,
                      sr.std_success, sr.mean_seconds, sr.mean_calls);
        csv << buf << '\n';
        std::printf("scale budget=%llu: mctd=%.1f%% (%.2fs, %.0f calls) rs=%.1f%% (%.2fs)\n",
                    static_cast<unsigned long long>(budget), sm.mean_success,
                    sm.mean_seconds, sm.mean_calls, sr.mean_success, sr.mean_seconds);

        success_series[0].x.push_back(static_cast<double>(budget));
        success_series[0].y.push_back(sm.mean_success);
        success_series[1].x.push_back(static_cast<double>(budget));
        success_series[1].y.push_back(sr.mean_success);
        runtime_series[0].x.push_back(static_cast<double>(budget));
        runtime_series[0].y.push_back(sm.mean_seconds);
        runtime_series[1].x.push_back(static_cast<double>(budget));
        runtime_series[1].y.push_back(sr.mean_seconds);
    }
    write_text_file(dir + "/scaling.svg",
                    svg_line_panels({success_series, runtime_series},
                                    {"success rate (%)", "runtime (s)"},
                                    "denoiser-call budget"));
    return 0;
}

int cmd_plot(const Config& config, const std::string& csv_path) {
    if (!fs::exists(csv_path)) {
        throw io_error("csv not found: " + csv_path);
    }
    std::ifstream in(csv_path);
    std::string line;
    std::string header;
    while (std::getline(in, line)) {
        if (!line.empty() && line[0] != '#') {
            header = line;
            break;
        }
    }
    const std::string dir = out_dir(config);
    const std::string out_path =
        dir + "/" + fs::path(csv_path).stem().string() + ".svg";

    if (header.rfind("maze,planner", 0) == 0) {
        const std::vector<ResultRow> rows = read_results_csv(csv_path);
        std::map<std::string, std::vector<ResultRow>> by_planner;
        for (const ResultRow& row : rows) {
            by_planner[row.planner].push_back(row);
        }
        std::vector<BarDatum> bars;
        for (const auto& [name, group] : by_planner) {
            const Summary s = summarize(group);
            bars.push_back({name, s.mean_success, s.std_success});
        }
        write_text_file(out_path, bars.empty()
                                      ? svg_placeholder("no results")
                                      : svg_bar_chart(bars, "success by planner",
                                                      "success %", 105.0));
    } else if (header.rfind("budget,planner", 0) == 0) {
        std::map<std::string, LineSeries> success;
        std::map<std::string, LineSeries> runtime;
        while (std::getline(in, line)) {
            if (line.empty() || line[0] == '#') {
                continue;
            }
            std::istringstream ls(line);
            std::string field;
            std::getline(ls, field, ',');
            const double budget = std::stod(field);
            std::string planner;
            std::getline(ls, planner, ',');
            std::getline(ls, field, ',');
            const double succ = std::stod(field);
            std::getline(ls, field, ',');
            std::getline(ls, field, ',');
            const double secs = std::stod(field);
            success[planner].name = planner;
            success[planner].x.push_back(budget);
            success[planner].y.push_back(succ) ;
            runtime[planner].name = planner;
            runtime[planner].x.push_back(budget);
            runtime[planner].y.push_back(secs);
        }
        std::vector<LineSeries> s1, s2;
        for (auto& [k, v] : success) s1.push_back(v);
        for (auto& [k, v] : runtime) s2.push_back(v);
        write_text_file(out_path, svg_line_panels({s1, s2},
                                                  {"success rate (%)", "runtime (s)"},
                                                  "budget"));
    } else if (header.rfind("iteration,node_id", 0) == 0) {
        std::vector<double> depths;
        while (std::getline(in, line)) {
            if (line.empty() || line[0] == '#') {
                continue;
            }
            std::istringstream ls(line);
            std::string field;
            std::getline(ls, field, ',');
            std::getline(ls, field, ',');
            std::getline(ls, field, ',');
            depths.push_back(std::stod(field));
        }
        write_text_file(out_path,
                        depths.empty() ? svg_placeholder("empty trace")
                                       : svg_histogram(depths, 8, "expansion depth"));
    } else if (header.empty()) {
        write_text_file(out_path, svg_placeholder("empty csv"));
    } else {
        throw config_error("unrecognized csv schema: " + header);
    }
    std::printf("plot %s -> %s\n", csv_path.c_str(), out_path.c_str());
    return 0;
}

int run_cli(const std::vector<std::string>& args) {
    CLI::App app{"mctd bench harness"};
    app.require_subcommand(1);

    std::string config_path;
    std::string maze_name;
    std::string planner;
    std::string out;
    std::string csv_path;
    std::string grid;
    int seed = -1;
    int jobs = -1;

    auto add_common = [&](CLI::App* cmd) {
        cmd->add_option("--config", config_path, "config file (key=value, version=1)");
        cmd->add_option("--seed", seed, "base seed");
        cmd->add_option("--out", out, "output directory");
        cmd->add_option("--maze", maze_name, "maze name or path");
        cmd->add_option("--planner", planner, "planner name");
        cmd->add_option("--jobs", jobs, "worker threads");
    };

    CLI::App* gen = app.add_subcommand("gen-data", "generate an offline dataset");
    CLI::App* train_cmd = app.add_subcommand("train", "train the denoiser");
    CLI::App* plan = app.add_subcommand("plan", "plan one episode and dump plan/trace");
    CLI::App* eval = app.add_subcommand("eval", "seed-averaged evaluation");
    CLI::App* ablate = app.add_subcommand("ablate", "run an ablation grid");
    CLI::App* scale_cmd = app.add_subcommand("scale", "inference-time scaling sweep");
    CLI::App* plot = app.add_subcommand("plot", "render SVG charts from a results csv");
    for (CLI::App* cmd : {gen, train_cmd, plan, eval, ablate, scale_cmd, plot}) {
        add_common(cmd);
    }
    ablate->add_option("grid", grid,
                       "greedy|meta_action|subplan|causal_tree|uct_w|jumpiness")
        ->required();
    plot->add_option("csv", csv_path, "input csv")->required();

    try {
        std::vector<const char*> argv;
        argv.push_back("mctd");
        for (const std::string& a : args) {
            argv.push_back(a.c_str());
        }
        app.parse(static_cast<int>(argv.size()), argv.data());
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }

    try {
        Config config;
        if (!config_path.empty()) {
            config = Config::load(config_path, known_config_keys());
        } else {
            config.set("version", "1");
        }
        if (!maze_name.empty()) {
            config.set("maze", maze_name);
        }
        if (!planner.empty()) {
            config.set("planner", planner);
        }
        if (!out.empty()) {
            config.set("out", out);
        }
        if (seed >= 0) {
            config.set("seed", std::to_string(seed));
        }
        if (jobs >= 0) {
            config.set("jobs", std::to_string(jobs));
        }

        if (gen->parsed()) {
            return cmd_gen_data(config);
        }
        if (train_cmd->parsed()) {
            return cmd_train(config);
        }
        if (plan->parsed()) {
            return cmd_plan(config);
        }
        if (eval->parsed()) {
            return cmd_eval(config);
        }
        if (ablate->parsed()) {
            return cmd_ablate(grid, config);
        }
        if (scale_cmd->parsed()) {
            return cmd_scale(config);
        }
        if (plot->parsed()) {
            return cmd_plot(config, csv_path);
        }
        return 2;
    } catch (const config_error& e) {
        std::fprintf(stderr, "config error: %s\n", e.what());
        return 2;
    } catch (const maze_error& e) {
        std::fprintf(stderr, "maze error: %s\n", e.what());
        return 2;
    } catch (const io_error& e) {
        std::fprintf(stderr, "io error: %s\n", e.what());
        return 4;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 3;
    }
}

}  // namespace mctd
