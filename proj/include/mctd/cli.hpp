#pragma once

#include <string>
#include <vector>

#include "mctd/config.hpp"
#include "mctd/denoiser.hpp"
#include "mctd/experiment.hpp"
#include "mctd/maze.hpp"

// The bench harness behind the mctd binary. Commands are callable in-process
// (tests use them directly); run_cli maps exceptions to exit codes:
// 0 ok, 2 config, 3 runtime/divergence, 4 I/O.

namespace mctd {

struct io_error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Resolves --maze: a literal path, then $MCTD_ASSET_DIR, then ./assets/mazes.
std::string resolve_maze_path(const std::string& name);

Maze maze_from_config(const Config& config);
SearchConfig search_from_config(const Config& config);
PlannerSetup setup_from_config(const Config& config);
TrainConfig train_config_from(const Config& config);

int cmd_gen_data(const Config& config);
int cmd_train(const Config& config);
int cmd_plan(const Config& config);
int cmd_eval(const Config& config);
int cmd_ablate(const std::string& grid, const Config& config);
int cmd_scale(const Config& config);
int cmd_plot(const Config& config, const std::string& csv_path);

int run_cli(const std::vector<std::string>& args);

}  // namespace mctd
