#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "mctd/cli.hpp"
#include "mctd/svg.hpp"

using namespace mctd;
namespace fs = std::filesystem;

namespace {

std::string slurp(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    REQUIRE(in.good());
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

// results.csv minus the wall-clock column (the only non-deterministic field).
std::string strip_seconds(const std::string& csv) {
    std::istringstream in(csv);
    std::string line, out;
    while (std::getline(in, line)) {
        std::istringstream ls(line);
        std::string field;
        int idx = 0;
        std::string kept;
        while (std::getline(ls, field, ',')) {
            if (idx != 6) {
                kept += field;
                kept += '|';
            }
            ++idx;
        }
        out += kept;
        out += '\n';
    }
    return out;
}

struct CliFixture {
    std::string dir = "cli_test_out";
    std::string maze_path = "cli_test_out/tiny.maze";
    std::string config_path = "cli_test_out/test.cfg";

    CliFixture() {
        fs::create_directories(dir);
        std::ofstream maze(maze_path);
        maze << "horizon=80\n"
                "plan_horizon=24\n"
                "##########\n"
                "#S.......#\n"
                "#........#\n"
                "#..####..#\n"
                "#........#\n"
                "#.......G#\n"
                "##########\n";
        maze.close();
        std::ofstream config(config_path);
        config << "version=1\n"
                  "maze=" << maze_path << "\n"
                  "out=" << dir << "\n"
                  "seed=3\n"
                  "seeds=2\n"
                  "tasks=2\n"
                  "jobs=1\n"
                  "data.episodes=30\n"
                  "model.frame_stack=4\n"
                  "model.hidden=32,32\n"
                  "model.levels=20\n"
                  "train.steps=250\n"
                  "train.batch=16\n"
                  "train.warmup=20\n"
                  "plan.subplans=3\n"
                  "plan.steps_per_expansion=4\n"
                  "plan.stabilization=2\n"
                  "plan.jump_interval=4\n"
                  "plan.max_iterations=40\n";
        config.close();
    }
};

}  // namespace

TEST_CASE("config: parsing, validation, typed getters") {
    const std::set<std::string>& keys = known_config_keys();

    CHECK_THROWS_AS(Config::parse("maze=x\n", keys), config_error);           // no version
    CHECK_THROWS_AS(Config::parse("version=1\nwat=1\n", keys), config_error);  // unknown
    CHECK_THROWS_AS(Config::parse("version=1\nseed=1\nseed=2\n", keys), config_error);
    CHECK_THROWS_AS(Config::parse("version=1\nbroken line\n", keys), config_error);

    const Config c = Config::parse(
        "version=1\n"
        "# comment\n"
        "seed=99\n"
        "train.lr=2.5e-4\n"
        "df.replans=false\n"
        "plan.guidance_set=0,0.5,1\n",
        keys);
    CHECK(c.get_u64("seed", 0) == 99);
    CHECK(c.get_double("train.lr", 0.0) == doctest::Approx(2.5e-4));
    CHECK(c.get_bool("df.replans", true) == false);
    CHECK(c.get_doubles("plan.guidance_set", {}) == std::vector<double>{0.0, 0.5, 1.0});
    CHECK(c.get_int("tasks", 5) == 5);  // fallback

    // Hash is stable and order-independent (map-backed).
    const Config c2 = Config::parse("train.lr=2.5e-4\nversion=1\nseed=99\n"
                                    "df.replans=false\nplan.guidance_set=0,0.5,1\n",
                                    keys);
    CHECK(c.hash() == c2.hash());
}

TEST_CASE("cli: full gen-data / train / eval round trip with determinism") {
    const CliFixture fix;

    // gen-data twice: byte-identical dataset files.
    REQUIRE(run_cli({"gen-data", "--config", fix.config_path}) == 0);
    const std::string data_path = fix.dir + "/tiny_data.bin";
    const std::string first = slurp(data_path);
    REQUIRE(run_cli({"gen-data", "--config", fix.config_path}) == 0);
    CHECK(first == slurp(data_path));

    // train: checkpoint + loss curve with one row per step.
    REQUIRE(run_cli({"train", "--config", fix.config_path}) == 0);
    const std::string ckpt_path = fix.dir + "/tiny_model.ckpt";
    CHECK(fs::exists(ckpt_path));
    {
        std::ifstream loss(fix.dir + "/tiny_loss.csv");
        std::string line;
        int rows = 0;
        while (std::getline(loss, line)) {
            ++rows;
        }
        CHECK(rows == 251);  // header + steps
    }
    const std::string ckpt_first = slurp(ckpt_path);
    REQUIRE(run_cli({"train", "--config", fix.config_path}) == 0);
    CHECK(ckpt_first == slurp(ckpt_path));  // bit-reproducible training

    // plan: writes plan.csv and trace.csv.
    REQUIRE(run_cli({"plan", "--config", fix.config_path, "--planner", "mctd"}) == 0);
    CHECK(fs::exists(fix.dir + "/plan.csv"));
    CHECK(fs::exists(fix.dir + "/trace.csv"));

    // eval: results + summary; deterministic modulo the wall-clock column.
    REQUIRE(run_cli({"eval", "--config", fix.config_path, "--planner", "mctd"}) == 0);
    const std::string results_a = slurp(fix.dir + "/results.csv");
    REQUIRE(run_cli({"eval", "--config", fix.config_path, "--planner", "mctd"}) == 0);
    const std::string results_b = slurp(fix.dir + "/results.csv");
    CHECK(strip_seconds(results_a) == strip_seconds(results_b));
    {
        std::ifstream results(fix.dir + "/results.csv");
        std::string line;
        int rows = 0;
        while (std::getline(results, line)) {
            if (!line.empty() && line[0] != '#') {
                ++rows;
            }
        }
        CHECK(rows == 1 + 2 * 2);  // header + tasks x seeds
    }
    CHECK(fs::exists(fix.dir + "/summary.csv"));

    // Summary statistics match an independent recomputation from raw rows.
    const std::vector<ResultRow> rows = read_results_csv(fix.dir + "/results.csv");
    const Summary summary = summarize(rows);
    double mean = 0.0;
    for (const ResultRow& row : rows) {
        mean += row.success;
    }
    mean = 100.0 * mean / static_cast<double>(rows.size());
    // Equal task counts per seed make the seed-grouped mean equal the flat mean.
    CHECK(summary.mean_success == doctest::Approx(mean));

    // plot: renders SVG, byte-identical across runs on the same csv.
    REQUIRE(run_cli({"plot", fix.dir + "/results.csv", "--out", fix.dir}) == 0);
    const std::string svg_a = slurp(fix.dir + "/results.svg");
    REQUIRE(run_cli({"plot", fix.dir + "/results.csv", "--out", fix.dir}) == 0);
    CHECK(svg_a == slurp(fix.dir + "/results.svg"));
    CHECK(svg_a.find("<svg") == 0);

    // plot a trace csv -> histogram.
    REQUIRE(run_cli({"plot", fix.dir + "/trace.csv", "--out", fix.dir}) == 0);
    CHECK(fs::exists(fix.dir + "/trace.svg"));
}

TEST_CASE("cli: exit codes for config, io, and runtime failures") {
    const CliFixture fix;
    // Unknown planner -> config error (2).
    CHECK(run_cli({"eval", "--config", fix.config_path, "--planner", "bogus"}) == 2);
    // Missing maze -> io error (4).
    CHECK(run_cli({"eval", "--maze", "no_such_maze", "--out", fix.dir}) == 4);
    // Missing checkpoint -> io (4). Fresh out dir, valid maze.
    fs::remove(fix.dir + "/tiny_model.ckpt");
    CHECK(run_cli({"eval", "--config", fix.config_path}) == 4);
    // Unknown ablation grid -> 2.
    CHECK(run_cli({"ablate", "bogus_grid", "--config", fix.config_path}) == 2);
    // Bad config file -> 2.
    const std::string bad_cfg = fix.dir + "/bad.cfg";
    std::ofstream(bad_cfg) << "version=1\nunknown_key=3\n";
    CHECK(run_cli({"eval", "--config", bad_cfg}) == 2);
    // Zero episodes -> 2.
    CHECK(run_cli({"gen-data", "--config", fix.config_path, "--seed", "1"}) == 0);
    const std::string zero_cfg = fix.dir + "/zero.cfg";
    std::ofstream(zero_cfg) << "version=1\nmaze=" << fix.maze_path
                            << "\nout=" << fix.dir << "\ndata.episodes=0\n";
    CHECK(run_cli({"gen-data", "--config", zero_cfg}) == 2);
    // Maze with a goal inside a wall -> 2.
    const std::string bad_maze = fix.dir + "/bad.maze";
    std::ofstream(bad_maze) << "horizon=10\n#####\n#S#G#\n#####\n";
    CHECK(run_cli({"plan", "--maze", bad_maze, "--out", fix.dir}) == 2);
}

TEST_CASE("svg helpers: placeholder and bars render deterministically") {
    const std::string empty = svg_placeholder("no data");
    CHECK(empty.find("no data") != std::string::npos);
    const std::vector<BarDatum> bars = {{"a", 50.0, 5.0}, {"b", 80.0, 0.0}};
    const std::string chart_a = svg_bar_chart(bars, "t", "y", 100.0);
    const std::string chart_b = svg_bar_chart(bars, "t", "y", 100.0);
    CHECK(chart_a == chart_b);
    CHECK(chart_a.find("polyline") == std::string::npos);
    CHECK(svg_bar_chart({}, "t", "y").find("no data") != std::string::npos);
}
