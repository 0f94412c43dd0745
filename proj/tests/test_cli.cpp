#include <catch2/catch_amalgamated.hpp>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "uavmec/cli.hpp"

using namespace uavmec;
namespace fs = std::filesystem;

namespace {

std::string small_scenario_json() {
  return R"({
    "K": 2, "L": 4, "Mx": 2, "My": 2,
    "T": 2.0, "delta": 0.5,
    "s_k": [[-2,-3],[2,-3]],
    "q_I": [-3,0], "q_F": [3,0], "s_b": [0,2]
  })";
}

std::string write_file(const std::string& path, const std::string& body) {
  std::ofstream out(path);
  out << body;
  return path;
}

std::string slurp(const std::string& path) {
  std::ifstream in(path);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

RunOptions fast_opts(const std::string& scen, const std::string& out) {
  RunOptions o;
  o.scenario_path = scen;
  o.out_dir = out;
  o.max_iters = 6;
  o.pdhg_iters = 400;
  o.sca_iters = 3;
  return o;
}

}  // namespace

TEST_CASE("cmd_run exit codes and artifacts") {
  const std::string scen = write_file("cli_scen.json", small_scenario_json());
  SECTION("valid scenario runs to exit 0 with artifacts") {
    RunOptions o = fast_opts(scen, "cli_out_run");
    REQUIRE(cmd_run(o) == 0);
    REQUIRE(fs::exists("cli_out_run/runlog.csv"));
    REQUIRE(fs::exists("cli_out_run/summary.csv"));
    REQUIRE(fs::exists("cli_out_run/trajectory.csv"));
    const std::string summary = slurp("cli_out_run/summary.csv");
    REQUIRE(summary.find("eta,") != std::string::npos);
    REQUIRE(summary.find("feasible,1") != std::string::npos);
    fs::remove_all("cli_out_run");
  }
  SECTION("nonexistent scenario file gives exit 1") {
    RunOptions o = fast_opts("no_such_file.json", "cli_out_none");
    REQUIRE(cmd_run(o) == 1);
  }
  SECTION("impossible task load gives exit 2") {
    const std::string body = R"({
      "K": 2, "L": 4, "Mx": 2, "My": 2,
      "T": 2.0, "delta": 0.5,
      "s_k": [[-2,-3],[2,-3]],
      "q_I": [-3,0], "q_F": [3,0], "s_b": [0,2],
      "Gamma": 1e9
    })";
    const std::string scen2 = write_file("cli_scen_inf.json", body);
    RunOptions o = fast_opts(scen2, "cli_out_inf");
    REQUIRE(cmd_run(o) == 2);
    fs::remove(scen2);
    fs::remove_all("cli_out_inf");
  }
  fs::remove(scen);
}

TEST_CASE("cmd_sweep shapes and determinism") {
  const std::string scen = write_file("cli_scen2.json", small_scenario_json());
  const std::string sweep = write_file("cli_sweep.json", R"({
    "axis": "uav_power",
    "values": [10, 50],
    "baselines": ["full", "no-rho"],
    "seeds": [1, 2]
  })");
  RunOptions o = fast_opts(scen, "cli_out_sweep");
  o.jobs = 2;
  REQUIRE(cmd_sweep(o, sweep) == 0);
  const std::string results = slurp("cli_out_sweep/results.csv");
  // header + |values| * |baselines| * |seeds| rows
  int rows = -1;
  for (char c : results)
    if (c == '\n') ++rows;
  REQUIRE(rows == 2 * 2 * 2);
  REQUIRE(fs::exists("cli_out_sweep/figure_eta_vs_uav_power.csv"));

  SECTION("same seed set gives byte-identical results (timing aside)") {
    RunOptions o2 = fast_opts(scen, "cli_out_sweep2");
    o2.jobs = 1;
    REQUIRE(cmd_sweep(o2, sweep) == 0);
    auto strip_time = [](const std::string& csv) {
      std::istringstream in(csv);
      std::string line, out;
      while (std::getline(in, line)) {
        const auto pos = line.rfind(',');
        out += line.substr(0, pos) + "\n";
      }
      return out;
    };
    REQUIRE(strip_time(slurp("cli_out_sweep/results.csv")) ==
            strip_time(slurp("cli_out_sweep2/results.csv")));
    fs::remove_all("cli_out_sweep2");
  }
  fs::remove_all("cli_out_sweep");
  fs::remove(scen);
  fs::remove(sweep);
}

TEST_CASE("sweep input validation") {
  const std::string scen = write_file("cli_scen3.json", small_scenario_json());
  SECTION("empty values list is an input error") {
    const std::string sweep = write_file(
        "cli_sweep_empty.json",
        R"({"axis": "uav_power", "values": []})");
    RunOptions o = fast_opts(scen, "cli_out_e");
    REQUIRE(cmd_sweep(o, sweep) == 1);
    fs::remove(sweep);
  }
  SECTION("bad axis is an input error") {
    const std::string sweep = write_file(
        "cli_sweep_axis.json",
        R"({"axis": "bandwidth", "values": [1]})");
    RunOptions o = fast_opts(scen, "cli_out_e2");
    REQUIRE(cmd_sweep(o, sweep) == 1);
    fs::remove(sweep);
  }
  SECTION("altitude sweep writes per-altitude trajectories") {
    const std::string sweep = write_file(
        "cli_sweep_alt.json",
        R"({"axis": "altitude", "values": [5, 10], "seeds": [1]})");
    RunOptions o = fast_opts(scen, "cli_out_alt");
    REQUIRE(cmd_sweep(o, sweep) == 0);
    REQUIRE(fs::exists("cli_out_alt/trajectory_5.csv"));
    REQUIRE(fs::exists("cli_out_alt/trajectory_10.csv"));
    fs::remove_all("cli_out_alt");
    fs::remove(sweep);
  }
  fs::remove(scen);
}
