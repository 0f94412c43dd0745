#pragma once
// Batch front end: run one scenario or sweep an axis (UAV antennas,
// transmit power, altitude) across baselines and seeds, emitting CSV
// results and plot-data files.

#include <json.hpp>

#include <algorithm>
#include <condition_variable>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <mutex>
#include <sstream>
#include <thread>
#include <vector>

#include "uavmec/optimizer.hpp"
#include "uavmec/scenario.hpp"

namespace uavmec {

struct RunOptions {
  std::string scenario_path;
  std::string out_dir = ".";
  bool seed_set = false;
  std::uint64_t seed = 0;
  int max_iters = 30;
  double tol = 1e-4;
  std::string baseline = "full";
  bool dump_channels = false;
  int jobs = 0;  // sweep workers; 0 = hardware concurrency
  int pdhg_iters = 1200;
  int sca_iters = 8;
};

struct SweepSpec {
  std::string axis;  // uav_antennas | uav_power | altitude
  std::vector<double> values;
  std::vector<std::string> baselines = {"full"};
  std::vector<std::uint64_t> seeds = {1};
};

namespace detail {

inline Baseline parse_baseline(const std::string& name) {
  if (name == "full") return Baseline::Full;
  if (name == "no-trajectory") return Baseline::NoTrajectory;
  if (name == "no-time") return Baseline::NoTime;
  if (name == "no-rho") return Baseline::NoRho;
  throw std::runtime_error("unknown baseline '" + name + "'");
}

inline std::string fmt(double v) {
  std::ostringstream os;
  os << std::setprecision(12) << v;
  return os.str();
}

inline void write_runlog(const SolutionTrace& tr, const std::string& path) {
  std::ofstream out(path);
  out << "iteration,block,eta,residual,seconds\n";
  for (const auto& r : tr.rows)
    out << r.iteration << ',' << r.block << ',' << fmt(r.eta) << ','
        << fmt(r.residual) << ',' << fmt(r.seconds) << '\n';
}

inline void write_trajectory(const Trajectory& t, const std::string& path) {
  std::ofstream out(path);
  out << "n,x,y\n";
  for (size_t n = 0; n < t.q.size(); ++n)
    out << (n + 1) << ',' << fmt(t.q[n].x()) << ',' << fmt(t.q[n].y()) << '\n';
}

inline AlternateOptions make_ao_options(const RunOptions& o,
                                        const std::string& baseline) {
  AlternateOptions a;
  a.max_iters = o.max_iters;
  a.tol = o.tol;
  a.baseline = parse_baseline(baseline);
  a.downlink.pdhg_max_iters = o.pdhg_iters;
  a.downlink.sca_max_iters = o.sca_iters;
  return a;
}

}  // namespace detail

inline SweepSpec load_sweep(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("sweep: cannot open '" + path + "'");
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw std::runtime_error(std::string("sweep: parse failure: ") + e.what());
  }
  SweepSpec sp;
  sp.axis = j.at("axis").get<std::string>();
  if (sp.axis != "uav_antennas" && sp.axis != "uav_power" &&
      sp.axis != "altitude")
    throw std::runtime_error("sweep: invalid axis '" + sp.axis + "'");
  sp.values = j.at("values").get<std::vector<double>>();
  if (sp.values.empty()) throw std::runtime_error("sweep: empty values list");
  for (double v : sp.values)
    if (!(v > 0)) throw std::runtime_error("sweep: values must be positive");
  if (j.contains("baselines"))
    sp.baselines = j.at("baselines").get<std::vector<std::string>>();
  for (const auto& b : sp.baselines) detail::parse_baseline(b);
  if (j.contains("seeds"))
    sp.seeds = j.at("seeds").get<std::vector<std::uint64_t>>();
  if (sp.seeds.empty()) throw std::runtime_error("sweep: empty seeds list");
  return sp;
}

inline Scenario apply_axis(Scenario s, const std::string& axis, double value) {
  if (axis == "uav_antennas")
    s.L = static_cast<int>(std::lround(value));
  else if (axis == "uav_power")
    s.P_uav_max = value;
  else if (axis == "altitude")
    s.H = value;
  return s;
}

// Single run: writes runlog.csv, summary.csv and trajectory.csv under
// out_dir. Exit codes: 0 converged feasible, 2 infeasible, 1 input error.
inline int cmd_run(const RunOptions& opt) {
  Scenario s;
  try {
    s = load_scenario(opt.scenario_path);
    if (opt.seed_set) s.rng_seed = opt.seed;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  std::filesystem::create_directories(opt.out_dir);
  try {
    SolutionTrace tr = alternate(s, detail::make_ao_options(opt, opt.baseline));
    ChannelSet chans = final_channels(s, tr.final);
    FeasibilityReport audit = feasibility_audit(tr.final, chans, s);
    detail::write_runlog(tr, opt.out_dir + "/runlog.csv");
    detail::write_trajectory(tr.final.traj, opt.out_dir + "/trajectory.csv");
    if (opt.dump_channels)
      write_channel_dump(chans, opt.out_dir + "/channels.csv");
    {
      std::ofstream out(opt.out_dir + "/summary.csv");
      out << "key,value\n";
      out << "eta," << detail::fmt(tr.final.ledger.eta) << '\n';
      for (int k = 0; k < s.K; ++k)
        out << "remaining_" << k << ','
            << detail::fmt(tr.final.ledger.remaining[k]) << '\n';
      out << "iterations," << tr.iterations << '\n';
      out << "converged," << (tr.converged ? 1 : 0) << '\n';
      out << "feasible," << (audit.pass() ? 1 : 0) << '\n';
      out << "max_violation," << detail::fmt(audit.max_violation) << '\n';
    }
    std::cout << "eta " << detail::fmt(tr.final.ledger.eta) << " after "
              << tr.iterations << " iterations ("
              << (tr.converged ? "converged" : "max iters") << ", audit "
              << (audit.pass() ? "pass" : "FAIL") << ")\n";
    return 0;
  } catch (const InfeasibleError& e) {
    std::cerr << "infeasible: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}

struct SweepRow {
  double value = 0.0;
  std::string baseline;
  std::uint64_t seed = 0;
  double eta = 0.0;
  int iterations = 0;
  double seconds = 0.0;
  bool failed = false;
  std::string message;
  Trajectory traj;
};

// Sweep: one results.csv over (value, baseline, seed), a per-figure series
// file, and trajectory_<H>.csv overlays for the altitude axis.
inline int cmd_sweep(const RunOptions& opt, const std::string& sweep_path) {
  Scenario base;
  SweepSpec sp;
  try {
    base = load_scenario(opt.scenario_path);
    if (opt.seed_set) base.rng_seed = opt.seed;
    sp = load_sweep(sweep_path);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  std::filesystem::create_directories(opt.out_dir);

  std::vector<SweepRow> rows;
  for (double v : sp.values)
    for (const auto& b : sp.baselines)
      for (std::uint64_t seed : sp.seeds) {
        SweepRow r;
        r.value = v;
        r.baseline = b;
        r.seed = seed;
        rows.push_back(std::move(r));
      }

  const int workers = std::max(
      1, opt.jobs > 0 ? opt.jobs
                      : static_cast<int>(std::thread::hardware_concurrency()));
  std::mutex mu;
  size_t next = 0;
  auto work = [&] {
    for (;;) {
      size_t i;
      {
        std::lock_guard<std::mutex> lk(mu);
        if (next >= rows.size()) return;
        i = next++;
      }
      SweepRow& r = rows[i];
      const auto t0 = std::chrono::steady_clock::now();
      try {
        Scenario s = apply_axis(base, sp.axis, r.value);
        s.rng_seed = r.seed;
        SolutionTrace tr =
            alternate(s, detail::make_ao_options(opt, r.baseline));
        r.eta = tr.final.ledger.eta;
        r.iterations = tr.iterations;
        r.traj = tr.final.traj;
      } catch (const std::exception& e) {
        r.failed = true;
        r.message = e.what();
      }
      r.seconds =
          std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
              .count();
    }
  };
  {
    std::vector<std::thread> pool;
    for (int t = 0; t < workers; ++t) pool.emplace_back(work);
    for (auto& t : pool) t.join();
  }

  bool any_failed = false;
  {
    std::ofstream out(opt.out_dir + "/results.csv");
    out << "value,baseline,seed,eta,iterations,seconds\n";
    for (const auto& r : rows) {
      if (r.failed) {
        any_failed = true;
        continue;
      }
      out << detail::fmt(r.value) << ',' << r.baseline << ',' << r.seed << ','
          << detail::fmt(r.eta) << ',' << r.iterations << ','
          << detail::fmt(r.seconds) << '\n';
    }
  }
  {
    std::ofstream out(opt.out_dir + "/figure_eta_vs_" + sp.axis + ".csv");
    out << "value,baseline,median_eta\n";
    for (double v : sp.values)
      for (const auto& b : sp.baselines) {
        std::vector<double> etas;
        for (const auto& r : rows)
          if (!r.failed && r.value == v && r.baseline == b)
            etas.push_back(r.eta);
        if (etas.empty()) continue;
        std::sort(etas.begin(), etas.end());
        const double med = etas[etas.size() / 2];
        out << detail::fmt(v) << ',' << b << ',' << detail::fmt(med) << '\n';
      }
  }
  if (sp.axis == "altitude") {
    for (double v : sp.values)
      for (const auto& r : rows)
        if (!r.failed && r.value == v && r.seed == sp.seeds.front() &&
            r.baseline == sp.baselines.front()) {
          std::ostringstream name;
          name << opt.out_dir << "/trajectory_" << v << ".csv";
          detail::write_trajectory(r.traj, name.str());
          break;
        }
  }
  if (any_failed) {
    for (const auto& r : rows)
      if (r.failed)
        std::cerr << "failed: value=" << r.value << " baseline=" << r.baseline
                  << " seed=" << r.seed << ": " << r.message << "\n";
    std::cerr << "partial results written to " << opt.out_dir << "\n";
    return 2;
  }
  std::cout << "sweep complete: " << rows.size() << " runs -> " << opt.out_dir
            << "\n";
  return 0;
}

}  // namespace uavmec
