#pragma once
// Alternating-optimization driver over the four blocks, energy accounting,
// and the feasibility audit against the original problem constraints.

#include <chrono>
#include <cmath>
#include <string>
#include <vector>

#include "uavmec/channel.hpp"
#include "uavmec/downlink.hpp"
#include "uavmec/resource.hpp"
#include "uavmec/scenario.hpp"
#include "uavmec/trajectory.hpp"
#include "uavmec/uplink.hpp"

namespace uavmec {

struct EnergyLedger {
  std::vector<double> harvested_total;  // [k] (J)
  std::vector<double> compute_total;    // [k]
  std::vector<double> transmit_total;   // [k]
  std::vector<double> remaining;        // [k]
  double eta = 0.0;                     // min over k
};

inline EnergyLedger energy_ledger(const Allocation& alloc,
                                  const DownlinkSolution& dl,
                                  const ChannelSet& chans, const Scenario& s) {
  EnergyLedger led;
  led.harvested_total.assign(s.K, 0.0);
  led.compute_total.assign(s.K, 0.0);
  led.transmit_total.assign(s.K, 0.0);
  led.remaining.assign(s.K, 0.0);
  led.eta = kInf;
  for (int k = 0; k < s.K; ++k) {
    for (int n = 0; n < s.N; ++n) {
      led.harvested_total[k] +=
          harvested_energy(dl.rho[n][k], chans.h_ku[k][n], dl.w[n],
                           s.sigma_k2[k], s.zeta_k[k], s.t_d);
      led.compute_total[k] += local_compute_energy(alloc.L_c[n][k], s.C_k[k],
                                                   s.varsigma_k[k], s.delta);
      led.transmit_total[k] += alloc.E[n][k];
    }
    led.remaining[k] =
        led.harvested_total[k] - led.compute_total[k] - led.transmit_total[k];
    led.eta = std::min(led.eta, led.remaining[k]);
  }
  return led;
}

struct Solution {
  Trajectory traj;
  UplinkBeams beams;
  Allocation alloc;
  DownlinkSolution downlink;
  EnergyLedger ledger;
};

struct FeasibilityEntry {
  std::string name;
  double violation = 0.0;  // natural units; <= 0 means satisfied
};

struct FeasibilityReport {
  std::vector<FeasibilityEntry> entries;
  double max_violation = 0.0;
  bool pass(double tol = 1e-6) const { return max_violation <= tol; }
  double of(const std::string& key) const {
    double v = -kInf;
    for (const auto& e : entries)
      if (e.name.find(key) != std::string::npos)
        v = std::max(v, e.violation);
    return v;
  }
};

// Re-checks every constraint of the original problem from the physics
// formulas, independent of any solver state.
inline FeasibilityReport feasibility_audit(const Solution& sol,
                                           const ChannelSet& chans,
                                           const Scenario& s) {
  FeasibilityReport rep;
  auto add = [&](const std::string& name, double viol) {
    rep.entries.push_back({name, viol});
    rep.max_violation = std::max(rep.max_violation, viol);
  };
  const auto& a = sol.alloc;
  const auto& dl = sol.downlink;
  const auto& tr = sol.traj;

  double v_mob = -kInf;
  for (int n = 0; n + 1 < s.N; ++n)
    v_mob = std::max(v_mob, (tr.q[n + 1] - tr.q[n]).norm() - s.delta * s.Vmax);
  add("(1) mobility step", v_mob);
  add("(2) endpoints", std::max((tr.q[0] - s.q_I).norm(),
                                (tr.q[s.N - 1] - s.q_F).norm()));

  double v_task = -kInf, v_lc = -kInf, v_rate = -kInf, v_dlrate = -kInf;
  double v_pk = -kInf, v_rho = -kInf, v_time = -kInf, v_eta = -kInf;
  double v_relay_sum = -kInf, v_relay_rate = -kInf, v_puav = -kInf;
  double v_wpow = -kInf;
  for (int n = 0; n < s.N; ++n) {
    v_time = std::max(v_time, a.t_o[n] + a.t_u[n] - (s.delta - s.t_d));
    v_time = std::max(v_time, -a.t_o[n]);
    v_time = std::max(v_time, -a.t_u[n]);
    std::vector<Eigen::VectorXcd> h_slot(s.K);
    for (int k = 0; k < s.K; ++k) h_slot[k] = chans.h_ku[k][n];
    std::vector<double> E_slot(s.K);
    for (int k = 0; k < s.K; ++k) E_slot[k] = a.E[n][k];
    double sum_lo = 0.0;
    for (int k = 0; k < s.K; ++k) {
      v_task = std::max(v_task, s.Gamma - a.L_c[n][k] - a.L_o[n][k]);
      v_lc = std::max(v_lc,
                      a.L_c[n][k] - s.delta * s.F_k_max[k] / s.C_k[k]);
      v_pk = std::max(v_pk, a.E[n][k] - s.P_k_max[k] * a.t_o[n]);
      v_pk = std::max(v_pk, -a.E[n][k]);
      v_rho = std::max(v_rho, dl.rho[n][k] - 1.0);
      v_rho = std::max(v_rho, -dl.rho[n][k]);
      sum_lo += a.L_o[n][k];
      // (11): uplink offload bits, relative slack in bits
      double bits_cap = 0.0;
      if (a.t_o[n] > 0.0 && a.E[n][k] > 0.0) {
        const double r = uplink_ge_sinr(E_slot, k, a.t_o[n],
                                        sol.beams.v[k][n], h_slot, s.sigma2);
        bits_cap = a.t_o[n] * s.B * std::log2(1.0 + r);
      }
      v_rate = std::max(v_rate, (a.L_o[n][k] - bits_cap) /
                                    std::max(1.0, a.L_o[n][k]));
      // (14): returned-results bits through the downlink SINR
      const double ru = downlink_sinr(dl.rho[n][k], chans.h_ku[k][n], dl.w[n],
                                      k, s.sigma_k2[k], s.delta_k2[k]);
      const double ret_cap = s.t_d * s.B * std::log2(1.0 + ru);
      v_dlrate = std::max(v_dlrate, (s.theta * a.L_o[n][k] - ret_cap) /
                                        std::max(1.0, s.theta * a.L_o[n][k]));
    }
    // (13)/(21c)
    double sum_loui = 0.0, sum_euav = 0.0;
    for (size_t i = 0; i < a.L_ou_i[n].size(); ++i) {
      sum_loui += a.L_ou_i[n][i];
      sum_euav += a.E_uav_i[n][i];
      const double bits =
          (a.t_u[n] > 0.0)
              ? a.t_u[n] * s.B *
                    std::log2(1.0 + sol.beams.lambda[n][i] * a.E_uav_i[n][i] /
                                        (a.t_u[n] * chans.d_ub[n] *
                                         chans.d_ub[n] * s.sigma2))
              : 0.0;
      v_relay_rate = std::max(v_relay_rate, (a.L_ou_i[n][i] - bits) /
                                                std::max(1.0, a.L_ou_i[n][i]));
    }
    v_relay_sum = std::max(v_relay_sum,
                           (sum_lo - a.L_ou[n]) / std::max(1.0, sum_lo));
    v_relay_sum = std::max(
        v_relay_sum, (a.L_ou[n] - sum_loui) / std::max(1.0, a.L_ou[n]));
    v_puav = std::max(v_puav, sum_euav - s.P_uav_max * a.t_u[n]);
    double wpow = 0.0;
    for (int k = 0; k < s.K; ++k) wpow += dl.w[n][k].squaredNorm();
    v_wpow = std::max(v_wpow, wpow - s.P_uav_max);
  }
  const EnergyLedger led = energy_ledger(a, dl, chans, s);
  for (int k = 0; k < s.K; ++k)
    v_eta = std::max(v_eta, sol.ledger.eta - led.remaining[k]);

  add("(8) task bits", v_task);
  add("(9) local compute cap", v_lc);
  add("(11) uplink rate bits (rel)", v_rate);
  add("(13)/(21c) relay bit bookkeeping (rel)", v_relay_sum);
  add("(21d) relay sub-channel bits (rel)", v_relay_rate);
  add("(21e) UAV relay power", v_puav);
  add("(14) returned-results bits (rel)", v_dlrate);
  add("(18c) eta vs remaining energy", v_eta);
  add("(19a) time budget", v_time);
  add("(18g) GE power", v_pk);
  add("(24) downlink power", v_wpow);
  add("(18i) rho range", v_rho);
  return rep;
}

enum class Baseline { Full, NoTrajectory, NoTime, NoRho };

inline const char* baseline_name(Baseline b) {
  switch (b) {
    case Baseline::Full: return "full";
    case Baseline::NoTrajectory: return "no-trajectory";
    case Baseline::NoTime: return "no-time";
    case Baseline::NoRho: return "no-rho";
  }
  return "full";
}

struct AlternateOptions {
  int max_iters = 30;
  double tol = 1e-4;
  Baseline baseline = Baseline::Full;
  DownlinkOptions downlink;
};

struct TraceRow {
  int iteration = 0;
  std::string block;
  double eta = 0.0;
  double residual = 0.0;  // solver certificate / violation measure
  double seconds = 0.0;
};

struct SolutionTrace {
  std::vector<TraceRow> rows;
  Solution final;
  bool converged = false;
  int iterations = 0;
  std::string message;
};

namespace detail {

inline ResourceInputs build_resource_inputs(const Scenario& s,
                                            const ChannelSet& chans,
                                            const UplinkBeams& beams,
                                            const DownlinkSolution& dl) {
  ResourceInputs in;
  in.s = &s;
  in.g.assign(s.K, std::vector<double>(s.N));
  in.E_har.assign(s.K, std::vector<double>(s.N));
  in.R_dl.assign(s.K, std::vector<double>(s.N));
  for (int k = 0; k < s.K; ++k)
    for (int n = 0; n < s.N; ++n) {
      in.g[k][n] = std::norm(beams.v[k][n].dot(chans.h_ku[k][n]));
      in.E_har[k][n] =
          harvested_energy(dl.rho[n][k], chans.h_ku[k][n], dl.w[n],
                           s.sigma_k2[k], s.zeta_k[k], s.t_d);
      const double ru = downlink_sinr(dl.rho[n][k], chans.h_ku[k][n], dl.w[n],
                                      k, s.sigma_k2[k], s.delta_k2[k]);
      in.R_dl[k][n] = s.t_d * s.B * std::log2(1.0 + ru) / s.theta;
    }
  in.lambda = beams.lambda;
  in.d_ub = chans.d_ub;
  return in;
}

inline DownlinkInputs build_downlink_inputs(const Scenario& s,
                                            const ChannelSet& chans,
                                            const Allocation& alloc) {
  DownlinkInputs in;
  in.s = &s;
  in.h = chans.h_ku;
  in.L_o = alloc.L_o;
  in.E_total.assign(s.N, std::vector<double>(s.K, 0.0));
  for (int n = 0; n < s.N; ++n)
    for (int k = 0; k < s.K; ++k)
      in.E_total[n][k] = alloc.E[n][k] +
                         local_compute_energy(alloc.L_c[n][k], s.C_k[k],
                                              s.varsigma_k[k], s.delta);
  return in;
}

inline TrajectoryInputs build_trajectory_inputs(const Scenario& s,
                                                const ChannelSet& chans,
                                                const UplinkBeams& beams,
                                                const Allocation& alloc,
                                                const DownlinkSolution& dl) {
  TrajectoryInputs in;
  in.s = &s;
  in.zf_gain.assign(s.K, std::vector<double>(s.N));
  in.dl_own.assign(s.K, std::vector<double>(s.N));
  in.dl_intf.assign(s.K, std::vector<double>(s.N, 0.0));
  for (int k = 0; k < s.K; ++k)
    for (int n = 0; n < s.N; ++n) {
      in.zf_gain[k][n] = std::norm(beams.v[k][n].dot(chans.hbar_ku[k][n]));
      for (int j = 0; j < s.K; ++j) {
        const double p = std::norm(chans.hbar_ku[k][n].dot(dl.w[n][j]));
        if (j == k)
          in.dl_own[k][n] = p;
        else
          in.dl_intf[k][n] += p;
      }
    }
  in.rho = dl.rho;
  in.E_k = alloc.E;
  in.L_o = alloc.L_o;
  in.t_o = alloc.t_o;
  in.t_u = alloc.t_u;
  in.L_ou_i = alloc.L_ou_i;
  in.E_uav_i = alloc.E_uav_i;
  in.lambda = beams.lambda;
  in.E_total.assign(s.N, std::vector<double>(s.K, 0.0));
  for (int n = 0; n < s.N; ++n)
    for (int k = 0; k < s.K; ++k)
      in.E_total[n][k] = alloc.E[n][k] +
                         local_compute_energy(alloc.L_c[n][k], s.C_k[k],
                                              s.varsigma_k[k], s.delta);
  return in;
}

// Feasible starting downlink state: matched beams with equal power split.
inline DownlinkSolution initial_downlink(const Scenario& s,
                                         const ChannelSet& chans,
                                         double rho0) {
  DownlinkSolution dl;
  dl.w.assign(s.N, std::vector<Eigen::VectorXcd>(s.K));
  dl.W.assign(s.N, std::vector<Eigen::MatrixXcd>(s.K));
  dl.rho.assign(s.N, std::vector<double>(s.K, rho0));
  dl.rho_tilde.assign(s.N, std::vector<double>(s.K, std::log(rho0)));
  dl.Omega.assign(s.N, std::vector<double>(s.K, 0.0));
  for (int n = 0; n < s.N; ++n)
    for (int k = 0; k < s.K; ++k) {
      const auto& h = chans.h_ku[k][n];
      dl.w[n][k] = std::sqrt(s.P_uav_max / s.K) * h / h.norm();
      dl.W[n][k] = dl.w[n][k] * dl.w[n][k].adjoint();
    }
  for (int n = 0; n < s.N; ++n)
    for (int k = 0; k < s.K; ++k) {
      double pk = s.sigma_k2[k];
      for (int j = 0; j < s.K; ++j)
        pk += std::norm(chans.h_ku[k][n].dot(dl.w[n][j]));
      dl.Omega[n][k] = std::log(pk);
    }
  return dl;
}

}  // namespace detail

// Alternating optimization: channels -> ZF/SVD beams (closed form) ->
// resource allocation -> downlink SWIPT -> trajectory -> channel refresh.
// The loop always ends right after a downlink solve so the final state is
// consistent with channels synthesized at the final trajectory.
inline SolutionTrace alternate(const Scenario& s,
                               const AlternateOptions& opt = {}) {
  {
    auto rep = validate(s);
    if (!rep.empty())
      throw std::invalid_argument("alternate: invalid scenario: " + rep[0]);
  }
  using clock = std::chrono::steady_clock;
  const auto t0 = clock::now();
  auto secs = [&] {
    return std::chrono::duration<double>(clock::now() - t0).count();
  };

  SolutionTrace trace;
  Trajectory traj = initial_trajectory(s);
  const Trajectory traj0 = traj;
  const NlosDraw nlos = draw_nlos(s);
  ChannelSet chans = synthesize_channels(s, traj, nlos);
  UplinkBeams beams = solve_uplink_beams(s, chans);

  DownlinkOptions dopt = opt.downlink;
  if (opt.baseline == Baseline::NoRho) dopt.fixed_rho = 0.1;
  DownlinkSolution dl = detail::initial_downlink(
      s, chans, opt.baseline == Baseline::NoRho ? 0.1 : 0.5);

  Allocation alloc;
  double eta3_prev = -kInf;
  int it = 1;
  for (; it <= opt.max_iters; ++it) {
    // Psi2: resource allocation
    ResourceInputs rin = detail::build_resource_inputs(s, chans, beams, dl);
    ResourceOptions ropt;
    if (opt.baseline == Baseline::NoTime) {
      ropt.fixed_times = true;
      ropt.t_o_fixed = 0.25 * s.delta;
      ropt.t_u_fixed = 0.25 * s.delta;
    }
    try {
      alloc = solve_resource_allocation_opt(rin, ropt);
    } catch (const InfeasibleError& e) {
      throw InfeasibleError("psi2 (iteration " + std::to_string(it) +
                            "): " + e.what());
    }
    trace.rows.push_back({it, "psi2", alloc.eta, alloc.kkt.max(), secs()});

    // Psi3: downlink SWIPT (safeguarded against the incumbent)
    DownlinkInputs din = detail::build_downlink_inputs(s, chans, alloc);
    DownlinkSolution cand = solve_downlink(din, dopt, &dl);
    if (cand.infeasible)
      throw InfeasibleError("psi3 (iteration " + std::to_string(it) +
                            "): " + cand.message);
    const double eta_inc = energy_ledger(alloc, dl, chans, s).eta;
    if (cand.eta >= eta_inc) {
      dl = std::move(cand);
    } else {
      // keep the incumbent (still feasible under this allocation) but adopt
      // the fresher warm start
      dl.warm_x = std::move(cand.warm_x);
      dl.warm_y = std::move(cand.warm_y);
    }
    const double eta3 = energy_ledger(alloc, dl, chans, s).eta;
    trace.rows.push_back({it, "psi3", eta3, dl.kkt.max(), secs()});

    const bool settled =
        std::abs(eta3 - eta3_prev) <= opt.tol * std::max(1.0, std::abs(eta3));
    eta3_prev = eta3;
    if (settled) {
      trace.converged = true;
      break;
    }
    if (it == opt.max_iters || opt.baseline == Baseline::NoTrajectory)
      continue;

    // Psi4: trajectory (frozen normalized channels)
    TrajectoryInputs tin =
        detail::build_trajectory_inputs(s, chans, beams, alloc, dl);
    TrajectoryResult tres = solve_trajectory(tin, traj);
    traj = tres.traj;
    trace.rows.push_back({it, "psi4", tres.eta, tres.kkt.max(), secs()});

    // refresh channels at the new path; Psi1 is closed-form
    chans = synthesize_channels(s, traj, nlos);
    beams = solve_uplink_beams(s, chans);
    // re-floor the PS ratios so the incumbent beams still support the
    // current offload bits under the refreshed channels (zero-margin rho
    // from Psi3 would otherwise choke the next Psi2 through the
    // returned-results cap)
    if (opt.baseline != Baseline::NoRho) {
      for (int n = 0; n < s.N; ++n)
        for (int k = 0; k < s.K; ++k) {
          const double bits = alloc.L_o[n][k];
          if (bits <= 0.0) continue;
          const double gam =
              std::exp2(s.theta * bits / (s.t_d * s.B)) - 1.0;
          if (gam <= 0.0) continue;
          double own = 0.0, itf = 0.0;
          for (int j = 0; j < s.K; ++j) {
            const double p = std::norm(chans.h_ku[k][n].dot(dl.w[n][j]));
            if (j == k)
              own = p;
            else
              itf += p;
          }
          const double denom = own - gam * (itf + s.sigma_k2[k]);
          if (denom <= 0.0) continue;
          const double rho_req =
              std::min(1.0, gam * s.delta_k2[k] / denom * (1.0 + 1e-6));
          if (rho_req > dl.rho[n][k]) {
            dl.rho[n][k] = rho_req;
            dl.rho_tilde[n][k] = std::log(rho_req);
          }
        }
    }
    trace.rows.push_back(
        {it, "psi1", energy_ledger(alloc, dl, chans, s).eta, 0.0, secs()});
  }
  trace.iterations = std::min(it, opt.max_iters);

  trace.final.traj = traj;
  trace.final.beams = std::move(beams);
  trace.final.alloc = std::move(alloc);
  trace.final.downlink = std::move(dl);
  trace.final.ledger =
      energy_ledger(trace.final.alloc, trace.final.downlink, chans, s);
  if (!trace.converged)
    trace.message = "stopped at max_iters without meeting tol";
  return trace;
}

// Channels consistent with a finished run (NLoS redrawn from the seed).
inline ChannelSet final_channels(const Scenario& s, const Solution& sol) {
  return synthesize_channels(s, sol.traj, draw_nlos(s));
}

}  // namespace uavmec
