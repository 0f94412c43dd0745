#include <catch2/catch_amalgamated.hpp>

#include <random>

#include "uavmec/channel.hpp"
#include "uavmec/downlink.hpp"

using namespace uavmec;
using Catch::Approx;

namespace {

Eigen::VectorXcd cvec(std::initializer_list<std::complex<double>> v) {
  Eigen::VectorXcd out(static_cast<int>(v.size()));
  int i = 0;
  for (auto c : v) out[i++] = c;
  return out;
}

}  // namespace

TEST_CASE("downlink_sinr") {
  auto h = cvec({1e-3});
  SECTION("rho = 0 gives zero") {
    REQUIRE(downlink_sinr(0.0, h, {cvec({3.0})}, 0, 1e-9, 1e-8) == 0.0);
  }
  SECTION("single user numeric case: ~90.91") {
    // |h^H w|^2 = 1e-6 with rho = 1
    auto w = cvec({1.0});  // h = 1e-3 -> |h^H w|^2 = 1e-6
    const double r = downlink_sinr(1.0, h, {w}, 0, 1e-9, 1e-8);
    REQUIRE(r == Approx(1e-6 / 1.1e-8).epsilon(1e-9));
    REQUIRE(r == Approx(90.909090909).epsilon(1e-6));
  }
  SECTION("scaling the beams up increases a single user's SINR") {
    auto w = cvec({1.0});
    double prev = 0.0;
    for (double c : {1.0, 2.0, 5.0}) {
      const double r =
          downlink_sinr(0.7, h, {cvec({std::sqrt(c)})}, 0, 1e-9, 1e-8);
      REQUIRE(r > prev);
      prev = r;
    }
  }
}

TEST_CASE("harvested_energy") {
  auto h = cvec({1e-3});
  SECTION("rho = 1 harvests nothing") {
    REQUIRE(harvested_energy(1.0, h, {cvec({5.0})}, 1e-9, 0.8, 0.25) == 0.0);
  }
  SECTION("numeric case 2e-7 J") {
    // received power 1e-6 W total (including antenna noise)
    auto w = cvec({1.0});  // |h^H w|^2 = 1e-6; sigma_k2 folded to hit 1e-6
    const double e = harvested_energy(0.0, h, {w}, 0.0, 0.8, 0.25);
    REQUIRE(e == Approx(2e-7).epsilon(1e-12));
  }
  SECTION("linear in 1 - rho at fixed beams") {
    auto w = cvec({2.0});
    const double e0 = harvested_energy(0.0, h, {w}, 1e-9, 0.8, 0.25);
    for (double rho : {0.25, 0.5, 0.75}) {
      REQUIRE(harvested_energy(rho, h, {w}, 1e-9, 0.8, 0.25) ==
              Approx((1.0 - rho) * e0).epsilon(1e-12));
    }
  }
}

TEST_CASE("taylor_xi1") {
  REQUIRE(taylor_xi1(0.3, 0.0) == Approx(1.3));
  REQUIRE(taylor_xi1(0.7, 0.7) == Approx(std::exp(0.7)));
  REQUIRE(taylor_xi1(1.1, 1.0) == Approx(std::exp(1.0) * 1.1).epsilon(1e-12));
  SECTION("global under-estimator of exp") {
    std::mt19937_64 gen(3);
    std::uniform_real_distribution<double> u(-4.0, 4.0);
    for (int t = 0; t < 1000; ++t) {
      const double om = u(gen), anchor = u(gen);
      REQUIRE(taylor_xi1(om, anchor) <= std::exp(om) + 1e-12);
    }
  }
}

TEST_CASE("rank_one_recover") {
  SECTION("idempotent on rank-one input aligned with h") {
    auto h = cvec({0.6, std::complex<double>(0, 0.8)});
    Eigen::MatrixXcd W = 3.0 * h * h.adjoint();
    RankOneAudit audit;
    auto w = rank_one_recover(W, h, &audit);
    REQUIRE(((w * w.adjoint()) - W).norm() < 1e-10 * W.norm());
    REQUIRE(audit.own_gain_rel_err < 1e-12);
  }
  SECTION("hand case [[2,1],[1,1]] with h = e1") {
    Eigen::MatrixXcd W(2, 2);
    W << 2.0, 1.0, 1.0, 1.0;
    auto h = cvec({1.0, 0.0});
    auto w = rank_one_recover(W, h);
    Eigen::MatrixXcd R = w * w.adjoint();
    REQUIRE(R(0, 0).real() == Approx(2.0).margin(1e-12));
    REQUIRE(R(0, 1).real() == Approx(1.0).margin(1e-12));
    REQUIRE(R(1, 1).real() == Approx(0.5).margin(1e-12));
    // own-channel quadratic form preserved; trace drops 3 -> 2.5
    REQUIRE((h.adjoint() * R * h)(0, 0).real() == Approx(2.0).margin(1e-12));
    REQUIRE(R.trace().real() == Approx(2.5).margin(1e-12));
  }
  SECTION("identity with h = e1 keeps the own-channel form") {
    Eigen::MatrixXcd W = Eigen::MatrixXcd::Identity(2, 2);
    auto h = cvec({1.0, 0.0});
    auto w = rank_one_recover(W, h);
    Eigen::MatrixXcd R = w * w.adjoint();
    REQUIRE((h.adjoint() * R * h)(0, 0).real() == Approx(1.0).margin(1e-12));
    REQUIRE(R.trace().real() <= 1.0 + 1e-12);
  }
}

TEST_CASE("Theorem-1 identities on random PSD matrices") {
  std::mt19937_64 gen(11);
  std::normal_distribution<double> g(0.0, 1.0);
  const int L = 8;
  for (int t = 0; t < 200; ++t) {
    const int r = 1 + t % L;
    Eigen::MatrixXcd A(L, r);
    for (int i = 0; i < L; ++i)
      for (int j = 0; j < r; ++j) A(i, j) = std::complex<double>(g(gen), g(gen));
    Eigen::MatrixXcd W = A * A.adjoint();
    Eigen::VectorXcd h(L);
    for (int i = 0; i < L; ++i) h[i] = std::complex<double>(g(gen), g(gen));
    RankOneAudit audit;
    auto w = rank_one_recover(W, h, &audit);
    const double own0 = (h.adjoint() * W * h)(0, 0).real();
    const double own1 = std::norm(h.dot(w));
    REQUIRE(std::abs(own1 - own0) <= 1e-9 * own0);
    REQUIRE(w.squaredNorm() <= W.trace().real() + 1e-9);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> eig(w * w.adjoint());
    const auto& ev = eig.eigenvalues();
    REQUIRE(ev[L - 2] <= 1e-9 * ev[L - 1]);
  }
}

namespace {

// K=1, L=1, N=1 instance with an active SINR floor.
DownlinkInputs scalar_dl(Scenario& s, double h2, double Lo) {
  s = default_scenario();
  s.K = 1;
  s.L = 1;
  s.Mx = 1;
  s.My = 1;
  s.N = 1;
  s.T = 0.5;
  s.delta = 0.5;
  s.t_d = 0.25;
  s.theta = 1.0;
  s.P_uav_max = 1.0;
  s.s_k = {{0, 0}};
  s.sigma_k2 = {1e-9};
  s.delta_k2 = {1e-8};
  s.zeta_k = {0.8};
  s.varsigma_k = {1e-28};
  s.C_k = {1000};
  s.F_k_max = {2e9};
  s.P_k_max = {1.0};
  DownlinkInputs in;
  in.s = &s;
  in.h.assign(1, std::vector<Eigen::VectorXcd>(1));
  in.h[0][0] = cvec({std::sqrt(h2)});
  in.L_o.assign(1, std::vector<double>(1, Lo));
  in.E_total.assign(1, std::vector<double>(1, 1e-8));
  return in;
}

}  // namespace

TEST_CASE("scalar SWIPT instance matches the 2-D grid oracle") {
  Scenario s;
  // gamma = 48 and |h|^2 = gamma (2 delta^2 + sigma^2) / P put the optimal
  // PS ratio exactly at 0.5, a point of the oracle grid
  const double h2 = 48.0 * (2e-8 + 1e-9) / 1.0;
  DownlinkInputs in = scalar_dl(s, h2, 1.0);
  in.L_o[0][0] = std::log2(49.0) * s.t_d * s.B / s.theta;
  DownlinkOptions opt;
  opt.pdhg_max_iters = 3000;
  opt.sca_max_iters = 12;
  DownlinkSolution sol = solve_downlink(in, opt);
  REQUIRE_FALSE(sol.infeasible);

  // oracle: grid over rho and transmit power
  const double gamma = std::exp2(s.theta * in.L_o[0][0] / (s.t_d * s.B)) - 1.0;
  double best = -kInf;
  const int steps = 1000;
  for (int ir = 1; ir <= steps; ++ir) {
    const double rho = double(ir) / steps;
    for (int ip = 0; ip <= steps; ++ip) {
      const double p = s.P_uav_max * ip / steps;
      const double sig = p * h2;
      const double sinr =
          rho * sig / (rho * s.sigma_k2[0] + s.delta_k2[0]);
      if (sinr < gamma * (1.0 - 1e-9)) continue;
      const double eta =
          s.t_d * s.zeta_k[0] * (1.0 - rho) * (sig + s.sigma_k2[0]) -
          in.E_total[0][0];
      best = std::max(best, eta);
    }
  }
  REQUIRE(best > -kInf);
  REQUIRE(sol.eta == Approx(best).epsilon(1e-3));
  SECTION("substitution consistency and SCA monotonicity") {
    REQUIRE(std::abs(std::exp(sol.rho_tilde[0][0]) - sol.rho[0][0]) <= 1e-10);
    for (size_t i = 1; i < sol.sca_eta_trace.size(); ++i)
      REQUIRE(sol.sca_eta_trace[i] >=
              sol.sca_eta_trace[i - 1] - 1e-12);
  }
}

TEST_CASE("no offloaded bits: all power harvested at rho ~ 0") {
  Scenario s;
  DownlinkInputs in = scalar_dl(s, 1e-4, 0.0);
  DownlinkOptions opt;
  opt.pdhg_max_iters = 2000;
  DownlinkSolution sol = solve_downlink(in, opt);
  REQUIRE(sol.rho[0][0] <= 1e-9);
  // all power on the only channel direction
  const double p = std::norm(in.h[0][0].dot(sol.w[0][0]));
  REQUIRE(p == Approx(s.P_uav_max * 1e-4).epsilon(1e-4));
}

TEST_CASE("downlink power constraint holds before and after recovery") {
  Scenario s = default_scenario();
  s.K = 2;
  s.L = 4;
  s.Mx = 2;
  s.My = 2;
  s.T = 1.0;
  s.delta = 0.5;
  s.N = 2;
  s.s_k = {{-2, -3}, {2, -3}};
  s.sigma_k2 = {1e-9, 1e-9};
  s.delta_k2 = {1e-8, 1e-8};
  s.zeta_k = {0.8, 0.8};
  s.varsigma_k = {1e-28, 1e-28};
  s.C_k = {1000, 1000};
  s.F_k_max = {2e9, 2e9};
  s.P_k_max = {1, 1};
  s.q_I = {-1, 0};
  s.q_F = {1, 0};
  Trajectory tr = initial_trajectory(s);
  ChannelSet c = synthesize_channels(s, tr, draw_nlos(s));
  DownlinkInputs in;
  in.s = &s;
  in.h = c.h_ku;
  in.L_o.assign(s.N, std::vector<double>(s.K, 1e5));
  in.E_total.assign(s.N, std::vector<double>(s.K, 1e-6));
  DownlinkOptions opt;
  opt.pdhg_max_iters = 1500;
  opt.sca_max_iters = 6;
  DownlinkSolution sol = solve_downlink(in, opt);
  REQUIRE_FALSE(sol.infeasible);
  for (int n = 0; n < s.N; ++n) {
    double ptot = 0.0;
    for (int k = 0; k < s.K; ++k) {
      ptot += sol.w[n][k].squaredNorm();
      REQUIRE(sol.rho[n][k] >= 0.0);
      REQUIRE(sol.rho[n][k] <= 1.0);
      // Omega respects the received-power bound
      double pk = s.sigma_k2[k];
      for (int j = 0; j < s.K; ++j)
        pk += std::norm(c.h_ku[k][n].dot(sol.w[n][j]));
      REQUIRE(std::exp(sol.Omega[n][k]) <= pk * (1.0 + 1e-9));
    }
    REQUIRE(ptot <= s.P_uav_max + 1e-9);
  }
  SECTION("returned-bits SINR constraints hold (Eq 14 form)") {
    for (int n = 0; n < s.N; ++n)
      for (int k = 0; k < s.K; ++k) {
        const double ru = downlink_sinr(sol.rho[n][k], c.h_ku[k][n], sol.w[n],
                                        k, s.sigma_k2[k], s.delta_k2[k]);
        const double cap = s.t_d * s.B * std::log2(1.0 + ru);
        REQUIRE(s.theta * in.L_o[n][k] <=
                cap + 1e-6 * std::max(1.0, s.theta * in.L_o[n][k]));
      }
  }
  SECTION("KKT certificate is reported") {
    REQUIRE(std::isfinite(sol.kkt.stationarity));
    REQUIRE(sol.kkt.primal_infeasibility <= 1e-5);
    REQUIRE(sol.kkt.dual_infeasibility <= 1e-8);
  }
}

TEST_CASE("infeasible SINR target is reported") {
  Scenario s;
  DownlinkInputs in = scalar_dl(s, 1e-9, 0.0);
  // demand an impossible rate: gamma (sigma + delta) >> P * |h|^2
  in.L_o[0][0] = 60.0 * s.t_d * s.B / s.theta;  // gamma ~ 2^60
  DownlinkSolution sol = solve_downlink(in, DownlinkOptions{});
  REQUIRE(sol.infeasible);
  REQUIRE_FALSE(sol.message.empty());
}
