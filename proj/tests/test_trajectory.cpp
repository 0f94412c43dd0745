#include <catch2/catch_amalgamated.hpp>

#include <random>

#include "uavmec/trajectory.hpp"

using namespace uavmec;
using Catch::Approx;

TEST_CASE("fp_y_update") {
  REQUIRE(fp_y_update({0, 0}, {3, 0}, 4.0) == Approx(0.04));
  SECTION("surrogate is tight at the update point") {
    const double y = fp_y_update({0, 0}, {3, 0}, 4.0);
    const double d2 = 25.0;
    REQUIRE(2.0 * y - y * y * d2 == Approx(1.0 / d2).margin(1e-15));
  }
  SECTION("far point") {
    // d^2 = 1e4
    REQUIRE(fp_y_update({0, 0}, {std::sqrt(1e4 - 16.0), 0}, 4.0) ==
            Approx(1e-4));
  }
}

TEST_CASE("quadratic-transform bound") {
  std::mt19937_64 gen(3);
  std::uniform_real_distribution<double> u(0.01, 100.0);
  for (int t = 0; t < 10000; ++t) {
    const double y = u(gen), d2 = u(gen);
    REQUIRE(2.0 * y - y * y * d2 <= 1.0 / d2 + 1e-12);
  }
  for (int t = 0; t < 100; ++t) {
    const double d2 = u(gen);
    const double y = 1.0 / d2;
    REQUIRE(2.0 * y - y * y * d2 == Approx(1.0 / d2).epsilon(1e-12));
  }
}

TEST_CASE("fp_surrogate_energy") {
  SECTION("tangent point equals the true harvested energy") {
    const double d2 = 36.0 + 25.0;  // some distance squared
    const double y = 1.0 / d2;
    const double Lambda = 2.0 * y - y * y * d2;
    const std::vector<double> powers = {2.0, 0.5};  // |hbar^H w_j|^2
    const double sur =
        fp_surrogate_energy(0.3, 0.8, 0.25, powers, 1e-9, Lambda);
    const double truth =
        0.25 * 0.8 * 0.7 * ((2.0 + 0.5) / d2 + 1e-9);
    REQUIRE(sur == Approx(truth).epsilon(1e-12));
  }
  SECTION("Lambda = 0, rho = 0: noise-harvest floor") {
    REQUIRE(fp_surrogate_energy(0.0, 0.8, 0.25, {1.0, 2.0}, 1e-9, 0.0) ==
            Approx(0.25 * 0.8 * 1e-9).epsilon(1e-12));
  }
  SECTION("any y: surrogate never exceeds the true harvest") {
    std::mt19937_64 gen(7);
    std::uniform_real_distribution<double> u(0.01, 10.0);
    for (int t = 0; t < 500; ++t) {
      const double d2 = u(gen) * 10.0, y = u(gen) * 0.1;
      const double Lambda = 2.0 * y - y * y * d2;
      const std::vector<double> powers = {u(gen)};
      const double sur =
          fp_surrogate_energy(0.2, 0.8, 0.25, powers, 1e-9, Lambda);
      const double truth =
          0.25 * 0.8 * 0.8 * (powers[0] / d2 + 1e-9);
      REQUIRE(sur <= truth + 1e-12);
    }
  }
}

namespace {

Scenario traj_scenario(int K, int N) {
  Scenario s = default_scenario();
  s.K = K;
  s.L = std::max(K, 2);
  s.Mx = 2;
  s.My = 2;
  s.N = N;
  s.T = N * 0.5;
  s.delta = 0.5;
  s.s_k.assign(K, {1.0, 0.0});
  s.sigma_k2.assign(K, 1e-9);
  s.delta_k2.assign(K, 1e-8);
  s.zeta_k.assign(K, 0.8);
  s.varsigma_k.assign(K, 1e-28);
  s.C_k.assign(K, 1000);
  s.F_k_max.assign(K, 2e9);
  s.P_k_max.assign(K, 1.0);
  s.q_I = {-4, 0};
  s.q_F = {4, 0};
  s.s_b = {0, 3};
  return s;
}

TrajectoryInputs empty_inputs(const Scenario& s) {
  TrajectoryInputs in;
  in.s = &s;
  in.zf_gain.assign(s.K, std::vector<double>(s.N, 1e-2));
  in.dl_own.assign(s.K, std::vector<double>(s.N, 1.0));
  in.dl_intf.assign(s.K, std::vector<double>(s.N, 0.0));
  in.rho.assign(s.N, std::vector<double>(s.K, 0.0));
  in.E_total.assign(s.N, std::vector<double>(s.K, 0.0));
  in.E_k.assign(s.N, std::vector<double>(s.K, 0.0));
  in.L_o.assign(s.N, std::vector<double>(s.K, 0.0));
  in.t_o.assign(s.N, 0.1);
  in.t_u.assign(s.N, 0.1);
  in.L_ou_i.assign(s.N, {});
  in.E_uav_i.assign(s.N, {});
  in.lambda.assign(s.N, Eigen::VectorXd());
  return in;
}

}  // namespace

TEST_CASE("distance_caps") {
  Scenario s = traj_scenario(1, 4);
  TrajectoryInputs in = empty_inputs(s);
  SECTION("no offloaded bits: caps are infinite") {
    DistanceCaps caps = distance_caps(in);
    REQUIRE_FALSE(caps.infeasible);
    for (int n = 0; n < s.N; ++n) {
      REQUIRE(std::isinf(caps.cap_ku_uplink[0][n]));
      REQUIRE(std::isinf(caps.cap_ku_downlink[0][n]));
    }
  }
  SECTION("uplink cap numeric case: 1e7 m^2") {
    in.L_o[1][0] = 1.0 * in.t_o[1] * s.B;  // L_o/(t_o B) = 1
    in.E_k[1][0] = 0.1;
    in.zf_gain[0][1] = 1e-2;
    DistanceCaps caps = distance_caps(in);
    REQUIRE(caps.cap_ku_uplink[0][1] == Approx(1e7).epsilon(1e-9));
  }
  SECTION("huge SINR requirement drives the downlink cap to zero") {
    in.t_o[2] = 0.1;
    in.E_k[2][0] = 0.1;
    in.rho[2][0] = 0.5;
    double prev = kInf;
    for (double lo : {1e5, 1e6, 2e6}) {
      in.L_o[2][0] = lo;
      DistanceCaps caps = distance_caps(in);
      REQUIRE(caps.cap_ku_downlink[0][2] < prev);
      prev = caps.cap_ku_downlink[0][2];
    }
  }
}

TEST_CASE("solve_trajectory") {
  SECTION("N = 2: endpoints pinned, nothing to optimize") {
    Scenario s = traj_scenario(1, 2);
    s.Vmax = 20.0;  // endpoints reachable in one step
    TrajectoryInputs in = empty_inputs(s);
    Trajectory anchor = initial_trajectory(s);
    TrajectoryResult r = solve_trajectory(in, anchor);
    REQUIRE(r.traj.q.size() == 2);
    REQUIRE((r.traj.q[0] - s.q_I).norm() == 0.0);
    REQUIRE((r.traj.q[1] - s.q_F).norm() == 0.0);
  }

  SECTION("single GE, no caps, generous speed: interior points go overhead") {
    Scenario s = traj_scenario(1, 6);
    s.Vmax = 50.0;
    TrajectoryInputs in = empty_inputs(s);
    Trajectory anchor = initial_trajectory(s);
    TrajectoryResult r = solve_trajectory(in, anchor, 1e-9, 60);
    // per-slot 2-D grid oracle (s_k sits on a grid point)
    const double alpha = s.t_d * 1.0 * s.zeta_k[0] * 1.0;
    double oracle = 0.0;
    for (int n = 0; n < s.N; ++n) {
      double best = -kInf;
      if (n == 0 || n == s.N - 1) {
        const double d2 =
            (anchor.q[n] - s.s_k[0]).squaredNorm() + s.H * s.H;
        best = alpha / d2;
      } else {
        for (double gx = -4.0; gx <= 4.01; gx += 0.1)
          for (double gy = -2.0; gy <= 2.01; gy += 0.1) {
            const double d2 = (Eigen::Vector2d(gx, gy) - s.s_k[0])
                                  .squaredNorm() +
                              s.H * s.H;
            best = std::max(best, alpha / d2);
          }
      }
      oracle += best + s.t_d * s.zeta_k[0] * s.sigma_k2[0];
    }
    REQUIRE(r.eta == Approx(oracle).epsilon(1e-3));
    for (int n = 1; n + 1 < s.N; ++n)
      REQUIRE((r.traj.q[n] - s.s_k[0]).norm() < 0.05);
  }

  SECTION("mobility holds exactly and eta never drops below the anchor") {
    Scenario s = traj_scenario(2, 8);
    s.s_k = {{-2, -2}, {2, -2}};
    TrajectoryInputs in = empty_inputs(s);
    Trajectory anchor = initial_trajectory(s);
    // anchor value
    double eta0 = kInf;
    for (int k = 0; k < s.K; ++k) {
      double v = 0.0;
      for (int n = 0; n < s.N; ++n) {
        const double d2 =
            (anchor.q[n] - s.s_k[k]).squaredNorm() + s.H * s.H;
        v += s.t_d * 0.8 * (1.0 / d2 + 1e-9);
      }
      eta0 = std::min(eta0, v);
    }
    TrajectoryResult r = solve_trajectory(in, anchor);
    REQUIRE(r.eta >= eta0 - 1e-12);
    REQUIRE((r.traj.q.front() - s.q_I).norm() == 0.0);
    REQUIRE((r.traj.q.back() - s.q_F).norm() == 0.0);
    for (int n = 0; n + 1 < s.N; ++n)
      REQUIRE((r.traj.q[n + 1] - r.traj.q[n]).norm() <=
              s.delta * s.Vmax);
  }

  SECTION("finite relay caps are honored while the harvest pulls away") {
    Scenario s = traj_scenario(1, 6);
    s.s_k = {{3.5, 0.0}};  // harvest target outside the relay ball
    TrajectoryInputs in = empty_inputs(s);
    for (int n = 0; n < s.N; ++n) {
      in.lambda[n] = Eigen::VectorXd::Constant(1, 1e-2);
      in.L_ou_i[n] = {0.5 * in.t_u[n] * s.B};
      // cap_ub = E lambda / (sigma2 t_u (2^0.5 - 1)) ~ 40 m^2
      in.E_uav_i[n] = {40.0 * s.sigma2 * in.t_u[n] *
                       (std::exp2(0.5) - 1.0) / 1e-2};
    }
    DistanceCaps caps = distance_caps(in);
    REQUIRE_FALSE(caps.infeasible);
    REQUIRE(caps.cap_ub[1][0] == Approx(40.0).epsilon(1e-12));
    Trajectory anchor = initial_trajectory(s);
    TrajectoryResult r = solve_trajectory(in, anchor);
    for (int n = 1; n + 1 < s.N; ++n)
      REQUIRE((r.traj.q[n] - s.s_b).squaredNorm() + s.H * s.H <=
              40.0 + 1e-6);
    // the ball genuinely binds: some interior point sits on the boundary
    double closest = kInf;
    for (int n = 1; n + 1 < s.N; ++n)
      closest = std::min(
          closest,
          40.0 - ((r.traj.q[n] - s.s_b).squaredNorm() + s.H * s.H));
    REQUIRE(closest <= 1.0);
  }
}
