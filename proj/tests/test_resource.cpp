#include <catch2/catch_amalgamated.hpp>

#include <random>

#include "uavmec/resource.hpp"

using namespace uavmec;
using Catch::Approx;

TEST_CASE("perspective_rate") {
  REQUIRE(perspective_rate(0.0, 1.0, 1.0, 1e7) == 0.0);
  REQUIRE(perspective_rate(1.0, 1.0, 1.0, 1e7) == Approx(1e7));
  SECTION("midpoint concavity in t at fixed numerator") {
    std::mt19937_64 gen(3);
    std::uniform_real_distribution<double> u(0.01, 2.0);
    for (int i = 0; i < 200; ++i) {
      const double t1 = u(gen), t2 = u(gen), x = u(gen), den = u(gen);
      const double mid = perspective_rate(0.5 * (t1 + t2), x, den, 1.0);
      const double avg = 0.5 * (perspective_rate(t1, x, den, 1.0) +
                                perspective_rate(t2, x, den, 1.0));
      REQUIRE(mid >= avg - 1e-9 * std::max(1.0, std::abs(avg)));
    }
  }
}

TEST_CASE("local_compute_energy") {
  REQUIRE(local_compute_energy(0.0, 1000, 1e-28, 0.5) == 0.0);
  REQUIRE(local_compute_energy(1e6, 1000, 1e-28, 0.5) == Approx(0.4));
  SECTION("cubic law") {
    const double e1 = local_compute_energy(3.7e5, 1000, 1e-28, 0.5);
    const double e2 = local_compute_energy(7.4e5, 1000, 1e-28, 0.5);
    REQUIRE(e2 == Approx(8.0 * e1).epsilon(1e-12));
  }
}

TEST_CASE("waterfill") {
  SECTION("equal gains split the budget equally") {
    auto E = waterfill({2.0, 2.0, 2.0}, 0.9);
    for (double e : E) REQUIRE(e == Approx(0.3).margin(1e-10));
  }
  SECTION("gains {4,1}, budget 1.75 -> energies {1.25, 0.5}") {
    auto E = waterfill({4.0, 1.0}, 1.75);
    REQUIRE(E[0] == Approx(1.25).margin(1e-8));
    REQUIRE(E[1] == Approx(0.5).margin(1e-8));
  }
  SECTION("zero budget") {
    auto E = waterfill({1.0, 2.0}, 0.0);
    REQUIRE(E[0] == 0.0);
    REQUIRE(E[1] == 0.0);
  }
  SECTION("KKT: equalized marginals on active set, budget met exactly") {
    std::mt19937_64 gen(5);
    std::uniform_real_distribution<double> u(0.1, 10.0);
    for (int t = 0; t < 100; ++t) {
      const int n = 1 + static_cast<int>(u(gen));
      std::vector<double> g(n);
      for (auto& x : g) x = u(gen);
      const double budget = u(gen);
      auto E = waterfill(g, budget);
      double sum = 0.0, level = -1.0;
      for (int i = 0; i < n; ++i) {
        sum += E[i];
        REQUIRE(E[i] >= 0.0);
        if (E[i] > 0.0) {
          const double mu = E[i] + 1.0 / g[i];
          if (level < 0.0) level = mu;
          REQUIRE(mu == Approx(level).margin(1e-8));
        }
      }
      REQUIRE(sum == Approx(budget).margin(1e-8));
      // complementary slackness: inactive channels sit below the level
      for (int i = 0; i < n; ++i)
        if (E[i] == 0.0) REQUIRE(1.0 / g[i] >= level - 1e-8);
    }
  }
}

namespace {

// One-GE, one-slot, one-antenna inputs with a binding relay.
ResourceInputs scalar_inputs(Scenario& s) {
  s = default_scenario();
  s.K = 1;
  s.L = 1;
  s.Mx = 1;
  s.My = 1;
  s.T = 1.0;
  s.delta = 0.5;
  s.N = 2;
  s.s_k = {{0, 0}};
  s.sigma_k2 = {1e-9};
  s.delta_k2 = {1e-8};
  s.zeta_k = {0.8};
  s.varsigma_k = {1e-28};
  s.C_k = {1000};
  s.F_k_max = {2e9};
  s.P_k_max = {0.2};
  s.Gamma = 1.5e6;  // exceeds the local cap 1e6: offloading forced
  s.P_uav_max = 1.0;
  s.q_I = {-1, 0};
  s.q_F = {1, 0};
  ResourceInputs in;
  in.s = &s;
  in.g.assign(1, std::vector<double>(s.N, 2e-9));
  in.E_har.assign(1, std::vector<double>(s.N, 0.5));
  in.R_dl.assign(1, std::vector<double>(s.N, 1e12));
  in.lambda.assign(s.N, Eigen::VectorXd::Constant(1, 1e-2));
  in.d_ub.assign(s.N, 10.0);
  return in;
}

// Exhaustive grid oracle for the scalar instance, one slot. Monotone
// dominance prunes the grid: L_o = Gamma - L_c (cost increases in L_o),
// E and E_uav snapped up to the next grid point of their inversions, t_u
// at the smallest feasible grid value (objective does not depend on it).
double grid_oracle_slot(const Scenario& s, const ResourceInputs& in, int n,
                        int steps) {
  const double t_cap = s.delta - s.t_d;
  const double Lc_cap = s.delta * s.F_k_max[0] / s.C_k[0];
  const double g = in.g[0][n];
  const double a_relay = in.lambda[n][0] / (in.d_ub[n] * in.d_ub[n] * s.sigma2);
  double best = -kInf;
  const double E_cap_range = s.P_k_max[0] * t_cap;
  const double Euav_range = s.P_uav_max * t_cap;
  for (int it = 0; it <= steps; ++it) {
    const double t_o = t_cap * it / steps;
    for (int ic = 0; ic <= steps; ++ic) {
      const double L_c = Lc_cap * ic / steps;
      const double L_o = std::max(0.0, s.Gamma - L_c);
      double E = 0.0;
      if (L_o > 0.0) {
        if (t_o <= 0.0 || g <= 0.0) continue;
        const double need =
            t_o * s.sigma2 / g * (std::exp2(L_o / (t_o * s.B)) - 1.0);
        E = std::ceil(need / (E_cap_range / steps)) * (E_cap_range / steps);
        if (E > s.P_k_max[0] * t_o) continue;
        if (L_o > in.R_dl[0][n]) continue;
      }
      // smallest grid t_u whose capacity carries L_o
      double t_u = 0.0, E_uav = 0.0;
      if (L_o > 0.0) {
        bool ok = false;
        for (int iu = 1; iu <= steps; ++iu) {
          t_u = t_cap * iu / steps;
          if (t_o + t_u > t_cap + 1e-15) break;
          const double need_p =
              t_u * (std::exp2(L_o / (t_u * s.B)) - 1.0) / a_relay;
          E_uav =
              std::ceil(need_p / (Euav_range / steps)) * (Euav_range / steps);
          if (E_uav <= s.P_uav_max * t_u) {
            ok = true;
            break;
          }
        }
        if (!ok) continue;
      }
      const double obj = in.E_har[0][n] -
                         local_compute_energy(L_c, s.C_k[0], s.varsigma_k[0],
                                              s.delta) -
                         E;
      best = std::max(best, obj);
    }
  }
  return best;
}

}  // namespace

TEST_CASE("scalar instance matches the exhaustive grid oracle") {
  Scenario s;
  ResourceInputs in = scalar_inputs(s);
  Allocation a = solve_resource_allocation(in);
  double oracle = 0.0;
  for (int n = 0; n < s.N; ++n) oracle += grid_oracle_slot(s, in, n, 1000);
  // grid is a restriction: oracle <= optimum; match within 1e-3 relative
  REQUIRE(a.eta >= oracle - 1e-3 * std::abs(oracle));
  REQUIRE(a.eta == Approx(oracle).epsilon(1e-3));
}

TEST_CASE("local-only boundary") {
  Scenario s;
  ResourceInputs in = scalar_inputs(s);
  s.Gamma = s.delta * s.F_k_max[0] / s.C_k[0];  // exactly the local cap
  in.g[0].assign(s.N, 0.0);                      // no offload capacity
  in.R_dl[0].assign(s.N, 0.0);
  Allocation a = solve_resource_allocation(in);
  for (int n = 0; n < s.N; ++n) {
    REQUIRE(a.L_c[n][0] == Approx(s.Gamma));
    REQUIRE(a.L_o[n][0] == 0.0);
    REQUIRE(a.E[n][0] == 0.0);
  }
}

TEST_CASE("infeasible task requirement is reported with a named constraint") {
  Scenario s;
  ResourceInputs in = scalar_inputs(s);
  s.Gamma = 1e9;  // far beyond local cap + any rate
  try {
    solve_resource_allocation(in);
    FAIL("expected infeasibility");
  } catch (const InfeasibleError& e) {
    REQUIRE(std::string(e.what()).find("infeasible") != std::string::npos);
  }
}

TEST_CASE("forced zero offload time with Gamma above the local cap") {
  Scenario s;
  ResourceInputs in = scalar_inputs(s);
  ResourceOptions ro;
  ro.fixed_times = true;
  ro.t_o_fixed = 0.0;
  ro.t_u_fixed = 0.0;
  REQUIRE_THROWS_AS(solve_resource_allocation_opt(in, ro), InfeasibleError);
}

TEST_CASE("allocation satisfies every constraint with slack >= -1e-6") {
  Scenario s;
  ResourceInputs in = scalar_inputs(s);
  s.K = 2;
  s.L = 2;
  s.s_k = {{0, 0}, {1, 0}};
  s.sigma_k2 = {1e-9, 1e-9};
  s.delta_k2 = {1e-8, 1e-8};
  s.zeta_k = {0.8, 0.8};
  s.varsigma_k = {1e-28, 1e-28};
  s.C_k = {1000, 1000};
  s.F_k_max = {2e9, 2e9};
  s.P_k_max = {1.0, 1.0};
  in.g.assign(2, std::vector<double>(s.N, 2e-9));
  in.g[1].assign(s.N, 5e-9);
  in.E_har.assign(2, std::vector<double>(s.N, 0.05));
  in.R_dl.assign(2, std::vector<double>(s.N, 1e12));
  Allocation a = solve_resource_allocation(in);
  const double t_cap = s.delta - s.t_d;
  for (int n = 0; n < s.N; ++n) {
    REQUIRE(a.t_o[n] >= -1e-12);
    REQUIRE(a.t_u[n] >= -1e-12);
    REQUIRE(a.t_o[n] + a.t_u[n] <= t_cap + 1e-9);
    double sum_lo = 0.0, sum_bits = 0.0, sum_euav = 0.0;
    for (int k = 0; k < s.K; ++k) {
      REQUIRE(a.L_c[n][k] + a.L_o[n][k] >= s.Gamma - 1e-6);
      REQUIRE(a.L_c[n][k] <= s.delta * s.F_k_max[k] / s.C_k[k] + 1e-6);
      REQUIRE(a.E[n][k] <= s.P_k_max[k] * a.t_o[n] + 1e-9);
      // (11): bits within the rate at the returned energy, relative slack
      const double bits =
          perspective_rate(a.t_o[n], a.E[n][k] * in.g[k][n], s.sigma2, s.B);
      REQUIRE(a.L_o[n][k] <= bits + 1e-6 * std::max(1.0, a.L_o[n][k]));
      sum_lo += a.L_o[n][k];
    }
    for (size_t i = 0; i < a.L_ou_i[n].size(); ++i) {
      sum_bits += a.L_ou_i[n][i];
      sum_euav += a.E_uav_i[n][i];
      const double bits =
          (a.t_u[n] > 0)
              ? a.t_u[n] * s.B *
                    std::log2(1.0 + in.lambda[n][static_cast<int>(i)] *
                                        a.E_uav_i[n][i] /
                                        (a.t_u[n] * in.d_ub[n] * in.d_ub[n] *
                                         s.sigma2))
              : 0.0;
      REQUIRE(a.L_ou_i[n][i] <=
              bits + 1e-6 * std::max(1.0, a.L_ou_i[n][i]));
    }
    REQUIRE(sum_lo <= a.L_ou[n] + 1e-6 * std::max(1.0, sum_lo));
    REQUIRE(a.L_ou[n] <= sum_bits + 1e-6 * std::max(1.0, a.L_ou[n]));
    REQUIRE(sum_euav <= s.P_uav_max * a.t_u[n] + 1e-9);
  }
  SECTION("relay water-filling complementary slackness") {
    for (int n = 0; n < s.N; ++n) {
      double level = -1.0;
      for (size_t i = 0; i < a.E_uav_i[n].size(); ++i) {
        const double ai = in.lambda[n][static_cast<int>(i)] /
                          (in.d_ub[n] * in.d_ub[n] * s.sigma2);
        if (a.E_uav_i[n][i] > 0.0 && a.t_u[n] > 0.0) {
          const double mu = a.E_uav_i[n][i] / a.t_u[n] + 1.0 / ai;
          if (level < 0.0) level = mu;
          REQUIRE(mu == Approx(level).margin(1e-8 * std::max(1.0, level)));
        }
      }
    }
  }
}

TEST_CASE("monotone resources: larger budgets never reduce eta") {
  Scenario s;
  ResourceInputs in = scalar_inputs(s);
  double prev = -kInf;
  for (double P : {0.05, 0.1, 0.5, 1.0, 4.0}) {
    s.P_uav_max = P;
    Allocation a = solve_resource_allocation(in);
    REQUIRE(a.eta >= prev - 1e-9 * std::max(1.0, std::abs(prev)));
    prev = a.eta;
  }
  s.P_uav_max = 1.0;
  prev = -kInf;
  for (double P : {0.1, 0.15, 0.3, 1.0}) {
    s.P_k_max = {P};
    Allocation a = solve_resource_allocation(in);
    REQUIRE(a.eta >= prev - 1e-9 * std::max(1.0, std::abs(prev)));
    prev = a.eta;
  }
}

TEST_CASE("fixed times reproduce the no-time baseline split") {
  Scenario s;
  ResourceInputs in = scalar_inputs(s);
  ResourceOptions ro;
  ro.fixed_times = true;
  ro.t_o_fixed = 0.25 * s.delta;
  ro.t_u_fixed = 0.25 * s.delta;
  Allocation a = solve_resource_allocation_opt(in, ro);
  for (int n = 0; n < s.N; ++n) {
    REQUIRE(a.t_o[n] == 0.25 * s.delta);
    REQUIRE(a.t_u[n] == 0.25 * s.delta);
  }
  Allocation free_t = solve_resource_allocation(in);
  REQUIRE(free_t.eta >= a.eta - 1e-9);
}
