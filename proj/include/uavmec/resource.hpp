#pragma once
// Resource allocation (task splits, offload energies, time shares, relay
// sub-channel energies/bits) maximizing the minimum remaining energy with
// beams, downlink and trajectory fixed.
//
// Structure: at fixed per-slot times the weighted problem separates into
// per-GE 1-D convex splits plus a relay water-filling; the time pair is a
// 1-D unimodal search on t_o (slack time is always best spent on t_o, and
// the relay keeps the remainder). The max-min over GEs is handled by a
// simplex-weight outer loop with ergodic primal averaging.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>
#include <vector>

#include "uavmec/scenario.hpp"
#include "uavmec/solver_core.hpp"

namespace uavmec {

class InfeasibleError : public std::runtime_error {
 public:
  explicit InfeasibleError(const std::string& what) : std::runtime_error(what) {}
};

// t * B * log2(1 + num/(t*den)), continuously extended by 0 at t = 0.
inline double perspective_rate(double t, double num, double den, double B) {
  if (t <= 0.0 || num <= 0.0) return 0.0;
  return t * B * std::log2(1.0 + num / (t * den));
}

// Cubic-law CPU energy for computing L_c bits in one slot.
inline double local_compute_energy(double L_c, double C_k, double varsigma_k,
                                   double delta) {
  const double x = L_c * C_k;
  return x * x * x * varsigma_k / (delta * delta);
}

// Water-filling: maximize sum log(1 + g_i E_i) subject to sum E_i = budget,
// E >= 0. Water level via bisection, then exact budget repair on the active
// set so complementary slackness holds to machine precision.
inline std::vector<double> waterfill(const std::vector<double>& gains,
                                     double budget) {
  const int n = static_cast<int>(gains.size());
  std::vector<double> E(n, 0.0);
  if (n == 0 || budget <= 0.0) return E;
  double lo = kInf, hi = -kInf;
  for (double g : gains) {
    if (!(g > 0.0)) throw std::invalid_argument("waterfill: gains must be > 0");
    lo = std::min(lo, 1.0 / g);
    hi = std::max(hi, 1.0 / g);
  }
  hi += budget * (1.0 + 1e-9) + 1e-30;  // strictly bracket the level
  auto total = [&](double mu) {
    double s = 0.0;
    for (double g : gains) s += std::max(0.0, mu - 1.0 / g);
    return s - budget;
  };
  const double mu =
      bisect_scalar(total, lo, hi, 1e-14 * std::max(1.0, hi));
  int active = 0;
  double sum = 0.0;
  for (int i = 0; i < n; ++i) {
    E[i] = std::max(0.0, mu - 1.0 / gains[i]);
    if (E[i] > 0.0) ++active;
    sum += E[i];
  }
  if (active > 0) {
    const double corr = (budget - sum) / active;
    for (int i = 0; i < n; ++i)
      if (E[i] > 0.0) E[i] = std::max(0.0, E[i] + corr);
  }
  return E;
}

struct ResourceInputs {
  std::vector<std::vector<double>> g;      // [k][n] |v_k^H h_ku|^2 (raw)
  std::vector<std::vector<double>> E_har;  // [k][n] harvested energy (J)
  std::vector<std::vector<double>> R_dl;   // [k][n] result-return bit cap
  std::vector<Eigen::VectorXd> lambda;     // [n] relay spectrum
  std::vector<double> d_ub;                // [n]
  const Scenario* s = nullptr;
};

struct Allocation {
  std::vector<double> t_o, t_u;                  // [n]
  std::vector<std::vector<double>> E, L_c, L_o;  // [n][k]
  std::vector<double> L_ou;                      // [n]
  std::vector<std::vector<double>> L_ou_i;       // [n][i]
  std::vector<std::vector<double>> E_uav_i;      // [n][i]
  double eta = 0.0;
  KktReport kkt;
};

struct ResourceOptions {
  bool fixed_times = false;  // pin (t_o, t_u) per slot (baseline scheme)
  double t_o_fixed = 0.0;
  double t_u_fixed = 0.0;
};

namespace detail {

inline double exp2_clamped(double x) {
  return (x > 1020.0) ? kInf : std::exp2(x);
}

// Minimal GE transmit energy to push L bits in (t_o, gain g): inversion of
// the uplink rate constraint.
inline double offload_energy(double L, double t_o, double g, double sigma2,
                             double B) {
  if (L <= 0.0) return 0.0;
  if (t_o <= 0.0 || g <= 0.0) return kInf;
  return t_o * sigma2 / g * (exp2_clamped(L / (t_o * B)) - 1.0);
}

// Relay sub-channel "power gains" a_i = lambda_i / (d^2 sigma^2); SNR_i =
// a_i * p_i with p_i = E_i / t_u.
inline std::vector<double> relay_gains(const Eigen::VectorXd& lambda,
                                       double d_ub, double sigma2) {
  std::vector<double> a(lambda.size());
  for (int i = 0; i < lambda.size(); ++i)
    a[i] = lambda[i] / (d_ub * d_ub * sigma2);
  return a;
}

// Max bits the relay can carry in t_u with power budget P.
inline double relay_capacity_bits(const Eigen::VectorXd& lambda, double d_ub,
                                  double sigma2, double B, double P,
                                  double t_u) {
  if (t_u <= 0.0 || lambda.size() == 0) return 0.0;
  const auto a = relay_gains(lambda, d_ub, sigma2);
  const auto p = waterfill(a, P);
  double bits = 0.0;
  for (size_t i = 0; i < p.size(); ++i)
    bits += t_u * B * std::log2(1.0 + a[i] * p[i]);
  return bits;
}

// Minimal-energy relay allocation carrying >= S bits in t_u. Returns per
// sub-channel energies and bits; throws if the capacity is insufficient.
inline void relay_min_energy(const Eigen::VectorXd& lambda, double d_ub,
                             double sigma2, double B, double P, double t_u,
                             double S, std::vector<double>& E_out,
                             std::vector<double>& bits_out) {
  const int m = static_cast<int>(lambda.size());
  E_out.assign(m, 0.0);
  bits_out.assign(m, 0.0);
  if (S <= 0.0) return;
  if (t_u <= 0.0 || m == 0)
    throw InfeasibleError("relay: no relay time/sub-channels for offloaded bits");
  const auto a = relay_gains(lambda, d_ub, sigma2);
  auto bits_at = [&](double nu) {
    double bits = 0.0;
    for (int i = 0; i < m; ++i) {
      const double p = std::max(0.0, nu - 1.0 / a[i]);
      bits += t_u * B * std::log2(1.0 + a[i] * p);
    }
    return bits;
  };
  double lo = 0.0, hi = 1.0 / *std::max_element(a.begin(), a.end());
  while (bits_at(hi) < S && hi < 1e300) hi *= 2.0;
  if (bits_at(hi) < S)
    throw InfeasibleError("relay: requested bits exceed any finite power");
  for (int it = 0; it < 100; ++it) {
    const double mid = 0.5 * (lo + hi);
    if (bits_at(mid) >= S)
      hi = mid;
    else
      lo = mid;
  }
  double energy = 0.0;
  for (int i = 0; i < m; ++i) {
    const double p = std::max(0.0, hi - 1.0 / a[i]);
    E_out[i] = t_u * p;
    bits_out[i] = t_u * B * std::log2(1.0 + a[i] * p);
    energy += E_out[i];
  }
  if (energy > P * t_u * (1.0 + 1e-9))
    throw InfeasibleError("relay: UAV power budget (21e) cannot carry offloaded bits");
}

// Per-(k,n) offload window and cost pieces at a given t_o.
struct SplitCtx {
  double L_lo = 0.0, L_hi = 0.0;  // admissible offload bits
  double a_comp = 0.0;            // comp-energy coefficient (C^3 vs / delta^2)
  double b_tx = 0.0;              // d/dL of E at L: b_tx * 2^(L * inv_tB)
  double inv_tB = 0.0;
  double Gamma = 0.0;
  double t_o = 0.0, g = 0.0, sigma2 = 0.0, B = 0.0;
};

inline double split_cost(const SplitCtx& c, double L) {
  const double lc = std::max(0.0, c.Gamma - L);
  const double comp = lc * lc * lc * c.a_comp;
  return comp + offload_energy(L, c.t_o, c.g, c.sigma2, c.B);
}

inline double split_cost_deriv(const SplitCtx& c, double L) {
  const double lc = std::max(0.0, c.Gamma - L);
  double d = -3.0 * c.a_comp * lc * lc;
  d += c.b_tx * exp2_clamped(L * c.inv_tB);
  return d;
}

// argmin over [L_lo, L_hi] of w * cost(L) + nu * L (w > 0, nu >= 0).
// The tilted derivative is increasing; safeguarded Newton sharing one exp2
// evaluation between value and slope. `curv_out`, when set, receives the
// second derivative at the minimizer (0 when clamped at a bound).
inline double split_argmin(const SplitCtx& c, double w, double nu,
                           double hint = -1.0, double* curv_out = nullptr) {
  const double ln2 = 0.6931471805599453;
  auto psi_pair = [&](double L, double& v, double& d) {
    const double lc = std::max(0.0, c.Gamma - L);
    const double ex = exp2_clamped(L * c.inv_tB);
    v = w * (-3.0 * c.a_comp * lc * lc + c.b_tx * ex) + nu;
    d = w * (6.0 * c.a_comp * lc + c.b_tx * c.inv_tB * ln2 * ex);
  };
  if (curv_out) *curv_out = 0.0;
  double v, d;
  psi_pair(c.L_lo, v, d);
  if (v >= 0.0) return c.L_lo;
  psi_pair(c.L_hi, v, d);
  if (v <= 0.0) return c.L_hi;
  double lo = c.L_lo, hi = c.L_hi;
  double L = (hint > lo && hint < hi) ? hint : 0.5 * (lo + hi);
  for (int it = 0; it < 60; ++it) {
    psi_pair(L, v, d);
    if (v > 0.0)
      hi = L;
    else
      lo = L;
    if (hi - lo <= 1e-11 * std::max(1.0, hi)) break;
    double Ln = (d > 0.0 && std::isfinite(v)) ? L - v / d : 0.5 * (lo + hi);
    if (!(Ln > lo && Ln < hi)) Ln = 0.5 * (lo + hi);
    L = Ln;
  }
  if (curv_out) *curv_out = d;
  return 0.5 * (lo + hi);
}

}  // namespace detail

inline KktReport resource_kkt(const ResourceInputs& in, const Allocation& a);

// Full P2 solve. `weights_out`, when non-null, receives the final simplex
// weights (exposed for the certificate assembly).
inline Allocation solve_resource_allocation_opt(const ResourceInputs& in,
                                                const ResourceOptions& ropt,
                                                Vec* weights_out = nullptr) {
  const Scenario& s = *in.s;
  const int K = s.K, N = s.N;
  const double t_cap = s.delta - s.t_d;
  if (ropt.fixed_times &&
      ropt.t_o_fixed + ropt.t_u_fixed > t_cap * (1.0 + 1e-12))
    throw InfeasibleError("fixed time split exceeds the slot budget (19a)");

  // static per-(k,n) quantities
  std::vector<std::vector<double>> L_lo(N, std::vector<double>(K));
  std::vector<double> Lc_cap(K);
  for (int k = 0; k < K; ++k) Lc_cap[k] = s.delta * s.F_k_max[k] / s.C_k[k];
  for (int n = 0; n < N; ++n)
    for (int k = 0; k < K; ++k) {
      L_lo[n][k] = std::max(0.0, s.Gamma - Lc_cap[k]);
      if (L_lo[n][k] > in.R_dl[k][n] + 1e-9)
        throw InfeasibleError(
            "task requirement infeasible: downlink return rate (Eq. 14 type) "
            "cannot carry mandatory offload bits for GE " + std::to_string(k));
    }

  // relay capacity is linear in t_u (per-second powers water-filled against
  // the per-second budget P); cache the slope per slot
  std::vector<double> relay_slope(N, 0.0);
  for (int n = 0; n < N; ++n)
    relay_slope[n] =
        detail::relay_capacity_bits(in.lambda[n], in.d_ub[n], s.sigma2, s.B,
                                    s.P_uav_max, 1.0);

  std::vector<double> a_comp(K);
  for (int k = 0; k < K; ++k)
    a_comp[k] = s.varsigma_k[k] * s.C_k[k] * s.C_k[k] * s.C_k[k] /
                (s.delta * s.delta);

  auto window = [&](int n, int k, double t_o) {
    detail::SplitCtx c;
    c.Gamma = s.Gamma;
    c.t_o = t_o;
    c.g = in.g[k][n];
    c.sigma2 = s.sigma2;
    c.B = s.B;
    c.a_comp = a_comp[k];
    c.inv_tB = (t_o > 0.0) ? 1.0 / (t_o * s.B) : 0.0;
    c.b_tx = (t_o > 0.0 && c.g > 0.0)
                 ? s.sigma2 * std::log(2.0) / (c.g * s.B)
                 : kInf;
    c.L_lo = L_lo[n][k];
    double hi = 0.0;
    if (t_o > 0.0 && c.g > 0.0)
      hi = t_o * s.B * std::log2(1.0 + s.P_k_max[k] * c.g / s.sigma2);
    hi = std::min(hi, in.R_dl[k][n]);
    hi = std::min(hi, s.Gamma);  // offloading beyond Gamma is never cheaper
    c.L_hi = hi;
    return c;
  };

  // weighted per-slot solve at fixed times; returns weighted cost and fills
  // the per-GE offload decision
  auto slot_solve = [&](int n, double t_o, double t_u, const Vec& w,
                        std::vector<double>* L_out) -> double {
    std::vector<detail::SplitCtx> ctx(K);
    double sum_lo = 0.0;
    for (int k = 0; k < K; ++k) {
      ctx[k] = window(n, k, t_o);
      if (ctx[k].L_lo > ctx[k].L_hi + 1e-9) return kInf;  // caps conflict
      ctx[k].L_hi = std::max(ctx[k].L_hi, ctx[k].L_lo);
      sum_lo += ctx[k].L_lo;
    }
    const double cap = relay_slope[n] * std::max(0.0, t_u);
    if (sum_lo > cap * (1.0 + 1e-12) + 1e-9) return kInf;
    std::vector<double> L(K), curv(K);
    double total = 0.0;
    for (int k = 0; k < K; ++k) {
      L[k] = detail::split_argmin(ctx[k], std::max(w[k], 1e-12), 0.0);
      total += L[k];
    }
    if (total > cap) {
      // price the relay until the aggregate fits: Newton on nu with a
      // bisection safeguard (total is decreasing in nu)
      double nu_hi = 1e-300;
      for (int k = 0; k < K; ++k)
        nu_hi = std::max(nu_hi, -std::max(w[k], 1e-12) *
                                    detail::split_cost_deriv(ctx[k], ctx[k].L_lo));
      nu_hi = nu_hi * 1.001 + 1e-12;
      double lo_nu = 0.0, hi_nu = nu_hi;
      double nu = 0.5 * nu_hi;
      for (int it = 0; it < 40; ++it) {
        total = 0.0;
        double slope = 0.0;
        for (int k = 0; k < K; ++k) {
          L[k] = detail::split_argmin(ctx[k], std::max(w[k], 1e-12), nu, L[k],
                                      &curv[k]);
          total += L[k];
          if (curv[k] > 0.0) slope -= 1.0 / curv[k];
        }
        if (total > cap)
          lo_nu = nu;
        else
          hi_nu = nu;
        if (std::abs(total - cap) <= 1e-9 * std::max(1.0, cap) ||
            hi_nu - lo_nu <= 1e-14 * std::max(1.0, hi_nu))
          break;
        double nun = (slope < 0.0) ? nu - (total - cap) / slope
                                   : 0.5 * (lo_nu + hi_nu);
        if (!(nun > lo_nu && nun < hi_nu)) nun = 0.5 * (lo_nu + hi_nu);
        nu = nun;
      }
      // final evaluation at the feasible endpoint
      total = 0.0;
      for (int k = 0; k < K; ++k) {
        L[k] = detail::split_argmin(ctx[k], std::max(w[k], 1e-12), hi_nu, L[k]);
        total += L[k];
      }
    }
    double cost = 0.0;
    for (int k = 0; k < K; ++k)
      cost += std::max(w[k], 1e-12) * detail::split_cost(ctx[k], L[k]);
    if (L_out) *L_out = L;
    return cost;
  };

  // per-slot optimal time split for given weights
  auto slot_times = [&](int n, const Vec& w, double* t_o_out,
                        double* t_u_out) {
    auto V = [&](double t_o) {
      return slot_solve(n, t_o, t_cap - t_o, w, nullptr);
    };
    // unimodal on [0, t_cap]; guard fully-infeasible slots
    double t = golden_min(V, 0.0, t_cap, 1e-8 * std::max(1.0, t_cap));
    double v = V(t);
    for (double cand : {0.0, 0.5 * t_cap, t_cap * (1.0 - 1e-9)}) {
      const double vc = V(cand);
      if (vc < v) {
        v = vc;
        t = cand;
      }
    }
    if (!std::isfinite(v))
      throw InfeasibleError(
          "task requirement infeasible: no time split satisfies rate and "
          "relay constraints in slot " + std::to_string(n));
    *t_o_out = t;
    *t_u_out = t_cap - t;
  };

  // evaluate f_k (remaining energy per GE) for a full allocation
  auto remaining = [&](const std::vector<double>& t_o,
                       const std::vector<std::vector<double>>& L,
                       Vec& f) {
    f.setZero(K);
    for (int k = 0; k < K; ++k) {
      double val = 0.0;
      for (int n = 0; n < N; ++n) {
        const auto c = window(n, k, t_o[n]);
        val += in.E_har[k][n] - detail::split_cost(c, L[n][k]);
      }
      f[k] = val;
    }
  };

  // ---- outer simplex-weight loop (skipped for K == 1) ----
  Vec w = Vec::Constant(K, 1.0 / K);
  std::vector<double> t_o(N), t_u(N);
  std::vector<std::vector<double>> L(N, std::vector<double>(K, 0.0));

  auto solve_at = [&](const Vec& wts, std::vector<double>& to,
                      std::vector<double>& tu,
                      std::vector<std::vector<double>>& Lb) {
    for (int n = 0; n < N; ++n) {
      if (ropt.fixed_times) {
        to[n] = ropt.t_o_fixed;
        tu[n] = ropt.t_u_fixed;
        if (slot_solve(n, to[n], tu[n], wts, &Lb[n]) == kInf)
          throw InfeasibleError(
              "task requirement infeasible at the fixed time split in slot " +
              std::to_string(n));
      } else {
        slot_times(n, wts, &to[n], &tu[n]);
        slot_solve(n, to[n], tu[n], wts, &Lb[n]);
      }
    }
  };

  solve_at(w, t_o, t_u, L);
  Vec f(K);
  remaining(t_o, L, f);
  double best_eta = f.minCoeff();
  auto best_to = t_o;
  auto best_tu = t_u;
  auto best_L = L;

  if (K > 1) {
    // subgradient descent on the dual g(w) = max_x sum w_k f_k with Polyak
    // step against the best primal value; ergodic average refines the primal
    std::vector<double> avg_to(N, 0.0), avg_tu(N, 0.0);
    std::vector<std::vector<double>> avg_L(N, std::vector<double>(K, 0.0));
    const int T = 24;
    int count = 0;
    double gbest = kInf;
    for (int t = 1; t <= T; ++t) {
      solve_at(w, t_o, t_u, L);
      remaining(t_o, L, f);
      const double gval = w.dot(f);
      gbest = std::min(gbest, gval);
      if (f.minCoeff() > best_eta) {
        best_eta = f.minCoeff();
        best_to = t_o;
        best_tu = t_u;
        best_L = L;
      }
      for (int n = 0; n < N; ++n) {
        avg_to[n] += t_o[n];
        avg_tu[n] += t_u[n];
        for (int k = 0; k < K; ++k) avg_L[n][k] += L[n][k];
      }
      ++count;
      if (gbest - best_eta <= 1e-9 * std::max(1.0, std::abs(gbest))) break;
      const double sn2 = f.squaredNorm();
      if (sn2 == 0.0) break;
      const double step = std::max(0.0, gval - best_eta) / sn2 + 1e-12;
      w = project_simplex(w - step * f);
      for (int k = 0; k < K; ++k) w[k] = std::max(w[k], 1e-9);
      w /= w.sum();
      // periodically evaluate the ergodic average
      if (t % 20 == 0) {
        std::vector<double> ato(N), atu(N);
        std::vector<std::vector<double>> aL(N, std::vector<double>(K));
        for (int n = 0; n < N; ++n) {
          ato[n] = avg_to[n] / count;
          atu[n] = avg_tu[n] / count;
          for (int k = 0; k < K; ++k) aL[n][k] = avg_L[n][k] / count;
        }
        Vec fa(K);
        remaining(ato, aL, fa);
        bool ok = true;
        for (int n = 0; n < N && ok; ++n) {
          double sum = 0.0;
          for (int k = 0; k < K; ++k) sum += aL[n][k];
          if (sum > relay_slope[n] * atu[n]) ok = false;
        }
        if (ok && fa.minCoeff() > best_eta) {
          best_eta = fa.minCoeff();
          best_to = ato;
          best_tu = atu;
          best_L = aL;
        }
      }
    }
  }
  if (weights_out) *weights_out = w;

  // ---- per-slot max-min time refinement ----
  // Coordinate passes on the true objective: re-optimize each slot's time
  // split against min_k f_k with the other slots frozen. Every candidate is
  // feasible, so eta can only improve.
  if (!ropt.fixed_times) {
    Vec fr(K);
    remaining(best_to, best_L, fr);
    best_eta = fr.minCoeff();
    for (int pass = 0; pass < 3; ++pass) {
      bool improved = false;
      for (int n = 0; n < N; ++n) {
        Vec base = fr;
        {
          // remove slot n's contribution
          for (int k = 0; k < K; ++k) {
            const auto c = window(n, k, best_to[n]);
            base[k] -= in.E_har[k][n] - detail::split_cost(c, best_L[n][k]);
          }
        }
        std::vector<double> Lcand(K);
        auto h = [&](double t) {
          if (slot_solve(n, t, t_cap - t, w, &Lcand) == kInf) return -kInf;
          double m = kInf;
          for (int k = 0; k < K; ++k) {
            const auto c = window(n, k, t);
            m = std::min(m, base[k] + in.E_har[k][n] -
                                detail::split_cost(c, Lcand[k]));
          }
          return m;
        };
        auto neg = [&](double t) { return -h(t); };
        double t = golden_min(neg, 0.0, t_cap, 1e-8 * std::max(1.0, t_cap));
        double hv = h(t);
        if (hv > best_eta + 1e-15 * std::max(1.0, std::abs(best_eta))) {
          slot_solve(n, t, t_cap - t, w, &Lcand);
          best_to[n] = t;
          best_tu[n] = t_cap - t;
          best_L[n] = Lcand;
          remaining(best_to, best_L, fr);
          best_eta = fr.minCoeff();
          improved = true;
        }
      }
      if (!improved) break;
    }
  }

  // ---- exactification: rebuild all dependent quantities in closed form ----
  Allocation out;
  out.t_o = best_to;
  out.t_u = best_tu;
  out.E.assign(N, std::vector<double>(K, 0.0));
  out.L_c.assign(N, std::vector<double>(K, 0.0));
  out.L_o.assign(N, std::vector<double>(K, 0.0));
  out.L_ou.assign(N, 0.0);
  out.L_ou_i.resize(N);
  out.E_uav_i.resize(N);
  for (int n = 0; n < N; ++n) {
    double S = 0.0;
    for (int k = 0; k < K; ++k) {
      const auto c = window(n, k, out.t_o[n]);
      double Lk = std::clamp(best_L[n][k], c.L_lo, std::max(c.L_lo, c.L_hi));
      if (out.t_o[n] <= 0.0) Lk = 0.0;  // degenerate slot: no offload
      out.L_o[n][k] = Lk;
      out.L_c[n][k] = std::clamp(s.Gamma - Lk, 0.0, Lc_cap[k]);
      out.E[n][k] = detail::offload_energy(Lk, out.t_o[n], in.g[k][n],
                                           s.sigma2, s.B);
      out.E[n][k] = std::min(out.E[n][k], s.P_k_max[k] * out.t_o[n]);
      S += Lk;
    }
    out.L_ou[n] = S;
    detail::relay_min_energy(in.lambda[n], in.d_ub[n], s.sigma2, s.B,
                             s.P_uav_max, out.t_u[n], S, out.E_uav_i[n],
                             out.L_ou_i[n]);
  }
  Vec ffinal(K);
  remaining(out.t_o, out.L_o, ffinal);
  out.eta = ffinal.minCoeff();
  out.kkt = resource_kkt(in, out);
  return out;
}

inline Allocation solve_resource_allocation(const ResourceInputs& in,
                                            Vec* weights_out = nullptr) {
  return solve_resource_allocation_opt(in, ResourceOptions{}, weights_out);
}

// ---------------------------------------------------------------------------
// NLP description of the allocation problem (per-sub-channel relay variables
// reduced to the capacity line c_n t_u >= sum_k L_o, which is exact under
// water-filling). Layout per slot: [t_o, t_u, (E, L_c, L_o) x K], eta last.

struct ResourceNlpLayout {
  int N = 0, K = 0;
  int slot_stride() const { return 2 + 3 * K; }
  int t_o(int n) const { return n * slot_stride(); }
  int t_u(int n) const { return n * slot_stride() + 1; }
  int E(int n, int k) const { return n * slot_stride() + 2 + 3 * k; }
  int L_c(int n, int k) const { return n * slot_stride() + 3 + 3 * k; }
  int L_o(int n, int k) const { return n * slot_stride() + 4 + 3 * k; }
  int eta() const { return N * slot_stride(); }
  int dim() const { return N * slot_stride() + 1; }
};

inline NlpProblem resource_nlp(const ResourceInputs& in,
                               const std::vector<double>& relay_slope,
                               ResourceNlpLayout* layout_out = nullptr) {
  const Scenario& s = *in.s;
  ResourceNlpLayout ly;
  ly.N = s.N;
  ly.K = s.K;
  if (layout_out) *layout_out = ly;
  const int dim = ly.dim();
  NlpProblem p;
  p.objective = [ly](const Vec& x) { return -x[ly.eta()]; };
  p.objective_grad = [ly, dim](const Vec&) {
    Vec g = Vec::Zero(dim);
    g[ly.eta()] = -1.0;
    return g;
  };
  const double t_cap = s.delta - s.t_d;
  auto rate = [&s](double g, double E, double t) {
    if (t <= 1e-300 || E <= 0.0 || g <= 0.0) return 0.0;
    return t * s.B * std::log2(1.0 + g * E / (t * s.sigma2));
  };
  for (int n = 0; n < s.N; ++n) {
    p.ineq.push_back({"time[" + std::to_string(n) + "]",
                      [ly, n, t_cap](const Vec& x) {
                        return t_cap - x[ly.t_o(n)] - x[ly.t_u(n)];
                      },
                      [ly, n, dim](const Vec&) {
                        Vec g = Vec::Zero(dim);
                        g[ly.t_o(n)] = -1.0;
                        g[ly.t_u(n)] = -1.0;
                        return g;
                      }});
    const double cn = relay_slope[n];
    p.ineq.push_back({"relay[" + std::to_string(n) + "]",
                      [ly, n, cn](const Vec& x) {
                        double sum = 0.0;
                        for (int k = 0; k < ly.K; ++k) sum += x[ly.L_o(n, k)];
                        return cn * x[ly.t_u(n)] - sum;
                      },
                      [ly, n, cn, dim](const Vec&) {
                        Vec g = Vec::Zero(dim);
                        g[ly.t_u(n)] = cn;
                        for (int k = 0; k < ly.K; ++k) g[ly.L_o(n, k)] = -1.0;
                        return g;
                      }});
    for (int k = 0; k < s.K; ++k) {
      p.ineq.push_back(
          {"task[" + std::to_string(k) + "," + std::to_string(n) + "]",
           [ly, n, k, G = s.Gamma](const Vec& x) {
             return x[ly.L_c(n, k)] + x[ly.L_o(n, k)] - G;
           },
           [ly, n, k, dim](const Vec&) {
             Vec g = Vec::Zero(dim);
             g[ly.L_c(n, k)] = 1.0;
             g[ly.L_o(n, k)] = 1.0;
             return g;
           }});
      const double lc_cap = s.delta * s.F_k_max[k] / s.C_k[k];
      p.ineq.push_back(
          {"local_cap[" + std::to_string(k) + "," + std::to_string(n) + "]",
           [ly, n, k, lc_cap](const Vec& x) {
             return lc_cap - x[ly.L_c(n, k)];
           },
           [ly, n, k, dim](const Vec&) {
             Vec g = Vec::Zero(dim);
             g[ly.L_c(n, k)] = -1.0;
             return g;
           }});
      const double gk = in.g[k][n];
      p.ineq.push_back(
          {"rate11[" + std::to_string(k) + "," + std::to_string(n) + "]",
           [ly, n, k, gk, rate](const Vec& x) {
             return rate(gk, x[ly.E(n, k)], x[ly.t_o(n)]) - x[ly.L_o(n, k)];
           },
           [ly, n, k, gk, dim, &s](const Vec& x) {
             Vec g = Vec::Zero(dim);
             const double t = x[ly.t_o(n)], E = x[ly.E(n, k)];
             if (t > 1e-300 && gk > 0.0) {
               const double u = gk * std::max(E, 0.0) / (t * s.sigma2);
               const double ln2 = std::log(2.0);
               g[ly.E(n, k)] = s.B * gk / (s.sigma2 * (1.0 + u) * ln2);
               g[ly.t_o(n)] =
                   s.B / ln2 * (std::log1p(u) - u / (1.0 + u));
             }
             g[ly.L_o(n, k)] = -1.0;
             return g;
           }});
      p.ineq.push_back(
          {"pk[" + std::to_string(k) + "," + std::to_string(n) + "]",
           [ly, n, k, Pk = s.P_k_max[k]](const Vec& x) {
             return Pk * x[ly.t_o(n)] - x[ly.E(n, k)];
           },
           [ly, n, k, Pk = s.P_k_max[k], dim](const Vec&) {
             Vec g = Vec::Zero(dim);
             g[ly.t_o(n)] = Pk;
             g[ly.E(n, k)] = -1.0;
             return g;
           }});
      if (std::isfinite(in.R_dl[k][n])) {
        p.ineq.push_back(
            {"rdl[" + std::to_string(k) + "," + std::to_string(n) + "]",
             [ly, n, k, R = in.R_dl[k][n]](const Vec& x) {
               return R - x[ly.L_o(n, k)];
             },
             [ly, n, k, dim](const Vec&) {
               Vec g = Vec::Zero(dim);
               g[ly.L_o(n, k)] = -1.0;
               return g;
             }});
      }
    }
  }
  for (int k = 0; k < s.K; ++k) {
    double har = 0.0;
    for (int n = 0; n < s.N; ++n) har += in.E_har[k][n];
    const double ac =
        s.varsigma_k[k] * s.C_k[k] * s.C_k[k] * s.C_k[k] / (s.delta * s.delta);
    p.ineq.push_back(
        {"remain[" + std::to_string(k) + "]",
         [ly, k, har, ac](const Vec& x) {
           double v = har - x[ly.eta()];
           for (int n = 0; n < ly.N; ++n) {
             const double lc = x[ly.L_c(n, k)];
             v -= ac * lc * lc * lc + x[ly.E(n, k)];
           }
           return v;
         },
         [ly, k, ac, dim](const Vec& x) {
           Vec g = Vec::Zero(dim);
           for (int n = 0; n < ly.N; ++n) {
             const double lc = x[ly.L_c(n, k)];
             g[ly.L_c(n, k)] = -3.0 * ac * lc * lc;
             g[ly.E(n, k)] = -1.0;
           }
           g[ly.eta()] = -1.0;
           return g;
         }});
  }
  p.lower = Vec::Zero(dim);
  p.lower[ly.eta()] = -kInf;
  p.upper = Vec::Constant(dim, kInf);
  return p;
}

// Pack an allocation into the NLP coordinate layout.
inline Vec pack_allocation(const Allocation& a, const ResourceNlpLayout& ly) {
  Vec x = Vec::Zero(ly.dim());
  for (int n = 0; n < ly.N; ++n) {
    x[ly.t_o(n)] = a.t_o[n];
    x[ly.t_u(n)] = a.t_u[n];
    for (int k = 0; k < ly.K; ++k) {
      x[ly.E(n, k)] = a.E[n][k];
      x[ly.L_c(n, k)] = a.L_c[n][k];
      x[ly.L_o(n, k)] = a.L_o[n][k];
    }
  }
  x[ly.eta()] = a.eta;
  return x;
}

// Certificate at an allocation: nonnegative least-squares multipliers over
// the active set.
inline KktReport resource_kkt(const ResourceInputs& in, const Allocation& a) {
  const Scenario& s = *in.s;
  std::vector<double> slope(s.N);
  for (int n = 0; n < s.N; ++n)
    slope[n] = detail::relay_capacity_bits(in.lambda[n], in.d_ub[n], s.sigma2,
                                           s.B, s.P_uav_max, 1.0);
  ResourceNlpLayout ly;
  NlpProblem p = resource_nlp(in, slope, &ly);
  Vec x = pack_allocation(a, ly);
  const int nrows = static_cast<int>(p.ineq.size());
  std::vector<Vec> grads(nrows);
  std::vector<int> act;
  for (int i = 0; i < nrows; ++i) {
    grads[i] = p.ineq[i].grad(x);
    const double sc = std::max(1.0, grads[i].cwiseAbs().maxCoeff());
    if (p.ineq[i].value(x) <= 1e-5 * sc) act.push_back(i);
  }
  NlpDuals duals;
  duals.ineq = Vec::Zero(nrows);
  const int na = static_cast<int>(act.size());
  if (na > 0) {
    // scale bit-valued columns down so the fit is well conditioned
    Eigen::MatrixXd J(ly.dim(), na);
    for (int a2 = 0; a2 < na; ++a2) J.col(a2) = grads[act[a2]];
    Vec c = p.objective_grad(x);
    Eigen::MatrixXd JtJ = J.transpose() * J;
    Vec Jtc = J.transpose() * c;
    Vec la = Vec::Zero(na);
    for (int sweep = 0; sweep < 400; ++sweep) {
      double delta_l = 0.0;
      for (int a2 = 0; a2 < na; ++a2) {
        if (JtJ(a2, a2) <= 0.0) continue;
        const double grd = JtJ.row(a2).dot(la) - Jtc[a2];
        const double nl = std::max(0.0, la[a2] - grd / JtJ(a2, a2));
        delta_l = std::max(delta_l, std::abs(nl - la[a2]));
        la[a2] = nl;
      }
      if (delta_l < 1e-16) break;
    }
    for (int a2 = 0; a2 < na; ++a2) duals.ineq[act[a2]] = la[a2];
  }
  return kkt_residual(p, x, duals, false);
}

}  // namespace uavmec
