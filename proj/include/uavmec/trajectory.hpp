#pragma once
// UAV trajectory design: mobility constraints, distance caps inverted from
// the rate constraints, and the fractional-programming surrogate for the
// harvested energy (quadratic transform of 1/d^2). The convex inner problem
// (balls + paraboloid-type harvest sets) is solved by the same primal-dual
// iteration style as the downlink block; every projection is closed form or
// a 1-D Newton.

#include <Eigen/Dense>

#include <cmath>
#include <vector>

#include "uavmec/scenario.hpp"
#include "uavmec/solver_core.hpp"

namespace uavmec {

// Quadratic-transform auxiliary update: y = 1/d^2 at the anchor point.
inline double fp_y_update(const Eigen::Vector2d& q_anchor,
                          const Eigen::Vector2d& s_k, double H) {
  return 1.0 / ((q_anchor - s_k).squaredNorm() + H * H);
}

// Surrogate harvested energy with Lambda = 2y - y^2 d^2 replacing 1/d^2.
inline double fp_surrogate_energy(double rho, double zeta_k, double t_d,
                                  const std::vector<double>& beam_powers,
                                  double sigma_k2, double Lambda) {
  double p = 0.0;
  for (double bp : beam_powers) p += bp;
  return t_d * (1.0 - rho) * zeta_k * (p * Lambda + sigma_k2);
}

struct FPState {
  std::vector<std::vector<double>> y;  // [k][n]
  Trajectory anchor;
};

struct DistanceCaps {
  // squared-distance upper bounds; +inf where no rate constraint binds
  std::vector<std::vector<double>> cap_ku_uplink;    // [k][n]
  std::vector<std::vector<double>> cap_ku_downlink;  // [k][n]
  std::vector<std::vector<double>> cap_ub;           // [n][i]
  bool infeasible = false;
  std::string infeasible_where;
};

struct TrajectoryInputs {
  // frozen at the anchor trajectory (normalized channels)
  std::vector<std::vector<double>> zf_gain;   // [k][n] |v_k^H hbar_k|^2
  std::vector<std::vector<double>> dl_own;    // [k][n] |hbar_k^H w_k|^2
  std::vector<std::vector<double>> dl_intf;   // [k][n] sum_{j!=k}|hbar_k^H w_j|^2
  std::vector<std::vector<double>> rho;       // [n][k]
  std::vector<std::vector<double>> E_total;   // [n][k]
  std::vector<std::vector<double>> E_k;       // [n][k] GE transmit energies
  std::vector<std::vector<double>> L_o;       // [n][k]
  std::vector<double> t_o, t_u;               // [n]
  std::vector<std::vector<double>> L_ou_i;    // [n][i]
  std::vector<std::vector<double>> E_uav_i;   // [n][i]
  std::vector<Eigen::VectorXd> lambda;        // [n]
  const Scenario* s = nullptr;
};

// Invert the rate constraints into per-slot squared-distance caps.
inline DistanceCaps distance_caps(const TrajectoryInputs& in) {
  const Scenario& s = *in.s;
  DistanceCaps caps;
  caps.cap_ku_uplink.assign(s.K, std::vector<double>(s.N, kInf));
  caps.cap_ku_downlink.assign(s.K, std::vector<double>(s.N, kInf));
  caps.cap_ub.assign(s.N, {});
  for (int n = 0; n < s.N; ++n) {
    for (int k = 0; k < s.K; ++k) {
      const double L = in.L_o[n][k];
      if (L > 0.0 && in.t_o[n] > 0.0) {
        const double denom_exp = std::exp2(L / (in.t_o[n] * s.B)) - 1.0;
        if (denom_exp > 0.0)
          caps.cap_ku_uplink[k][n] =
              in.E_k[n][k] * in.zf_gain[k][n] /
              (in.t_o[n] * s.sigma2 * denom_exp);
        const double gamma = std::exp2(s.theta * L / (s.t_d * s.B)) - 1.0;
        if (gamma > 0.0) {
          const double rho = in.rho[n][k];
          const double num = rho * (in.dl_own[k][n] - gamma * in.dl_intf[k][n]);
          if (num <= 0.0) {
            caps.infeasible = true;
            caps.infeasible_where = "downlink SINR unreachable at any "
                                    "distance for GE " + std::to_string(k) +
                                    " slot " + std::to_string(n);
            caps.cap_ku_downlink[k][n] = 0.0;
          } else {
            caps.cap_ku_downlink[k][n] =
                num / (gamma * (rho * s.sigma_k2[k] + s.delta_k2[k]));
          }
        }
      }
    }
    const int taun = static_cast<int>(in.lambda[n].size());
    caps.cap_ub[n].assign(taun, kInf);
    for (int i = 0; i < taun; ++i) {
      const double Li = (i < static_cast<int>(in.L_ou_i[n].size()))
                            ? in.L_ou_i[n][i]
                            : 0.0;
      if (Li > 0.0 && in.t_u[n] > 0.0) {
        const double denom_exp = std::exp2(Li / (in.t_u[n] * s.B)) - 1.0;
        if (denom_exp > 0.0)
          caps.cap_ub[n][i] = in.E_uav_i[n][i] * in.lambda[n][i] /
                              (s.sigma2 * in.t_u[n] * denom_exp);
      }
    }
  }
  return caps;
}

struct TrajectoryResult {
  Trajectory traj;
  double eta = 0.0;      // true harvest at frozen hbar, new distances
  bool no_progress = false;
  KktReport kkt;
  std::vector<double> fp_eta_trace;  // retained objective per FP iteration
};

// one per-slot distance-cap ball on an interior point
struct CapBall {
  int slot = 0;  // interior index (slot = index + 1)
  Eigen::Vector2d c = Eigen::Vector2d::Zero();
  double r = 0.0;
};

// NLP over (interior q, eta) for one FP-fixed convex subproblem: mobility
// balls, cap balls, and the harvest paraboloids sum b_kn ||q_n - s_k||^2 +
// eta <= A_k.
inline NlpProblem trajectory_nlp(const Scenario& s,
                                 const std::vector<CapBall>& balls,
                                 const std::vector<std::vector<double>>& b,
                                 const std::vector<double>& A) {
  NlpProblem p;
  const int K = static_cast<int>(b.size());
  const int ni = K > 0 ? static_cast<int>(b[0].size()) : s.N - 2;
  const int dim = 2 * ni + 1;
  const int n_edges = ni + 1;
  const double step_r = s.delta * s.Vmax;
  const double r2 = step_r * step_r;
  const Eigen::Vector2d qI = s.q_I, qF = s.q_F;
  auto pt = [ni, qI, qF](const Vec& v, int slot) {
    if (slot == 0) return qI;
    if (slot == ni + 1) return qF;
    return Eigen::Vector2d(v[2 * (slot - 1)], v[2 * (slot - 1) + 1]);
  };
  p.objective = [dim](const Vec& v) { return -v[dim - 1]; };
  p.objective_grad = [dim](const Vec&) {
    Vec g = Vec::Zero(dim);
    g[dim - 1] = -1.0;
    return g;
  };
  for (int eidx = 0; eidx < n_edges; ++eidx) {
    p.ineq.push_back(
        {"mobility[" + std::to_string(eidx) + "]",
         [eidx, r2, pt](const Vec& v) {
           return r2 - (pt(v, eidx + 1) - pt(v, eidx)).squaredNorm();
         },
         [eidx, ni, dim, pt](const Vec& v) {
           Vec g = Vec::Zero(dim);
           const Eigen::Vector2d d = pt(v, eidx + 1) - pt(v, eidx);
           if (eidx + 1 <= ni) {
             g[2 * eidx] -= 2.0 * d.x();
             g[2 * eidx + 1] -= 2.0 * d.y();
           }
           if (eidx >= 1) {
             g[2 * (eidx - 1)] += 2.0 * d.x();
             g[2 * (eidx - 1) + 1] += 2.0 * d.y();
           }
           return g;
         }});
  }
  for (const auto& bl : balls) {
    const Eigen::Vector2d c = bl.c;
    const double rr = bl.r * bl.r;
    const int sl = bl.slot;
    p.ineq.push_back({"cap_ball",
                      [sl, c, rr](const Vec& v) {
                        const Eigen::Vector2d q(v[2 * sl], v[2 * sl + 1]);
                        return rr - (q - c).squaredNorm();
                      },
                      [sl, c, dim](const Vec& v) {
                        Vec g = Vec::Zero(dim);
                        const Eigen::Vector2d q(v[2 * sl], v[2 * sl + 1]);
                        g[2 * sl] = -2.0 * (q.x() - c.x());
                        g[2 * sl + 1] = -2.0 * (q.y() - c.y());
                        return g;
                      }});
  }
  for (int k = 0; k < K; ++k) {
    const Eigen::Vector2d sk = s.s_k[k];
    const std::vector<double> bk = b[k];
    const double Ak = A[k];
    p.ineq.push_back(
        {"harvest[" + std::to_string(k) + "]",
         [bk, Ak, sk, ni, dim](const Vec& v) {
           double acc = Ak - v[dim - 1];
           for (int i = 0; i < ni; ++i) {
             const Eigen::Vector2d q(v[2 * i], v[2 * i + 1]);
             acc -= bk[i] * (q - sk).squaredNorm();
           }
           return acc;
         },
         [bk, sk, ni, dim](const Vec& v) {
           Vec g = Vec::Zero(dim);
           for (int i = 0; i < ni; ++i) {
             const Eigen::Vector2d q(v[2 * i], v[2 * i + 1]);
             g[2 * i] = -2.0 * bk[i] * (q.x() - sk.x());
             g[2 * i + 1] = -2.0 * bk[i] * (q.y() - sk.y());
           }
           g[dim - 1] = -1.0;
           return g;
         }});
  }
  return p;
}

namespace detail {

// Projection of (z, e) onto {sum_n b_n ||z_n - s||^2 + ce * e <= A}.
// z holds 2-D points stacked; b_n >= 0, ce > 0.
inline void project_paraboloid(Vec& z, double& e, const Eigen::Vector2d& sct,
                               const std::vector<double>& b, double ce,
                               double A) {
  const int n = static_cast<int>(b.size());
  auto value = [&](double mu, Vec& zz, double& ee) {
    double v = 0.0;
    for (int i = 0; i < n; ++i) {
      Eigen::Vector2d zi(z[2 * i], z[2 * i + 1]);
      Eigen::Vector2d zn = (zi + 2.0 * mu * b[i] * sct) / (1.0 + 2.0 * mu * b[i]);
      zz[2 * i] = zn.x();
      zz[2 * i + 1] = zn.y();
      v += b[i] * (zn - sct).squaredNorm();
    }
    ee = e - mu * ce;
    return v + ce * ee - A;
  };
  Vec ztmp = z;
  double etmp = e;
  if (value(0.0, ztmp, etmp) <= 0.0) return;
  auto deriv = [&](double mu) {
    double d = -ce * ce;
    for (int i = 0; i < n; ++i) {
      const Eigen::Vector2d zi(z[2 * i], z[2 * i + 1]);
      const double den = 1.0 + 2.0 * mu * b[i];
      d -= 4.0 * b[i] * b[i] * (zi - sct).squaredNorm() / (den * den * den);
    }
    return d;
  };
  double lo = 0.0, hi = 1.0;
  while (value(hi, ztmp, etmp) > 0.0 && hi < 1e300) hi *= 2.0;
  double mu = 0.5 * hi;
  for (int it = 0; it < 60; ++it) {
    const double v = value(mu, ztmp, etmp);
    if (v > 0.0)
      lo = mu;
    else
      hi = mu;
    if (std::abs(v) <= 1e-14 || hi - lo <= 1e-15 * std::max(1.0, hi)) break;
    double mun = mu - v / deriv(mu);
    if (!(mun > lo && mun < hi)) mun = 0.5 * (lo + hi);
    mu = mun;
  }
  value(hi, z, e);
}

}  // namespace detail

// P4: maximize eta over the trajectory under mobility, distance-cap and
// FP-surrogate harvest constraints; outer loop alternates the y-update with
// the convex solve.
inline TrajectoryResult solve_trajectory(const TrajectoryInputs& in,
                                         const Trajectory& anchor,
                                         double tol = 1e-6,
                                         int max_fp_iters = 30) {
  const Scenario& s = *in.s;
  const int N = s.N, K = s.K;
  TrajectoryResult res;
  res.traj = anchor;

  // frozen constants
  std::vector<std::vector<double>> Ptot(K, std::vector<double>(N));
  std::vector<std::vector<double>> alpha(K, std::vector<double>(N));
  for (int k = 0; k < K; ++k)
    for (int n = 0; n < N; ++n) {
      Ptot[k][n] = in.dl_own[k][n] + in.dl_intf[k][n];
      alpha[k][n] =
          s.t_d * (1.0 - in.rho[n][k]) * s.zeta_k[k] * Ptot[k][n];
    }
  auto true_eta = [&](const Trajectory& tr) {
    double eta = kInf;
    for (int k = 0; k < K; ++k) {
      double v = 0.0;
      for (int n = 0; n < N; ++n) {
        const double d2 = (tr.q[n] - s.s_k[k]).squaredNorm() + s.H * s.H;
        v += alpha[k][n] / d2 +
             s.t_d * (1.0 - in.rho[n][k]) * s.zeta_k[k] * s.sigma_k2[k];
        v -= in.E_total[n][k];
      }
      eta = std::min(eta, v);
    }
    return eta;
  };

  if (N <= 2) {  // endpoints fixed; nothing to optimize
    res.eta = true_eta(res.traj);
    return res;
  }

  const DistanceCaps caps = distance_caps(in);
  if (caps.infeasible) {
    res.no_progress = true;
    res.eta = true_eta(res.traj);
    return res;
  }
  // per-slot combined ball constraints (interior slots only)
  std::vector<CapBall> balls;
  for (int n = 1; n + 1 < N; ++n) {
    for (int k = 0; k < K; ++k) {
      const double cap = std::min(caps.cap_ku_uplink[k][n],
                                  caps.cap_ku_downlink[k][n]);
      if (std::isfinite(cap)) {
        const double r2 = cap - s.H * s.H;
        if (r2 < 0.0) {
          res.no_progress = true;
          res.eta = true_eta(res.traj);
          return res;
        }
        balls.push_back({n - 1, s.s_k[k], std::sqrt(r2)});
      }
    }
    double cap_b = kInf;
    for (double c : caps.cap_ub[n]) cap_b = std::min(cap_b, c);
    if (std::isfinite(cap_b)) {
      const double r2 = cap_b - s.H * s.H;
      if (r2 < 0.0) {
        res.no_progress = true;
        res.eta = true_eta(res.traj);
        return res;
      }
      balls.push_back({n - 1, s.s_b, std::sqrt(r2)});
    }
  }
  const double step_r = s.delta * s.Vmax;
  const int ni = N - 2;           // interior points
  const int dim = 2 * ni + 1;     // + eta
  const int n_edges = N - 1;

  // scales
  double e_hi = 0.0;
  for (int k = 0; k < K; ++k) {
    double v = 0.0;
    for (int n = 0; n < N; ++n)
      v += alpha[k][n] / (s.H * s.H) +
           s.t_d * s.zeta_k[k] * s.sigma_k2[k];
    e_hi = std::max(e_hi, v);
  }
  const double se = std::max(1.0, e_hi);

  FPState fp;
  fp.y.assign(K, std::vector<double>(N, 0.0));
  fp.anchor = res.traj;
  double eta_prev = true_eta(res.traj);
  const double eta_anchor_true = eta_prev;

  Vec x(dim);
  for (int i = 0; i < ni; ++i) {
    x[2 * i] = res.traj.q[i + 1].x();
    x[2 * i + 1] = res.traj.q[i + 1].y();
  }
  x[dim - 1] = eta_prev / se;

  const int ydim = 2 * n_edges + 2 * static_cast<int>(balls.size()) + K * dim;
  Vec y = Vec::Zero(ydim);
  std::vector<double> lam_balls;  // ball multipliers for the certificate
  std::vector<double> lam_parab(K, 0.0);
  std::vector<double> lam_edges(n_edges, 0.0);

  std::vector<std::vector<double>> b(K, std::vector<double>(ni, 0.0));
  std::vector<double> A(K, 0.0);
  double normK = -1.0;  // constant across FP iterations (identity-type maps)
  for (int fpit = 0; fpit < max_fp_iters; ++fpit) {
    // y-update at the current anchor
    for (int k = 0; k < K; ++k)
      for (int n = 0; n < N; ++n)
        fp.y[k][n] = fp_y_update(fp.anchor.q[n], s.s_k[k], s.H);

    // paraboloid data: sum_n b_kn ||q_n - s_k||^2 + eta <= A_k
    for (int k = 0; k < K; ++k) {
      double acc = 0.0;
      for (int n = 0; n < N; ++n) {
        const double yk = fp.y[k][n];
        const double bn = alpha[k][n] * yk * yk;
        const double cn = alpha[k][n] * (2.0 * yk - yk * yk * s.H * s.H) +
                          s.t_d * (1.0 - in.rho[n][k]) * s.zeta_k[k] *
                              s.sigma_k2[k] -
                          in.E_total[n][k];
        if (n == 0 || n == N - 1) {
          acc += cn - bn * (res.traj.q[n] - s.s_k[k]).squaredNorm();
        } else {
          acc += cn;
          b[k][n - 1] = bn;
        }
      }
      A[k] = acc;
    }

    // ---- PDHG on (q, eta) ----
    auto applyK = [&](const Vec& v) {
      Vec z(ydim);
      int row = 0;
      // edges
      z[row++] = v[0] ;
      z[row++] = v[1];
      for (int eidx = 1; eidx + 1 < n_edges; ++eidx) {
        z[row++] = v[2 * eidx] - v[2 * (eidx - 1)];
        z[row++] = v[2 * eidx + 1] - v[2 * (eidx - 1) + 1];
      }
      z[row++] = v[2 * (ni - 1)];
      z[row++] = v[2 * (ni - 1) + 1];
      for (const auto& bl : balls) {
        z[row++] = v[2 * bl.slot];
        z[row++] = v[2 * bl.slot + 1];
      }
      for (int k = 0; k < K; ++k) {
        z.segment(row, dim) = v;
        row += dim;
      }
      return z;
    };
    auto applyKT = [&](const Vec& zv) {
      Vec v = Vec::Zero(dim);
      int row = 0;
      v[0] += zv[row];
      v[1] += zv[row + 1];
      row += 2;
      for (int eidx = 1; eidx + 1 < n_edges; ++eidx) {
        v[2 * eidx] += zv[row];
        v[2 * eidx + 1] += zv[row + 1];
        v[2 * (eidx - 1)] -= zv[row];
        v[2 * (eidx - 1) + 1] -= zv[row + 1];
        row += 2;
      }
      v[2 * (ni - 1)] += zv[row];
      v[2 * (ni - 1) + 1] += zv[row + 1];
      row += 2;
      for (const auto& bl : balls) {
        v[2 * bl.slot] += zv[row];
        v[2 * bl.slot + 1] += zv[row + 1];
        row += 2;
      }
      for (int k = 0; k < K; ++k) {
        v += zv.segment(row, dim);
        row += dim;
      }
      return v;
    };
    auto project = [&](Vec& z) {
      int row = 0;
      {  // first edge: ball around q_I
        Vec2 p(z[row], z[row + 1]);
        p = project_ball(p, s.q_I, step_r);
        z[row] = p.x();
        z[row + 1] = p.y();
        row += 2;
      }
      for (int eidx = 1; eidx + 1 < n_edges; ++eidx) {
        Vec2 p(z[row], z[row + 1]);
        p = project_ball(p, Vec2::Zero(), step_r);
        z[row] = p.x();
        z[row + 1] = p.y();
        row += 2;
      }
      {
        Vec2 p(z[row], z[row + 1]);
        p = project_ball(p, s.q_F, step_r);
        z[row] = p.x();
        z[row + 1] = p.y();
        row += 2;
      }
      for (const auto& bl : balls) {
        Vec2 p(z[row], z[row + 1]);
        p = project_ball(p, bl.c, bl.r);
        z[row] = p.x();
        z[row + 1] = p.y();
        row += 2;
      }
      for (int k = 0; k < K; ++k) {
        Vec zq = z.segment(row, dim - 1);
        double ze = z[row + dim - 1];
        detail::project_paraboloid(zq, ze, s.s_k[k], b[k], se, A[k]);
        z.segment(row, dim - 1) = zq;
        z[row + dim - 1] = ze;
        row += dim;
      }
    };

    if (normK < 0.0)
      normK = std::max(1e-12, operator_norm_est(applyK, applyKT, dim));
    const double tauP = 0.95 / normK, sigmaP = 0.95 / normK;
    Vec xx = x, yy = y, xbar = x;
    Vec xacc = x, yacc = y;
    long nacc = 1;
    double last = kInf;
    for (int it = 1; it <= 2000; ++it) {
      Vec v = yy + sigmaP * applyK(xbar);
      Vec pv = v / sigmaP;
      project(pv);
      yy = v - sigmaP * pv;
      Vec xn = xx - tauP * applyKT(yy);
      xn[dim - 1] += tauP * se;  // objective: max eta
      xbar = 2.0 * xn - xx;
      xx = xn;
      xacc += xx;
      yacc += yy;
      ++nacc;
      if (it % 50 == 0) {
        const double cur = xacc[dim - 1] / nacc;
        if (std::abs(cur - last) <= 1e-9 * std::max(1.0, std::abs(cur)))
          break;
        last = cur;
      }
      if (it % 400 == 0) {
        xx = xacc / nacc;
        yy = yacc / nacc;
        xbar = xx;
        xacc = xx;
        yacc = yy;
        nacc = 1;
      }
    }
    x = xacc / nacc;
    y = yacc / nacc;

    // ---- feasibility polish (cyclic projections, exact in float) ----
    Trajectory tr = res.traj;
    for (int i = 0; i < ni; ++i) tr.q[i + 1] = Vec2(x[2 * i], x[2 * i + 1]);
    for (int sweep = 0; sweep < 400; ++sweep) {
      bool clean = true;
      for (const auto& bl : balls) {
        Vec2& p = tr.q[bl.slot + 1];
        if ((p - bl.c).norm() > bl.r) {
          p = project_ball(p, bl.c, bl.r);
          clean = false;
        }
      }
      for (int n2 = 0; n2 + 1 < N; ++n2) {
        Vec2 a = tr.q[n2], bq = tr.q[n2 + 1];
        const double dn = (bq - a).norm();
        if (dn > step_r) {
          clean = false;
          const Vec2 mid = 0.5 * (a + bq);
          const Vec2 dir = (bq - a) / dn;
          const double half = 0.5 * step_r * (1.0 - 1e-12);
          if (n2 == 0) {
            tr.q[n2 + 1] = a + dir * step_r * (1.0 - 1e-12);
          } else if (n2 + 1 == N - 1) {
            tr.q[n2] = bq - dir * step_r * (1.0 - 1e-12);
          } else {
            tr.q[n2] = mid - dir * half;
            tr.q[n2 + 1] = mid + dir * half;
          }
        }
      }
      if (clean) break;
    }

    const double eta_new = true_eta(tr);
    if (eta_new >= eta_prev) {
      res.traj = tr;
      fp.anchor = tr;
      for (int i = 0; i < ni; ++i) {
        x[2 * i] = tr.q[i + 1].x();
        x[2 * i + 1] = tr.q[i + 1].y();
      }
      const bool settled = std::abs(eta_new - eta_prev) <=
                           tol * std::max(1.0, std::abs(eta_prev));
      eta_prev = eta_new;
      res.fp_eta_trace.push_back(eta_prev);
      if (settled && fpit > 0) break;
    } else {
      res.fp_eta_trace.push_back(eta_prev);
      break;  // keep the previous (better) trajectory
    }
  }

  res.eta = eta_prev;
  res.no_progress = eta_prev <= eta_anchor_true + 1e-15;

  // ---- certificate of the final convex subproblem ----
  // multipliers refitted at the reported point by nonnegative least squares
  // over the active constraints
  {
    NlpProblem p = trajectory_nlp(s, balls, b, A);
    Vec xn(dim);
    for (int i = 0; i < ni; ++i) {
      xn[2 * i] = res.traj.q[i + 1].x();
      xn[2 * i + 1] = res.traj.q[i + 1].y();
    }
    xn[dim - 1] = res.eta;
    const int nrows = static_cast<int>(p.ineq.size());
    std::vector<int> act;
    std::vector<Vec> grads(nrows);
    for (int i = 0; i < nrows; ++i) {
      grads[i] = p.ineq[i].grad(xn);
      const double sc = std::max(1.0, grads[i].cwiseAbs().maxCoeff());
      if (p.ineq[i].value(xn) <= 1e-6 * sc) act.push_back(i);
    }
    NlpDuals duals;
    duals.ineq = Vec::Zero(nrows);
    const int na = static_cast<int>(act.size());
    if (na > 0) {
      Eigen::MatrixXd J(dim, na);
      for (int a = 0; a < na; ++a) J.col(a) = grads[act[a]];
      const Vec c = p.objective_grad(xn);
      Eigen::MatrixXd JtJ = J.transpose() * J;
      Vec Jtc = J.transpose() * c;
      Vec la = Vec::Zero(na);
      for (int sweep = 0; sweep < 300; ++sweep) {
        double delta_l = 0.0;
        for (int a = 0; a < na; ++a) {
          if (JtJ(a, a) <= 0.0) continue;
          const double grd = JtJ.row(a).dot(la) - Jtc[a];
          const double nl = std::max(0.0, la[a] - grd / JtJ(a, a));
          delta_l = std::max(delta_l, std::abs(nl - la[a]));
          la[a] = nl;
        }
        if (delta_l < 1e-15) break;
      }
      for (int a = 0; a < na; ++a) duals.ineq[act[a]] = la[a];
    }
    res.kkt = kkt_residual(p, xn, duals, false);
  }
  return res;
}

}  // namespace uavmec
