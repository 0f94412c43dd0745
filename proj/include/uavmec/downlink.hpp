#pragma once
// Downlink-period SWIPT design: beam covariances W_k[n], power-splitting
// ratios rho_k[n] and received-power slacks Omega_k[n], maximizing the
// minimum remaining energy with the other blocks fixed.
//
// The nonconvex pieces are handled exactly as in the SDR route: W = w w^H
// lifted to a PSD matrix with the rank constraint dropped, rho = exp(rho~),
// a slack Omega with exp(Omega) bounded by the received power, and an outer
// SCA loop that linearizes exp(Omega) at the current anchor. Each inner
// problem is convex (linear + PSD + scalar exponential sets) and is solved
// by a primal-dual (Chambolle-Pock) iteration whose only nontrivial
// projections are eigenvalue clipping and 1-D Newton steps on exponential
// boundary curves. Rank-one beams are then recovered in closed form and
// audited; Gaussian randomization is the fallback.

#include <Eigen/Dense>

#include <cmath>
#include <complex>
#include <random>
#include <stdexcept>
#include <vector>

#include "uavmec/scenario.hpp"
#include "uavmec/solver_core.hpp"

namespace uavmec {

// SINR at GE k's information decoder under power splitting.
inline double downlink_sinr(double rho, const Eigen::VectorXcd& h,
                            const std::vector<Eigen::VectorXcd>& w_all, int k,
                            double sigma_k2, double delta_k2) {
  if (rho <= 0.0) return 0.0;
  double sig = 0.0, itf = 0.0;
  for (size_t j = 0; j < w_all.size(); ++j) {
    if (w_all[j].size() == 0) continue;
    const double p = std::norm(h.dot(w_all[j]));
    if (static_cast<int>(j) == k)
      sig = p;
    else
      itf += p;
  }
  return rho * sig / (rho * (itf + sigma_k2) + delta_k2);
}

// Energy harvested by GE k during the downlink period.
inline double harvested_energy(double rho, const Eigen::VectorXcd& h,
                               const std::vector<Eigen::VectorXcd>& w_all,
                               double sigma_k2, double zeta_k, double t_d) {
  double p = sigma_k2;
  for (const auto& w : w_all)
    if (w.size() > 0) p += std::norm(h.dot(w));
  return t_d * zeta_k * (1.0 - rho) * p;
}

// First-order Taylor under-estimator of exp at the anchor.
inline double taylor_xi1(double Omega, double anchor) {
  return std::exp(anchor) * (1.0 + Omega - anchor);
}

struct RankOneAudit {
  double own_gain_rel_err = 0.0;  // |h^H W* h - h^H Wr h| / (h^H W* h)
  double trace_increase = 0.0;    // max(0, tr(Wr) - tr(W*))
  double eig_ratio = 0.0;         // lambda_2 / lambda_1 of Wr
  bool degenerate = false;        // h^H W* h ~ 0
};

// Theorem-1 style recovery: Wr = (W h h^H W) / (h^H W h); returns the beam
// w with w w^H = Wr. Degenerate direction (h^H W h ~ 0) yields a zero beam
// when W itself is negligible, and is flagged otherwise.
inline Eigen::VectorXcd rank_one_recover(const Eigen::MatrixXcd& Wstar,
                                         const Eigen::VectorXcd& h,
                                         RankOneAudit* audit = nullptr) {
  const double quad = std::max(0.0, (h.adjoint() * Wstar * h)(0, 0).real());
  const double tr = Wstar.trace().real();
  RankOneAudit a;
  Eigen::VectorXcd w = Eigen::VectorXcd::Zero(h.size());
  if (quad <= 1e-18 * std::max(1.0, tr)) {
    a.degenerate = tr > 1e-12;
  } else {
    w = (Wstar * h) / std::sqrt(quad);
    const double quad_r = std::norm(h.dot(w));
    a.own_gain_rel_err = std::abs(quad_r - quad) / quad;
    a.trace_increase = std::max(0.0, w.squaredNorm() - tr);
    a.eig_ratio = 0.0;  // w w^H is rank one by construction
  }
  if (audit) *audit = a;
  return w;
}

// ---------------------------------------------------------------------------

struct DownlinkInputs {
  // raw per-slot channels h_ku[k][n] and the fixed allocation quantities
  std::vector<std::vector<Eigen::VectorXcd>> h;  // [k][n]
  std::vector<std::vector<double>> L_o;          // [n][k] offloaded bits
  std::vector<std::vector<double>> E_total;      // [n][k] compute+transmit (J)
  const Scenario* s = nullptr;
};

struct DownlinkOptions {
  double sca_tol = 1e-6;
  int sca_max_iters = 25;
  double feas_tol = 5e-7;     // natural-unit constraint violation target
  int pdhg_max_iters = 20000;
  int pdhg_min_iters = 200;
  double fixed_rho = -1.0;    // >= 0 pins rho_k[n] (baseline scheme)
  int randomization_draws = 1000;
};

struct DownlinkSolution {
  std::vector<std::vector<Eigen::VectorXcd>> w;   // [n][k] recovered beams
  std::vector<std::vector<Eigen::MatrixXcd>> W;   // [n][k] rank-one covariances
  std::vector<std::vector<double>> rho;           // [n][k]
  std::vector<std::vector<double>> rho_tilde;     // [n][k]
  std::vector<std::vector<double>> Omega;         // [n][k]
  double eta = 0.0;           // true objective of the recovered solution
  bool converged = false;
  bool recovery_warning = false;
  bool infeasible = false;
  std::string message;
  KktReport kkt;
  int sca_iters = 0;
  long pdhg_iters = 0;
  std::vector<double> sca_eta_trace;  // retained true objective per anchor
  // warm-start payload for the next call on the same problem shape
  Vec warm_x, warm_y;
};

namespace detail {

// Scaled PDHG model of one inner (fixed-anchor) convex problem.
struct P31Model {
  int N = 0, K = 0, L = 0, L2 = 0;
  // constants (natural units)
  std::vector<std::vector<Vec>> svH;        // [k][n] svec(h h^H)
  std::vector<std::vector<CMat>> Hmat;      // [k][n] h h^H
  std::vector<std::vector<double>> normH;   // [k][n] ||h||^2
  std::vector<std::vector<double>> gamma;   // [k][n] tightened SINR target
  std::vector<std::vector<double>> Etot;    // [k][n]
  std::vector<std::vector<double>> abar, bbar;  // [k][n] xi1 = a + b*Omega
  std::vector<double> sigk2, delk2, zetk;
  double td = 0, P = 0;
  // boxes
  double r_lo = 0, r_hi = 0;
  std::vector<std::vector<double>> o_lo, o_hi;
  double e_lo = 0, e_hi = 0;
  // scales
  double sW = 1, st = 1, se = 1;

  int offR = 0, offO = 0, offT = 0, offE = 0, dim = 0;
  int yB = 0, yC = 0, yD = 0, yE = 0, ydim = 0;

  int wofs(int k, int n) const { return (n * K + k) * L2; }
  int idx(int k, int n) const { return n * K + k; }

  void layout() {
    L2 = L * L;
    offR = N * K * L2;
    offO = offR + N * K;
    offT = offO + N * K;
    offE = offT + N * K;
    dim = offE + 1;
    yB = N;
    yC = yB + 2 * N * K;
    yD = yC + 2 * N * K;
    yE = yD + 2 * N * K;
    ydim = yE + K;
  }

  // row scales
  double sB(int k, int n) const {
    return sW * normH[k][n] * std::max(1.0, gamma[k][n] * (K - 1));
  }
  double sC(int k, int n) const { return sW * normH[k][n]; }
  double sE() const { return std::max(se, td * 0.8 * st); }

  // z = K x (scaled spaces on both sides)
  Vec apply(const Vec& x) const {
    Vec z = Vec::Zero(ydim);
    for (int n = 0; n < N; ++n) {
      // quadratic forms q[k][j] = svH_k . W_j (scaled W)
      Eigen::MatrixXd q(K, K);
      for (int k = 0; k < K; ++k)
        for (int j = 0; j < K; ++j)
          q(k, j) = svH[k][n].dot(x.segment(wofs(j, n), L2));
      double ptot = 0.0;
      for (int j = 0; j < K; ++j)
        for (int d = 0; d < L; ++d) ptot += x[wofs(j, n) + d];
      z[n] = ptot;
      for (int k = 0; k < K; ++k) {
        const int i = idx(k, n);
        if (gamma[k][n] > 0.0) {
          double u = q(k, k);
          for (int j = 0; j < K; ++j)
            if (j != k) u -= gamma[k][n] * q(k, j);
          z[yB + 2 * i] = u * sW / sB(k, n);
          z[yB + 2 * i + 1] = x[offR + i];
        }
        double p = 0.0;
        for (int j = 0; j < K; ++j) p += q(k, j);
        z[yC + 2 * i] = p * sW / sC(k, n);
        z[yC + 2 * i + 1] = x[offO + i];
        z[yD + 2 * i] = x[offR + i] + x[offO + i];
        z[yD + 2 * i + 1] = x[offT + i];
        z[yE + k] += (td * zetk[k] * bbar[k][n] * x[offO + i] -
                      td * zetk[k] * st * x[offT + i]) /
                     sE();
      }
    }
    for (int k = 0; k < K; ++k) z[yE + k] -= se * x[offE] / sE();
    return z;
  }

  Vec apply_adjoint(const Vec& y) const {
    Vec x = Vec::Zero(dim);
    for (int n = 0; n < N; ++n) {
      // coefficient of q(k, j) accumulated per row block
      Eigen::MatrixXd cq = Eigen::MatrixXd::Zero(K, K);
      for (int k = 0; k < K; ++k) {
        const int i = idx(k, n);
        if (gamma[k][n] > 0.0) {
          const double yu = y[yB + 2 * i] * sW / sB(k, n);
          cq(k, k) += yu;
          for (int j = 0; j < K; ++j)
            if (j != k) cq(k, j) -= gamma[k][n] * yu;
          x[offR + i] += y[yB + 2 * i + 1];
        }
        const double yp = y[yC + 2 * i] * sW / sC(k, n);
        for (int j = 0; j < K; ++j) cq(k, j) += yp;
        x[offO + i] += y[yC + 2 * i + 1];
        x[offR + i] += y[yD + 2 * i];
        x[offO + i] += y[yD + 2 * i];
        x[offT + i] += y[yD + 2 * i + 1];
        x[offO + i] += y[yE + k] * td * zetk[k] * bbar[k][n] / sE();
        x[offT + i] -= y[yE + k] * td * zetk[k] * st / sE();
      }
      for (int j = 0; j < K; ++j) {
        auto wj = x.segment(wofs(j, n), L2);
        for (int k = 0; k < K; ++k)
          if (cq(k, j) != 0.0) wj += cq(k, j) * svH[k][n];
        for (int d = 0; d < L; ++d) wj[d] += y[n];
      }
    }
    for (int k = 0; k < K; ++k) x[offE] -= se * y[yE + k] / sE();
    return x;
  }

  // project z onto the constraint sets (scaled spaces)
  void project(Vec& z) const {
    for (int n = 0; n < N; ++n) {
      z[n] = std::min(z[n], P / sW);
      for (int k = 0; k < K; ++k) {
        const int i = idx(k, n);
        if (gamma[k][n] > 0.0) {
          const double s = sB(k, n);
          const Vec2 pr = project_exp_set(
              z[yB + 2 * i + 1], z[yB + 2 * i], gamma[k][n] * delk2[k] / s,
              -1.0, gamma[k][n] * sigk2[k] / s);
          z[yB + 2 * i + 1] = pr[0];
          z[yB + 2 * i] = pr[1];
        } else {
          z[yB + 2 * i] = 0.0;
          z[yB + 2 * i + 1] = 0.0;
        }
        {
          const double s = sC(k, n);
          const Vec2 pr = project_exp_set(z[yC + 2 * i + 1], z[yC + 2 * i],
                                          1.0 / s, 1.0, -sigk2[k] / s);
          z[yC + 2 * i + 1] = pr[0];
          z[yC + 2 * i] = pr[1];
        }
        {
          const Vec2 pr = project_exp_set(z[yD + 2 * i], z[yD + 2 * i + 1],
                                          1.0 / st, 1.0, 0.0);
          z[yD + 2 * i] = pr[0];
          z[yD + 2 * i + 1] = pr[1];
        }
      }
    }
    for (int k = 0; k < K; ++k) {
      double c = Etot_sum(k);
      for (int n = 0; n < N; ++n) c -= td * zetk[k] * abar[k][n];
      z[yE + k] = std::max(z[yE + k], c / sE());
    }
  }

  double Etot_sum(int k) const {
    double c = 0.0;
    for (int n = 0; n < N; ++n) c += Etot[k][n];
    return c;
  }

  struct Work {
    Eigen::SelfAdjointEigenSolver<CMat> eig;
    CMat W, Wp;
    Vec z, pv, xn;
    explicit Work(int L) : W(L, L), Wp(L, L) {}
  };

  // prox of the direct sets plus the linear objective (-eta)
  void prox_primal(Vec& x, double tau, Work& wk) const {
    for (int n = 0; n < N; ++n)
      for (int k = 0; k < K; ++k) {
        double* seg = x.data() + wofs(k, n);
        unsvec_into(seg, wk.W);
        wk.eig.compute(wk.W);
        const Vec& ev = wk.eig.eigenvalues();
        if (ev[0] < 0.0) {  // clip negative part
          Vec evc = ev.cwiseMax(0.0);
          wk.Wp.noalias() = wk.eig.eigenvectors() * evc.asDiagonal() *
                            wk.eig.eigenvectors().adjoint();
          svec_into(wk.Wp, seg);
        }
        const int i = idx(k, n);
        x[offR + i] = std::clamp(x[offR + i], r_lo, r_hi);
        x[offO + i] = std::clamp(x[offO + i], o_lo[k][n], o_hi[k][n]);
        x[offT + i] =
            std::clamp(x[offT + i], 0.0, std::exp(o_hi[k][n]) / st);
      }
    x[offE] = std::clamp(x[offE] + tau * se, e_lo / se, e_hi / se);
  }

  // Conditionally-optimal scalar blocks given the current covariances:
  // rho~ sits at its SINR-imposed floor, Omega at the received-power cap,
  // t on the exp epigraph, eta at the surrogate min. Used as a
  // block-coordinate jump at averaging restarts; PDHG continues after it.
  void coordinate_polish(Vec& x) const {
    for (int n = 0; n < N; ++n) {
      double ptot = 0.0;
      for (int j = 0; j < K; ++j)
        for (int d = 0; d < L; ++d) ptot += x[wofs(j, n) + d];
      if (ptot * sW > P) {
        const double sc = P / (ptot * sW);
        for (int j = 0; j < K; ++j) x.segment(wofs(j, n), L2) *= sc;
      }
    }
    for (int n = 0; n < N; ++n)
      for (int k = 0; k < K; ++k) {
        const int i = idx(k, n);
        double q_own = 0.0, q_all = sigk2[k];
        for (int j = 0; j < K; ++j) {
          const double q = svH[k][n].dot(x.segment(wofs(j, n), L2)) * sW;
          q_all += q;
          if (j == k) q_own = q;
        }
        double r = r_lo;
        if (gamma[k][n] > 0.0) {
          const double denom =
              q_own - gamma[k][n] * (q_all - sigk2[k] - q_own + sigk2[k]);
          if (denom > 0.0)
            r = std::max(r_lo,
                         std::log(gamma[k][n] * delk2[k] * (1.0 + 1e-9) /
                                  denom));
          else
            r = x[offR + i];  // SINR not yet coverable; leave to the duals
        }
        x[offR + i] = std::clamp(r, r_lo, r_hi);
        const double o = std::clamp(std::log(q_all), o_lo[k][n], o_hi[k][n]);
        x[offO + i] = o;
        x[offT + i] = std::clamp(std::exp(x[offR + i] + o) / st, 0.0,
                                 std::exp(o_hi[k][n]) / st);
      }
    double e = kInf;
    for (int k = 0; k < K; ++k) {
      double v = -Etot_sum(k);
      for (int n = 0; n < N; ++n) {
        const int i = idx(k, n);
        v += td * zetk[k] *
             (abar[k][n] + bbar[k][n] * x[offO + i] - x[offT + i] * st);
      }
      e = std::min(e, v);
    }
    x[offE] = std::clamp(e / se, e_lo / se, e_hi / se);
  }

  // worst constraint violation of the inner problem, measured relative to
  // per-row scales so tiny-power instances are not spuriously "feasible"
  double violation(const Vec& x) const {
    double worst = 0.0;
    for (int n = 0; n < N; ++n) {
      double ptot = 0.0;
      for (int j = 0; j < K; ++j)
        for (int d = 0; d < L; ++d) ptot += x[wofs(j, n) + d];
      worst = std::max(worst, (ptot * sW - P) / P);
      for (int k = 0; k < K; ++k) {
        const int i = idx(k, n);
        const double r = x[offR + i], o = x[offO + i];
        const double t = x[offT + i] * st;
        double q_own = 0.0, q_all = 0.0;
        for (int j = 0; j < K; ++j) {
          const double q = svH[k][n].dot(x.segment(wofs(j, n), L2)) * sW;
          q_all += q;
          if (j == k) q_own = q;
        }
        if (gamma[k][n] > 0.0) {
          const double need = gamma[k][n] * ((q_all - q_own) + sigk2[k] +
                                             delk2[k] * std::exp(-r));
          worst = std::max(worst, (need - q_own) / sB(k, n));
        }
        worst =
            std::max(worst, (std::exp(o) - (q_all + sigk2[k])) / sC(k, n));
        worst = std::max(worst, (std::exp(r + o) - t) / st);
      }
    }
    const double e = x[offE] * se;
    for (int k = 0; k < K; ++k) {
      double lhs = 0.0;
      for (int n = 0; n < N; ++n) {
        const int i = idx(k, n);
        lhs += td * zetk[k] *
               (abar[k][n] + bbar[k][n] * x[offO + i] - x[offT + i] * st);
      }
      worst = std::max(worst, (e + Etot_sum(k) - lhs) / sE());
    }
    return worst;
  }
};

// Chambolle-Pock iteration on the scaled model. Returns the reached
// violation; x/y are updated in place.
inline double pdhg_solve(const P31Model& m, Vec& x, Vec& y, double feas_tol,
                         int max_iters, int min_iters,
                         long* iters_out = nullptr) {
  const auto apply = [&](const Vec& v) { return m.apply(v); };
  const auto adj = [&](const Vec& v) { return m.apply_adjoint(v); };
  const double nK = std::max(1e-12, operator_norm_est(apply, adj, m.dim));
  const double tau = 0.95 / nK, sigma = 0.95 / nK;
  P31Model::Work wk(m.L);
  m.coordinate_polish(x);
  Vec xbar = x;
  // a linear objective makes plain PDHG iterates oscillate around the
  // solution; restarted ergodic averaging collapses the oscillation
  Vec xavg = x, yavg = y;
  long navg = 1;
  const int restart_every = 400;
  double viol = kInf;
  double last_eta = kInf;
  int done = 0;
  for (int it = 1; it <= max_iters; ++it) {
    wk.z = m.apply(xbar);
    wk.z = y + sigma * wk.z;
    wk.pv = wk.z / sigma;
    m.project(wk.pv);
    y = wk.z - sigma * wk.pv;
    wk.xn = m.apply_adjoint(y);
    wk.xn = x - tau * wk.xn;
    m.prox_primal(wk.xn, tau, wk);
    xbar = 2.0 * wk.xn - x;
    x = wk.xn;
    xavg += x;
    yavg += y;
    ++navg;
    const bool restart = (it % restart_every == 0);
    if (restart || (it % 50 == 0 && it >= min_iters)) {
      Vec xm = xavg / static_cast<double>(navg);
      m.coordinate_polish(xm);
      const double v = m.violation(xm);
      const double eta = xm[m.offE] * m.se;
      const bool settled = std::abs(eta - last_eta) <=
                           1e-8 * std::max(std::abs(eta), m.se * 1e-3);
      last_eta = eta;
      viol = v;
      if (v <= feas_tol && settled && it >= min_iters) {
        x = xm;
        y = yavg / static_cast<double>(navg);
        done = 1;
      }
      if (restart && !done) {
        x = xm;
        y = yavg / static_cast<double>(navg);
        xbar = x;
        xavg = x;
        yavg = y;
        navg = 1;
      }
    }
    if (done) {
      if (iters_out) *iters_out += it;
      return m.violation(x);
    }
  }
  x = xavg / static_cast<double>(navg);
  y = yavg / static_cast<double>(navg);
  m.coordinate_polish(x);
  if (iters_out) *iters_out += max_iters;
  return m.violation(x);
}

}  // namespace detail

// Natural-unit NLP description of the inner (fixed-anchor) problem; used for
// the KKT certificate. The model is captured by value.
inline NlpProblem downlink_nlp(const detail::P31Model& m) {
  NlpProblem p;
  const int dim = m.dim;
  p.objective = [m](const Vec& x) { return -x[m.offE]; };
  p.objective_grad = [m, dim](const Vec&) {
    Vec g = Vec::Zero(dim);
    g[m.offE] = -1.0;
    return g;
  };
  for (int n = 0; n < m.N; ++n) {
    p.ineq.push_back(
        {"power[" + std::to_string(n) + "]",
         [m, n](const Vec& x) {
           double ptot = 0.0;
           for (int j = 0; j < m.K; ++j)
             for (int d = 0; d < m.L; ++d) ptot += x[m.wofs(j, n) + d];
           return m.P - ptot;
         },
         [m, n, dim](const Vec&) {
           Vec g = Vec::Zero(dim);
           for (int j = 0; j < m.K; ++j)
             for (int d = 0; d < m.L; ++d) g[m.wofs(j, n) + d] = -1.0;
           return g;
         }});
    for (int k = 0; k < m.K; ++k) {
      const int i = m.idx(k, n);
      if (m.gamma[k][n] > 0.0) {
        p.ineq.push_back(
            {"sinr[" + std::to_string(k) + "," + std::to_string(n) + "]",
             [m, k, n, i](const Vec& x) {
               double u = m.svH[k][n].dot(x.segment(m.wofs(k, n), m.L2));
               for (int j = 0; j < m.K; ++j)
                 if (j != k)
                   u -= m.gamma[k][n] *
                        m.svH[k][n].dot(x.segment(m.wofs(j, n), m.L2));
               return u - m.gamma[k][n] *
                              (m.sigk2[k] +
                               m.delk2[k] * std::exp(-x[m.offR + i]));
             },
             [m, k, n, i, dim](const Vec& x) {
               Vec g = Vec::Zero(dim);
               g.segment(m.wofs(k, n), m.L2) = m.svH[k][n];
               for (int j = 0; j < m.K; ++j)
                 if (j != k)
                   g.segment(m.wofs(j, n), m.L2) -=
                       m.gamma[k][n] * m.svH[k][n];
               g[m.offR + i] =
                   m.gamma[k][n] * m.delk2[k] * std::exp(-x[m.offR + i]);
               return g;
             }});
      }
      p.ineq.push_back(
          {"recv_power[" + std::to_string(k) + "," + std::to_string(n) + "]",
           [m, k, n, i](const Vec& x) {
             double ptot = m.sigk2[k];
             for (int j = 0; j < m.K; ++j)
               ptot += m.svH[k][n].dot(x.segment(m.wofs(j, n), m.L2));
             return ptot - std::exp(x[m.offO + i]);
           },
           [m, k, n, i, dim](const Vec& x) {
             Vec g = Vec::Zero(dim);
             for (int j = 0; j < m.K; ++j)
               g.segment(m.wofs(j, n), m.L2) = m.svH[k][n];
             g[m.offO + i] = -std::exp(x[m.offO + i]);
             return g;
           }});
      p.ineq.push_back(
          {"epi[" + std::to_string(k) + "," + std::to_string(n) + "]",
           [m, i](const Vec& x) {
             return x[m.offT + i] - std::exp(x[m.offR + i] + x[m.offO + i]);
           },
           [m, i, dim](const Vec& x) {
             Vec g = Vec::Zero(dim);
             const double e = std::exp(x[m.offR + i] + x[m.offO + i]);
             g[m.offT + i] = 1.0;
             g[m.offR + i] = -e;
             g[m.offO + i] = -e;
             return g;
           }});
    }
  }
  for (int k = 0; k < m.K; ++k) {
    p.ineq.push_back(
        {"remain[" + std::to_string(k) + "]",
         [m, k](const Vec& x) {
           double lhs = 0.0;
           for (int n = 0; n < m.N; ++n) {
             const int i = m.idx(k, n);
             lhs += m.td * m.zetk[k] *
                    (m.abar[k][n] + m.bbar[k][n] * x[m.offO + i] -
                     x[m.offT + i]);
           }
           return lhs - m.Etot_sum(k) - x[m.offE];
         },
         [m, k, dim](const Vec&) {
           Vec g = Vec::Zero(dim);
           for (int n = 0; n < m.N; ++n) {
             const int i = m.idx(k, n);
             g[m.offO + i] = m.td * m.zetk[k] * m.bbar[k][n];
             g[m.offT + i] = -m.td * m.zetk[k];
           }
           g[m.offE] = -1.0;
           return g;
         }});
  }
  p.lower = Vec::Constant(dim, -kInf);
  p.upper = Vec::Constant(dim, kInf);
  for (int n = 0; n < m.N; ++n)
    for (int k = 0; k < m.K; ++k) {
      const int i = m.idx(k, n);
      p.lower[m.offR + i] = m.r_lo;
      p.upper[m.offR + i] = m.r_hi;
      p.lower[m.offO + i] = m.o_lo[k][n];
      p.upper[m.offO + i] = m.o_hi[k][n];
      p.lower[m.offT + i] = 0.0;
      p.upper[m.offT + i] = std::exp(m.o_hi[k][n]);
      p.psd.push_back({m.wofs(k, n), m.L});
    }
  p.lower[m.offE] = m.e_lo;
  p.upper[m.offE] = m.e_hi;
  return p;
}

namespace detail {

inline P31Model build_p31_model(const DownlinkInputs& in,
                                const DownlinkOptions& opt) {
  const Scenario& s = *in.s;
  P31Model m;
  m.N = s.N;
  m.K = s.K;
  m.L = s.L;
  m.layout();
  m.td = s.t_d;
  m.P = s.P_uav_max;
  m.sigk2 = s.sigma_k2;
  m.delk2 = s.delta_k2;
  m.zetk = s.zeta_k;
  m.svH.assign(m.K, std::vector<Vec>(m.N));
  m.Hmat.assign(m.K, std::vector<CMat>(m.N));
  m.normH.assign(m.K, std::vector<double>(m.N));
  m.gamma.assign(m.K, std::vector<double>(m.N, 0.0));
  m.Etot.assign(m.K, std::vector<double>(m.N, 0.0));
  m.abar.assign(m.K, std::vector<double>(m.N, 0.0));
  m.bbar.assign(m.K, std::vector<double>(m.N, 0.0));
  m.o_lo.assign(m.K, std::vector<double>(m.N, 0.0));
  m.o_hi.assign(m.K, std::vector<double>(m.N, 0.0));
  for (int k = 0; k < m.K; ++k)
    for (int n = 0; n < m.N; ++n) {
      const CMat H = in.h[k][n] * in.h[k][n].adjoint();
      m.svH[k][n] = svec(H);
      m.Hmat[k][n] = H;
      m.normH[k][n] = in.h[k][n].squaredNorm();
      const double bits = in.L_o[n][k];
      if (bits > 0.0 && s.t_d > 0.0) {
        const double expo = s.theta * bits / (s.t_d * s.B);
        const double g = (expo > 900.0) ? kInf : std::exp2(expo) - 1.0;
        m.gamma[k][n] = g * (1.0 + 1e-6);  // margin so audits hold exactly
      }
      m.Etot[k][n] = in.E_total[n][k];
      m.o_hi[k][n] =
          std::log(s.sigma_k2[k] + s.P_uav_max * m.normH[k][n] * (1 + 1e-9));
      m.o_lo[k][n] = std::log(s.sigma_k2[k]) - 5.0;
    }
  m.r_lo = std::log(1e-12);
  m.r_hi = 0.0;
  if (opt.fixed_rho >= 0.0) {
    const double r = std::log(std::max(opt.fixed_rho, 1e-12));
    m.r_lo = r;
    m.r_hi = r;
  }
  m.sW = s.P_uav_max;
  double st = 0.0, e_hi = 0.0, e_lo = 0.0;
  for (int k = 0; k < m.K; ++k) {
    double harvest_hi = 0.0;
    for (int n = 0; n < m.N; ++n) {
      st = std::max(st, std::exp(m.o_hi[k][n]));
      harvest_hi += s.t_d * s.zeta_k[k] * std::exp(m.o_hi[k][n]);
    }
    e_hi = std::max(e_hi, harvest_hi);
    e_lo = std::min(e_lo, -m.Etot_sum(k) - harvest_hi);
  }
  m.st = std::max(st, 1e-12);
  const double e_span = std::max(1e-9, std::max(e_hi, std::abs(e_lo)));
  m.e_hi = e_hi + 0.5 * e_span;
  m.e_lo = e_lo - 0.5 * e_span;
  m.se = std::max(m.e_hi, std::abs(m.e_lo));
  return m;
}

// Fast initializer for the dominant structure of the problem: the harvest
// depends on the per-slot total covariance S_n only, so maximizing the
// minimum total harvest is a small max-min with per-slot solutions
// S_n = P * (top eigenvector of the weight-mixed channel outer products).
// Solved over simplex weights by Polyak subgradient with ergodic averaging,
// then split across GEs with just enough own-signal share for the SINR
// floors. Returns false when the split is impossible (large SINR targets);
// the caller falls back to the plain primal-dual path.
inline bool harvest_maxmin_init(const P31Model& m, Vec& x, int iters = 300) {
  const double rho_est =
      (m.r_lo == m.r_hi) ? std::exp(m.r_lo) : 1e-12;  // pinned or floor
  std::vector<std::vector<double>> a(m.K, std::vector<double>(m.N));
  for (int k = 0; k < m.K; ++k)
    for (int n = 0; n < m.N; ++n)
      a[k][n] = m.td * m.zetk[k] * (1.0 - rho_est);
  Vec mu = Vec::Constant(m.K, 1.0 / m.K);
  std::vector<CMat> Sbar(m.N, CMat::Zero(m.L, m.L));
  std::vector<CMat> Sbest;
  long cnt = 0;
  double best_primal = -kInf, best_dual = kInf;
  Eigen::SelfAdjointEigenSolver<CMat> eig;
  CMat M(m.L, m.L);
  auto fvals = [&](const std::vector<CMat>& S, Vec& f) {
    for (int k = 0; k < m.K; ++k) {
      double v = -m.Etot_sum(k);
      for (int n = 0; n < m.N; ++n)
        v += a[k][n] *
             ((m.Hmat[k][n] * S[n]).trace().real() + m.sigk2[k]);
      f[k] = v;
    }
  };
  Vec f(m.K);
  for (int t = 1; t <= iters; ++t) {
    std::vector<CMat> S(m.N);
    for (int n = 0; n < m.N; ++n) {
      M.setZero();
      for (int k = 0; k < m.K; ++k) M += (mu[k] * a[k][n]) * m.Hmat[k][n];
      eig.compute(M);
      const auto u = eig.eigenvectors().col(m.L - 1);
      S[n] = m.P * u * u.adjoint();
      Sbar[n] += S[n];
    }
    ++cnt;
    fvals(S, f);
    best_dual = std::min(best_dual, mu.dot(f));
    if (t % 20 == 0 || t == iters) {
      std::vector<CMat> Savg(m.N);
      for (int n = 0; n < m.N; ++n) Savg[n] = Sbar[n] / double(cnt);
      Vec fa(m.K);
      fvals(Savg, fa);
      if (fa.minCoeff() > best_primal) {
        best_primal = fa.minCoeff();
        Sbest = std::move(Savg);
      }
      // the single-point solution at the current weights can beat the
      // ergodic average once the weights have settled
      fvals(S, fa);
      if (fa.minCoeff() > best_primal) {
        best_primal = fa.minCoeff();
        Sbest = S;
      }
      if (best_dual - best_primal <=
          1e-9 * std::max(1.0, std::abs(best_dual)))
        break;
    }
    const double sn2 = f.squaredNorm();
    if (sn2 == 0.0) break;
    const double step =
        (std::max(0.0, mu.dot(f) - std::max(best_primal, 0.0)) + 1e-12) / sn2;
    mu = project_simplex(mu - step * f);
  }
  if (Sbest.empty()) return false;

  // Split the totals with just enough own-signal share per GE: the share
  // c_k must leave denom = c_k tr - gamma((1-c_k) tr + sigma^2) at
  // kappa * gamma * delta^2, which puts rho at 1/kappa. Prefer the largest
  // kappa (smallest rho) the budget allows.
  for (int n = 0; n < m.N; ++n) {
    std::vector<double> cmin(m.K, 0.0);
    bool ok = false;
    for (double kappa : {1e9, 1e6, 1e3, 2.0}) {
      double csum = 0.0;
      for (int k = 0; k < m.K; ++k) {
        cmin[k] = 0.0;
        if (m.gamma[k][n] > 0.0) {
          const double trk = (m.Hmat[k][n] * Sbest[n]).trace().real();
          if (trk <= 0.0) {
            csum = 2.0;
            break;
          }
          const double g = m.gamma[k][n];
          cmin[k] = (g * trk + g * m.sigk2[k] + kappa * g * m.delk2[k]) /
                    ((1.0 + g) * trk);
        }
        csum += cmin[k];
      }
      if (csum <= 1.0) {
        const double extra = (1.0 - csum) / m.K;
        for (int k = 0; k < m.K; ++k) {
          const CMat Wk = (cmin[k] + extra) * Sbest[n] / m.sW;
          svec_into(Wk, x.data() + m.wofs(k, n));
        }
        ok = true;
        break;
      }
    }
    if (!ok) return false;
  }
  m.coordinate_polish(x);
  return true;
}

// received power at GE k in slot n from the scaled iterate
inline double recv_power(const P31Model& m, const Vec& x, int k, int n) {
  double p = m.sigk2[k];
  for (int j = 0; j < m.K; ++j)
    p += m.svH[k][n].dot(x.segment(m.wofs(j, n), m.L2)) * m.sW;
  return p;
}

// true (non-surrogate) objective of a scaled iterate
inline double true_eta_of_iterate(const P31Model& m, const Vec& x) {
  double eta = kInf;
  for (int k = 0; k < m.K; ++k) {
    double v = -m.Etot_sum(k);
    for (int n = 0; n < m.N; ++n) {
      const double rho = std::exp(x[m.offR + m.idx(k, n)]);
      v += m.td * m.zetk[k] * (1.0 - rho) * recv_power(m, x, k, n);
    }
    eta = std::min(eta, v);
  }
  return eta;
}

}  // namespace detail

inline DownlinkSolution solve_downlink(const DownlinkInputs& in,
                                       const DownlinkOptions& opt = {},
                                       const DownlinkSolution* warm = nullptr) {
  const Scenario& s = *in.s;
  detail::P31Model m = detail::build_p31_model(in, opt);
  DownlinkSolution out;

  // necessary-condition screen: even with all power and rho = 1 the SINR
  // target is out of reach
  for (int k = 0; k < m.K; ++k)
    for (int n = 0; n < m.N; ++n)
      if (m.gamma[k][n] > 0.0 &&
          m.P * m.normH[k][n] <
              m.gamma[k][n] * (m.sigk2[k] + m.delk2[k]) * (1.0 - 1e-9)) {
        out.infeasible = true;
        out.message = "downlink SINR target infeasible for GE " +
                      std::to_string(k) + " slot " + std::to_string(n) +
                      " at any beam within P_uav_max";
        return out;
      }

  // initial iterate: full warm start when shapes match; else seed the
  // covariances from the caller's beams (isotropic as the last resort)
  Vec x = Vec::Zero(m.dim), y = Vec::Zero(m.ydim);
  if (warm && warm->warm_x.size() == m.dim && warm->warm_y.size() == m.ydim) {
    x = warm->warm_x;
    y = warm->warm_y;
    for (int n = 0; n < m.N; ++n)
      for (int k = 0; k < m.K; ++k) {
        const int i = m.idx(k, n);
        x[m.offR + i] = std::clamp(x[m.offR + i], m.r_lo, m.r_hi);
      }
  } else {
    const bool seeded = warm && static_cast<int>(warm->w.size()) == m.N &&
                        static_cast<int>(warm->w[0].size()) == m.K &&
                        warm->w[0][0].size() == m.L;
    for (int n = 0; n < m.N; ++n)
      for (int k = 0; k < m.K; ++k) {
        const int i = m.idx(k, n);
        if (seeded) {
          const CMat W0 = warm->w[n][k] * warm->w[n][k].adjoint() / m.sW;
          x.segment(m.wofs(k, n), m.L2) = svec(W0);
          x[m.offR + i] =
              std::clamp(std::log(std::max(warm->rho[n][k], 1e-12)), m.r_lo,
                         m.r_hi);
        } else {
          CMat W0 = CMat::Identity(m.L, m.L) / (m.K * m.L);  // P/(K L) natural
          x.segment(m.wofs(k, n), m.L2) = svec(W0);
          x[m.offR + i] = std::clamp(std::log(0.5), m.r_lo, m.r_hi);
        }
      }
    for (int n = 0; n < m.N; ++n)
      for (int k = 0; k < m.K; ++k) {
        const int i = m.idx(k, n);
        const double o0 = std::clamp(std::log(detail::recv_power(m, x, k, n)),
                                     m.o_lo[k][n], m.o_hi[k][n]);
        x[m.offO + i] = o0;
        x[m.offT + i] = std::exp(x[m.offR + i] + o0) / m.st;
      }
    x[m.offE] = std::clamp(detail::true_eta_of_iterate(m, x) / m.se,
                           m.e_lo / m.se, m.e_hi / m.se);
  }

  // structural warm start: max-min over per-slot total covariances
  {
    Vec xA = x;
    if (detail::harvest_maxmin_init(m, xA) &&
        detail::true_eta_of_iterate(m, xA) >
            detail::true_eta_of_iterate(m, x)) {
      x = xA;
      y.setZero();
    }
  }

  // ---- outer SCA on the exp(Omega) linearization ----
  // early anchors are solved loosely; the settled problem gets a final
  // tight polish; the retained state never loses true objective, counting
  // only iterates that are feasible to tolerance
  double eta_best = (m.violation(x) <= 20.0 * opt.feas_tol)
                        ? detail::true_eta_of_iterate(m, x)
                        : -kInf;
  double eta_inner_prev = -kInf;
  Vec x_best = x, y_best = y;
  double viol = kInf;
  auto set_anchors = [&] {
    for (int k = 0; k < m.K; ++k)
      for (int n = 0; n < m.N; ++n) {
        const int i = m.idx(k, n);
        const double ob = std::clamp(x[m.offO + i], m.o_lo[k][n], m.o_hi[k][n]);
        m.abar[k][n] = std::exp(ob) * (1.0 - ob);
        m.bbar[k][n] = std::exp(ob);
      }
  };
  for (int it = 0; it < opt.sca_max_iters; ++it) {
    set_anchors();
    const double stage_tol = (it == 0 ? 100.0 : 20.0) * opt.feas_tol;
    viol = detail::pdhg_solve(m, x, y, stage_tol, opt.pdhg_max_iters,
                              opt.pdhg_min_iters, &out.pdhg_iters);
    out.sca_iters = it + 1;
    const double eta_true = detail::true_eta_of_iterate(m, x);
    const double eta_inner = x[m.offE] * m.se;
    if (eta_true >= eta_best && viol <= 20.0 * opt.feas_tol) {
      eta_best = eta_true;
      x_best = x;
      y_best = y;
    }
    out.sca_eta_trace.push_back(eta_best);
    const bool settled =
        std::abs(eta_inner - eta_inner_prev) <=
        opt.sca_tol * std::max(std::abs(eta_inner_prev), 1e-3 * m.se);
    eta_inner_prev = eta_inner;
    if (settled && it > 0) {
      out.converged = true;
      break;
    }
  }
  // final tight solve from the retained state
  if (eta_best > -kInf && detail::true_eta_of_iterate(m, x) < eta_best) {
    x = x_best;
    y = y_best;
  }
  set_anchors();
  viol = detail::pdhg_solve(m, x, y, opt.feas_tol, 2 * opt.pdhg_max_iters,
                            opt.pdhg_min_iters, &out.pdhg_iters);
  if (eta_best > -kInf && detail::true_eta_of_iterate(m, x) < eta_best) {
    x = x_best;
    y = y_best;
    viol = m.violation(x);
  }
  if (viol > 10.0 * opt.feas_tol) {
    out.recovery_warning = true;
    out.message = "inner solver stopped above the feasibility target";
  }

  // ---- KKT certificate of the final inner problem ----
  // Multipliers are refitted at the reported point: nonnegative least
  // squares over the active scalar rows, then per-slot power duals chosen
  // as large as the PSD duals allow (zero dual infeasibility, minimal
  // complementarity).
  {
    Vec xn = x;
    for (int n = 0; n < m.N; ++n)
      for (int k = 0; k < m.K; ++k) {
        xn.segment(m.wofs(k, n), m.L2) *= m.sW;
        xn[m.offT + m.idx(k, n)] *= m.st;
      }
    xn[m.offE] *= m.se;
    NlpProblem nlp = downlink_nlp(m);
    const int nscal = 3 * m.N * m.K + 1;
    const int soff = m.offR;
    std::vector<int> rows;        // indices into nlp.ineq
    std::vector<int> slot_of;     // power-row slot per nlp row, else -1
    {
      int row = 0;
      for (int n = 0; n < m.N; ++n) {
        slot_of.push_back(n);  // power row
        ++row;
        for (int k = 0; k < m.K; ++k) {
          const int cnt = (m.gamma[k][n] > 0.0) ? 3 : 2;
          for (int c = 0; c < cnt; ++c) {
            slot_of.push_back(-1);
            ++row;
          }
        }
      }
      for (int k = 0; k < m.K; ++k) {
        slot_of.push_back(-1);
        ++row;
      }
    }
    const int nrows = static_cast<int>(nlp.ineq.size());
    // active scalar rows
    std::vector<int> act;
    std::vector<Vec> grads(nrows);
    Vec gval(nrows);
    for (int i = 0; i < nrows; ++i) {
      gval[i] = nlp.ineq[i].value(xn);
      grads[i] = nlp.ineq[i].grad(xn);
      if (slot_of[i] >= 0) continue;  // power rows handled separately
      const double sc = std::max(1.0, grads[i].cwiseAbs().maxCoeff());
      if (gval[i] <= 1e-5 * sc) act.push_back(i);
    }
    Vec lam = Vec::Zero(nrows);
    {
      // NNLS on the scalar-coordinate stationarity by coordinate descent
      const int na = static_cast<int>(act.size());
      Eigen::MatrixXd J(nscal, na);
      for (int a = 0; a < na; ++a)
        J.col(a) = grads[act[a]].segment(soff, nscal);
      Vec c = nlp.objective_grad(xn).segment(soff, nscal);
      Eigen::MatrixXd JtJ = J.transpose() * J;
      Vec Jtc = J.transpose() * c;
      Vec la = Vec::Zero(na);
      for (int sweep = 0; sweep < 200; ++sweep) {
        double delta = 0.0;
        for (int a = 0; a < na; ++a) {
          const double diag = JtJ(a, a);
          if (diag <= 0.0) continue;
          const double grad = JtJ.row(a).dot(la) - Jtc[a];
          const double nl = std::max(0.0, la[a] - grad / diag);
          delta = std::max(delta, std::abs(nl - la[a]));
          la[a] = nl;
        }
        if (delta < 1e-14) break;
      }
      for (int a = 0; a < na; ++a) lam[act[a]] = la[a];
    }
    // residual field on W blocks excluding power rows -> provisional Z
    Vec r = nlp.objective_grad(xn);
    for (int i = 0; i < nrows; ++i)
      if (lam[i] != 0.0 && slot_of[i] < 0) r -= lam[i] * grads[i];
    NlpDuals duals;
    duals.ineq = lam;
    duals.psd.resize(nlp.psd.size());
    // per slot: smallest power dual making every Z = unsvec(r_W) block PSD
    // (Z picks up +lamA I through the power-row gradient)
    std::vector<double> lamA(m.N, 0.0);
    for (int n = 0; n < m.N; ++n) {
      double minev = kInf;
      for (int k = 0; k < m.K; ++k) {
        const auto& blk = nlp.psd[m.idx(k, n)];
        CMat Z0 = unsvec(r.segment(blk.offset, blk.dim * blk.dim), blk.dim);
        Eigen::SelfAdjointEigenSolver<CMat> ez(Z0);
        minev = std::min(minev, ez.eigenvalues().minCoeff());
      }
      lamA[n] = std::max(0.0, -minev);
      int prow = -1;
      for (int i = 0; i < nrows; ++i)
        if (slot_of[i] == n) {
          prow = i;
          break;
        }
      duals.ineq[prow] = lamA[n];
      r -= lamA[n] * grads[prow];
    }
    for (size_t b = 0; b < nlp.psd.size(); ++b) {
      const auto& blk = nlp.psd[b];
      duals.psd[b] =
          unsvec(r.segment(blk.offset, blk.dim * blk.dim), blk.dim);
    }
    out.kkt = kkt_residual(nlp, xn, duals, false);
  }

  // ---- rank-one recovery, audit, randomization fallback ----
  out.w.assign(m.N, std::vector<Eigen::VectorXcd>(m.K));
  out.W.assign(m.N, std::vector<CMat>(m.K));
  out.rho.assign(m.N, std::vector<double>(m.K, 0.0));
  out.rho_tilde.assign(m.N, std::vector<double>(m.K, 0.0));
  out.Omega.assign(m.N, std::vector<double>(m.K, 0.0));

  std::mt19937_64 rng(s.rng_seed ^ 0xd00d1e5ull);
  for (int n = 0; n < m.N; ++n) {
    std::vector<CMat> Wstar(m.K);
    for (int k = 0; k < m.K; ++k)
      Wstar[k] = m.sW * unsvec(x.segment(m.wofs(k, n), m.L2), m.L);
    std::vector<Eigen::VectorXcd> wrec(m.K);
    for (int k = 0; k < m.K; ++k) {
      RankOneAudit audit;
      wrec[k] = rank_one_recover(Wstar[k], in.h[k][n], &audit);
      if (audit.degenerate) out.recovery_warning = true;
    }
    // audit the slot constraints under the recovered beams
    auto slot_ok = [&](const std::vector<Eigen::VectorXcd>& wv,
                       double tol) {
      double ptot = 0.0;
      for (int k = 0; k < m.K; ++k) ptot += wv[k].squaredNorm();
      if (ptot > m.P + tol) return false;
      for (int k = 0; k < m.K; ++k) {
        const int i = m.idx(k, n);
        double own = std::norm(in.h[k][n].dot(wv[k]));
        double all = m.sigk2[k];
        for (int j = 0; j < m.K; ++j)
          all += std::norm(in.h[k][n].dot(wv[j]));
        if (m.gamma[k][n] > 0.0) {
          const double itf = all - m.sigk2[k] - own;
          const double need =
              m.gamma[k][n] / (1.0 + 1e-6) *
              (itf + m.sigk2[k] +
               m.delk2[k] * std::exp(-x[m.offR + i]));
          if (own + tol < need) return false;
        }
        if (std::exp(x[m.offO + i]) > all + tol) return false;
      }
      return true;
    };
    if (!slot_ok(wrec, 1e-6)) {
      // Gaussian randomization from the relaxed covariances
      std::normal_distribution<double> gauss(0.0, std::sqrt(0.5));
      std::vector<Eigen::VectorXcd> best = wrec;
      double best_score = -kInf;
      std::vector<CMat> F(m.K);
      std::vector<double> target(m.K);
      for (int k = 0; k < m.K; ++k) {
        Eigen::SelfAdjointEigenSolver<CMat> eig(Wstar[k]);
        Vec ev = eig.eigenvalues().cwiseMax(0.0).cwiseSqrt();
        F[k] = eig.eigenvectors() * ev.asDiagonal();
        target[k] = wrec[k].squaredNorm();
      }
      for (int draw = 0; draw < opt.randomization_draws; ++draw) {
        std::vector<Eigen::VectorXcd> cand(m.K);
        for (int k = 0; k < m.K; ++k) {
          Eigen::VectorXcd g(m.L);
          for (int i = 0; i < m.L; ++i)
            g[i] = std::complex<double>(gauss(rng), gauss(rng));
          cand[k] = F[k] * g;
          const double nn = cand[k].squaredNorm();
          if (nn > 0.0 && target[k] > 0.0)
            cand[k] *= std::sqrt(target[k] / nn);
          else
            cand[k].setZero();
        }
        // score: worst slack over the audited constraints
        double score = kInf;
        {
          double ptot = 0.0;
          for (int k = 0; k < m.K; ++k) ptot += cand[k].squaredNorm();
          score = std::min(score, m.P - ptot);
          for (int k = 0; k < m.K; ++k) {
            const int i = m.idx(k, n);
            double own = std::norm(in.h[k][n].dot(cand[k]));
            double all = m.sigk2[k];
            for (int j = 0; j < m.K; ++j)
              all += std::norm(in.h[k][n].dot(cand[j]));
            if (m.gamma[k][n] > 0.0) {
              const double need =
                  m.gamma[k][n] / (1.0 + 1e-6) *
                  (all - m.sigk2[k] - own + m.sigk2[k] +
                   m.delk2[k] * std::exp(-x[m.offR + i]));
              score = std::min(score, own - need);
            }
            score = std::min(score, all - std::exp(x[m.offO + i]));
          }
        }
        if (score > best_score) {
          best_score = score;
          best = cand;
          if (score >= 0.0) break;
        }
      }
      wrec = best;
      if (best_score < -1e-6) {
        out.recovery_warning = true;
        out.message = "rank-one recovery violates the relaxed constraints "
                      "beyond tolerance after randomization";
      }
    }
    // exact power: scale the slot down if numerically above budget
    double ptot = 0.0;
    for (int k = 0; k < m.K; ++k) ptot += wrec[k].squaredNorm();
    if (ptot > m.P) {
      const double sc = std::sqrt(m.P / ptot);
      for (int k = 0; k < m.K; ++k) wrec[k] *= sc;
    }
    for (int k = 0; k < m.K; ++k) {
      const int i = m.idx(k, n);
      out.w[n][k] = wrec[k];
      out.W[n][k] = wrec[k] * wrec[k].adjoint();
      out.rho_tilde[n][k] = x[m.offR + i];
      out.rho[n][k] = std::exp(x[m.offR + i]);
      double pk = m.sigk2[k];
      for (int j = 0; j < m.K; ++j)
        pk += std::norm(in.h[k][n].dot(wrec[j]));
      out.Omega[n][k] = std::min(x[m.offO + i], std::log(pk));
    }
  }

  // true objective of the recovered solution
  double eta = kInf;
  for (int k = 0; k < m.K; ++k) {
    double v = -m.Etot_sum(k);
    for (int n = 0; n < m.N; ++n)
      v += harvested_energy(out.rho[n][k], in.h[k][n], out.w[n],
                            s.sigma_k2[k], s.zeta_k[k], s.t_d);
    eta = std::min(eta, v);
  }
  out.eta = eta;
  out.warm_x = x;
  out.warm_y = y;
  return out;
}

}  // namespace uavmec
