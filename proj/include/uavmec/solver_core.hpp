#pragma once
// Shared convex-optimization primitives: cone/set projections, scalar
// root finding, and first-order (KKT) certificate evaluation.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

namespace uavmec {

using Vec = Eigen::VectorXd;
using Vec2 = Eigen::Vector2d;
using CMat = Eigen::MatrixXcd;
using CVec = Eigen::VectorXcd;

constexpr double kInf = std::numeric_limits<double>::infinity();

// ---------------------------------------------------------------------------
// Hermitian <-> real vector maps (Frobenius isometry: svec(A).dot(svec(B)) ==
// tr(A B) for Hermitian A, B). Layout: diagonal, then sqrt(2)*Re / sqrt(2)*Im
// of the strict upper triangle, column by column.

inline Vec svec(const CMat& A) {
  const int n = static_cast<int>(A.rows());
  Vec v(n * n);
  int p = 0;
  for (int i = 0; i < n; ++i) v[p++] = A(i, i).real();
  const double r2 = std::sqrt(2.0);
  for (int j = 1; j < n; ++j)
    for (int i = 0; i < j; ++i) {
      v[p++] = r2 * A(i, j).real();
      v[p++] = r2 * A(i, j).imag();
    }
  return v;
}

inline CMat unsvec(const Vec& v, int n) {
  CMat A(n, n);
  int p = 0;
  for (int i = 0; i < n; ++i) A(i, i) = v[p++];
  const double s = 1.0 / std::sqrt(2.0);
  for (int j = 1; j < n; ++j)
    for (int i = 0; i < j; ++i) {
      const double re = v[p++] * s, im = v[p++] * s;
      A(i, j) = std::complex<double>(re, im);
      A(j, i) = std::complex<double>(re, -im);
    }
  return A;
}

// allocation-free variants for solver inner loops
inline void unsvec_into(const double* v, CMat& A) {
  const int n = static_cast<int>(A.rows());
  int p = 0;
  for (int i = 0; i < n; ++i) A(i, i) = v[p++];
  const double s = 1.0 / std::sqrt(2.0);
  for (int j = 1; j < n; ++j)
    for (int i = 0; i < j; ++i) {
      const double re = v[p++] * s, im = v[p++] * s;
      A(i, j) = std::complex<double>(re, im);
      A(j, i) = std::complex<double>(re, -im);
    }
}

inline void svec_into(const CMat& A, double* v) {
  const int n = static_cast<int>(A.rows());
  int p = 0;
  for (int i = 0; i < n; ++i) v[p++] = A(i, i).real();
  const double r2 = std::sqrt(2.0);
  for (int j = 1; j < n; ++j)
    for (int i = 0; i < j; ++i) {
      v[p++] = r2 * A(i, j).real();
      v[p++] = r2 * A(i, j).imag();
    }
}

// ---------------------------------------------------------------------------
// Projection onto the PSD cone (nearest in Frobenius norm). Input is
// symmetrized first, so slightly non-Hermitian inputs are tolerated.

inline CMat psd_project(const CMat& A) {
  CMat S = 0.5 * (A + A.adjoint());
  Eigen::SelfAdjointEigenSolver<CMat> eig(S);
  Vec ev = eig.eigenvalues();
  for (int i = 0; i < ev.size(); ++i) ev[i] = std::max(0.0, ev[i]);
  return eig.eigenvectors() * ev.asDiagonal() * eig.eigenvectors().adjoint();
}

// Splits A into its PSD projection P and the clipped negative part D = P - A
// (a valid normal-cone element at P, up to sign conventions).
inline void psd_project_split(const CMat& A, CMat& pos, CMat& neg) {
  CMat S = 0.5 * (A + A.adjoint());
  Eigen::SelfAdjointEigenSolver<CMat> eig(S);
  Vec evp = eig.eigenvalues(), evn = eig.eigenvalues();
  for (int i = 0; i < evp.size(); ++i) {
    evp[i] = std::max(0.0, evp[i]);
    evn[i] = std::min(0.0, evn[i]);
  }
  pos = eig.eigenvectors() * evp.asDiagonal() * eig.eigenvectors().adjoint();
  neg = eig.eigenvectors() * evn.asDiagonal() * eig.eigenvectors().adjoint();
}

// ---------------------------------------------------------------------------
// Euclidean ball projection.

inline Vec2 project_ball(const Vec2& x, const Vec2& center, double radius) {
  Vec2 d = x - center;
  const double nrm = d.norm();
  if (nrm <= radius) return x;
  return center + (radius / nrm) * d;
}

// ---------------------------------------------------------------------------
// Bisection for a sign change of a monotone function on [lo, hi].

inline double bisect_scalar(const std::function<double(double)>& f, double lo,
                            double hi, double tol) {
  double flo = f(lo), fhi = f(hi);
  if (flo == 0.0) return lo;
  if (fhi == 0.0) return hi;
  if (flo * fhi > 0.0)
    throw std::invalid_argument("bisect_scalar: no sign change on bracket");
  while (hi - lo > tol) {
    const double mid = 0.5 * (lo + hi);
    const double fm = f(mid);
    if (fm == 0.0) return mid;
    if (flo * fm < 0.0) {
      hi = mid;
    } else {
      lo = mid;
      flo = fm;
    }
  }
  return 0.5 * (lo + hi);
}

// Golden-section minimization of a unimodal function on [lo, hi].
inline double golden_min(const std::function<double(double)>& f, double lo,
                         double hi, double tol) {
  const double invphi = (std::sqrt(5.0) - 1.0) / 2.0;
  double a = lo, b = hi;
  double c = b - invphi * (b - a), d = a + invphi * (b - a);
  double fc = f(c), fd = f(d);
  while (b - a > tol) {
    if (fc < fd) {
      b = d;
      d = c;
      fd = fc;
      c = b - invphi * (b - a);
      fc = f(c);
    } else {
      a = c;
      c = d;
      fc = fd;
      d = a + invphi * (b - a);
      fd = f(d);
    }
  }
  return 0.5 * (a + b);
}

// ---------------------------------------------------------------------------
// Projection onto the unit simplex {x >= 0, sum x = 1}.

inline Vec project_simplex(const Vec& v) {
  const int n = static_cast<int>(v.size());
  std::vector<double> u(v.data(), v.data() + n);
  std::sort(u.begin(), u.end(), std::greater<double>());
  double css = 0.0, theta = 0.0;
  int rho = 0;
  for (int i = 0; i < n; ++i) {
    css += u[i];
    const double t = (css - 1.0) / (i + 1);
    if (u[i] - t > 0.0) {
      rho = i + 1;
      theta = t;
    }
  }
  (void)rho;
  Vec out(n);
  for (int i = 0; i < n; ++i) out[i] = std::max(0.0, v[i] - theta);
  return out;
}

// ---------------------------------------------------------------------------
// Projection onto the exponential epigraph-type set
//   S = {(x, y) : y >= a * exp(b * x) + c},   a > 0, b != 0.
// Covers the rate/harvest substitution sets used by the downlink solver.

inline Vec2 project_exp_set(double x0, double y0, double a, double b,
                            double c) {
  const auto curve = [&](double x) {
    const double e = b * x;
    if (e > 700.0) return kInf;
    return a * std::exp(e) + c;
  };
  if (y0 >= curve(x0)) return Vec2(x0, y0);
  // stationarity along the boundary: g(x) = (x-x0) + (u+c-y0)*b*u, u=a e^{bx}
  const auto g = [&](double x) {
    const double e = b * x;
    if (e > 690.0) return kInf;
    const double u = a * std::exp(e);
    return (x - x0) + (u + c - y0) * b * u;
  };
  // bracket the root by marching in the direction that decreases |g|
  double xl = x0, xh = x0;
  double step = std::max(1.0, std::abs(x0) * 0.1);
  if (g(x0) > 0.0) {
    for (int it = 0; it < 200 && g(xl) > 0.0; ++it) {
      xh = xl;
      xl -= step;
      step *= 2.0;
    }
  } else {
    for (int it = 0; it < 200 && g(xh) < 0.0; ++it) {
      xl = xh;
      xh += step;
      step *= 2.0;
    }
  }
  // safeguarded Newton
  double x = 0.5 * (xl + xh);
  for (int it = 0; it < 100; ++it) {
    const double e = b * x;
    const double u = (e > 690.0) ? kInf : a * std::exp(e);
    const double gv = (x - x0) + (u + c - y0) * b * u;
    if (std::abs(gv) < 1e-15 * std::max(1.0, std::abs(x))) break;
    if (gv > 0.0) {
      xh = x;
    } else {
      xl = x;
    }
    const double gp = 1.0 + b * b * u * (2.0 * u + c - y0);
    double xn = (std::isfinite(gv) && std::isfinite(gp) && gp > 0.0)
                    ? x - gv / gp
                    : 0.5 * (xl + xh);
    if (!(xn > xl && xn < xh)) xn = 0.5 * (xl + xh);
    if (std::abs(xn - x) < 1e-16 * std::max(1.0, std::abs(x))) {
      x = xn;
      break;
    }
    x = xn;
  }
  return Vec2(x, curve(x));
}

// ---------------------------------------------------------------------------
// Estimate of the operator norm of a linear map given by matching
// apply/adjoint callbacks (power iteration on K^T K).

inline double operator_norm_est(const std::function<Vec(const Vec&)>& apply,
                                const std::function<Vec(const Vec&)>& adjoint,
                                int dim, int iters = 30, unsigned seed = 7) {
  Vec x(dim);
  // deterministic pseudo-random start
  std::uint64_t state = 0x9e3779b97f4a7c15ull ^ (seed * 0x2545F4914F6CDD1Dull);
  for (int i = 0; i < dim; ++i) {
    state ^= state << 13;
    state ^= state >> 7;
    state ^= state << 17;
    x[i] = static_cast<double>(state % 2000) / 1000.0 - 1.0;
  }
  if (x.norm() == 0.0) x.setOnes();
  x.normalize();
  double norm = 0.0;
  for (int it = 0; it < iters; ++it) {
    Vec y = apply(x);
    Vec z = adjoint(y);
    const double zn = z.norm();
    if (zn == 0.0) return 0.0;
    norm = std::sqrt(zn);
    x = z / zn;
  }
  return norm;
}

// ---------------------------------------------------------------------------
// First-order optimality certificates.
//
// A problem is described by value-and-gradient handles: a minimized
// objective, inequality constraints g_i(x) >= 0 with multipliers
// lambda_i >= 0, optional box bounds on x, and PSD blocks (svec slices of x
// required to be PSD, with matrix multipliers Z >= 0).
//
// Residual semantics (all max-norm, natural units):
//   stationarity   |x - Pi_box(x - r)|_inf with
//                  r = grad f - sum lambda_i grad g_i - sum svec(Z_b)
//   primal         max violation of g_i >= 0, box, and min-eig of PSD blocks
//   dual           max violation of lambda >= 0 and Z >= 0
//   complementarity max |lambda_i g_i(x)| and |<W_b, Z_b>|

struct KktReport {
  double stationarity = 0.0;
  double primal_infeasibility = 0.0;
  double dual_infeasibility = 0.0;
  double complementarity = 0.0;

  double max() const {
    return std::max(std::max(stationarity, primal_infeasibility),
                    std::max(dual_infeasibility, complementarity));
  }
};

struct NlpConstraint {
  std::string name;
  std::function<double(const Vec&)> value;  // g(x) >= 0
  std::function<Vec(const Vec&)> grad;
};

struct PsdBlock {
  int offset = 0;  // start of the svec slice in x
  int dim = 0;     // matrix dimension n; slice length n*n
};

struct NlpProblem {
  std::function<double(const Vec&)> objective;  // minimized
  std::function<Vec(const Vec&)> objective_grad;
  std::vector<NlpConstraint> ineq;
  Vec lower, upper;  // empty => unbounded on that side
  std::vector<PsdBlock> psd;
};

struct NlpDuals {
  Vec ineq;                // lambda_i, one per inequality
  std::vector<CMat> psd;   // Z_b, one per PSD block
};

namespace detail {

inline void check_gradient(const std::string& name,
                           const std::function<double(const Vec&)>& f,
                           const Vec& g, const Vec& x) {
  const double gscale = std::max(1.0, g.cwiseAbs().maxCoeff());
  double worst = 0.0;
  Vec xp = x, xm = x;
  for (int j = 0; j < x.size(); ++j) {
    const double h = 1e-6 * std::max(1.0, std::abs(x[j]));
    xp[j] = x[j] + h;
    xm[j] = x[j] - h;
    const double fd = (f(xp) - f(xm)) / (2.0 * h);
    worst = std::max(worst, std::abs(fd - g[j]) / gscale);
    xp[j] = x[j];
    xm[j] = x[j];
  }
  if (worst > 1e-4)
    throw std::runtime_error("kkt_residual: gradient of '" + name +
                             "' disagrees with finite differences (rel err " +
                             std::to_string(worst) + ")");
}

}  // namespace detail

inline KktReport kkt_residual(const NlpProblem& p, const Vec& x,
                              const NlpDuals& duals,
                              bool validate_gradients = true) {
  const int n = static_cast<int>(x.size());
  if (static_cast<int>(duals.ineq.size()) != static_cast<int>(p.ineq.size()))
    throw std::invalid_argument("kkt_residual: dual/constraint count mismatch");
  if (duals.psd.size() != p.psd.size())
    throw std::invalid_argument("kkt_residual: PSD dual/block count mismatch");

  KktReport rep;
  Vec r = p.objective_grad(x);
  if (r.size() != n)
    throw std::invalid_argument("kkt_residual: objective gradient dimension");
  if (validate_gradients) detail::check_gradient("objective", p.objective, r, x);

  for (size_t i = 0; i < p.ineq.size(); ++i) {
    const double gi = p.ineq[i].value(x);
    Vec gr = p.ineq[i].grad(x);
    if (gr.size() != n)
      throw std::invalid_argument("kkt_residual: gradient dimension of '" +
                                  p.ineq[i].name + "'");
    if (validate_gradients)
      detail::check_gradient(p.ineq[i].name, p.ineq[i].value, gr, x);
    const double li = duals.ineq[i];
    r -= li * gr;
    rep.primal_infeasibility =
        std::max(rep.primal_infeasibility, std::max(0.0, -gi));
    rep.dual_infeasibility =
        std::max(rep.dual_infeasibility, std::max(0.0, -li));
    rep.complementarity = std::max(rep.complementarity, std::abs(li * gi));
  }

  for (size_t b = 0; b < p.psd.size(); ++b) {
    const auto& blk = p.psd[b];
    if (blk.offset + blk.dim * blk.dim > n)
      throw std::invalid_argument("kkt_residual: PSD block out of range");
    CMat W = unsvec(x.segment(blk.offset, blk.dim * blk.dim), blk.dim);
    const CMat& Z = duals.psd[b];
    if (Z.rows() != blk.dim || Z.cols() != blk.dim)
      throw std::invalid_argument("kkt_residual: PSD dual dimension");
    r.segment(blk.offset, blk.dim * blk.dim) -= svec(Z);
    Eigen::SelfAdjointEigenSolver<CMat> ew(W), ez(0.5 * (Z + Z.adjoint()));
    rep.primal_infeasibility = std::max(
        rep.primal_infeasibility, std::max(0.0, -ew.eigenvalues().minCoeff()));
    rep.dual_infeasibility = std::max(
        rep.dual_infeasibility, std::max(0.0, -ez.eigenvalues().minCoeff()));
    rep.complementarity =
        std::max(rep.complementarity, std::abs((W * Z).trace().real()));
  }

  // projected (natural) stationarity residual
  Vec xs = x - r;
  if (p.lower.size() == n) xs = xs.cwiseMax(p.lower);
  if (p.upper.size() == n) xs = xs.cwiseMin(p.upper);
  rep.stationarity = (x - xs).cwiseAbs().maxCoeff();

  if (p.lower.size() == n)
    rep.primal_infeasibility = std::max(
        rep.primal_infeasibility, (p.lower - x).cwiseMax(0.0).maxCoeff());
  if (p.upper.size() == n)
    rep.primal_infeasibility = std::max(
        rep.primal_infeasibility, (x - p.upper).cwiseMax(0.0).maxCoeff());
  return rep;
}

}  // namespace uavmec
