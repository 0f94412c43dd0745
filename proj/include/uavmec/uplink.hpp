#pragma once
// Uplink-period beamforming: zero-forcing receive beams at the UAV and
// SVD eigen-beams for the UAV-BS MIMO link, plus the resulting SINRs and
// sub-channel relay rates.

#include <Eigen/Dense>

#include <cmath>
#include <stdexcept>
#include <vector>

#include "uavmec/channel.hpp"
#include "uavmec/scenario.hpp"

namespace uavmec {

struct UplinkBeams {
  std::vector<std::vector<Eigen::VectorXcd>> v;  // [k][n] unit-norm receive
  std::vector<Eigen::MatrixXcd> U_BS;            // [n] M x M unitary
  std::vector<Eigen::MatrixXcd> U_UAV;           // [n] L x L unitary
  std::vector<Eigen::VectorXd> lambda;           // [n] squared singular values, desc
  std::vector<int> tau;                          // [n] numerical rank
};

// ZF receive beam for GE k: project its channel onto the null space of all
// other GEs' (normalized) channels, then normalize.
inline Eigen::VectorXcd zf_receive_beam(
    const std::vector<Eigen::VectorXcd>& hbar_all, int k) {
  const int K = static_cast<int>(hbar_all.size());
  const int L = static_cast<int>(hbar_all[0].size());
  if (L < K) throw std::runtime_error("zf_receive_beam: requires L >= K");
  Eigen::VectorXcd proj;
  if (K == 1) {
    proj = hbar_all[0];
  } else {
    Eigen::MatrixXcd A(K - 1, L);  // stacked interfering channels (rows h^H)
    int r = 0;
    for (int j = 0; j < K; ++j)
      if (j != k) A.row(r++) = hbar_all[j].adjoint();
    Eigen::JacobiSVD<Eigen::MatrixXcd> svd(A, Eigen::ComputeFullV);
    const auto& sv = svd.singularValues();
    const double tol = sv.size() ? sv[0] * 1e-12 : 0.0;
    int rank = 0;
    for (int i = 0; i < sv.size(); ++i)
      if (sv[i] > tol) ++rank;
    // columns of V beyond the rank span the null space
    Eigen::MatrixXcd basis = svd.matrixV().rightCols(L - rank);
    proj = basis * (basis.adjoint() * hbar_all[k]);
  }
  const double nrm = proj.norm();
  if (nrm <= 1e-10 * hbar_all[k].norm())
    throw std::runtime_error(
        "zf_receive_beam: rank deficiency (channel lies in interferers' span)");
  return proj / nrm;
}

struct SvdBeams {
  Eigen::MatrixXcd U_BS;   // columns: eigenvectors of Hbar Hbar^H, desc
  Eigen::MatrixXcd U_UAV;  // columns: eigenvectors of Hbar^H Hbar, desc
  Eigen::VectorXd lambda;  // shared nonzero spectrum (squared singular values)
  int tau = 0;
};

namespace detail {

// Fix each column's arbitrary phase: largest-magnitude entry real positive.
inline void fix_phase(Eigen::MatrixXcd& U) {
  for (int j = 0; j < U.cols(); ++j) {
    int imax = 0;
    double best = 0.0;
    for (int i = 0; i < U.rows(); ++i) {
      const double a = std::abs(U(i, j));
      if (a > best) {
        best = a;
        imax = i;
      }
    }
    if (best > 0.0) {
      const std::complex<double> ph = U(imax, j) / best;
      U.col(j) /= ph;
    }
  }
}

}  // namespace detail

inline SvdBeams svd_beams(const Eigen::MatrixXcd& Hbar) {
  Eigen::JacobiSVD<Eigen::MatrixXcd> svd(
      Hbar, Eigen::ComputeFullU | Eigen::ComputeFullV);
  SvdBeams b;
  b.U_BS = svd.matrixU();
  b.U_UAV = svd.matrixV();
  detail::fix_phase(b.U_BS);
  detail::fix_phase(b.U_UAV);
  const auto& sv = svd.singularValues();
  const int r = static_cast<int>(sv.size());
  b.lambda.resize(r);
  for (int i = 0; i < r; ++i) b.lambda[i] = sv[i] * sv[i];
  const double tol = (r > 0) ? 1e-9 * b.lambda[0] : 0.0;
  b.tau = 0;
  for (int i = 0; i < r; ++i)
    if (b.lambda[i] > tol && b.lambda[i] > 0.0) ++b.tau;
  b.lambda.conservativeResize(b.tau);
  return b;
}

inline UplinkBeams solve_uplink_beams(const Scenario& s, const ChannelSet& c) {
  UplinkBeams u;
  u.v.assign(s.K, std::vector<Eigen::VectorXcd>(s.N));
  u.U_BS.resize(s.N);
  u.U_UAV.resize(s.N);
  u.lambda.resize(s.N);
  u.tau.resize(s.N);
  for (int n = 0; n < s.N; ++n) {
    std::vector<Eigen::VectorXcd> slot(s.K);
    for (int k = 0; k < s.K; ++k) slot[k] = c.hbar_ku[k][n];
    for (int k = 0; k < s.K; ++k) u.v[k][n] = zf_receive_beam(slot, k);
    SvdBeams b = svd_beams(c.Hbar_ub[n]);
    u.U_BS[n] = std::move(b.U_BS);
    u.U_UAV[n] = std::move(b.U_UAV);
    u.lambda[n] = std::move(b.lambda);
    u.tau[n] = b.tau;
  }
  return u;
}

// Uplink SINR of GE k at the UAV: transmit powers E_j/t_o, receive beam v_k,
// raw channels of the slot.
inline double uplink_ge_sinr(const std::vector<double>& E, int k, double t_o,
                             const Eigen::VectorXcd& v_k,
                             const std::vector<Eigen::VectorXcd>& h_slot,
                             double sigma2) {
  if (E[k] == 0.0) return 0.0;
  if (t_o <= 0.0)
    throw std::invalid_argument("uplink_ge_sinr: t_o must be positive when E > 0");
  double sig = 0.0, itf = 0.0;
  for (size_t j = 0; j < h_slot.size(); ++j) {
    const double gain = std::norm(v_k.dot(h_slot[j]));  // |v^H h_j|^2
    if (static_cast<int>(j) == k)
      sig = E[j] / t_o * gain;
    else
      itf += E[j] / t_o * gain;
  }
  return sig / (itf + v_k.squaredNorm() * sigma2);
}

// Bits relayed over the parallel sub-channels during t_u; continuous
// extension: 0 bits at t_u = 0.
inline double relay_rate(const Eigen::VectorXd& lambda,
                         const std::vector<double>& E_uav, double t_u,
                         double d_ub, double sigma2, double B) {
  if (t_u <= 0.0) return 0.0;
  double bits = 0.0;
  for (int i = 0; i < lambda.size(); ++i) {
    const double E = (i < static_cast<int>(E_uav.size())) ? E_uav[i] : 0.0;
    bits += t_u * B * std::log2(1.0 + lambda[i] * E / (t_u * d_ub * d_ub * sigma2));
  }
  return bits;
}

}  // namespace uavmec
