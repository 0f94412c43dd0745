#pragma once
// Rician channel synthesis for the GE-UAV links (ULA at the UAV) and the
// UAV-BS link (URA at the BS), with seeded NLoS draws held fixed across an
// optimization run.

#include <Eigen/Dense>

#include <cmath>
#include <complex>
#include <fstream>
#include <random>
#include <vector>

#include "uavmec/scenario.hpp"

namespace uavmec {

inline double link_distance(const Eigen::Vector2d& q, const Eigen::Vector2d& s,
                            double H) {
  return std::sqrt((q - s).squaredNorm() + H * H);
}

// ULA response: element l = exp(-j 2*pi/lambda * spacing * l * cosine).
inline Eigen::VectorXcd ula_steering(double cosine, int L, double spacing,
                                     double wavelength) {
  Eigen::VectorXcd a(L);
  const double phase = -2.0 * M_PI / wavelength * spacing * cosine;
  for (int l = 0; l < L; ++l)
    a[l] = std::polar(1.0, phase * static_cast<double>(l));
  return a;
}

// URA response: Kronecker product of the x- and y-direction ULA factors.
inline Eigen::VectorXcd ura_steering(double phi_x, double phi_y, int Mx,
                                     int My, double spacing,
                                     double wavelength) {
  const Eigen::VectorXcd ax = ula_steering(phi_x, Mx, spacing, wavelength);
  const Eigen::VectorXcd ay = ula_steering(phi_y, My, spacing, wavelength);
  Eigen::VectorXcd out(Mx * My);
  for (int i = 0; i < Mx; ++i)
    for (int j = 0; j < My; ++j) out[i * My + j] = ax[i] * ay[j];
  return out;
}

// One i.i.d. CN(0,1) tensor per slot and link, reproducible per
// (rng_seed, slot, link id) and independent of synthesis order.
struct NlosDraw {
  std::vector<std::vector<Eigen::VectorXcd>> h;  // [k][n], length L
  std::vector<Eigen::MatrixXcd> Hub;             // [n], M x L
};

namespace detail {

inline void fill_cn(Eigen::Ref<Eigen::VectorXcd> out, std::uint64_t seed,
                    std::uint32_t slot, std::uint32_t link) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed & 0xffffffffu),
                    static_cast<std::uint32_t>(seed >> 32), slot, link};
  std::mt19937_64 gen(seq);
  std::normal_distribution<double> g(0.0, std::sqrt(0.5));
  for (int i = 0; i < out.size(); ++i)
    out[i] = std::complex<double>(g(gen), g(gen));
}

}  // namespace detail

inline NlosDraw draw_nlos(const Scenario& s) {
  NlosDraw d;
  d.h.assign(s.K, std::vector<Eigen::VectorXcd>(s.N));
  d.Hub.resize(s.N);
  for (int n = 0; n < s.N; ++n) {
    for (int k = 0; k < s.K; ++k) {
      d.h[k][n].resize(s.L);
      detail::fill_cn(d.h[k][n], s.rng_seed, n, k);
    }
    Eigen::VectorXcd flat(s.M() * s.L);
    detail::fill_cn(flat, s.rng_seed, n, s.K);
    d.Hub[n] = Eigen::Map<Eigen::MatrixXcd>(flat.data(), s.M(), s.L);
  }
  return d;
}

struct ChannelSet {
  std::vector<std::vector<Eigen::VectorXcd>> h_ku;     // [k][n] raw
  std::vector<std::vector<Eigen::VectorXcd>> hbar_ku;  // [k][n] = h * d
  std::vector<Eigen::MatrixXcd> H_ub;                  // [n] raw, M x L
  std::vector<Eigen::MatrixXcd> Hbar_ub;               // [n] = H * d
  std::vector<std::vector<double>> d_ku;               // [k][n]
  std::vector<double> d_ub;                            // [n]
};

// Builds the per-slot channels at the given trajectory. LoS geometry follows
// the array layout: ULA cosine (x_peer - x_self)/d at the UAV; the BS URA
// sees phi_x = sin(elevation) * sin(azimuth), phi_y = sin(elevation) *
// cos(azimuth). Channel reciprocity: the same h_ku serves up- and downlink.
inline ChannelSet synthesize_channels(const Scenario& s, const Trajectory& tr,
                                      const NlosDraw& nlos) {
  ChannelSet c;
  c.h_ku.assign(s.K, std::vector<Eigen::VectorXcd>(s.N));
  c.hbar_ku.assign(s.K, std::vector<Eigen::VectorXcd>(s.N));
  c.H_ub.resize(s.N);
  c.Hbar_ub.resize(s.N);
  c.d_ku.assign(s.K, std::vector<double>(s.N));
  c.d_ub.resize(s.N);

  const double w_los = std::sqrt(s.rician_zeta / (1.0 + s.rician_zeta));
  const double w_nlos = std::sqrt(1.0 / (1.0 + s.rician_zeta));

  for (int n = 0; n < s.N; ++n) {
    const Eigen::Vector2d q = tr.q[n];
    for (int k = 0; k < s.K; ++k) {
      const double d = link_distance(q, s.s_k[k], s.H);
      c.d_ku[k][n] = d;
      const double cos_aoa = (q.x() - s.s_k[k].x()) / d;
      const Eigen::VectorXcd los =
          ula_steering(cos_aoa, s.L, s.antenna_spacing, s.wavelength);
      const Eigen::VectorXcd mix = w_los * los + w_nlos * nlos.h[k][n];
      c.h_ku[k][n] = std::sqrt(s.beta0) / d * mix;
      c.hbar_ku[k][n] = std::sqrt(s.beta0) * mix;
    }
    const double d = link_distance(q, s.s_b, s.H);
    c.d_ub[n] = d;
    const double cos_aod = (s.s_b.x() - q.x()) / d;
    const Eigen::VectorXcd phi_ub =
        ula_steering(cos_aod, s.L, s.antenna_spacing, s.wavelength);
    const double horiz = (q - s.s_b).norm();
    const double sin_elev = s.H / d;
    double sin_az = 0.0, cos_az = 1.0;  // azimuth undefined overhead; use 0
    if (horiz > 0.0) {
      sin_az = (s.s_b.x() - q.x()) / horiz;
      cos_az = (s.s_b.y() - q.y()) / horiz;
    }
    const Eigen::VectorXcd phi_br =
        ura_steering(sin_elev * sin_az, sin_elev * cos_az, s.Mx, s.My,
                     s.antenna_spacing, s.wavelength);
    const Eigen::MatrixXcd los = phi_br * phi_ub.adjoint();
    const Eigen::MatrixXcd mix = w_los * los + w_nlos * nlos.Hub[n];
    c.H_ub[n] = std::sqrt(s.beta0) / d * mix;
    c.Hbar_ub[n] = std::sqrt(s.beta0) * mix;
  }
  return c;
}

// CSV dump (slot, link id, entry index, re, im) for external cross-checks.
// Link id: 0..K-1 for GE-UAV vectors, K for the UAV-BS matrix (column-major).
inline void write_channel_dump(const ChannelSet& c, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("channel dump: cannot write '" + path + "'");
  out.precision(12);
  out << "slot,link,entry,re,im\n";
  const int K = static_cast<int>(c.h_ku.size());
  const int N = static_cast<int>(c.d_ub.size());
  for (int n = 0; n < N; ++n) {
    for (int k = 0; k < K; ++k)
      for (int i = 0; i < c.h_ku[k][n].size(); ++i)
        out << n << ',' << k << ',' << i << ',' << c.h_ku[k][n][i].real()
            << ',' << c.h_ku[k][n][i].imag() << '\n';
    const auto& H = c.H_ub[n];
    for (int j = 0; j < H.cols(); ++j)
      for (int i = 0; i < H.rows(); ++i)
        out << n << ',' << K << ',' << (j * H.rows() + i) << ','
            << H(i, j).real() << ',' << H(i, j).imag() << '\n';
  }
}

}  // namespace uavmec
