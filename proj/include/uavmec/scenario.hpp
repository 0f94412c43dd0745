#pragma once
// Mission scenario: physical, radio, compute and geometry parameters, file
// I/O, validation, and the straight-line initial UAV path.

#include <Eigen/Dense>
#include <json.hpp>

#include <cmath>
#include <cstdint>
#include <fstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace uavmec {

struct Scenario {
  int K = 4;   // ground equipments
  int L = 8;   // UAV antennas (ULA)
  int Mx = 4;  // BS array, x elements
  int My = 4;  // BS array, y elements

  double B = 1e7;            // bandwidth (Hz)
  double beta0 = 1e-2;       // channel power gain at 1 m (linear)
  double rician_zeta = 10.0; // Rician factor (linear)
  double wavelength = 0.1;   // carrier wavelength (m)
  double antenna_spacing = 0.05;  // element spacing (m)

  double H = 5.0;     // UAV altitude (m)
  double Vmax = 5.0;  // max UAV speed (m/s)
  double T = 10.0;    // mission time (s)
  int N = 20;         // slots (derived: round(T/delta))
  double delta = 0.5; // slot length (s)
  double t_d = 0.25;  // downlink period per slot (s)

  double sigma2 = 1e-9;  // receiver noise at UAV and BS (W)

  std::vector<Eigen::Vector2d> s_k = {
      {-10, -12}, {-5, -9}, {5, -14}, {13, -12}};  // GE positions (m)
  std::vector<double> sigma_k2 = {1e-9, 1e-9, 1e-9, 1e-9};    // antenna noise (W)
  std::vector<double> delta_k2 = {1e-8, 1e-8, 1e-8, 1e-8};    // ID noise (W)
  std::vector<double> zeta_k = {0.8, 0.8, 0.8, 0.8};          // EH efficiency
  std::vector<double> varsigma_k = {1e-28, 1e-28, 1e-28, 1e-28};
  std::vector<double> C_k = {1000, 1000, 1000, 1000};         // cycles/bit
  std::vector<double> F_k_max = {2e9, 2e9, 2e9, 2e9};         // CPU freq (Hz)
  std::vector<double> P_k_max = {1.0, 1.0, 1.0, 1.0};         // GE power (W)

  double Gamma = 1e6;      // task bits per slot per GE
  double theta = 1e-5;     // result-to-task size ratio
  double P_uav_max = 50.0; // UAV transmit power (W)

  Eigen::Vector2d q_I{-10, -14};  // initial UAV position (m)
  Eigen::Vector2d q_F{15, -7};    // final UAV position (m)
  Eigen::Vector2d s_b{3, -5};     // BS position (m)

  std::uint64_t rng_seed = 1;

  int M() const { return Mx * My; }
};

struct Trajectory {
  std::vector<Eigen::Vector2d> q;  // horizontal UAV position per slot, size N
};

// Returns the setup of the reference experiments (all defaults above).
inline Scenario default_scenario() { return Scenario{}; }

// List of violated invariants; empty means valid. Never throws.
inline std::vector<std::string> validate(const Scenario& s) {
  std::vector<std::string> r;
  auto per_ge_sized = [&](const auto& v, const char* name) {
    if (static_cast<int>(v.size()) != s.K)
      r.push_back(std::string(name) + ": per-GE array size != K");
  };
  if (s.K < 1) r.push_back("K: must be >= 1");
  if (s.L < s.K) r.push_back("L: ZF requires L >= K");
  if (s.Mx < 1 || s.My < 1) r.push_back("Mx/My: must be >= 1");
  if (!(s.B > 0)) r.push_back("B: must be positive");
  if (!(s.beta0 > 0)) r.push_back("beta0: must be positive");
  if (!(s.rician_zeta > 0)) r.push_back("rician_zeta: must be positive");
  if (!(s.wavelength > 0)) r.push_back("wavelength: must be positive");
  if (!(s.antenna_spacing > 0)) r.push_back("antenna_spacing: must be positive");
  if (!(s.H > 0)) r.push_back("H: must be positive");
  if (!(s.Vmax > 0)) r.push_back("Vmax: must be positive");
  if (!(s.T > 0)) r.push_back("T: must be positive");
  if (s.N < 2) r.push_back("N: need at least 2 slots (endpoints)");
  if (!(s.delta > 0)) r.push_back("delta: must be positive");
  if (std::abs(s.delta * s.N - s.T) > 1e-9 * std::max(1.0, s.T))
    r.push_back("delta: delta != T/N");
  if (s.t_d < 0 || s.t_d > s.delta + 1e-12)
    r.push_back("t_d exceeds slot length (0 <= t_d <= delta)");
  if (!(s.sigma2 > 0)) r.push_back("sigma2: must be positive");
  if (!(s.Gamma > 0)) r.push_back("Gamma: must be positive");
  if (!(s.theta > 0)) r.push_back("theta: must be positive");
  if (!(s.P_uav_max > 0)) r.push_back("P_uav_max: must be positive");
  per_ge_sized(s.s_k, "s_k");
  per_ge_sized(s.sigma_k2, "sigma_k2");
  per_ge_sized(s.delta_k2, "delta_k2");
  per_ge_sized(s.zeta_k, "zeta_k");
  per_ge_sized(s.varsigma_k, "varsigma_k");
  per_ge_sized(s.C_k, "C_k");
  per_ge_sized(s.F_k_max, "F_k_max");
  per_ge_sized(s.P_k_max, "P_k_max");
  for (double z : s.zeta_k)
    if (!(z > 0.0) || z > 1.0) {
      r.push_back("zeta_k: conversion efficiency out of range (0,1]");
      break;
    }
  auto all_positive = [&](const std::vector<double>& v, const char* name) {
    for (double x : v)
      if (!(x > 0)) {
        r.push_back(std::string(name) + ": must be positive");
        break;
      }
  };
  all_positive(s.sigma_k2, "sigma_k2");
  all_positive(s.delta_k2, "delta_k2");
  all_positive(s.varsigma_k, "varsigma_k");
  all_positive(s.C_k, "C_k");
  all_positive(s.F_k_max, "F_k_max");
  all_positive(s.P_k_max, "P_k_max");
  if ((s.q_F - s.q_I).norm() > (s.N - 1) * s.delta * s.Vmax + 1e-12)
    r.push_back("Vmax: endpoints unreachable within mission time");
  return r;
}

// Straight line between the fixed endpoints; minimal feasible start for the
// alternating optimization.
inline Trajectory initial_trajectory(const Scenario& s) {
  if ((s.q_F - s.q_I).norm() > (s.N - 1) * s.delta * s.Vmax + 1e-12)
    throw std::runtime_error("initial_trajectory: endpoints unreachable");
  Trajectory t;
  t.q.resize(s.N);
  for (int n = 0; n < s.N; ++n) {
    const double a = (s.N == 1) ? 0.0 : static_cast<double>(n) / (s.N - 1);
    t.q[n] = s.q_I + a * (s.q_F - s.q_I);
  }
  return t;
}

namespace detail {

inline std::vector<double> per_ge_array(const nlohmann::json& j, int K,
                                        const std::string& key) {
  const auto& v = j.at(key);
  std::vector<double> out;
  if (v.is_number()) {
    out.assign(K, v.get<double>());
  } else if (v.is_array()) {
    out = v.get<std::vector<double>>();
    if (static_cast<int>(out.size()) != K)
      throw std::runtime_error("scenario: '" + key + "' must have K entries");
  } else {
    throw std::runtime_error("scenario: '" + key + "' must be number or array");
  }
  return out;
}

inline Eigen::Vector2d point2(const nlohmann::json& v, const std::string& key) {
  if (!v.is_array() || v.size() != 2)
    throw std::runtime_error("scenario: '" + key + "' must be [x, y]");
  return {v[0].get<double>(), v[1].get<double>()};
}

}  // namespace detail

inline Scenario scenario_from_json(const nlohmann::json& j) {
  static const std::vector<std::string> known = {
      "K", "L", "Mx", "My", "B", "beta0", "rician_zeta", "wavelength",
      "antenna_spacing", "H", "Vmax", "T", "delta", "t_d", "sigma2", "s_k",
      "sigma_k2", "delta_k2", "zeta_k", "varsigma_k", "C_k", "F_k_max",
      "P_k_max", "Gamma", "theta", "P_uav_max", "q_I", "q_F", "s_b",
      "rng_seed"};
  for (auto it = j.begin(); it != j.end(); ++it) {
    if (std::find(known.begin(), known.end(), it.key()) == known.end())
      throw std::runtime_error("scenario: unknown key '" + it.key() + "'");
  }
  Scenario s = default_scenario();
  if (j.contains("K")) s.K = j.at("K").get<int>();
  if (j.contains("L")) s.L = j.at("L").get<int>();
  if (j.contains("Mx")) s.Mx = j.at("Mx").get<int>();
  if (j.contains("My")) s.My = j.at("My").get<int>();
  if (j.contains("B")) s.B = j.at("B").get<double>();
  if (j.contains("beta0")) s.beta0 = j.at("beta0").get<double>();
  if (j.contains("rician_zeta")) s.rician_zeta = j.at("rician_zeta").get<double>();
  if (j.contains("wavelength")) s.wavelength = j.at("wavelength").get<double>();
  s.antenna_spacing = j.contains("antenna_spacing")
                          ? j.at("antenna_spacing").get<double>()
                          : s.wavelength / 2.0;
  if (j.contains("H")) s.H = j.at("H").get<double>();
  if (j.contains("Vmax")) s.Vmax = j.at("Vmax").get<double>();
  if (j.contains("T")) s.T = j.at("T").get<double>();
  if (j.contains("delta")) s.delta = j.at("delta").get<double>();
  if (!(s.delta > 0) || !(s.T > 0))
    throw std::runtime_error("scenario: T and delta must be positive");
  s.N = static_cast<int>(std::lround(s.T / s.delta));
  if (s.N < 2) throw std::runtime_error("scenario: T/delta gives fewer than 2 slots");
  s.delta = s.T / s.N;  // snap so that delta == T/N holds exactly
  if (j.contains("t_d")) s.t_d = j.at("t_d").get<double>();
  if (j.contains("sigma2")) s.sigma2 = j.at("sigma2").get<double>();
  if (j.contains("Gamma")) s.Gamma = j.at("Gamma").get<double>();
  if (j.contains("theta")) s.theta = j.at("theta").get<double>();
  if (j.contains("P_uav_max")) s.P_uav_max = j.at("P_uav_max").get<double>();
  if (j.contains("q_I")) s.q_I = detail::point2(j.at("q_I"), "q_I");
  if (j.contains("q_F")) s.q_F = detail::point2(j.at("q_F"), "q_F");
  if (j.contains("s_b")) s.s_b = detail::point2(j.at("s_b"), "s_b");
  if (j.contains("rng_seed")) s.rng_seed = j.at("rng_seed").get<std::uint64_t>();

  if (j.contains("s_k")) {
    const auto& arr = j.at("s_k");
    if (!arr.is_array())
      throw std::runtime_error("scenario: 's_k' must be an array of [x, y]");
    s.s_k.clear();
    for (size_t i = 0; i < arr.size(); ++i)
      s.s_k.push_back(detail::point2(arr[i], "s_k"));
    if (static_cast<int>(s.s_k.size()) != s.K)
      throw std::runtime_error("scenario: missing required field 's_k' entries for K GEs");
  } else if (s.K != 4) {
    throw std::runtime_error(
        "scenario: missing required field 's_k' (K differs from default)");
  }
  auto resize_default = [&](std::vector<double>& v) {
    if (static_cast<int>(v.size()) != s.K) v.assign(s.K, v.front());
  };
  resize_default(s.sigma_k2);
  resize_default(s.delta_k2);
  resize_default(s.zeta_k);
  resize_default(s.varsigma_k);
  resize_default(s.C_k);
  resize_default(s.F_k_max);
  resize_default(s.P_k_max);
  if (j.contains("sigma_k2")) s.sigma_k2 = detail::per_ge_array(j, s.K, "sigma_k2");
  if (j.contains("delta_k2")) s.delta_k2 = detail::per_ge_array(j, s.K, "delta_k2");
  if (j.contains("zeta_k")) s.zeta_k = detail::per_ge_array(j, s.K, "zeta_k");
  if (j.contains("varsigma_k")) s.varsigma_k = detail::per_ge_array(j, s.K, "varsigma_k");
  if (j.contains("C_k")) s.C_k = detail::per_ge_array(j, s.K, "C_k");
  if (j.contains("F_k_max")) s.F_k_max = detail::per_ge_array(j, s.K, "F_k_max");
  if (j.contains("P_k_max")) s.P_k_max = detail::per_ge_array(j, s.K, "P_k_max");

  auto report = validate(s);
  if (!report.empty()) {
    std::string msg = "scenario: invariant violation:";
    for (const auto& m : report) msg += " [" + m + "]";
    throw std::runtime_error(msg);
  }
  return s;
}

inline nlohmann::json scenario_to_json(const Scenario& s) {
  nlohmann::json j;
  j["K"] = s.K;
  j["L"] = s.L;
  j["Mx"] = s.Mx;
  j["My"] = s.My;
  j["B"] = s.B;
  j["beta0"] = s.beta0;
  j["rician_zeta"] = s.rician_zeta;
  j["wavelength"] = s.wavelength;
  j["antenna_spacing"] = s.antenna_spacing;
  j["H"] = s.H;
  j["Vmax"] = s.Vmax;
  j["T"] = s.T;
  j["delta"] = s.delta;
  j["t_d"] = s.t_d;
  j["sigma2"] = s.sigma2;
  j["s_k"] = nlohmann::json::array();
  for (const auto& p : s.s_k) j["s_k"].push_back({p.x(), p.y()});
  j["sigma_k2"] = s.sigma_k2;
  j["delta_k2"] = s.delta_k2;
  j["zeta_k"] = s.zeta_k;
  j["varsigma_k"] = s.varsigma_k;
  j["C_k"] = s.C_k;
  j["F_k_max"] = s.F_k_max;
  j["P_k_max"] = s.P_k_max;
  j["Gamma"] = s.Gamma;
  j["theta"] = s.theta;
  j["P_uav_max"] = s.P_uav_max;
  j["q_I"] = {s.q_I.x(), s.q_I.y()};
  j["q_F"] = {s.q_F.x(), s.q_F.y()};
  j["s_b"] = {s.s_b.x(), s.s_b.y()};
  j["rng_seed"] = s.rng_seed;
  return j;
}

inline Scenario load_scenario(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("scenario: cannot open '" + path + "'");
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw std::runtime_error("scenario: parse failure in '" + path +
                             "': " + e.what());
  }
  return scenario_from_json(j);
}

inline void save_scenario(const Scenario& s, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("scenario: cannot write '" + path + "'");
  out << scenario_to_json(s).dump(2) << "\n";
}

}  // namespace uavmec
