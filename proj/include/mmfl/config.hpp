#ifndef MMFL_CONFIG_HPP
#define MMFL_CONFIG_HPP

#include <cmath>
#include <cstddef>
#include <numeric>
#include <string>
#include <vector>

#include "mmfl/error.hpp"

namespace mmfl {

/// Converts a power in dBm to Watts.
inline double dbm_to_watt(double dbm) { return std::pow(10.0, (dbm - 30.0) / 10.0); }

/**
 * All constants of one scenario. UEs are indexed flat, group-major: the
 * first K_n[0] entries belong to group 0, and so on.
 *
 * Units are SI throughout (Hz, W, bits, s, cycles) except distances, which
 * are in km. A pilot length of 0 means "equal to K_total" and is resolved by
 * resolved().
 */
struct SystemConfig {
  int M = 100;
  int N = 3;
  std::vector<int> K_n{10, 10, 10};
  double B = 20e6;
  int tau_c = 200;
  int tau_dp = 0;
  int tau_up = 0;
  double p_d = 6.0;
  double p_u = 0.2;
  double p_p = 0.2;
  double N0 = dbm_to_watt(-92.0);
  std::vector<double> S_d_n{1.6e8, 1.6e8, 1.6e8};
  std::vector<double> S_u_n{1.6e8, 1.6e8, 1.6e8};
  std::vector<double> D_n{5e6, 5e6, 5e6};
  /// Cycles per sample, one inner vector per group.
  std::vector<std::vector<double>> c_nk{std::vector<double>(10, 20.0), std::vector<double>(10, 20.0),
                                        std::vector<double>(10, 20.0)};
  int L = 50;
  double alpha = 5e-30;
  double f_max = 4e9;
  double t_qos = 5.0;
  double area_D = 0.25;

  // Large-scale fading model.
  double pathloss_PL0_db = -140.6;
  double pathloss_exponent = 3.67;
  double shadowing_std_db = 4.0;
  double min_distance_km = 0.01;

  int K_total() const { return std::accumulate(K_n.begin(), K_n.end(), 0); }

  /// Group index of every UE, in flat order.
  std::vector<int> group_of() const {
    std::vector<int> g;
    g.reserve(static_cast<std::size_t>(K_total()));
    for (int n = 0; n < N; ++n) g.insert(g.end(), static_cast<std::size_t>(K_n[n]), n);
    return g;
  }

  /// Copy with automatic pilot lengths replaced by K_total.
  SystemConfig resolved() const {
    SystemConfig c = *this;
    if (c.tau_dp == 0) c.tau_dp = K_total();
    if (c.tau_up == 0) c.tau_up = K_total();
    return c;
  }

  /// Replaces the group layout by N groups of K UEs each, broadcasting the
  /// first group's per-group constants.
  void set_uniform_groups(int groups, int K) {
    N = groups;
    K_n.assign(static_cast<std::size_t>(groups), K);
    const double sd = S_d_n.at(0), su = S_u_n.at(0), d = D_n.at(0), c = c_nk.at(0).at(0);
    S_d_n.assign(static_cast<std::size_t>(groups), sd);
    S_u_n.assign(static_cast<std::size_t>(groups), su);
    D_n.assign(static_cast<std::size_t>(groups), d);
    c_nk.assign(static_cast<std::size_t>(groups), std::vector<double>(static_cast<std::size_t>(K), c));
  }
};

/// Transmit powers normalized by the noise power.
struct NormalizedPowers {
  double rho_d;
  double rho_u;
  double rho_p;
};

inline NormalizedPowers normalized_powers(const SystemConfig& cfg) {
  return {cfg.p_d / cfg.N0, cfg.p_u / cfg.N0, cfg.p_p / cfg.N0};
}

/// Throws ConfigError naming the first violated invariant. Pilot lengths are
/// checked after resolution.
inline void validate(const SystemConfig& raw) {
  const SystemConfig cfg = raw.resolved();
  auto fail = [](const std::string& msg) { throw ConfigError("invalid config: " + msg); };
  if (cfg.N < 1) fail("N must be >= 1");
  const auto n = static_cast<std::size_t>(cfg.N);
  if (cfg.K_n.size() != n) fail("K_n must have N entries");
  for (int k : cfg.K_n)
    if (k < 1) fail("every K_n must be >= 1");
  if (cfg.S_d_n.size() != n || cfg.S_u_n.size() != n || cfg.D_n.size() != n || cfg.c_nk.size() != n)
    fail("per-group lists must have N entries");
  for (std::size_t g = 0; g < n; ++g) {
    if (cfg.c_nk[g].size() != static_cast<std::size_t>(cfg.K_n[g])) fail("c_nk[n] must have K_n entries");
    for (double c : cfg.c_nk[g])
      if (!(c > 0)) fail("c_nk must be positive");
    if (!(cfg.S_d_n[g] > 0) || !(cfg.S_u_n[g] > 0)) fail("update sizes must be positive");
    if (!(cfg.D_n[g] > 0)) fail("D_n must be positive");
  }
  const int kt = cfg.K_total();
  if (cfg.M <= kt) fail("M > K_total is required for zero-forcing (M=" + std::to_string(cfg.M) +
                       ", K_total=" + std::to_string(kt) + ")");
  if (cfg.tau_dp < kt || cfg.tau_up < kt) fail("pilot lengths must be >= K_total");
  if (cfg.tau_dp >= cfg.tau_c || cfg.tau_up >= cfg.tau_c) fail("pilot lengths must be < tau_c");
  if (!(cfg.B > 0)) fail("B must be positive");
  if (!(cfg.p_d > 0) || !(cfg.p_u > 0) || !(cfg.p_p > 0)) fail("powers must be positive");
  if (!(cfg.N0 > 0)) fail("N0 must be positive");
  if (cfg.L < 1) fail("L must be >= 1");
  if (!(cfg.alpha > 0)) fail("alpha must be positive");
  if (!(cfg.f_max > 0)) fail("f_max must be positive");
  if (!(cfg.t_qos > 0)) fail("t_qos must be positive");
  if (!(cfg.area_D > 0)) fail("area_D must be positive");
  if (!(cfg.min_distance_km > 0) || cfg.min_distance_km >= cfg.area_D / 2)
    fail("min_distance_km must lie in (0, area_D/2)");
  if (!(cfg.shadowing_std_db >= 0)) fail("shadowing_std_db must be nonnegative");
}

/// Per-UE constants derived from the group layout.
struct UeConstants {
  double S_d;             ///< downlink payload (bits)
  double S_u;             ///< uplink payload (bits)
  double cycles;          ///< L * D_n * c_nk
  double compute_energy;  ///< L * alpha/2 * c_nk * D_n, multiplies f^2
};

inline std::vector<UeConstants> ue_constants(const SystemConfig& cfg) {
  std::vector<UeConstants> out;
  out.reserve(static_cast<std::size_t>(cfg.K_total()));
  for (int n = 0; n < cfg.N; ++n) {
    for (int k = 0; k < cfg.K_n[n]; ++k) {
      const double c = cfg.c_nk[n][k], d = cfg.D_n[n];
      out.push_back({cfg.S_d_n[n], cfg.S_u_n[n], cfg.L * d * c, cfg.L * cfg.alpha / 2.0 * c * d});
    }
  }
  return out;
}

}  // namespace mmfl

#endif  // MMFL_CONFIG_HPP
