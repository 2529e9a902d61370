#ifndef MMFL_COMMS_HPP
#define MMFL_COMMS_HPP

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include "mmfl/config.hpp"
#include "mmfl/error.hpp"
#include "mmfl/model.hpp"

namespace mmfl {

/// Physical decision variables, one entry per UE in flat order.
struct Allocation {
  std::vector<double> eta_nk;   ///< downlink power control, sum <= 1
  std::vector<double> zeta_nk;  ///< uplink power control, each <= 1
  std::vector<double> f_nk;     ///< CPU frequency (cycles/s)
};

struct TimingBreakdown {
  std::vector<double> t_d_nk;
  std::vector<double> t_C_nk;
  std::vector<double> t_u_nk;
};

struct EnergyBreakdown {
  double E_d = 0;
  std::vector<double> E_C_nk;
  std::vector<double> E_u_nk;
  double E_total = 0;

  double sum_E_C() const { return std::accumulate(E_C_nk.begin(), E_C_nk.end(), 0.0); }
  double sum_E_u() const { return std::accumulate(E_u_nk.begin(), E_u_nk.end(), 0.0); }
};

namespace detail {

inline void require_zf(const SystemConfig& cfg) {
  if (cfg.M <= cfg.K_total())
    throw ConfigError("zero-forcing rates need M > K_total (M=" + std::to_string(cfg.M) +
                      ", K_total=" + std::to_string(cfg.K_total()) + ")");
}

inline double rate_prefactor(const SystemConfig& cfg, int tau_p) {
  return static_cast<double>(cfg.tau_c - tau_p) / cfg.tau_c * cfg.B;
}

}  // namespace detail

inline std::vector<double> sinr_downlink(std::span<const double> eta, const ChannelInstance& ch,
                                         const SystemConfig& cfg) {
  detail::require_zf(cfg);
  const double rho_d = normalized_powers(cfg).rho_d;
  const double gain = cfg.M - cfg.K_total();
  const double total = std::accumulate(eta.begin(), eta.end(), 0.0);
  std::vector<double> out(eta.size());
  for (std::size_t k = 0; k < eta.size(); ++k) {
    const double s = ch.sigma_hat_sq_nk[k];
    out[k] = gain * rho_d * s * eta[k] / (rho_d * (ch.beta_nk[k] - s) * total + 1.0);
  }
  return out;
}

inline std::vector<double> sinr_uplink(std::span<const double> zeta, const ChannelInstance& ch,
                                       const SystemConfig& cfg) {
  detail::require_zf(cfg);
  const double rho_u = normalized_powers(cfg).rho_u;
  const double gain = cfg.M - cfg.K_total();
  double interference = 0;
  for (std::size_t j = 0; j < zeta.size(); ++j) interference += (ch.beta_nk[j] - ch.sigma_bar_sq_nk[j]) * zeta[j];
  const double denom = rho_u * interference + 1.0;
  std::vector<double> out(zeta.size());
  for (std::size_t k = 0; k < zeta.size(); ++k) out[k] = gain * rho_u * ch.sigma_bar_sq_nk[k] * zeta[k] / denom;
  return out;
}

inline std::vector<double> rate_downlink(std::span<const double> eta, const ChannelInstance& ch,
                                         const SystemConfig& raw) {
  const SystemConfig cfg = raw.resolved();
  auto r = sinr_downlink(eta, ch, cfg);
  const double pre = detail::rate_prefactor(cfg, cfg.tau_dp);
  for (double& x : r) x = pre * std::log2(1.0 + x);
  return r;
}

inline std::vector<double> rate_uplink(std::span<const double> zeta, const ChannelInstance& ch,
                                       const SystemConfig& raw) {
  const SystemConfig cfg = raw.resolved();
  auto r = sinr_uplink(zeta, ch, cfg);
  const double pre = detail::rate_prefactor(cfg, cfg.tau_up);
  for (double& x : r) x = pre * std::log2(1.0 + x);
  return r;
}

inline std::vector<double> sinr_downlink(const Allocation& a, const ChannelInstance& ch, const SystemConfig& cfg) {
  return sinr_downlink(a.eta_nk, ch, cfg);
}
inline std::vector<double> sinr_uplink(const Allocation& a, const ChannelInstance& ch, const SystemConfig& cfg) {
  return sinr_uplink(a.zeta_nk, ch, cfg);
}
inline std::vector<double> rate_downlink(const Allocation& a, const ChannelInstance& ch, const SystemConfig& cfg) {
  return rate_downlink(a.eta_nk, ch, cfg);
}
inline std::vector<double> rate_uplink(const Allocation& a, const ChannelInstance& ch, const SystemConfig& cfg) {
  return rate_uplink(a.zeta_nk, ch, cfg);
}

/// Stage times for given rates. Zero rates or frequencies are an error
/// listing every offending UE.
inline TimingBreakdown delays_at_rates(const Allocation& a, std::span<const double> r_d, std::span<const double> r_u,
                                       const SystemConfig& cfg) {
  const auto ue = ue_constants(cfg);
  std::vector<std::size_t> bad;
  TimingBreakdown t;
  for (std::size_t k = 0; k < ue.size(); ++k) {
    if (!(r_d[k] > 0) || !(r_u[k] > 0) || !(a.f_nk[k] > 0)) {
      bad.push_back(k);
      continue;
    }
    t.t_d_nk.push_back(ue[k].S_d / r_d[k]);
    t.t_C_nk.push_back(ue[k].cycles / a.f_nk[k]);
    t.t_u_nk.push_back(ue[k].S_u / r_u[k]);
  }
  if (!bad.empty()) {
    std::string list;
    for (auto k : bad) list += (list.empty() ? "" : ",") + std::to_string(k);
    throw ZeroRateError("zero rate or frequency at UE(s) " + list, std::move(bad));
  }
  return t;
}

inline TimingBreakdown delays(const Allocation& a, const ChannelInstance& ch, const SystemConfig& cfg) {
  return delays_at_rates(a, rate_downlink(a, ch, cfg), rate_uplink(a, ch, cfg), cfg);
}

/// Energies for given rates. A UE whose power coefficient is zero transmits
/// nothing and contributes no transmit energy on that link.
inline EnergyBreakdown energies_at_rates(const Allocation& a, std::span<const double> r_d, std::span<const double> r_u,
                                         const SystemConfig& cfg) {
  const auto ue = ue_constants(cfg);
  const auto rho = normalized_powers(cfg);
  std::vector<std::size_t> bad;
  EnergyBreakdown e;
  e.E_C_nk.resize(ue.size());
  e.E_u_nk.resize(ue.size());
  for (std::size_t k = 0; k < ue.size(); ++k) {
    if ((a.eta_nk[k] > 0 && !(r_d[k] > 0)) || (a.zeta_nk[k] > 0 && !(r_u[k] > 0))) {
      bad.push_back(k);
      continue;
    }
    if (a.eta_nk[k] > 0) e.E_d += rho.rho_d * cfg.N0 * a.eta_nk[k] * (ue[k].S_d / r_d[k]);
    e.E_C_nk[k] = ue[k].compute_energy * a.f_nk[k] * a.f_nk[k];
    e.E_u_nk[k] = a.zeta_nk[k] > 0 ? rho.rho_u * cfg.N0 * a.zeta_nk[k] * (ue[k].S_u / r_u[k]) : 0.0;
  }
  if (!bad.empty()) throw ZeroRateError("positive power with zero rate", std::move(bad));
  e.E_total = e.E_d + e.sum_E_C() + e.sum_E_u();
  return e;
}

inline EnergyBreakdown energies(const Allocation& a, const ChannelInstance& ch, const SystemConfig& cfg) {
  return energies_at_rates(a, rate_downlink(a, ch, cfg), rate_uplink(a, ch, cfg), cfg);
}

// ---------------------------------------------------------------------------
// Feasibility

struct ConstraintSlack {
  std::string name;
  double slack;  ///< nonnegative means satisfied
  double scale;  ///< natural magnitude used for the tolerance
};

struct FeasibilityReport {
  std::vector<ConstraintSlack> entries;
  bool feasible = true;

  /// Most negative slack divided by its scale (0 if nothing is violated).
  double worst_scaled_violation() const {
    double w = 0;
    for (const auto& c : entries) w = std::min(w, c.slack / c.scale);
    return w;
  }
  const ConstraintSlack* find(const std::string& name) const {
    for (const auto& c : entries)
      if (c.name == name) return &c;
    return nullptr;
  }
};

inline constexpr double kFeasibilityTolerance = 1e-9;

namespace detail {

inline double time_or_inf(double size, double rate) {
  return rate > 0 ? size / rate : std::numeric_limits<double>::infinity();
}

struct RawTimes {
  std::vector<double> t_d, t_C, t_u;
};

inline RawTimes raw_times(const Allocation& a, const ChannelInstance& ch, const SystemConfig& cfg) {
  const auto ue = ue_constants(cfg);
  const auto rd = rate_downlink(a, ch, cfg);
  const auto ru = rate_uplink(a, ch, cfg);
  RawTimes t;
  for (std::size_t k = 0; k < ue.size(); ++k) {
    t.t_d.push_back(time_or_inf(ue[k].S_d, rd[k]));
    t.t_C.push_back(time_or_inf(ue[k].cycles, a.f_nk[k]));
    t.t_u.push_back(time_or_inf(ue[k].S_u, ru[k]));
  }
  return t;
}

inline void add(FeasibilityReport& r, std::string name, double slack, double scale) {
  if (std::isnan(slack) || slack < -kFeasibilityTolerance * scale) r.feasible = false;
  r.entries.push_back({std::move(name), slack, scale});
}

inline std::string indexed(const char* name, std::size_t k) { return std::string(name) + "[" + std::to_string(k) + "]"; }

// Power and frequency box constraints shared by both schemes.
inline void add_box_constraints(FeasibilityReport& r, const Allocation& a, const SystemConfig& cfg) {
  add(r, "dl_power_budget", 1.0 - std::accumulate(a.eta_nk.begin(), a.eta_nk.end(), 0.0), 1.0);
  for (std::size_t k = 0; k < a.eta_nk.size(); ++k) {
    add(r, indexed("eta_nonneg", k), a.eta_nk[k], 1.0);
    add(r, indexed("zeta_nonneg", k), a.zeta_nk[k], 1.0);
    add(r, indexed("ul_power", k), 1.0 - a.zeta_nk[k], 1.0);
    add(r, indexed("f_nonneg", k), a.f_nk[k], cfg.f_max);
    add(r, indexed("f_max", k), cfg.f_max - a.f_nk[k], cfg.f_max);
  }
}

}  // namespace detail

/**
 * Exact constraint set of the asynchronous scheme: power boxes, per-UE
 * deadline t_d + t_C + t_u <= t_qos, and the mode-switch condition
 * max_k t_d <= min_k (t_d + t_C), reported per UE as (t_d,k + t_C,k) - max t_d.
 */
inline FeasibilityReport check_async(const Allocation& a, const ChannelInstance& ch, const SystemConfig& raw) {
  const SystemConfig cfg = raw.resolved();
  FeasibilityReport r;
  detail::add_box_constraints(r, a, cfg);
  const auto t = detail::raw_times(a, ch, cfg);
  const double max_td = *std::max_element(t.t_d.begin(), t.t_d.end());
  for (std::size_t k = 0; k < t.t_d.size(); ++k) {
    detail::add(r, detail::indexed("deadline", k), cfg.t_qos - (t.t_d[k] + t.t_C[k] + t.t_u[k]), cfg.t_qos);
    detail::add(r, detail::indexed("uplink_after_switch", k), (t.t_d[k] + t.t_C[k]) - max_td, cfg.t_qos);
  }
  return r;
}

/// Exact constraint set of the synchronous scheme: the sum of per-stage
/// maxima must fit the deadline.
inline FeasibilityReport check_sync(const Allocation& a, const ChannelInstance& ch, const SystemConfig& raw) {
  const SystemConfig cfg = raw.resolved();
  FeasibilityReport r;
  detail::add_box_constraints(r, a, cfg);
  const auto t = detail::raw_times(a, ch, cfg);
  auto mx = [](const std::vector<double>& v) { return *std::max_element(v.begin(), v.end()); };
  detail::add(r, "stage_deadline", cfg.t_qos - (mx(t.t_d) + mx(t.t_C) + mx(t.t_u)), cfg.t_qos);
  return r;
}

enum class Scheme { Async, Sync };

inline const char* to_string(Scheme s) { return s == Scheme::Async ? "async" : "sync"; }

inline FeasibilityReport check(Scheme s, const Allocation& a, const ChannelInstance& ch, const SystemConfig& cfg) {
  return s == Scheme::Async ? check_async(a, ch, cfg) : check_sync(a, ch, cfg);
}

}  // namespace mmfl

#endif  // MMFL_COMMS_HPP
