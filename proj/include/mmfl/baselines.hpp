#ifndef MMFL_BASELINES_HPP
#define MMFL_BASELINES_HPP

#include <algorithm>
#include <vector>

#include "mmfl/comms.hpp"

namespace mmfl {

struct HeuristicResult {
  Allocation allocation;
  FeasibilityReport report;
  /// UEs whose frequency formula exceeded f_max or had a nonpositive
  /// time budget; their f is clamped to f_max.
  std::vector<std::size_t> flagged;
};

namespace detail {

// Equal downlink split, full uplink power, and the smallest frequency that
// meets `budget[k]` seconds of compute time.
inline HeuristicResult equal_power_heuristic(const ChannelInstance& ch, const SystemConfig& raw, Scheme scheme) {
  const SystemConfig cfg = raw.resolved();
  const std::size_t K = ch.size();
  HeuristicResult h;
  h.allocation.eta_nk.assign(K, 1.0 / static_cast<double>(cfg.K_total()));
  h.allocation.zeta_nk.assign(K, 1.0);
  h.allocation.f_nk.assign(K, cfg.f_max);
  const auto rd = rate_downlink(h.allocation, ch, cfg);
  const auto ru = rate_uplink(h.allocation, ch, cfg);
  const auto t = delays_at_rates(h.allocation, rd, ru, cfg);
  const auto ue = ue_constants(cfg);
  const double max_td = *std::max_element(t.t_d_nk.begin(), t.t_d_nk.end());
  const double max_tu = *std::max_element(t.t_u_nk.begin(), t.t_u_nk.end());
  for (std::size_t k = 0; k < K; ++k) {
    const double budget =
        scheme == Scheme::Async ? cfg.t_qos - t.t_d_nk[k] - t.t_u_nk[k] : cfg.t_qos - max_td - max_tu;
    const double f = budget > 0 ? ue[k].cycles / budget : std::numeric_limits<double>::infinity();
    if (f > cfg.f_max * (1.0 + 1e-12)) {
      h.flagged.push_back(k);
    } else {
      h.allocation.f_nk[k] = std::min(f, cfg.f_max);
    }
  }
  h.report = check(scheme, h.allocation, ch, cfg);
  return h;
}

}  // namespace detail

/// Equal downlink power 1/K_total per UE, uplink coefficient 1, and each UE
/// computing just fast enough to meet its own deadline.
inline HeuristicResult heuristic_async(const ChannelInstance& ch, const SystemConfig& cfg) {
  return detail::equal_power_heuristic(ch, cfg, Scheme::Async);
}

/// As heuristic_async, but the compute budget is what remains after the
/// slowest downlink and the slowest uplink.
inline HeuristicResult heuristic_sync(const ChannelInstance& ch, const SystemConfig& cfg) {
  return detail::equal_power_heuristic(ch, cfg, Scheme::Sync);
}

inline HeuristicResult heuristic(Scheme s, const ChannelInstance& ch, const SystemConfig& cfg) {
  return detail::equal_power_heuristic(ch, cfg, s);
}

}  // namespace mmfl

#endif  // MMFL_BASELINES_HPP
