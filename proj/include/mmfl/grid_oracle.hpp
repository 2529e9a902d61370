#ifndef MMFL_GRID_ORACLE_HPP
#define MMFL_GRID_ORACLE_HPP

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "mmfl/comms.hpp"
#include "mmfl/config.hpp"
#include "mmfl/error.hpp"
#include "mmfl/model.hpp"

namespace mmfl {

/// Closed interval searched for one power coefficient; lo == hi pins it.
struct GridRange {
  double lo;
  double hi;
};

struct GridOracleOptions {
  int points = 17;        ///< grid points per dimension and level
  int refinements = 12;   ///< window halvings around the incumbent
  std::optional<GridRange> eta;   ///< default [smallest eta meeting t_qos alone, 1] per UE
  std::optional<GridRange> zeta;  ///< default [smallest zeta meeting t_qos alone, 1] per UE
};

struct GridOracleResult {
  bool found = false;
  double E_total = std::numeric_limits<double>::infinity();
  Allocation argmin;
  /// Spread (max - min) of E_total over the final cell around the argmin.
  double error_bound = std::numeric_limits<double>::infinity();
  std::size_t evaluated = 0;

  double relative_error() const { return error_bound / E_total; }
};

namespace detail {

// One searched power coefficient, gridded in log space.
struct GridDim {
  double lo, hi;    // admissible range (log)
  double wlo, whi;  // current window (log)

  int count(int points) const { return whi == wlo ? 1 : points; }
  double log_at(int i, int points) const {
    if (count(points) == 1) return wlo;
    return wlo + (whi - wlo) * i / (points - 1);
  }
  double step(int points) const { return count(points) == 1 ? 0.0 : (whi - wlo) / (points - 1); }

  // Halves the window and centres it on x, shifted back inside the range.
  void zoom(double x) {
    const double w = 0.5 * (whi - wlo);
    wlo = x - 0.5 * w;
    whi = x + 0.5 * w;
    if (wlo < lo) {
      whi += lo - wlo;
      wlo = lo;
    }
    if (whi > hi) {
      wlo -= whi - hi;
      whi = hi;
    }
    wlo = std::max(wlo, lo);
  }
};

// Per-link quantities for one combination of power coefficients.
struct LinkPoint {
  std::vector<double> log_coef;
  std::vector<double> coef;  // eta or zeta per UE
  std::vector<double> time;  // per-UE transmission time
  double energy = 0;         // sum over UEs of p N0 coef t
  double max_time = 0;
  bool ok = true;            // power constraints hold
};

class GridSearch {
 public:
  GridSearch(const ChannelInstance& ch, const SystemConfig& cfg, Scheme scheme, const GridOracleOptions& o)
      : ch_(ch), cfg_(cfg), scheme_(scheme), o_(o), ue_(ue_constants(cfg)), K_(ue_.size()) {
    const auto rho = normalized_powers(cfg);
    const double gain = cfg.M - cfg.K_total();
    auto floor_coef = [&](double size, int tau_p, double amp) {
      const double sinr = std::exp2(size / (detail::rate_prefactor(cfg, tau_p) * cfg.t_qos)) - 1.0;
      return std::min(1.0, sinr / amp);
    };
    auto dim = [](GridRange r) {
      if (!(r.lo > 0) || !(r.hi >= r.lo)) throw ConfigError("grid_oracle: ranges need 0 < lo <= hi");
      return GridDim{std::log(r.lo), std::log(r.hi), std::log(r.lo), std::log(r.hi)};
    };
    for (std::size_t k = 0; k < K_; ++k) {
      const double ed = floor_coef(ue_[k].S_d, cfg.tau_dp, gain * rho.rho_d * ch.sigma_hat_sq_nk[k]);
      const double eu = floor_coef(ue_[k].S_u, cfg.tau_up, gain * rho.rho_u * ch.sigma_bar_sq_nk[k]);
      eta_.push_back(dim(o.eta.value_or(GridRange{ed, 1.0})));
      zeta_.push_back(dim(o.zeta.value_or(GridRange{eu, 1.0})));
    }
  }

  GridOracleResult run() {
    GridOracleResult res;
    for (int level = 0; level <= o_.refinements; ++level) {
      if (level > 0 && res.found) {
        for (std::size_t k = 0; k < K_; ++k) {
          eta_[k].zoom(best_eta_[k]);
          zeta_[k].zoom(best_zeta_[k]);
        }
      }
      sweep(res);
    }
    if (res.found) res.error_bound = spread();
    return res;
  }

 private:
  LinkPoint link_point(const std::vector<double>& log_coef, bool downlink) const {
    const auto rho = normalized_powers(cfg_);
    LinkPoint lp;
    lp.log_coef = log_coef;
    for (double l : log_coef) lp.coef.push_back(std::exp(l));
    double sum = 0;
    for (double c : lp.coef) sum += c;
    if (downlink)
      lp.ok = 1.0 - sum >= -kFeasibilityTolerance;
    else
      for (double c : lp.coef) lp.ok = lp.ok && 1.0 - c >= -kFeasibilityTolerance;
    const auto r = downlink ? rate_downlink(lp.coef, ch_, cfg_) : rate_uplink(lp.coef, ch_, cfg_);
    for (std::size_t k = 0; k < K_; ++k) {
      const double t = time_or_inf(downlink ? ue_[k].S_d : ue_[k].S_u, r[k]);
      lp.time.push_back(t);
      lp.max_time = std::max(lp.max_time, t);
      lp.energy += (downlink ? rho.rho_d : rho.rho_u) * cfg_.N0 * lp.coef[k] * t;
    }
    return lp;
  }

  // All combinations of one link's coefficients.
  std::vector<LinkPoint> link_points(const std::vector<GridDim>& dims, bool downlink) const {
    std::vector<LinkPoint> out;
    std::vector<int> idx(K_, 0);
    std::vector<double> lc(K_);
    while (true) {
      for (std::size_t k = 0; k < K_; ++k) lc[k] = dims[k].log_at(idx[k], o_.points);
      out.push_back(link_point(lc, downlink));
      std::size_t k = 0;
      while (k < K_ && ++idx[k] == dims[k].count(o_.points)) idx[k++] = 0;
      if (k == K_) break;
    }
    return out;
  }

  // Compute times of the slowest frequencies meeting the deadline, capped at
  // f_max. Returns the compute energy, or nullopt when the scheme's exact
  // rules fail. With `relaxed`, f_max and the mode-switch rule are ignored.
  std::optional<double> compute_energy(const LinkPoint& d, const LinkPoint& u, std::vector<double>& f,
                                       bool relaxed) const {
    const double T = cfg_.t_qos;
    const double tol = kFeasibilityTolerance * T;
    f.assign(K_, 0.0);
    double e = 0, max_tc = 0;
    for (std::size_t k = 0; k < K_; ++k) {
      const double budget = scheme_ == Scheme::Sync ? T - d.max_time - u.max_time : T - d.time[k] - u.time[k];
      if (!(budget > 0)) return std::nullopt;
      const double c_min = ue_[k].cycles / cfg_.f_max;
      const double tc = relaxed ? budget : std::max(budget, c_min);
      f[k] = ue_[k].cycles / tc;
      e += ue_[k].compute_energy * f[k] * f[k];
      max_tc = std::max(max_tc, tc);
      if (relaxed || scheme_ == Scheme::Sync) continue;
      if (!(T - (d.time[k] + tc + u.time[k]) >= -tol)) return std::nullopt;
      if (!((d.time[k] + tc) - d.max_time >= -tol)) return std::nullopt;
    }
    if (!relaxed && scheme_ == Scheme::Sync && !(T - (d.max_time + max_tc + u.max_time) >= -tol)) return std::nullopt;
    return e;
  }

  void sweep(GridOracleResult& res) {
    const auto down = link_points(eta_, true);
    const auto up = link_points(zeta_, false);
    std::vector<double> f;
    for (const auto& d : down) {
      if (!d.ok) continue;
      for (const auto& u : up) {
        if (!u.ok) continue;
        const double base = d.energy + u.energy;
        if (!(base < res.E_total)) continue;
        ++res.evaluated;
        const auto ec = compute_energy(d, u, f, false);
        if (ec && base + *ec < res.E_total) {
          res.found = true;
          res.E_total = base + *ec;
          res.argmin = Allocation{d.coef, u.coef, f};
          best_eta_ = d.log_coef;
          best_zeta_ = u.log_coef;
        }
      }
    }
  }

  // Max - min of E_total over the 3^(2K) stencil of the final cell, with f
  // re-solved at every stencil point and the deadline as the only rule.
  double spread() const {
    double lo = std::numeric_limits<double>::infinity(), hi = -lo;
    std::vector<int> off(2 * K_, -1);
    std::vector<double> le(K_), lz(K_), f;
    while (true) {
      for (std::size_t k = 0; k < K_; ++k) {
        le[k] = std::clamp(best_eta_[k] + off[2 * k] * eta_[k].step(o_.points), eta_[k].lo, eta_[k].hi);
        lz[k] = std::clamp(best_zeta_[k] + off[2 * k + 1] * zeta_[k].step(o_.points), zeta_[k].lo, zeta_[k].hi);
      }
      const auto d = link_point(le, true);
      const auto u = link_point(lz, false);
      if (const auto ec = compute_energy(d, u, f, true)) {
        const double e = d.energy + u.energy + *ec;
        lo = std::min(lo, e);
        hi = std::max(hi, e);
      }
      std::size_t i = 0;
      while (i < off.size() && ++off[i] == 2) off[i++] = -1;
      if (i == off.size()) break;
    }
    return hi - lo;
  }

  const ChannelInstance& ch_;
  const SystemConfig& cfg_;
  Scheme scheme_;
  GridOracleOptions o_;
  std::vector<UeConstants> ue_;
  std::size_t K_;
  std::vector<GridDim> eta_, zeta_;
  std::vector<double> best_eta_, best_zeta_;
};

}  // namespace detail

/**
 * Exhaustive search for instances with at most two UEs. Power coefficients
 * are gridded in log space; for each grid point the frequencies are the
 * slowest ones meeting the deadline, which minimizes compute energy exactly.
 * Each level evaluates `points` values per coefficient and every refinement
 * halves the window around the incumbent. Only points passing the scheme's
 * exact feasibility rules count. Throws ConfigError when K_total > 2.
 */
inline GridOracleResult grid_oracle(const ChannelInstance& ch, const SystemConfig& raw, Scheme scheme,
                                    const GridOracleOptions& opts = {}) {
  const SystemConfig cfg = raw.resolved();
  if (cfg.K_total() > 2)
    throw ConfigError("grid_oracle supports at most 2 UEs (K_total=" + std::to_string(cfg.K_total()) + ")");
  if (opts.points < 1 || opts.refinements < 0) throw ConfigError("grid_oracle: points >= 1 and refinements >= 0");
  detail::require_zf(cfg);
  return detail::GridSearch(ch, cfg, scheme, opts).run();
}

}  // namespace mmfl

#endif  // MMFL_GRID_ORACLE_HPP
