#ifndef MMFL_MODEL_HPP
#define MMFL_MODEL_HPP

#include <cmath>
#include <cstdint>
#include <random>
#include <stdexcept>
#include <vector>

#include "mmfl/config.hpp"
#include "mmfl/rng.hpp"

namespace mmfl {

struct Position {
  double x_km;
  double y_km;
};

/// One realization of UE placement and large-scale fading. Immutable after
/// generation; all per-UE vectors are in flat group-major order.
struct ChannelInstance {
  std::vector<Position> positions;
  std::vector<double> beta_nk;          ///< large-scale fading (linear)
  std::vector<double> sigma_hat_sq_nk;  ///< downlink-phase estimate variance
  std::vector<double> sigma_bar_sq_nk;  ///< uplink-phase estimate variance

  std::size_t size() const { return beta_nk.size(); }

  friend bool operator==(const ChannelInstance& a, const ChannelInstance& b) {
    if (a.positions.size() != b.positions.size()) return false;
    for (std::size_t i = 0; i < a.positions.size(); ++i)
      if (a.positions[i].x_km != b.positions[i].x_km || a.positions[i].y_km != b.positions[i].y_km) return false;
    return a.beta_nk == b.beta_nk && a.sigma_hat_sq_nk == b.sigma_hat_sq_nk && a.sigma_bar_sq_nk == b.sigma_bar_sq_nk;
  }
};

/// Log-distance pathloss in dB: PL0 - 10 gamma log10(d / 1 km).
inline double pathloss_db(double distance_km, double pl0_db = -140.6, double exponent = 3.67) {
  if (!(distance_km > 0)) throw std::domain_error("pathloss_db: distance must be positive");
  return pl0_db - 10.0 * exponent * std::log10(distance_km);
}

/// Variance of the MMSE channel estimate from a length-tau_p orthogonal pilot.
inline double mmse_variance(double beta, double tau_p, double rho_p) {
  if (beta < 0) throw std::domain_error("mmse_variance: beta must be nonnegative");
  if (!(tau_p >= 1) || !(rho_p > 0)) throw std::domain_error("mmse_variance: tau_p >= 1 and rho_p > 0 required");
  const double snr = tau_p * rho_p * beta;
  return snr * beta / (snr + 1.0);
}

/// Channel quantities for a given beta vector. Exposed so tests can build
/// instances with hand-picked fading.
inline ChannelInstance channel_from_beta(const SystemConfig& raw, std::vector<double> beta) {
  const SystemConfig cfg = raw.resolved();
  const auto rho = normalized_powers(cfg);
  ChannelInstance ch;
  ch.positions.assign(beta.size(), Position{0.0, 0.0});
  ch.sigma_hat_sq_nk.reserve(beta.size());
  ch.sigma_bar_sq_nk.reserve(beta.size());
  for (double b : beta) {
    ch.sigma_hat_sq_nk.push_back(mmse_variance(b, cfg.tau_dp, rho.rho_p));
    ch.sigma_bar_sq_nk.push_back(mmse_variance(b, cfg.tau_up, rho.rho_p));
  }
  ch.beta_nk = std::move(beta);
  return ch;
}

/**
 * Drops K_total UEs uniformly in the area_D x area_D square centered on the
 * BS, rejecting points closer than min_distance_km, and draws log-normal
 * shadowing on top of the log-distance pathloss.
 */
inline ChannelInstance generate_network(const SystemConfig& raw, std::uint64_t seed) {
  validate(raw);
  const SystemConfig cfg = raw.resolved();
  std::mt19937_64 gen(splitmix64(seed));
  std::uniform_real_distribution<double> coord(-cfg.area_D / 2.0, cfg.area_D / 2.0);
  std::normal_distribution<double> shadow(0.0, 1.0);

  const auto K = static_cast<std::size_t>(cfg.K_total());
  std::vector<Position> pos;
  std::vector<double> beta;
  pos.reserve(K);
  beta.reserve(K);
  while (pos.size() < K) {
    const Position p{coord(gen), coord(gen)};
    const double d = std::hypot(p.x_km, p.y_km);
    if (d < cfg.min_distance_km) continue;
    const double z = shadow(gen);
    const double db = pathloss_db(d, cfg.pathloss_PL0_db, cfg.pathloss_exponent) + cfg.shadowing_std_db * z;
    pos.push_back(p);
    beta.push_back(std::pow(10.0, db / 10.0));
  }
  ChannelInstance ch = channel_from_beta(cfg, std::move(beta));
  ch.positions = std::move(pos);
  return ch;
}

}  // namespace mmfl

#endif  // MMFL_MODEL_HPP
