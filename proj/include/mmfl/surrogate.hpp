#ifndef MMFL_SURROGATE_HPP
#define MMFL_SURROGATE_HPP

#include <array>
#include <cmath>
#include <numbers>
#include <numeric>
#include <span>
#include <stdexcept>
#include <vector>

#include "mmfl/comms.hpp"
#include "mmfl/config.hpp"
#include "mmfl/model.hpp"
#include "mmfl/quad_expr.hpp"

namespace mmfl {

/**
 * Previous-iterate values around which the surrogates are built. Vectors are
 * per UE. The surrogate functions are unit-agnostic; callers decide how the
 * bilinear variables are scaled.
 */
struct ExpansionPoint {
  std::vector<double> v, u, f, r_d, r_u, omega, theta, q1, q2;
  double q = 0;
};

/**
 * Channel functionals in the square-root power variables v = sqrt(eta),
 * u = sqrt(zeta):
 *   Pi_k(v)   = rho_d (beta_k - sigma_hat_k^2) sum_j v_j^2 + 1
 *   Ups_k(v)  = sqrt((M - K) rho_d) sigma_hat_k v_k
 *   Xi_k(u)   = rho_u sum_j (beta_j - sigma_bar_j^2) u_j^2 + 1
 *   Psi_k(u)  = sqrt((M - K) rho_u) sigma_bar_k u_k
 * so that SINR_d = Ups^2 / Pi and SINR_u = Psi^2 / Xi.
 */
class AuxFunctionals {
 public:
  AuxFunctionals(const ChannelInstance& ch, const SystemConfig& raw) {
    const SystemConfig cfg = raw.resolved();
    detail::require_zf(cfg);
    const auto rho = normalized_powers(cfg);
    const double gain = cfg.M - cfg.K_total();
    for (std::size_t k = 0; k < ch.size(); ++k) {
      amp_d_.push_back(std::sqrt(gain * rho.rho_d * ch.sigma_hat_sq_nk[k]));
      leak_d_.push_back(rho.rho_d * (ch.beta_nk[k] - ch.sigma_hat_sq_nk[k]));
      amp_u_.push_back(std::sqrt(gain * rho.rho_u * ch.sigma_bar_sq_nk[k]));
      leak_u_.push_back(rho.rho_u * (ch.beta_nk[k] - ch.sigma_bar_sq_nk[k]));
    }
    pre_d_ = detail::rate_prefactor(cfg, cfg.tau_dp);
    pre_u_ = detail::rate_prefactor(cfg, cfg.tau_up);
  }

  double Pi(std::span<const double> v, std::size_t k) const { return leak_d_[k] * sum_sq(v) + 1.0; }
  double Upsilon(double v_k, std::size_t k) const { return amp_d_[k] * v_k; }
  double Xi(std::span<const double> u) const {
    double s = 0;
    for (std::size_t j = 0; j < u.size(); ++j) s += leak_u_[j] * u[j] * u[j];
    return s + 1.0;
  }
  double Xi(std::span<const double> u, std::size_t) const { return Xi(u); }
  double Psi(double u_k, std::size_t k) const { return amp_u_[k] * u_k; }

  double amp_d(std::size_t k) const { return amp_d_[k]; }
  double leak_d(std::size_t k) const { return leak_d_[k]; }
  double amp_u(std::size_t k) const { return amp_u_[k]; }
  double leak_u(std::size_t k) const { return leak_u_[k]; }
  /// (tau_c - tau_p)/tau_c * B, bits/s per bit/s/Hz.
  double prefactor_d() const { return pre_d_; }
  double prefactor_u() const { return pre_u_; }

 private:
  static double sum_sq(std::span<const double> v) {
    double s = 0;
    for (double x : v) s += x * x;
    return s;
  }

  std::vector<double> amp_d_, leak_d_, amp_u_, leak_u_;
  double pre_d_ = 0, pre_u_ = 0;
};

/// A surrogate evaluated at one argument together with its symbolic form.
struct SurrogateValue {
  double value;
  QuadExpr expr;
};

namespace detail {

inline void require_finite(std::span<const double> x, const char* who) {
  for (double a : x)
    if (!std::isfinite(a)) throw std::domain_error(std::string(who) + ": non-finite expansion point");
}

// Concave quadratic minorant of  pre * log2(1 + a^2 x_k^2 / (1 + sum_j w_j x_j^2))
// built at x_i. `leak` holds the per-slot weights w_j entering the
// denominator of UE k.
inline SurrogateValue rate_minorant(std::size_t k, std::span<const double> x, std::span<const double> xi, double amp,
                                    std::span<const double> leak, double pre) {
  const double scale = pre / std::numbers::ln2;
  auto denom = [&](std::span<const double> y) {
    double s = 0;
    for (std::size_t j = 0; j < y.size(); ++j) s += leak[j] * y[j] * y[j];
    return s + 1.0;
  };
  const double sig_i = amp * xi[k];
  const double den_i = denom(xi);
  const double gamma = sig_i * sig_i / den_i;
  const double curv = gamma / (sig_i * sig_i + den_i);

  // Closed-form value at x.
  const double sig = amp * x[k];
  const double value =
      scale * (std::log1p(gamma) - gamma + 2.0 * sig_i * sig / den_i - curv * (sig * sig + denom(x)));

  QuadExpr e;
  e.constant = scale * (std::log1p(gamma) - gamma - curv);
  e.add_linear(k, scale * 2.0 * sig_i * amp / den_i);
  for (std::size_t j = 0; j < x.size(); ++j) {
    double w = leak[j];
    if (j == k) w += amp * amp;
    if (w != 0) e.add_quadratic(j, j, -scale * curv * w);
  }
  return {value, std::move(e)};
}

}  // namespace detail

/**
 * Concave lower bound on each UE's downlink rate (bits/s) as a function of
 * the whole vector v, tight at v = v_i. The expression is over slots
 * 0..K-1 (one per v entry).
 */
inline std::vector<SurrogateValue> rate_dl_lb(std::span<const double> v, std::span<const double> v_i,
                                              const AuxFunctionals& aux) {
  detail::require_finite(v_i, "rate_dl_lb");
  std::vector<SurrogateValue> out;
  out.reserve(v.size());
  for (std::size_t k = 0; k < v.size(); ++k) {
    // The downlink leakage of UE k multiplies the total power of everyone.
    std::vector<double> leak(v.size(), aux.leak_d(k));
    out.push_back(detail::rate_minorant(k, v, v_i, aux.amp_d(k), leak, aux.prefactor_d()));
  }
  return out;
}

/// Uplink counterpart of rate_dl_lb, in u = sqrt(zeta).
inline std::vector<SurrogateValue> rate_ul_lb(std::span<const double> u, std::span<const double> u_i,
                                              const AuxFunctionals& aux) {
  detail::require_finite(u_i, "rate_ul_lb");
  std::vector<double> leak(u.size());
  for (std::size_t j = 0; j < u.size(); ++j) leak[j] = aux.leak_u(j);
  std::vector<SurrogateValue> out;
  out.reserve(u.size());
  for (std::size_t k = 0; k < u.size(); ++k)
    out.push_back(detail::rate_minorant(k, u, u_i, aux.amp_u(k), leak, aux.prefactor_u()));
  return out;
}

/// Convex majorant of  x^2 - r w  (slots: 0 = x, 1 = r, 2 = w), tight at (r_i, w_i).
inline SurrogateValue power_rate_bound(double x, double r, double w, double r_i, double w_i) {
  detail::require_finite(std::array{x, r, w, r_i, w_i}, "power_rate_bound");
  const double s = r_i + w_i;
  QuadExpr e;
  e.constant = 0.25 * s * s;
  e.add_linear(1, -0.5 * s).add_linear(2, -0.5 * s);
  e.add_quadratic(0, 0, 1.0).add_quadratic(1, 1, 0.25).add_quadratic(2, 2, 0.25).add_quadratic(1, 2, -0.5);
  const double value = 0.25 * (4.0 * x * x + (r - w) * (r - w) - 2.0 * s * (r + w) + s * s);
  return {value, std::move(e)};
}

/// Convex majorant of  a b - c  (slots: 0 = a, 1 = b), tight at (a_i, b_i).
inline SurrogateValue product_bound(double a, double b, double a_i, double b_i, double c) {
  detail::require_finite(std::array{a, b, a_i, b_i, c}, "product_bound");
  const double d = a_i - b_i;
  QuadExpr e;
  e.constant = 0.25 * d * d - c;
  e.add_linear(0, -0.5 * d).add_linear(1, 0.5 * d);
  e.add_quadratic(0, 0, 0.25).add_quadratic(1, 1, 0.25).add_quadratic(0, 1, 0.5);
  const double value = 0.25 * ((a + b) * (a + b) - 2.0 * d * (a - b) + d * d - 4.0 * c);
  return {value, std::move(e)};
}

/// Majorant of v^2 - r_d omega.
inline SurrogateValue h1(double v, double r_d, double omega, double r_d_i, double omega_i) {
  return power_rate_bound(v, r_d, omega, r_d_i, omega_i);
}
/// Majorant of u^2 - r_u theta.
inline SurrogateValue h2(double u, double r_u, double theta, double r_u_i, double theta_i) {
  return power_rate_bound(u, r_u, theta, r_u_i, theta_i);
}
/// Majorant of q1 r_d - S_d.
inline SurrogateValue h3(double q1, double r_d, double q1_i, double r_d_i, double S_d) {
  return product_bound(q1, r_d, q1_i, r_d_i, S_d);
}
/// Majorant of q2 f - cycles, where cycles = L D_n c_nk.
inline SurrogateValue h4(double q2, double f, double q2_i, double f_i, double cycles) {
  return product_bound(q2, f, q2_i, f_i, cycles);
}

}  // namespace mmfl

#endif  // MMFL_SURROGATE_HPP
