#ifndef MMFL_OPTIMIZER_HPP
#define MMFL_OPTIMIZER_HPP

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "mmfl/baselines.hpp"
#include "mmfl/comms.hpp"
#include "mmfl/convex_solver.hpp"
#include "mmfl/error.hpp"
#include "mmfl/surrogate.hpp"

namespace mmfl {

/**
 * Full variable vector of one scheme's epigraph problem, in physical units:
 * v = sqrt(eta), u = sqrt(zeta), f in cycles/s, rates in bits/s,
 * omega >= eta / r_d and theta >= zeta / r_u in s/bit, q/q1/q2 and the
 * stage times in seconds. Async iterates use q, q1, q2; sync iterates use
 * t_d, t_C, t_u.
 */
struct ScaIterate : ExpansionPoint {
  Scheme scheme = Scheme::Async;
  double t_d = 0, t_C = 0, t_u = 0;
};

struct ScaOptions {
  double epsilon = 1e-4;  ///< relative objective decrease that ends the loop
  int max_outer_iters = 50;
  int restarts = 3;  ///< total starts; all but the first are jittered
  double jitter = 0.1;
  std::uint64_t seed = 0;
  /// Largest multiple of each convex step tried by the exact-energy
  /// extrapolation after the subproblem solve; below 2 disables it.
  double max_extrapolation = 1e6;
  SolverOptions solver;
};

enum class ScaStatus { Converged, IterLimit, InfeasibleStart };

inline const char* to_string(ScaStatus s) {
  switch (s) {
    case ScaStatus::Converged: return "converged";
    case ScaStatus::IterLimit: return "iter_limit";
    case ScaStatus::InfeasibleStart: return "infeasible_start";
  }
  return "?";
}

struct ScaResult {
  Allocation allocation;
  EnergyBreakdown energy;
  std::vector<double> objective_trace;  ///< epigraph objective, starting point first
  ScaStatus status = ScaStatus::InfeasibleStart;
  double kkt_residual = 0;  ///< scaled KKT residual of the last subproblem solve
  int iterations = 0;       ///< subproblems solved in the reported run
  int total_iterations = 0; ///< over all restarts
  double slater_slack = 0;  ///< smallest constraint slack at the starting point
  FeasibilityReport report;
};

/// Index map from named variables to positions in the packed vector.
class SubproblemLayout {
 public:
  SubproblemLayout(Scheme s, std::size_t K) : scheme_(s), K_(K) {}

  Scheme scheme() const { return scheme_; }
  std::size_t ues() const { return K_; }
  std::size_t n_vars() const { return scheme_ == Scheme::Async ? 9 * K_ + 1 : 7 * K_ + 3; }

  std::size_t v(std::size_t k) const { return k; }
  std::size_t u(std::size_t k) const { return K_ + k; }
  std::size_t f(std::size_t k) const { return 2 * K_ + k; }
  std::size_t r_d(std::size_t k) const { return 3 * K_ + k; }
  std::size_t r_u(std::size_t k) const { return 4 * K_ + k; }
  std::size_t omega(std::size_t k) const { return 5 * K_ + k; }
  std::size_t theta(std::size_t k) const { return 6 * K_ + k; }
  std::size_t q1(std::size_t k) const { return 7 * K_ + k; }
  std::size_t q2(std::size_t k) const { return 8 * K_ + k; }
  std::size_t q() const { return 9 * K_; }
  std::size_t t_d() const { return 7 * K_; }
  std::size_t t_C() const { return 7 * K_ + 1; }
  std::size_t t_u() const { return 7 * K_ + 2; }

 private:
  Scheme scheme_;
  std::size_t K_;
};

/**
 * Packing into solver coordinates. Each bilinear pair is rescaled so both
 * factors are O(1): rates become updates per second (r / S), omega and theta
 * are multiplied by S, and f becomes compute rounds per second (f / cycles).
 * Products such as r * omega are unchanged by this scaling.
 */
inline std::vector<double> pack(const ScaIterate& it, const SystemConfig& cfg) {
  const auto ue = ue_constants(cfg);
  const SubproblemLayout lay(it.scheme, ue.size());
  std::vector<double> x(lay.n_vars());
  for (std::size_t k = 0; k < ue.size(); ++k) {
    x[lay.v(k)] = it.v[k];
    x[lay.u(k)] = it.u[k];
    x[lay.f(k)] = it.f[k] / ue[k].cycles;
    x[lay.r_d(k)] = it.r_d[k] / ue[k].S_d;
    x[lay.r_u(k)] = it.r_u[k] / ue[k].S_u;
    x[lay.omega(k)] = it.omega[k] * ue[k].S_d;
    x[lay.theta(k)] = it.theta[k] * ue[k].S_u;
    if (it.scheme == Scheme::Async) {
      x[lay.q1(k)] = it.q1[k];
      x[lay.q2(k)] = it.q2[k];
    }
  }
  if (it.scheme == Scheme::Async) {
    x[lay.q()] = it.q;
  } else {
    x[lay.t_d()] = it.t_d;
    x[lay.t_C()] = it.t_C;
    x[lay.t_u()] = it.t_u;
  }
  return x;
}

inline ScaIterate unpack(std::span<const double> x, Scheme scheme, const SystemConfig& cfg) {
  const auto ue = ue_constants(cfg);
  const std::size_t K = ue.size();
  const SubproblemLayout lay(scheme, K);
  ScaIterate it;
  it.scheme = scheme;
  for (auto* vec : {&it.v, &it.u, &it.f, &it.r_d, &it.r_u, &it.omega, &it.theta}) vec->resize(K);
  if (scheme == Scheme::Async) {
    it.q1.resize(K);
    it.q2.resize(K);
  }
  for (std::size_t k = 0; k < K; ++k) {
    it.v[k] = x[lay.v(k)];
    it.u[k] = x[lay.u(k)];
    it.f[k] = x[lay.f(k)] * ue[k].cycles;
    it.r_d[k] = x[lay.r_d(k)] * ue[k].S_d;
    it.r_u[k] = x[lay.r_u(k)] * ue[k].S_u;
    it.omega[k] = x[lay.omega(k)] / ue[k].S_d;
    it.theta[k] = x[lay.theta(k)] / ue[k].S_u;
    if (scheme == Scheme::Async) {
      it.q1[k] = x[lay.q1(k)];
      it.q2[k] = x[lay.q2(k)];
    }
  }
  if (scheme == Scheme::Async) {
    it.q = x[lay.q()];
  } else {
    it.t_d = x[lay.t_d()];
    it.t_C = x[lay.t_C()];
    it.t_u = x[lay.t_u()];
  }
  return it;
}

/// Epigraph objective: sum rho_d N0 S_d omega + sum (compute energy + rho_u N0 S_u theta).
inline double epigraph_objective(const ScaIterate& it, const SystemConfig& cfg) {
  const auto ue = ue_constants(cfg);
  const auto rho = normalized_powers(cfg);
  double e = 0;
  for (std::size_t k = 0; k < ue.size(); ++k)
    e += rho.rho_d * cfg.N0 * ue[k].S_d * it.omega[k] + ue[k].compute_energy * it.f[k] * it.f[k] +
         rho.rho_u * cfg.N0 * ue[k].S_u * it.theta[k];
  return e;
}

namespace detail {

inline std::string tagged(const char* name, std::size_t k) { return std::string(name) + "[" + std::to_string(k) + "]"; }

// Variables, objective, and the constraint families both schemes share.
// c with a / c = b c, so both factors of a product move on the same scale.
inline double balance(double a, double b) {
  return a > 0 && b > 0 ? std::sqrt(a / b) : 1.0;
}

inline ConvexProgram build_common(const ScaIterate& point, const ChannelInstance& ch, const SystemConfig& raw,
                                  const SubproblemLayout& lay) {
  const SystemConfig cfg = raw.resolved();
  const auto ue = ue_constants(cfg);
  const auto rho = normalized_powers(cfg);
  const std::size_t K = ue.size();
  const AuxFunctionals aux(ch, cfg);

  ConvexProgram p;
  static constexpr const char* names[] = {"v", "u", "f", "r_d", "r_u", "omega", "theta", "q1", "q2"};
  const std::size_t blocks = lay.scheme() == Scheme::Async ? 9 : 7;
  for (std::size_t b = 0; b < blocks; ++b)
    for (std::size_t k = 0; k < K; ++k) p.add_var(tagged(names[b], k), 0.0);
  if (lay.scheme() == Scheme::Async) {
    p.add_var("q", 0.0);
  } else {
    p.add_var("t_d", 0.0);
    p.add_var("t_C", 0.0);
    p.add_var("t_u", 0.0);
  }

  for (std::size_t k = 0; k < K; ++k) {
    p.objective.add_linear(lay.omega(k), rho.rho_d * cfg.N0);
    p.objective.add_linear(lay.theta(k), rho.rho_u * cfg.N0);
    p.objective.add_quadratic(lay.f(k), lay.f(k), ue[k].compute_energy * ue[k].cycles * ue[k].cycles);
  }

  // Power budgets.
  QuadExpr budget;
  budget.constant = -1.0;
  for (std::size_t k = 0; k < K; ++k) budget.add_quadratic(lay.v(k), lay.v(k), 1.0);
  p.add_quadratic("dl_power_budget", std::move(budget));
  for (std::size_t k = 0; k < K; ++k) {
    QuadExpr e;
    e.constant = -1.0;
    e.add_quadratic(lay.u(k), lay.u(k), 1.0);
    p.add_quadratic(tagged("ul_power", k), std::move(e));
  }
  for (std::size_t k = 0; k < K; ++k) {
    QuadExpr e;
    e.constant = -cfg.f_max / ue[k].cycles;
    e.add_linear(lay.f(k), 1.0);
    p.add_affine(tagged("f_max", k), std::move(e));
  }

  // Concave rate minorants: r_hat - R_tilde / S <= 0.
  std::vector<std::size_t> vmap(K), umap(K);
  for (std::size_t k = 0; k < K; ++k) {
    vmap[k] = lay.v(k);
    umap[k] = lay.u(k);
  }
  const auto rd = rate_dl_lb(point.v, point.v, aux);
  const auto ru = rate_ul_lb(point.u, point.u, aux);
  for (std::size_t k = 0; k < K; ++k) {
    QuadExpr e = rd[k].expr.scaled(-1.0 / ue[k].S_d).remap(vmap);
    e.add_linear(lay.r_d(k), 1.0);
    p.add_quadratic(tagged("dl_rate_bound", k), std::move(e));
    QuadExpr g = ru[k].expr.scaled(-1.0 / ue[k].S_u).remap(umap);
    g.add_linear(lay.r_u(k), 1.0);
    p.add_quadratic(tagged("ul_rate_bound", k), std::move(g));
  }

  // Energy epigraphs eta <= r omega, zeta <= r theta. Each product is
  // expanded in balanced coordinates (a / c, b c), equal at the point.
  for (std::size_t k = 0; k < K; ++k) {
    const double rdi = point.r_d[k] / ue[k].S_d, wi = point.omega[k] * ue[k].S_d;
    const double cd = balance(rdi, wi), m = std::sqrt(rdi * wi);
    const std::size_t m1[] = {lay.v(k), lay.r_d(k), lay.omega(k)};
    const double s1[] = {1.0, 1.0 / cd, cd};
    p.add_quadratic(tagged("dl_energy_epigraph", k), h1(point.v[k], m, m, m, m).expr.remap(m1, s1));
    const double rui = point.r_u[k] / ue[k].S_u, ti = point.theta[k] * ue[k].S_u;
    const double cu = balance(rui, ti), n = std::sqrt(rui * ti);
    const std::size_t m2[] = {lay.u(k), lay.r_u(k), lay.theta(k)};
    const double s2[] = {1.0, 1.0 / cu, cu};
    p.add_quadratic(tagged("ul_energy_epigraph", k), h2(point.u[k], n, n, n, n).expr.remap(m2, s2));
  }
  return p;
}

}  // namespace detail

/**
 * Convex inner approximation of the asynchronous problem around `point`:
 * shared power/rate/energy families, the per-UE deadline
 * 1/r_d + 1/f + 1/r_u <= t_qos (normalized units), and the mode-switch
 * coupling r_d q >= 1, q <= q1 + q2, q1 r_d <= 1, q2 f <= 1 with the last two
 * convexified. 9 K + 1 variables.
 */
inline ConvexProgram build_async_subproblem(const ScaIterate& point, const ChannelInstance& ch,
                                            const SystemConfig& raw) {
  const SystemConfig cfg = raw.resolved();
  const auto ue = ue_constants(cfg);
  const std::size_t K = ue.size();
  const SubproblemLayout lay(Scheme::Async, K);
  ConvexProgram p = detail::build_common(point, ch, cfg, lay);
  for (std::size_t k = 0; k < K; ++k) {
    QuadExpr rhs;
    rhs.constant = -cfg.t_qos;
    p.add_inverse_sum(detail::tagged("deadline", k), {{lay.r_d(k), 1.0}, {lay.f(k), 1.0}, {lay.r_u(k), 1.0}}, rhs);
    p.add_hyperbolic(detail::tagged("switch_after_downlink", k), lay.r_d(k), lay.q(), 1.0);
    QuadExpr split;
    split.add_linear(lay.q(), 1.0).add_linear(lay.q1(k), -1.0).add_linear(lay.q2(k), -1.0);
    p.add_affine(detail::tagged("switch_before_uplink", k), std::move(split));
    const double rdi = point.r_d[k] / ue[k].S_d, fi = point.f[k] / ue[k].cycles;
    const double c3 = detail::balance(point.q1[k], rdi), m3v = std::sqrt(point.q1[k] * rdi);
    const std::size_t m3[] = {lay.q1(k), lay.r_d(k)};
    const double s3[] = {1.0 / c3, c3};
    p.add_quadratic(detail::tagged("dl_time_split", k), h3(m3v, m3v, m3v, m3v, 1.0).expr.remap(m3, s3));
    const double c4 = detail::balance(point.q2[k], fi), m4v = std::sqrt(point.q2[k] * fi);
    const std::size_t m4[] = {lay.q2(k), lay.f(k)};
    const double s4[] = {1.0 / c4, c4};
    p.add_quadratic(detail::tagged("compute_time_split", k), h4(m4v, m4v, m4v, m4v, 1.0).expr.remap(m4, s4));
  }
  return p;
}

/**
 * Convex inner approximation of the synchronous problem: shared families
 * plus stage times with t_d + t_C + t_u <= t_qos and per-UE
 * 1/r_d <= t_d, 1/f <= t_C, 1/r_u <= t_u. 7 K + 3 variables.
 */
inline ConvexProgram build_sync_subproblem(const ScaIterate& point, const ChannelInstance& ch,
                                           const SystemConfig& raw) {
  const SystemConfig cfg = raw.resolved();
  const std::size_t K = ch.size();
  const SubproblemLayout lay(Scheme::Sync, K);
  ConvexProgram p = detail::build_common(point, ch, cfg, lay);
  QuadExpr total;
  total.constant = -cfg.t_qos;
  total.add_linear(lay.t_d(), 1.0).add_linear(lay.t_C(), 1.0).add_linear(lay.t_u(), 1.0);
  p.add_affine("stage_deadline", std::move(total));
  for (std::size_t k = 0; k < K; ++k) {
    QuadExpr a, b, c;
    a.add_linear(lay.t_d(), -1.0);
    b.add_linear(lay.t_C(), -1.0);
    c.add_linear(lay.t_u(), -1.0);
    p.add_inverse_sum(detail::tagged("downlink_stage", k), {{lay.r_d(k), 1.0}}, std::move(a));
    p.add_inverse_sum(detail::tagged("compute_stage", k), {{lay.f(k), 1.0}}, std::move(b));
    p.add_inverse_sum(detail::tagged("uplink_stage", k), {{lay.r_u(k), 1.0}}, std::move(c));
  }
  return p;
}

inline ConvexProgram build_subproblem(const ScaIterate& point, const ChannelInstance& ch, const SystemConfig& cfg) {
  return point.scheme == Scheme::Async ? build_async_subproblem(point, ch, cfg) : build_sync_subproblem(point, ch, cfg);
}

/// Smallest slack (-g, or x - lb) over every constraint of the subproblem
/// built at `it`, evaluated at `it`. Positive means strictly feasible for the
/// exact epigraph problem, since every surrogate is tight at its point.
inline double slater_slack(const ScaIterate& it, const ChannelInstance& ch, const SystemConfig& cfg) {
  const ConvexProgram p = build_subproblem(it, ch, cfg);
  const auto x = pack(it, cfg);
  double s = std::numeric_limits<double>::infinity();
  for (std::size_t j = 0; j < x.size(); ++j) s = std::min(s, x[j] - p.lower[j]);
  for (const auto& c : p.constraints) s = std::min(s, -c.value(x));
  return std::isnan(s) ? -std::numeric_limits<double>::infinity() : s;
}

/// eta = v^2, zeta = u^2, f copied.
inline Allocation extract_allocation(const ScaIterate& it) {
  Allocation a;
  for (double v : it.v) a.eta_nk.push_back(v * v);
  for (double u : it.u) a.zeta_nk.push_back(u * u);
  a.f_nk = it.f;
  return a;
}

/**
 * Lowers every CPU frequency to the smallest value meeting the scheme's
 * deadline at the allocation's actual rates. A frequency is never raised.
 * For the asynchronous scheme this also restores the mode-switch condition
 * whenever max t_d + t_u,k <= t_qos holds for every UE.
 */
inline Allocation polish_frequencies(Allocation a, const ChannelInstance& ch, const SystemConfig& raw, Scheme s) {
  const SystemConfig cfg = raw.resolved();
  const auto t = delays(a, ch, cfg);
  const auto ue = ue_constants(cfg);
  const double max_td = *std::max_element(t.t_d_nk.begin(), t.t_d_nk.end());
  const double max_tu = *std::max_element(t.t_u_nk.begin(), t.t_u_nk.end());
  for (std::size_t k = 0; k < ue.size(); ++k) {
    const double budget = s == Scheme::Async ? cfg.t_qos - t.t_d_nk[k] - t.t_u_nk[k] : cfg.t_qos - max_td - max_tu;
    if (budget > 0) a.f_nk[k] = std::min(a.f_nk[k], ue[k].cycles / budget);
  }
  return a;
}

namespace detail {

// Max-min fair power coefficients (equal SINR for all UEs on each link) at
// the largest common SINR the power constraints allow.
inline Allocation max_min_powers(const ChannelInstance& ch, const SystemConfig& raw) {
  const SystemConfig cfg = raw.resolved();
  const AuxFunctionals aux(ch, cfg);
  const std::size_t K = ch.size();
  Allocation a;
  a.f_nk.assign(K, cfg.f_max);
  // Downlink: eta_k = g (w_k S + 1) / a_k^2 with S = sum eta; S solves a
  // linear equation and must not exceed 1.
  double sum_inv = 0, sum_w = 0;
  for (std::size_t k = 0; k < K; ++k) {
    const double a2 = aux.amp_d(k) * aux.amp_d(k);
    sum_inv += 1.0 / a2;
    sum_w += aux.leak_d(k) / a2;
  }
  const double g_d = 1.0 / (sum_inv + sum_w);  // makes S exactly 1
  for (std::size_t k = 0; k < K; ++k)
    a.eta_nk.push_back(g_d * (aux.leak_d(k) + 1.0) / (aux.amp_d(k) * aux.amp_d(k)));
  // Uplink: zeta_k = g (I + 1) / b_k^2 with I = sum leak_j zeta_j; the
  // weakest UE saturates at zeta = 1.
  double c = 0, b2min = std::numeric_limits<double>::infinity();
  for (std::size_t k = 0; k < K; ++k) {
    const double b2 = aux.amp_u(k) * aux.amp_u(k);
    c += aux.leak_u(k) / b2;
    b2min = std::min(b2min, b2);
  }
  // zeta_max = g (I + 1) / b2min = 1 and I = g c / (1 - g c).
  const double g_u = b2min / (1.0 + b2min * c);
  const double interference = g_u * c / (1.0 - g_u * c);
  for (std::size_t k = 0; k < K; ++k)
    a.zeta_nk.push_back(std::min(1.0, g_u * (interference + 1.0) / (aux.amp_u(k) * aux.amp_u(k))));
  return a;
}

}  // namespace detail

/// Shortest deadline any allocation of the scheme can meet, and power
/// coefficients attaining it (f at f_max).
struct DeadlineProbe {
  double deadline = std::numeric_limits<double>::infinity();
  Allocation powers;
  SolverStatus status = SolverStatus::NumericalFailure;
};

/**
 * Minimizes the deadline over spectral efficiencies and stage times. With
 * SINR targets g = 2^rho - 1 the zero-forcing power limits are linear in g:
 * sum_k (1 + leak_d,k) g_d,k / amp_d,k^2 <= 1 on the downlink and
 * g_u,k / amp_u,k^2 + sum_j leak_u,j g_u,j / amp_u,j^2 <= 1 for every UE on
 * the uplink. Stage times satisfy t * rho >= S / prefactor.
 */
inline DeadlineProbe shortest_deadline(const ChannelInstance& ch, const SystemConfig& raw, Scheme scheme,
                                       const SolverOptions& opts = {.max_newton = 2000, .max_total_newton = 20000}) {
  const SystemConfig cfg = raw.resolved();
  detail::require_zf(cfg);
  const AuxFunctionals aux(ch, cfg);
  const auto ue = ue_constants(cfg);
  const std::size_t K = ue.size();
  const double ln2 = std::log(2.0);
  const double pre_d = detail::rate_prefactor(cfg, cfg.tau_dp), pre_u = detail::rate_prefactor(cfg, cfg.tau_up);

  std::vector<double> wd(K), bu(K), eu(K);
  double sum_wd = 0, sum_eu = 0;
  for (std::size_t k = 0; k < K; ++k) {
    const double a2 = aux.amp_d(k) * aux.amp_d(k), b2 = aux.amp_u(k) * aux.amp_u(k);
    wd[k] = (1.0 + aux.leak_d(k)) / a2;
    bu[k] = 1.0 / b2;
    eu[k] = aux.leak_u(k) / b2;
    sum_wd += wd[k];
    sum_eu += eu[k];
  }

  ConvexProgram p;
  std::vector<std::size_t> rd(K), ru(K), td(K), tu(K);
  for (std::size_t k = 0; k < K; ++k) {
    rd[k] = p.add_var("rho_d[" + std::to_string(k) + "]", 0.0);
    ru[k] = p.add_var("rho_u[" + std::to_string(k) + "]", 0.0);
    td[k] = p.add_var("t_d[" + std::to_string(k) + "]", 0.0);
    tu[k] = p.add_var("t_u[" + std::to_string(k) + "]", 0.0);
  }
  const bool async = scheme == Scheme::Async;
  const std::size_t q = p.add_var(async ? "q" : "t_d", 0.0);
  const std::size_t qu = async ? q : p.add_var("t_u", 0.0);
  const std::size_t T = p.add_var("deadline", 0.0);
  p.objective.add_linear(T, 1.0);

  std::vector<Constraint::Exp> dl;
  for (std::size_t k = 0; k < K; ++k) dl.push_back({rd[k], wd[k], ln2});
  p.add_exp_sum("dl_power_budget", dl, QuadExpr{}.add_constant(-(sum_wd + 1.0)));
  for (std::size_t k = 0; k < K; ++k) {
    std::vector<Constraint::Exp> ul;
    for (std::size_t j = 0; j < K; ++j) ul.push_back({ru[j], eu[j] + (j == k ? bu[k] : 0.0), ln2});
    p.add_exp_sum(detail::indexed("ul_power", k), ul, QuadExpr{}.add_constant(-(bu[k] + sum_eu + 1.0)));
    p.add_hyperbolic(detail::indexed("dl_time", k), td[k], rd[k], ue[k].S_d / pre_d);
    p.add_hyperbolic(detail::indexed("ul_time", k), tu[k], ru[k], ue[k].S_u / pre_u);
    const double c_min = ue[k].cycles / cfg.f_max;
    if (async) {
      p.add_affine(detail::indexed("switch", k), QuadExpr{}.add_linear(td[k], 1.0).add_linear(q, -1.0));
      p.add_affine(detail::indexed("deadline", k),
                   QuadExpr{}.add_linear(td[k], 1.0).add_linear(tu[k], 1.0).add_linear(T, -1.0).add_constant(c_min));
      p.add_affine(detail::indexed("uplink_after_switch", k),
                   QuadExpr{}.add_linear(q, 1.0).add_linear(tu[k], 1.0).add_linear(T, -1.0));
    } else {
      p.add_affine(detail::indexed("downlink_stage", k), QuadExpr{}.add_linear(td[k], 1.0).add_linear(q, -1.0));
      p.add_affine(detail::indexed("uplink_stage", k), QuadExpr{}.add_linear(tu[k], 1.0).add_linear(qu, -1.0));
    }
  }
  if (!async) {
    double c_max = 0;
    for (const auto& u : ue) c_max = std::max(c_max, u.cycles / cfg.f_max);
    p.add_affine("stage_deadline",
                 QuadExpr{}.add_linear(q, 1.0).add_linear(qu, 1.0).add_linear(T, -1.0).add_constant(c_max));
  }

  // Start at half the max-min SINR targets, which loads every power limit to
  // at most one half.
  const auto mm = detail::max_min_powers(ch, cfg);
  const auto gd = sinr_downlink(mm, ch, cfg), gu = sinr_uplink(mm, ch, cfg);
  std::vector<double> x0(p.n_vars(), 0.0);
  double max_td = 0, max_tu = 0, worst = 0;
  for (std::size_t k = 0; k < K; ++k) {
    x0[rd[k]] = std::log2(1.0 + 0.5 * gd[k]);
    x0[ru[k]] = std::log2(1.0 + 0.5 * gu[k]);
    x0[td[k]] = 1.1 * ue[k].S_d / pre_d / x0[rd[k]];
    x0[tu[k]] = 1.1 * ue[k].S_u / pre_u / x0[ru[k]];
    max_td = std::max(max_td, x0[td[k]]);
    max_tu = std::max(max_tu, x0[tu[k]]);
    worst = std::max(worst, ue[k].cycles / cfg.f_max);
  }
  x0[q] = 1.1 * max_td;
  x0[qu] = async ? x0[q] : 1.1 * max_tu;
  x0[T] = 1.1 * (max_td + max_tu + worst) + 1.0;

  const auto sol = solve(p, x0, opts);
  DeadlineProbe out;
  out.status = sol.status;
  if (sol.status == SolverStatus::NumericalFailure) return out;
  out.deadline = sol.x[T];

  // Powers realising the targets: eta_k = g_k (leak_k S + 1) / amp_k^2 with
  // S = sum eta, and zeta_k = g_k / (amp_k^2 (1 - A)) with A = sum leak_j g_j / amp_j^2.
  double sc = 0, sd = 0, A = 0;
  std::vector<double> g_d(K), g_u(K);
  for (std::size_t k = 0; k < K; ++k) {
    g_d[k] = std::exp2(sol.x[rd[k]]) - 1.0;
    g_u[k] = std::exp2(sol.x[ru[k]]) - 1.0;
    const double a2 = aux.amp_d(k) * aux.amp_d(k);
    sc += g_d[k] / a2;
    sd += g_d[k] * aux.leak_d(k) / a2;
    A += eu[k] * g_u[k];
  }
  const double S = sc / (1.0 - sd);
  out.powers.f_nk.assign(K, cfg.f_max);
  for (std::size_t k = 0; k < K; ++k) {
    out.powers.eta_nk.push_back(g_d[k] * (aux.leak_d(k) * S + 1.0) / (aux.amp_d(k) * aux.amp_d(k)));
    out.powers.zeta_nk.push_back(std::min(1.0, g_u[k] * bu[k] / (1.0 - A)));
  }
  return out;
}

/// Relative slack left by lift_allocation on every constraint, and where the
/// compute time sits between its lower (0) and upper (1) feasible limit.
struct LiftOptions {
  double margin = 1e-4;
  double placement = 0.9;
  bool verify = true;  ///< confirm positive Slater slack on the built subproblem
};

/// Nearly tight lift used to re-enter the SCA loop from an allocation.
inline constexpr LiftOptions kTightLift{1e-9, 1.0 - 1e-6, true};

/**
 * Builds a strictly feasible iterate from the power coefficients of `a`
 * (its f is ignored). Rates are taken slightly below the achieved rates,
 * energy epigraph variables slightly above, and the compute time is placed
 * between its lower and upper feasible limit. Returns nullopt when no
 * compute time fits.
 */
inline std::optional<ScaIterate> lift_allocation(const Allocation& a, const ChannelInstance& ch,
                                                 const SystemConfig& raw, Scheme scheme, LiftOptions lift = {}) {
  const double margin = lift.margin;
  const double placement = lift.placement;
  const SystemConfig cfg = raw.resolved();
  const auto ue = ue_constants(cfg);
  const std::size_t K = ue.size();

  Allocation p = a;
  const double eta_sum = std::accumulate(p.eta_nk.begin(), p.eta_nk.end(), 0.0);
  const double shrink = std::min(1.0, (1.0 - margin) / eta_sum);
  for (double& e : p.eta_nk) e *= shrink;
  for (double& z : p.zeta_nk) z = std::min(z, 1.0 - margin);
  for (std::size_t k = 0; k < K; ++k)
    if (!(p.eta_nk[k] > 0) || !(p.zeta_nk[k] > 0)) return std::nullopt;

  const auto Rd = rate_downlink(p, ch, cfg);
  const auto Ru = rate_uplink(p, ch, cfg);
  ScaIterate it;
  it.scheme = scheme;
  std::vector<double> td(K), tu(K);
  for (std::size_t k = 0; k < K; ++k) {
    it.v.push_back(std::sqrt(p.eta_nk[k]));
    it.u.push_back(std::sqrt(p.zeta_nk[k]));
    it.r_d.push_back(Rd[k] * (1.0 - margin));
    it.r_u.push_back(Ru[k] * (1.0 - margin));
    it.omega.push_back(p.eta_nk[k] / it.r_d[k] * (1.0 + margin));
    it.theta.push_back(p.zeta_nk[k] / it.r_u[k] * (1.0 + margin));
    td[k] = ue[k].S_d / it.r_d[k];
    tu[k] = ue[k].S_u / it.r_u[k];
  }
  it.f.resize(K);
  const double max_td = *std::max_element(td.begin(), td.end());
  const double max_tu = *std::max_element(tu.begin(), tu.end());
  if (scheme == Scheme::Async) {
    it.q = max_td * (1.0 + margin);
    for (std::size_t k = 0; k < K; ++k) {
      const double q1 = td[k] * (1.0 - margin);
      const double lo = std::max(ue[k].cycles / cfg.f_max, (it.q - q1) / (1.0 - margin)) * (1.0 + margin);
      const double hi = (cfg.t_qos - td[k] - tu[k]) * (1.0 - margin);
      if (!(hi > lo)) return std::nullopt;
      const double tc = lo + placement * (hi - lo);
      it.f[k] = ue[k].cycles / tc;
      it.q1.push_back(q1);
      it.q2.push_back(tc * (1.0 - margin));
    }
  } else {
    it.t_d = max_td * (1.0 + margin);
    it.t_u = max_tu * (1.0 + margin);
    double lo = 0;
    for (std::size_t k = 0; k < K; ++k) lo = std::max(lo, ue[k].cycles / cfg.f_max);
    lo *= 1.0 + 2.0 * margin;
    const double hi = (cfg.t_qos - it.t_d - it.t_u) * (1.0 - margin);
    if (!(hi > lo)) return std::nullopt;
    const double tc = lo + placement * (hi - lo);
    it.t_C = tc;
    for (std::size_t k = 0; k < K; ++k) it.f[k] = ue[k].cycles / tc * (1.0 + margin);
  }
  if (lift.verify && !(slater_slack(it, ch, cfg) > 0)) return std::nullopt;
  return it;
}

/**
 * Strictly feasible starting iterate. Tries the scheme's heuristic powers
 * first, then max-min fair powers, then the powers of shortest_deadline. With `jitter_seed`, each
 * power coefficient is first perturbed by a uniform factor in
 * [1 - jitter, 1 + jitter].
 */
inline ScaIterate initial_point(const ChannelInstance& ch, const SystemConfig& raw, Scheme scheme,
                                std::optional<std::uint64_t> jitter_seed = std::nullopt, double jitter = 0.1) {
  const SystemConfig cfg = raw.resolved();
  detail::require_zf(cfg);
  std::vector<Allocation> candidates{heuristic(scheme, ch, cfg).allocation, detail::max_min_powers(ch, cfg)};
  for (auto& c : candidates) {
    if (jitter_seed) {
      std::mt19937_64 gen(splitmix64(*jitter_seed));
      std::uniform_real_distribution<double> d(1.0 - jitter, 1.0 + jitter);
      for (double& e : c.eta_nk) e *= d(gen);
      for (double& z : c.zeta_nk) z = std::min(1.0, z * d(gen));
    }
    if (auto it = lift_allocation(c, ch, cfg, scheme)) return *it;
  }
  // Near-critical deadlines leave less slack than the default lift margin.
  const auto probe = shortest_deadline(ch, cfg, scheme);
  if (probe.deadline < cfg.t_qos)
    for (double margin : {LiftOptions{}.margin, 1e-6, 1e-8})
      if (auto it = lift_allocation(probe.powers, ch, cfg, scheme, LiftOptions{margin, LiftOptions{}.placement, true}))
        return *it;
  throw InfeasibleStartError(std::string("no strictly feasible ") + to_string(scheme) +
                             " starting point: the shortest achievable deadline is " +
                             std::to_string(probe.deadline) + " s");
}

namespace detail {

struct ScaRun {
  ScaIterate iterate;
  std::vector<double> trace;
  bool converged = false;
  int iterations = 0;
  double kkt = 0;
};

// Exact-energy extrapolation of one convex step from -> to in power space.
// First the whole step is repeatedly doubled, then each UE's downlink and
// uplink coefficient is pushed further along its own component of the step,
// as long as the re-lifted iterate lowers the objective below `best`.
// Frequencies and auxiliary variables are re-derived by the lift.
inline std::optional<ScaIterate> extrapolate(const ScaIterate& from, const ScaIterate& to, const ChannelInstance& ch,
                                             const SystemConfig& cfg, double max_factor, double& best) {
  const std::size_t K = from.v.size();
  LiftOptions quick = kTightLift;
  quick.verify = false;
  auto evaluate = [&](const std::vector<double>& v, const std::vector<double>& u) -> std::optional<ScaIterate> {
    Allocation a;
    double sum = 0;
    for (std::size_t k = 0; k < K; ++k) {
      if (!(v[k] > 0) || !(u[k] > 0) || !(u[k] < 1)) return std::nullopt;
      a.eta_nk.push_back(v[k] * v[k]);
      a.zeta_nk.push_back(u[k] * u[k]);
      sum += v[k] * v[k];
    }
    if (!(sum < 1)) return std::nullopt;
    a.f_nk = to.f;
    return lift_allocation(a, ch, cfg, to.scheme, quick);
  };

  std::optional<ScaIterate> out;
  std::vector<double> v = to.v, u = to.u;
  auto try_point = [&](const std::vector<double>& cv, const std::vector<double>& cu) {
    auto lifted = evaluate(cv, cu);
    if (!lifted) return false;
    const double obj = epigraph_objective(*lifted, cfg);
    if (!(obj < best)) return false;
    best = obj;
    v = cv;
    u = cu;
    out = std::move(lifted);
    return true;
  };

  for (double lambda = 2.0; lambda <= max_factor; lambda *= 2.0) {
    std::vector<double> cv(K), cu(K);
    for (std::size_t k = 0; k < K; ++k) {
      cv[k] = from.v[k] + lambda * (to.v[k] - from.v[k]);
      cu[k] = from.u[k] + lambda * (to.u[k] - from.u[k]);
    }
    if (!try_point(cv, cu)) break;
  }
  for (std::size_t k = 0; k < 2 * K; ++k) {
    const bool down = k < K;
    const std::size_t j = down ? k : k - K;
    const double step = down ? to.v[j] - from.v[j] : to.u[j] - from.u[j];
    if (step == 0) continue;
    for (double m = 1.0; m <= max_factor; m *= 2.0) {
      std::vector<double> cv = v, cu = u;
      (down ? cv : cu)[j] += m * step;
      if (!try_point(cv, cu)) break;
    }
  }
  if (out && !(slater_slack(*out, ch, cfg) > 0)) return std::nullopt;
  return out;
}

inline ScaRun run_sca(ScaIterate x, const ChannelInstance& ch, const SystemConfig& cfg, const ScaOptions& opts) {
  ScaRun run;
  run.trace.push_back(epigraph_objective(x, cfg));
  for (int it = 1; it <= opts.max_outer_iters; ++it) {
    const ConvexProgram prog = build_subproblem(x, ch, cfg);
    const auto x0 = pack(x, cfg);
    const SolverSolution sol = solve(prog, x0, opts.solver);
    if (sol.iterations == 0 && sol.status == SolverStatus::NumericalFailure) {
      // The accepted point sits on the boundary at working precision.
      run.converged = true;
      break;
    }
    const double prev = run.trace.back();
    if (sol.status == SolverStatus::NumericalFailure && !(sol.objective_value < prev))
      throw SolverFailureError("inner solver failed: " + sol.message, it);
    run.kkt = sol.kkt.max();
    if (sol.objective_value > prev) {
      run.converged = true;
      break;
    }
    ScaIterate next = unpack(sol.x, x.scheme, cfg);
    double obj = sol.objective_value;
    if (opts.max_extrapolation >= 2)
      if (auto further = extrapolate(x, next, ch, cfg, opts.max_extrapolation, obj)) next = std::move(*further);
    x = std::move(next);
    run.trace.push_back(obj);
    run.iterations = it;
    if (prev - obj <= opts.epsilon * std::abs(prev)) {
      run.converged = true;
      break;
    }
  }
  run.iterate = std::move(x);
  return run;
}

}  // namespace detail

/**
 * Successive convex approximation: from a strictly feasible start, repeatedly
 * solve the convex inner approximation built at the current iterate and move
 * to its solution (or further along the step, when the exact objective keeps
 * falling) until the relative objective decrease falls below epsilon.
 * Runs `restarts` starts and keeps the lowest exact energy. The reported
 * allocation has its frequencies polished (see polish_frequencies).
 */
inline ScaResult sca_solve(const ChannelInstance& ch, const SystemConfig& raw, Scheme scheme, const ScaOptions& opts = {}) {
  const SystemConfig cfg = raw.resolved();
  ScaResult best;
  bool have = false;
  for (int r = 0; r < std::max(1, opts.restarts); ++r) {
    ScaIterate start;
    try {
      start = r == 0 ? initial_point(ch, cfg, scheme)
                     : initial_point(ch, cfg, scheme, trial_seed(opts.seed, static_cast<std::uint64_t>(r)), opts.jitter);
    } catch (const InfeasibleStartError&) {
      if (r == 0) {
        best.status = ScaStatus::InfeasibleStart;
        return best;
      }
      continue;
    }
    auto run = detail::run_sca(start, ch, cfg, opts);
    ScaResult res;
    res.allocation = polish_frequencies(extract_allocation(run.iterate), ch, cfg, scheme);
    res.energy = energies(res.allocation, ch, cfg);
    res.report = check(scheme, res.allocation, ch, cfg);
    res.objective_trace = std::move(run.trace);
    res.status = run.converged ? ScaStatus::Converged : ScaStatus::IterLimit;
    res.kkt_residual = run.kkt;
    res.iterations = run.iterations;
    res.slater_slack = slater_slack(start, ch, cfg);
    best.total_iterations += run.iterations;
    const bool better = !have || (res.report.feasible && !best.report.feasible) ||
                        (res.report.feasible == best.report.feasible && res.energy.E_total < best.energy.E_total);
    if (better) {
      const int total = best.total_iterations;
      best = std::move(res);
      best.total_iterations = total;
      have = true;
    }
  }
  return best;
}

}  // namespace mmfl

#endif  // MMFL_OPTIMIZER_HPP
