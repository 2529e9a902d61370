#ifndef MMFL_HARNESS_HPP
#define MMFL_HARNESS_HPP

#include <algorithm>
#include <atomic>
#include <charconv>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <exception>
#include <fstream>
#include <istream>
#include <limits>
#include <map>
#include <ostream>
#include <sstream>
#include <string>
#include <string_view>
#include <system_error>
#include <thread>
#include <tuple>
#include <vector>

#include "mmfl/baselines.hpp"
#include "mmfl/config.hpp"
#include "mmfl/error.hpp"
#include "mmfl/model.hpp"
#include "mmfl/optimizer.hpp"
#include "mmfl/rng.hpp"

namespace mmfl {

/// Allocation strategies compared by the harness.
enum class Method { OptAsync, OptSync, HeurAsync, HeurSync };

inline const char* to_string(Method m) {
  switch (m) {
    case Method::OptAsync: return "opt_async";
    case Method::OptSync: return "opt_sync";
    case Method::HeurAsync: return "heur_async";
    case Method::HeurSync: return "heur_sync";
  }
  return "?";
}

inline Method method_from_string(std::string_view s) {
  for (Method m : {Method::OptAsync, Method::OptSync, Method::HeurAsync, Method::HeurSync})
    if (s == to_string(m)) return m;
  throw ConfigError("unknown scheme '" + std::string(s) + "' (expected opt_async, opt_sync, heur_async, heur_sync)");
}

inline Scheme scheme_of(Method m) {
  return m == Method::OptAsync || m == Method::HeurAsync ? Scheme::Async : Scheme::Sync;
}

/// Which parameter a sweep varies: antennas M, or UEs per group K.
enum class SweepAxis { None, M, K };

struct Sweep {
  SweepAxis axis = SweepAxis::None;
  std::vector<int> values;
};

/// Parses "m=50:150:25" or "k=2:10:2" (inclusive start:stop:step).
inline Sweep parse_sweep(std::string_view text) {
  auto bad = [&] { return ConfigError("bad sweep '" + std::string(text) + "' (expected m=a:b:s or k=a:b:s)"); };
  if (text.size() < 3 || text[1] != '=') throw bad();
  Sweep s;
  const char axis = text[0];
  if (axis == 'm' || axis == 'M')
    s.axis = SweepAxis::M;
  else if (axis == 'k' || axis == 'K')
    s.axis = SweepAxis::K;
  else
    throw bad();
  int v[3];
  std::string_view rest = text.substr(2);
  for (int i = 0; i < 3; ++i) {
    const auto colon = rest.find(':');
    if ((i < 2) != (colon != std::string_view::npos)) throw bad();
    const std::string_view part = rest.substr(0, colon);
    const auto [p, ec] = std::from_chars(part.data(), part.data() + part.size(), v[i]);
    if (ec != std::errc() || p != part.data() + part.size()) throw bad();
    if (i < 2) rest = rest.substr(colon + 1);
  }
  if (v[2] < 1 || v[1] < v[0] || v[0] < 1) throw bad();
  for (int x = v[0]; x <= v[1]; x += v[2]) s.values.push_back(x);
  return s;
}

struct ExperimentSpec {
  SystemConfig base;
  Sweep sweep;
  std::vector<Method> methods{Method::OptAsync, Method::OptSync, Method::HeurAsync, Method::HeurSync};
  int trials = 50;
  std::uint64_t seed = 1;
  ScaOptions sca;
  unsigned workers = 0;            ///< 0 = one per hardware thread
  bool record_wall_time = false;   ///< otherwise the column is 0 so files are reproducible
};

/// One configuration per sweep value (just the base when there is no sweep).
inline std::vector<SystemConfig> sweep_configs(const ExperimentSpec& spec) {
  std::vector<SystemConfig> out;
  if (spec.sweep.axis == SweepAxis::None) {
    out.push_back(spec.base);
  } else {
    for (int v : spec.sweep.values) {
      SystemConfig c = spec.base;
      if (spec.sweep.axis == SweepAxis::M)
        c.M = v;
      else
        c.set_uniform_groups(c.N, v);
      out.push_back(c);
    }
  }
  return out;
}

inline void validate(const ExperimentSpec& spec) {
  if (spec.trials < 1) throw ConfigError("trials must be >= 1");
  if (spec.methods.empty()) throw ConfigError("at least one scheme is required");
  if (spec.sweep.axis != SweepAxis::None && spec.sweep.values.empty()) throw ConfigError("empty sweep");
  if (!(spec.sca.epsilon > 0)) throw ConfigError("epsilon must be positive");
  if (spec.sca.max_outer_iters < 1) throw ConfigError("max_outer_iters must be >= 1");
  for (const auto& c : sweep_configs(spec)) validate(c);
}

struct ResultRow {
  int trial = 0;
  std::uint64_t seed = 0;
  std::string scheme;
  int M = 0, N = 0, K = 0;
  double E_total = 0, E_d = 0, sum_E_C = 0, sum_E_u = 0;
  int sca_iterations = 0;
  std::string status;
  double wall_time = 0;
};

inline constexpr const char* kCsvHeader =
    "trial,seed,scheme,M,N,K,E_total,E_d,sum_E_C,sum_E_u,sca_iterations,status,wall_time";

namespace detail {

inline int ues_per_group(const SystemConfig& c) { return *std::max_element(c.K_n.begin(), c.K_n.end()); }

inline ResultRow evaluate_method(Method m, const ChannelInstance& ch, const SystemConfig& cfg, const ScaOptions& sca,
                                 int trial, std::uint64_t seed, bool timed) {
  const auto start = std::chrono::steady_clock::now();
  ResultRow row;
  row.trial = trial;
  row.seed = seed;
  row.scheme = to_string(m);
  row.M = cfg.M;
  row.N = cfg.N;
  row.K = ues_per_group(cfg);
  auto put = [&](const EnergyBreakdown& e) {
    row.E_total = e.E_total;
    row.E_d = e.E_d;
    row.sum_E_C = e.sum_E_C();
    row.sum_E_u = e.sum_E_u();
  };
  auto put_nan = [&] {
    const double nan = std::numeric_limits<double>::quiet_NaN();
    row.E_total = row.E_d = row.sum_E_C = row.sum_E_u = nan;
  };
  const Scheme s = scheme_of(m);
  if (m == Method::OptAsync || m == Method::OptSync) {
    ScaOptions o = sca;
    o.seed = seed;
    try {
      const ScaResult r = sca_solve(ch, cfg, s, o);
      row.sca_iterations = r.total_iterations;
      if (r.status == ScaStatus::InfeasibleStart) {
        put_nan();
        row.status = to_string(r.status);
      } else {
        put(r.energy);
        row.status = r.report.feasible ? to_string(r.status) : "infeasible";
      }
    } catch (const SolverFailureError& e) {
      put_nan();
      row.sca_iterations = e.iteration();
      row.status = "solver_failure";
    }
  } else {
    const HeuristicResult h = heuristic(s, ch, cfg);
    try {
      put(energies(h.allocation, ch, cfg));
      row.status = h.report.feasible ? "feasible" : "infeasible";
    } catch (const ZeroRateError&) {
      put_nan();
      row.status = "zero_rate";
    }
  }
  if (timed) row.wall_time = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return row;
}

// Shortest round-trip text of a double; locale independent.
inline void put_double(std::string& out, double v) {
  if (std::isnan(v)) {
    out += "nan";
    return;
  }
  char buf[64];
  const auto r = std::to_chars(buf, buf + sizeof buf, v);
  out.append(buf, r.ptr);
}

template <class T>
void put_int(std::string& out, T v) {
  char buf[32];
  const auto r = std::to_chars(buf, buf + sizeof buf, v);
  out.append(buf, r.ptr);
}

}  // namespace detail

/**
 * Runs every (sweep value, trial, method) combination. All methods of one
 * trial share the channel drawn from trial_seed(spec.seed, trial), and the
 * same trial uses the same seed at every sweep value. Work items run on a
 * bounded pool of threads; rows come back in (sweep value, trial, method)
 * order whatever the completion order.
 */
inline std::vector<ResultRow> run_rows(const ExperimentSpec& spec) {
  validate(spec);
  const auto cfgs = sweep_configs(spec);
  const std::size_t per_item = spec.methods.size();
  const std::size_t items = cfgs.size() * static_cast<std::size_t>(spec.trials);
  std::vector<ResultRow> rows(items * per_item);
  std::vector<std::exception_ptr> errors(items);

  auto work = [&](std::size_t item) {
    const std::size_t c = item / static_cast<std::size_t>(spec.trials);
    const int trial = static_cast<int>(item % static_cast<std::size_t>(spec.trials));
    const SystemConfig cfg = cfgs[c].resolved();
    const std::uint64_t seed = trial_seed(spec.seed, static_cast<std::uint64_t>(trial));
    const ChannelInstance ch = generate_network(cfg, seed);
    for (std::size_t m = 0; m < per_item; ++m)
      rows[item * per_item + m] =
          detail::evaluate_method(spec.methods[m], ch, cfg, spec.sca, trial, seed, spec.record_wall_time);
  };

  unsigned n = spec.workers ? spec.workers : std::max(1u, std::thread::hardware_concurrency());
  n = static_cast<unsigned>(std::min<std::size_t>(n, items));
  std::atomic<std::size_t> next{0};
  auto loop = [&] {
    for (std::size_t i; (i = next.fetch_add(1)) < items;) {
      try {
        work(i);
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  };
  if (n <= 1) {
    loop();
  } else {
    std::vector<std::thread> pool;
    for (unsigned t = 0; t < n; ++t) pool.emplace_back(loop);
    for (auto& t : pool) t.join();
  }
  for (const auto& e : errors)
    if (e) std::rethrow_exception(e);
  return rows;
}

inline std::string format_row(const ResultRow& r) {
  std::string s;
  detail::put_int(s, r.trial);
  s += ',';
  detail::put_int(s, r.seed);
  s += ',' + r.scheme + ',';
  detail::put_int(s, r.M);
  s += ',';
  detail::put_int(s, r.N);
  s += ',';
  detail::put_int(s, r.K);
  for (double v : {r.E_total, r.E_d, r.sum_E_C, r.sum_E_u}) {
    s += ',';
    detail::put_double(s, v);
  }
  s += ',';
  detail::put_int(s, r.sca_iterations);
  s += ',' + r.status + ',';
  detail::put_double(s, r.wall_time);
  return s;
}

inline void write_csv(std::ostream& os, const std::vector<ResultRow>& rows) {
  os << kCsvHeader << '\n';
  for (const auto& r : rows) os << format_row(r) << '\n';
}

/// Runs the experiment and writes the CSV to `path`. Throws
/// std::runtime_error when the file cannot be written.
inline std::vector<ResultRow> run_experiment(const ExperimentSpec& spec, const std::string& path) {
  validate(spec);
  std::ofstream probe(path, std::ios::binary);
  if (!probe) throw std::runtime_error("cannot write '" + path + "'");
  auto rows = run_rows(spec);
  write_csv(probe, rows);
  probe.flush();
  if (!probe) throw std::runtime_error("error while writing '" + path + "'");
  return rows;
}

namespace detail {

template <class T>
T parse_field(std::string_view f, std::size_t line) {
  T v{};
  const auto [p, ec] = std::from_chars(f.data(), f.data() + f.size(), v);
  if (ec != std::errc() || p != f.data() + f.size())
    throw std::runtime_error("line " + std::to_string(line) + ": bad field '" + std::string(f) + "'");
  return v;
}

}  // namespace detail

/// Parses a results CSV written by write_csv. Throws std::runtime_error on
/// a wrong header or malformed row.
inline std::vector<ResultRow> read_csv(std::istream& is) {
  std::string line;
  if (!std::getline(is, line) || line != kCsvHeader) throw std::runtime_error("not a results CSV: unexpected header");
  std::vector<ResultRow> rows;
  std::size_t n = 1;
  while (std::getline(is, line)) {
    ++n;
    if (line.empty()) continue;
    std::vector<std::string_view> f;
    std::string_view rest = line;
    for (auto c = rest.find(','); c != std::string_view::npos; c = rest.find(',')) {
      f.push_back(rest.substr(0, c));
      rest = rest.substr(c + 1);
    }
    f.push_back(rest);
    if (f.size() != 13) throw std::runtime_error("line " + std::to_string(n) + ": expected 13 fields");
    ResultRow r;
    r.trial = detail::parse_field<int>(f[0], n);
    r.seed = detail::parse_field<std::uint64_t>(f[1], n);
    r.scheme = f[2];
    r.M = detail::parse_field<int>(f[3], n);
    r.N = detail::parse_field<int>(f[4], n);
    r.K = detail::parse_field<int>(f[5], n);
    r.E_total = detail::parse_field<double>(f[6], n);
    r.E_d = detail::parse_field<double>(f[7], n);
    r.sum_E_C = detail::parse_field<double>(f[8], n);
    r.sum_E_u = detail::parse_field<double>(f[9], n);
    r.sca_iterations = detail::parse_field<int>(f[10], n);
    r.status = f[11];
    r.wall_time = detail::parse_field<double>(f[12], n);
    rows.push_back(std::move(r));
  }
  return rows;
}

/// Per (scheme, M, N, K) statistics of E_total over trials with finite energy.
struct GroupStats {
  std::string scheme;
  int M = 0, N = 0, K = 0;
  std::size_t rows = 0;   ///< all trials, including failed ones
  std::size_t valid = 0;  ///< trials with finite energy
  double mean = 0, std_error = 0;
  double mean_E_d = 0, mean_sum_E_C = 0, mean_sum_E_u = 0;
};

/// Paired comparison: (baseline - candidate) / baseline of the mean
/// energies over trials where both are finite.
struct Reduction {
  std::string baseline, candidate;
  int M = 0, N = 0, K = 0;
  std::size_t pairs = 0;
  std::size_t wins = 0;  ///< pairs with candidate <= baseline
  double baseline_mean = 0, candidate_mean = 0;
  double percent = 0;
};

struct Summary {
  std::vector<GroupStats> groups;
  std::vector<Reduction> reductions;

  const GroupStats* find(std::string_view scheme, int M, int N, int K) const {
    for (const auto& g : groups)
      if (g.scheme == scheme && g.M == M && g.N == N && g.K == K) return &g;
    return nullptr;
  }
  const Reduction* find_reduction(std::string_view baseline, std::string_view candidate, int M, int N, int K) const {
    for (const auto& r : reductions)
      if (r.baseline == baseline && r.candidate == candidate && r.M == M && r.N == N && r.K == K) return &r;
    return nullptr;
  }
};

inline Summary summarize(const std::vector<ResultRow>& rows) {
  using Point = std::tuple<int, int, int>;
  const std::vector<std::string> order{"opt_async", "opt_sync", "heur_async", "heur_sync"};
  auto rank = [&](const std::string& s) {
    return static_cast<std::size_t>(std::find(order.begin(), order.end(), s) - order.begin());
  };
  // (point, scheme rank, scheme) -> trial -> E_total
  std::map<std::tuple<Point, std::size_t, std::string>, std::vector<const ResultRow*>> by_group;
  for (const auto& r : rows) by_group[{{r.M, r.N, r.K}, rank(r.scheme), r.scheme}].push_back(&r);

  Summary out;
  std::map<std::pair<Point, std::string>, std::map<int, double>> energy;
  for (const auto& [key, list] : by_group) {
    const auto& [pt, _, scheme] = key;
    GroupStats g;
    g.scheme = scheme;
    std::tie(g.M, g.N, g.K) = pt;
    g.rows = list.size();
    double s = 0, s2 = 0;
    for (const auto* r : list) {
      if (!std::isfinite(r->E_total)) continue;
      ++g.valid;
      s += r->E_total;
      s2 += r->E_total * r->E_total;
      g.mean_E_d += r->E_d;
      g.mean_sum_E_C += r->sum_E_C;
      g.mean_sum_E_u += r->sum_E_u;
      energy[{pt, scheme}][r->trial] = r->E_total;
    }
    if (g.valid > 0) {
      const double n = static_cast<double>(g.valid);
      g.mean = s / n;
      g.mean_E_d /= n;
      g.mean_sum_E_C /= n;
      g.mean_sum_E_u /= n;
      if (g.valid > 1) {
        const double var = std::max(0.0, (s2 - n * g.mean * g.mean) / (n - 1));
        g.std_error = std::sqrt(var / n);
      }
    } else {
      g.mean = g.std_error = std::numeric_limits<double>::quiet_NaN();
    }
    out.groups.push_back(g);
  }

  const std::pair<const char*, const char*> pairs[] = {
      {"heur_async", "opt_async"}, {"heur_sync", "opt_sync"}, {"opt_sync", "opt_async"}};
  std::vector<Point> points;
  for (const auto& g : out.groups)
    if (points.empty() || points.back() != Point{g.M, g.N, g.K}) points.push_back({g.M, g.N, g.K});
  for (const auto& pt : points) {
    for (const auto& [b, c] : pairs) {
      const auto bi = energy.find({pt, b});
      const auto ci = energy.find({pt, c});
      if (bi == energy.end() || ci == energy.end()) continue;
      Reduction red;
      red.baseline = b;
      red.candidate = c;
      std::tie(red.M, red.N, red.K) = pt;
      for (const auto& [trial, eb] : bi->second) {
        const auto it = ci->second.find(trial);
        if (it == ci->second.end()) continue;
        ++red.pairs;
        red.baseline_mean += eb;
        red.candidate_mean += it->second;
        if (it->second <= eb) ++red.wins;
      }
      if (red.pairs == 0) continue;
      red.baseline_mean /= static_cast<double>(red.pairs);
      red.candidate_mean /= static_cast<double>(red.pairs);
      red.percent = 100.0 * (red.baseline_mean - red.candidate_mean) / red.baseline_mean;
      out.reductions.push_back(red);
    }
  }
  return out;
}

/// Two comma-separated tables separated by a blank line: per-group
/// statistics, then paired reductions.
inline void write_summary(std::ostream& os, const Summary& s) {
  std::string line = "scheme,M,N,K,rows,valid,mean_E_total,stderr_E_total,mean_E_d,mean_sum_E_C,mean_sum_E_u\n";
  for (const auto& g : s.groups) {
    line += g.scheme;
    for (int v : {g.M, g.N, g.K}) {
      line += ',';
      detail::put_int(line, v);
    }
    for (std::size_t v : {g.rows, g.valid}) {
      line += ',';
      detail::put_int(line, v);
    }
    for (double v : {g.mean, g.std_error, g.mean_E_d, g.mean_sum_E_C, g.mean_sum_E_u}) {
      line += ',';
      detail::put_double(line, v);
    }
    line += '\n';
  }
  line += "\nbaseline,candidate,M,N,K,pairs,wins,baseline_mean,candidate_mean,reduction_pct\n";
  for (const auto& r : s.reductions) {
    line += r.baseline + ',' + r.candidate;
    for (int v : {r.M, r.N, r.K}) {
      line += ',';
      detail::put_int(line, v);
    }
    for (std::size_t v : {r.pairs, r.wins}) {
      line += ',';
      detail::put_int(line, v);
    }
    for (double v : {r.baseline_mean, r.candidate_mean, r.percent}) {
      line += ',';
      detail::put_double(line, v);
    }
    line += '\n';
  }
  os << line;
}

}  // namespace mmfl

#endif  // MMFL_HARNESS_HPP
