// Command-line front end: Monte Carlo runs, the grid oracle, CSV summaries
// and subproblem listings.
//
// Exit codes: 0 success, 1 configuration or I/O error, 2 solver failure.

#include <cstdint>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "mmfl/config_io.hpp"
#include "mmfl/convex_solver.hpp"
#include "mmfl/grid_oracle.hpp"
#include "mmfl/harness.hpp"
#include "mmfl/optimizer.hpp"

namespace {

constexpr int kExitConfig = 1;
constexpr int kExitSolver = 2;

mmfl::SystemConfig config_or_default(const std::string& path) {
  return path.empty() ? mmfl::SystemConfig{} : mmfl::load_config(path);
}

std::vector<mmfl::Method> parse_methods(const std::string& list) {
  std::vector<mmfl::Method> out;
  std::stringstream ss(list);
  for (std::string item; std::getline(ss, item, ',');)
    if (!item.empty()) out.push_back(mmfl::method_from_string(item));
  return out;
}

mmfl::Scheme parse_scheme(const std::string& s) {
  if (s == "async" || s == "opt_async") return mmfl::Scheme::Async;
  if (s == "sync" || s == "opt_sync") return mmfl::Scheme::Sync;
  throw mmfl::ConfigError("unknown scheme '" + s + "' (expected async or sync)");
}

void print_allocation(std::ostream& os, const mmfl::Allocation& a) {
  for (std::size_t k = 0; k < a.eta_nk.size(); ++k)
    os << "ue " << k << ": eta=" << a.eta_nk[k] << " zeta=" << a.zeta_nk[k] << " f=" << a.f_nk[k] << "\n";
}

struct RunArgs {
  std::string config, sweep, schemes = "opt_async,opt_sync,heur_async,heur_sync", out;
  int trials = 50;
  std::uint64_t seed = 1;
  unsigned workers = 0;
  bool wall_time = false;
  double epsilon = 1e-4;
  int max_iters = 50;
  int restarts = 3;
};

int do_run(const RunArgs& a) {
  mmfl::ExperimentSpec spec;
  spec.base = config_or_default(a.config);
  if (!a.sweep.empty()) spec.sweep = mmfl::parse_sweep(a.sweep);
  spec.methods = parse_methods(a.schemes);
  spec.trials = a.trials;
  spec.seed = a.seed;
  spec.workers = a.workers;
  spec.record_wall_time = a.wall_time;
  spec.sca.epsilon = a.epsilon;
  spec.sca.max_outer_iters = a.max_iters;
  spec.sca.restarts = a.restarts;
  const auto rows = mmfl::run_experiment(spec, a.out);
  std::size_t failures = 0;
  for (const auto& r : rows)
    if (r.status == "solver_failure") ++failures;
  std::cerr << rows.size() << " rows written to " << a.out << "\n";
  if (failures) {
    std::cerr << failures << " solver failure(s)\n";
    return kExitSolver;
  }
  return 0;
}

struct InstanceArgs {
  std::string config, scheme = "async";
  std::uint64_t seed = 1;
  int trial = 0;
};

mmfl::ChannelInstance instance_for(const InstanceArgs& a, const mmfl::SystemConfig& cfg) {
  return mmfl::generate_network(cfg, mmfl::trial_seed(a.seed, static_cast<std::uint64_t>(a.trial)));
}

int do_oracle(const InstanceArgs& a, int points, int refinements, bool compare) {
  const auto cfg = config_or_default(a.config).resolved();
  const auto scheme = parse_scheme(a.scheme);
  const auto ch = instance_for(a, cfg);
  mmfl::GridOracleOptions o;
  o.points = points;
  o.refinements = refinements;
  const auto res = mmfl::grid_oracle(ch, cfg, scheme, o);
  std::cout.precision(10);
  if (!res.found) {
    std::cout << "oracle: no feasible grid point\n";
    return 0;
  }
  std::cout << "oracle E_total=" << res.E_total << " error_bound=" << res.error_bound
            << " relative_error=" << res.relative_error() << " evaluated=" << res.evaluated << "\n";
  print_allocation(std::cout, res.argmin);
  if (compare) {
    const auto r = mmfl::sca_solve(ch, cfg, scheme);
    std::cout << "sca E_total=" << r.energy.E_total << " status=" << mmfl::to_string(r.status)
              << " ratio=" << r.energy.E_total / res.E_total << "\n";
  }
  return 0;
}

int do_dump(const InstanceArgs& a) {
  const auto cfg = config_or_default(a.config).resolved();
  const auto scheme = parse_scheme(a.scheme);
  const auto ch = instance_for(a, cfg);
  const auto start = mmfl::initial_point(ch, cfg, scheme);
  mmfl::write_listing(std::cout, mmfl::build_subproblem(start, ch, cfg));
  return 0;
}

int do_summarize(const std::string& in) {
  std::ifstream f(in, std::ios::binary);
  if (!f) throw mmfl::ConfigError("cannot open '" + in + "'");
  mmfl::write_summary(std::cout, mmfl::summarize(mmfl::read_csv(f)));
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Energy-minimizing resource allocation for multi-group federated learning over massive MIMO"};
  app.require_subcommand(1);

  RunArgs run;
  auto* run_cmd = app.add_subcommand("run", "Monte Carlo experiment, one CSV row per trial and scheme");
  run_cmd->add_option("--config", run.config, "JSON scenario file (built-in defaults when omitted)");
  run_cmd->add_option("--sweep", run.sweep, "m=a:b:s (antennas) or k=a:b:s (UEs per group)");
  run_cmd->add_option("--trials", run.trials, "trials per sweep value")->check(CLI::PositiveNumber);
  run_cmd->add_option("--seed", run.seed, "master seed");
  run_cmd->add_option("--schemes", run.schemes, "comma-separated subset of opt_async,opt_sync,heur_async,heur_sync");
  run_cmd->add_option("--out", run.out, "output CSV path")->required();
  run_cmd->add_option("--workers", run.workers, "worker threads (0 = hardware threads)");
  run_cmd->add_flag("--wall-time", run.wall_time, "record wall time (output is then not reproducible)");
  run_cmd->add_option("--epsilon", run.epsilon, "SCA relative decrease threshold");
  run_cmd->add_option("--max-iters", run.max_iters, "SCA iteration cap");
  run_cmd->add_option("--restarts", run.restarts, "SCA starts per solve");

  InstanceArgs oracle;
  int points = mmfl::GridOracleOptions{}.points, refinements = mmfl::GridOracleOptions{}.refinements;
  bool compare = false;
  auto* oracle_cmd = app.add_subcommand("oracle", "brute-force grid optimum of a tiny instance (at most 2 UEs)");
  oracle_cmd->add_option("--config", oracle.config, "JSON scenario file");
  oracle_cmd->add_option("--seed", oracle.seed, "master seed");
  oracle_cmd->add_option("--trial", oracle.trial, "trial index within the seed");
  oracle_cmd->add_option("--scheme", oracle.scheme, "async or sync");
  oracle_cmd->add_option("--points", points, "grid points per dimension")->check(CLI::PositiveNumber);
  oracle_cmd->add_option("--refinements", refinements, "window halvings")->check(CLI::NonNegativeNumber);
  oracle_cmd->add_flag("--compare", compare, "also run the SCA solver on the instance");

  InstanceArgs dump;
  auto* dump_cmd = app.add_subcommand("dump", "print the first convex subproblem of an instance");
  dump_cmd->add_option("--config", dump.config, "JSON scenario file");
  dump_cmd->add_option("--seed", dump.seed, "master seed");
  dump_cmd->add_option("--trial", dump.trial, "trial index within the seed");
  dump_cmd->add_option("--scheme", dump.scheme, "async or sync");

  std::string in;
  auto* sum_cmd = app.add_subcommand("summarize", "means, standard errors and paired reductions of a results CSV");
  sum_cmd->add_option("--in", in, "results CSV")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitConfig;
  }

  try {
    if (*run_cmd) return do_run(run);
    if (*oracle_cmd) return do_oracle(oracle, points, refinements, compare);
    if (*dump_cmd) return do_dump(dump);
    if (*sum_cmd) return do_summarize(in);
  } catch (const mmfl::SolverFailureError& e) {
    std::cerr << "solver failure: " << e.what() << "\n";
    return kExitSolver;
  } catch (const mmfl::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitConfig;
  }
  return 0;
}
