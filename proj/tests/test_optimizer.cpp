#include "mmfl/optimizer.hpp"

#include <gtest/gtest.h>

#include <numeric>

namespace mmfl {
namespace {

SystemConfig sized(int N, int K, int M) {
  SystemConfig c;
  c.set_uniform_groups(N, K);
  c.M = M;
  return c;
}

TEST(Layout, VariableCounts) {
  for (int K : {1, 2, 5, 10}) {
    const auto c = sized(3, K, 100);
    const auto ch = generate_network(c, 1);
    const auto a = initial_point(ch, c, Scheme::Async);
    const auto s = initial_point(ch, c, Scheme::Sync);
    const auto kt = static_cast<std::size_t>(c.K_total());
    EXPECT_EQ(build_async_subproblem(a, ch, c).n_vars(), 9 * kt + 1);
    EXPECT_EQ(build_sync_subproblem(s, ch, c).n_vars(), 7 * kt + 3);
  }
  EXPECT_EQ(SubproblemLayout(Scheme::Async, 30).n_vars(), 271u);
}

TEST(Layout, PackUnpackRoundTrip) {
  const SystemConfig c;
  const auto ch = generate_network(c, 2);
  for (Scheme s : {Scheme::Async, Scheme::Sync}) {
    const auto it = initial_point(ch, c, s);
    const auto back = unpack(pack(it, c), s, c);
    for (std::size_t k = 0; k < 30; ++k) {
      EXPECT_NEAR(back.r_d[k] / it.r_d[k], 1.0, 1e-15);
      EXPECT_NEAR(back.omega[k] / it.omega[k], 1.0, 1e-15);
      EXPECT_NEAR(back.f[k] / it.f[k], 1.0, 1e-15);
    }
    EXPECT_DOUBLE_EQ(back.q, it.q);
    EXPECT_DOUBLE_EQ(back.t_C, it.t_C);
  }
}

TEST(Subproblem, ValidAndTagged) {
  const SystemConfig c;
  const auto ch = generate_network(c, 3);
  for (Scheme s : {Scheme::Async, Scheme::Sync}) {
    const auto p = build_subproblem(initial_point(ch, c, s), ch, c);
    EXPECT_NO_THROW(p.validate());
    for (const auto& k : p.constraints) EXPECT_FALSE(k.tag.empty());
  }
}

TEST(Subproblem, ObjectiveIsEpigraphEnergy) {
  const SystemConfig c;
  const auto ch = generate_network(c, 3);
  const auto it = initial_point(ch, c, Scheme::Async);
  const auto p = build_subproblem(it, ch, c);
  EXPECT_NEAR(p.objective.eval(pack(it, c)) / epigraph_objective(it, c), 1.0, 1e-12);
  // The epigraph objective bounds the exact energy from above.
  EXPECT_GE(epigraph_objective(it, c), energies(extract_allocation(it), ch, c).E_total * (1 - 1e-12));
}

TEST(Subproblem, SolutionIsFeasibleForExactProblem) {
  const SystemConfig c;
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    const auto ch = generate_network(c, seed);
    for (Scheme s : {Scheme::Async, Scheme::Sync}) {
      const auto it = initial_point(ch, c, s);
      const auto p = build_subproblem(it, ch, c);
      const auto sol = solve(p, pack(it, c));
      ASSERT_EQ(sol.status, SolverStatus::Optimal) << sol.message;
      EXPECT_LE(sol.objective_value, epigraph_objective(it, c));
      EXPECT_LT(sol.kkt.max(), 1e-6);
      const auto next = unpack(sol.x, s, c);
      const auto r = check(s, extract_allocation(next), ch, c);
      EXPECT_TRUE(r.feasible) << "worst " << r.worst_scaled_violation();
      if (s == Scheme::Sync) {
        const auto ue = ue_constants(c);
        for (std::size_t k = 0; k < 30; ++k) EXPECT_GE(next.t_d * (1 + 1e-9), ue[k].S_d / next.r_d[k]);
      }
    }
  }
}

TEST(InitialPoint, StrictlyFeasible) {
  const SystemConfig c;
  int ok = 0;
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    const auto ch = generate_network(c, trial_seed(9, seed));
    try {
      const auto it = initial_point(ch, c, Scheme::Async);
      EXPECT_GT(slater_slack(it, ch, c), 0);
      EXPECT_TRUE(check_async(extract_allocation(it), ch, c).feasible);
      ++ok;
    } catch (const InfeasibleStartError&) {
    }
  }
  EXPECT_GE(ok, 95);
}

TEST(InitialPoint, GenerousAndImpossibleDeadlines) {
  auto c = sized(3, 10, 100);
  c.t_qos = 1e4;
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const auto ch = generate_network(c, seed);
    EXPECT_NO_THROW(initial_point(ch, c, Scheme::Async));
    EXPECT_NO_THROW(initial_point(ch, c, Scheme::Sync));
  }
  c.t_qos = 1.0;  // below the 1.25 s compute time at f_max
  const auto ch = generate_network(c, 0);
  EXPECT_THROW(initial_point(ch, c, Scheme::Async), InfeasibleStartError);
  EXPECT_EQ(sca_solve(ch, c, Scheme::Sync).status, ScaStatus::InfeasibleStart);
}

TEST(InitialPoint, JitterChangesStart) {
  const SystemConfig c;
  const auto ch = generate_network(c, 4);
  const auto a = initial_point(ch, c, Scheme::Async);
  const auto b = initial_point(ch, c, Scheme::Async, 123);
  const auto b2 = initial_point(ch, c, Scheme::Async, 123);
  EXPECT_NE(a.v, b.v);
  EXPECT_EQ(b.v, b2.v);
}

TEST(ShortestDeadline, SyncMatchesMaxMinAndAsyncIsNoWorse) {
  for (int M : {50, 100}) {
    auto c = sized(3, 10, M);
    for (std::uint64_t seed = 0; seed < 4; ++seed) {
      const auto ch = generate_network(c, trial_seed(3, seed));
      const auto s = shortest_deadline(ch, c, Scheme::Sync);
      const auto a = shortest_deadline(ch, c, Scheme::Async);
      ASSERT_EQ(s.status, SolverStatus::Optimal);
      ASSERT_EQ(a.status, SolverStatus::Optimal);
      // Max-min fair powers minimize both stage maxima at once.
      const auto t = delays(detail::max_min_powers(ch, c), ch, c);
      const double mm = *std::max_element(t.t_d_nk.begin(), t.t_d_nk.end()) +
                        *std::max_element(t.t_u_nk.begin(), t.t_u_nk.end()) + ue_constants(c)[0].cycles / c.f_max;
      EXPECT_NEAR(s.deadline / mm, 1.0, 1e-8);
      EXPECT_LE(a.deadline, s.deadline * (1 + 1e-9));
      // The returned powers meet the deadline they certify.
      for (Scheme sc : {Scheme::Async, Scheme::Sync}) {
        const auto& probe = sc == Scheme::Async ? a : s;
        auto tight = c;
        tight.t_qos = probe.deadline * (1 + 1e-6);
        const auto alloc = polish_frequencies(probe.powers, ch, tight, sc);
        EXPECT_TRUE(check(sc, alloc, ch, tight).feasible) << to_string(sc);
      }
    }
  }
}

TEST(ShortestDeadline, AsyncOnlyStartBetweenTheTwoMinima) {
  auto c = sized(3, 10, 100);
  const auto ch = generate_network(c, trial_seed(3, 0));
  const double a = shortest_deadline(ch, c, Scheme::Async).deadline;
  const double s = shortest_deadline(ch, c, Scheme::Sync).deadline;
  ASSERT_LT(a, s * 0.99);
  c.t_qos = 0.5 * (a + s);
  const auto it = initial_point(ch, c, Scheme::Async);
  EXPECT_GT(slater_slack(it, ch, c), 0);
  EXPECT_TRUE(check_async(extract_allocation(it), ch, c).feasible);
  EXPECT_THROW(initial_point(ch, c, Scheme::Sync), InfeasibleStartError);
  const auto r = sca_solve(ch, c, Scheme::Async);
  EXPECT_TRUE(r.report.feasible);
}

TEST(ShortestDeadline, NearCriticalDeadlineStillStarts) {
  auto c = sized(3, 10, 100);
  const auto ch = generate_network(c, trial_seed(3, 1));
  c.t_qos = shortest_deadline(ch, c, Scheme::Sync).deadline * (1 + 1e-5);
  const auto it = initial_point(ch, c, Scheme::Sync);
  EXPECT_GT(slater_slack(it, ch, c), 0);
  EXPECT_TRUE(check_sync(extract_allocation(it), ch, c).feasible);
}

TEST(Extract, Substitution) {
  ScaIterate it;
  it.v = {0.0, 0.6, 0.8};
  it.u = {1.0, 0.5, 0.1};
  it.f = {1e9, 2e9, 3e9};
  const auto a = extract_allocation(it);
  EXPECT_EQ(a.eta_nk[0], 0.0);
  EXPECT_NEAR(std::accumulate(a.eta_nk.begin(), a.eta_nk.end(), 0.0), 1.0, 1e-15);
  EXPECT_DOUBLE_EQ(a.zeta_nk[1], 0.25);
  EXPECT_EQ(a.f_nk, it.f);
  for (double eta : {1e-6, 0.013, 0.5, 1.0}) EXPECT_NEAR(std::pow(std::sqrt(eta), 2) / eta, 1.0, 1e-12);
}

TEST(Sca, DefaultInstance) {
  const SystemConfig c;
  const auto ch = generate_network(c, trial_seed(1, 0));
  for (Scheme s : {Scheme::Async, Scheme::Sync}) {
    const auto r = sca_solve(ch, c, s);
    ASSERT_NE(r.status, ScaStatus::InfeasibleStart);
    EXPECT_EQ(r.status, ScaStatus::Converged);
    EXPECT_TRUE(r.report.feasible);
    for (std::size_t i = 1; i < r.objective_trace.size(); ++i)
      EXPECT_LE(r.objective_trace[i], r.objective_trace[i - 1] * (1 + 1e-6));
    EXPECT_LT(r.kkt_residual, 1e-6);
    EXPECT_GT(r.slater_slack, 0);
    EXPECT_LT(r.energy.E_total, energies(heuristic(s, ch, c).allocation, ch, c).E_total);
    EXPECT_LE(r.energy.E_total, r.objective_trace.back() * (1 + 1e-9));
  }
}

TEST(Sca, SingleUeSchemesAgree) {
  const auto c = sized(1, 1, 50);
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    const auto ch = generate_network(c, seed);
    const auto a = sca_solve(ch, c, Scheme::Async);
    const auto s = sca_solve(ch, c, Scheme::Sync);
    ASSERT_TRUE(a.report.feasible);
    ASSERT_TRUE(s.report.feasible);
    EXPECT_NEAR(a.energy.E_total / s.energy.E_total, 1.0, 0.01);
  }
}

TEST(Sca, PolishNeverRaisesFrequencies) {
  const SystemConfig c;
  const auto ch = generate_network(c, 5);
  const auto h = heuristic_async(ch, c);
  Allocation fast = h.allocation;
  fast.f_nk.assign(30, c.f_max);
  const auto p = polish_frequencies(fast, ch, c, Scheme::Async);
  for (std::size_t k = 0; k < 30; ++k) {
    EXPECT_LE(p.f_nk[k], c.f_max);
    EXPECT_NEAR(p.f_nk[k] / h.allocation.f_nk[k], 1.0, 1e-12);
  }
}

TEST(Sca, DisablingExtrapolationStillDescends) {
  const SystemConfig c;
  const auto ch = generate_network(c, 6);
  ScaOptions o;
  o.max_extrapolation = 0;
  o.max_outer_iters = 15;
  o.restarts = 1;
  const auto r = sca_solve(ch, c, Scheme::Async, o);
  EXPECT_TRUE(r.report.feasible);
  for (std::size_t i = 1; i < r.objective_trace.size(); ++i)
    EXPECT_LE(r.objective_trace[i], r.objective_trace[i - 1] * (1 + 1e-6));
  EXPECT_LT(r.objective_trace.back(), r.objective_trace.front());
}

}  // namespace
}  // namespace mmfl
