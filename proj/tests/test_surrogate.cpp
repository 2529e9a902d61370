#include "mmfl/surrogate.hpp"

#include <gtest/gtest.h>

#include <array>
#include <limits>

#include "surrogate_checks.hpp"

namespace mmfl {
namespace {

// Two UEs, M = 10, rho_d = 50, rho_u = 20, B = 1 MHz, 20-sample pilots.
struct TwoUe {
  SystemConfig cfg;
  ChannelInstance ch;

  TwoUe() {
    cfg.set_uniform_groups(1, 2);
    cfg.M = 10;
    cfg.N0 = 1.0;
    cfg.p_d = 50;
    cfg.p_u = 20;
    cfg.B = 1e6;
    cfg.tau_dp = cfg.tau_up = 20;
    ch.positions.assign(2, {0.1, 0.1});
    ch.beta_nk = {0.8, 0.3};
    ch.sigma_hat_sq_nk = ch.sigma_bar_sq_nk = {0.6, 0.25};
  }
};

TEST(AuxFunctionals, ReproduceSinr) {
  const SystemConfig cfg;
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const auto ch = generate_network(cfg, seed);
    const AuxFunctionals aux(ch, cfg);
    std::vector<double> v(30), u(30), eta(30), zeta(30);
    for (std::size_t k = 0; k < 30; ++k) {
      v[k] = std::sqrt((1.0 + k % 7) / 200);
      u[k] = std::sqrt(0.1 + 0.03 * k);
      eta[k] = v[k] * v[k];
      zeta[k] = u[k] * u[k];
    }
    const auto sd = sinr_downlink(eta, ch, cfg);
    const auto su = sinr_uplink(zeta, ch, cfg);
    for (std::size_t k = 0; k < 30; ++k) {
      const double ups = aux.Upsilon(v[k], k), psi = aux.Psi(u[k], k);
      EXPECT_NEAR(ups * ups / aux.Pi(v, k) / sd[k], 1.0, 1e-12);
      EXPECT_NEAR(psi * psi / aux.Xi(u) / su[k], 1.0, 1e-12);
      EXPECT_GE(aux.Pi(v, k), 1.0);
      EXPECT_GE(aux.Xi(u), 1.0);
    }
  }
}

TEST(RateBounds, DownlinkAtZeroPower) {
  const TwoUe t;
  const AuxFunctionals aux(t.ch, t.cfg);
  const std::array<double, 2> v{0, 0}, v_i{0.6, 0.5};
  const auto b = rate_dl_lb(v, v_i, aux);
  EXPECT_NEAR(b[0].value / -12622380.685292472197772773, 1.0, 1e-12);
  EXPECT_NEAR(b[1].value / -10221005.185901299127724265, 1.0, 1e-12);
  EXPECT_NEAR(b[0].expr.eval(v) / b[0].value, 1.0, 1e-12);
}

TEST(RateBounds, UplinkAtZeroPower) {
  const TwoUe t;
  const AuxFunctionals aux(t.ch, t.cfg);
  const std::array<double, 2> u{0, 0}, u_i{0.9, 0.4};
  const auto b = rate_ul_lb(u, u_i, aux);
  EXPECT_NEAR(b[0].value / -19425438.809775664286926608, 1.0, 1e-12);
  EXPECT_NEAR(b[1].value / -897580.79361308441118125417, 1.0, 1e-12);
}

TEST(RateBounds, TightAtExpansionPoint) {
  const TwoUe t;
  const AuxFunctionals aux(t.ch, t.cfg);
  const std::array<double, 2> v{0.6, 0.5}, u{0.9, 0.4};
  const auto rd = rate_downlink(std::array{0.36, 0.25}, t.ch, t.cfg);
  const auto ru = rate_uplink(std::array{0.81, 0.16}, t.ch, t.cfg);
  const auto bd = rate_dl_lb(v, v, aux);
  const auto bu = rate_ul_lb(u, u, aux);
  for (std::size_t k = 0; k < 2; ++k) {
    EXPECT_NEAR(bd[k].value / rd[k], 1.0, 1e-12);
    EXPECT_NEAR(bu[k].value / ru[k], 1.0, 1e-12);
  }
}

TEST(RateBounds, RejectNonFinitePoint) {
  const TwoUe t;
  const AuxFunctionals aux(t.ch, t.cfg);
  const std::array<double, 2> v{0.5, 0.5}, bad{std::numeric_limits<double>::quiet_NaN(), 0.5};
  EXPECT_THROW(rate_dl_lb(v, bad, aux), std::domain_error);
  EXPECT_THROW(rate_ul_lb(v, bad, aux), std::domain_error);
}

TEST(BilinearBounds, SpotValues) {
  EXPECT_NEAR(h1(0.3, 1.5, 0.2, 1.2, 0.1).value, -0.17, 1e-15);
  // r = omega: the squared difference vanishes
  EXPECT_NEAR(h1(0.3, 0.7, 0.7, 1.2, 0.1).value, -0.3975, 1e-15);
  EXPECT_NEAR(h2(0.9, 0.8, 1.1, 1.0, 0.9).value, -0.07, 1e-15);
  EXPECT_NEAR(h3(0.6, 1.3, 0.5, 1.1, 0.7).value, 0.0825, 1e-15);
  EXPECT_NEAR(h4(1.2, 0.9, 1.0, 0.8, 1.5).value, -0.4175, 1e-15);
}

TEST(BilinearBounds, TightAndExpressionConsistent) {
  const auto a = h1(0.4, 2.0, 0.3, 2.0, 0.3);
  EXPECT_NEAR(a.value, 0.16 - 0.6, 1e-15);
  EXPECT_NEAR(a.expr.eval(std::array{0.4, 2.0, 0.3}), a.value, 1e-15);
  const auto b = h4(0.7, 1.9, 0.7, 1.9, 1.0);
  EXPECT_NEAR(b.value, 0.7 * 1.9 - 1.0, 1e-15);
  EXPECT_NEAR(b.expr.eval(std::array{0.7, 1.9}), b.value, 1e-15);
  EXPECT_GE(a.expr.min_curvature(), -1e-15);
  EXPECT_GE(b.expr.min_curvature(), -1e-15);
  EXPECT_THROW(h3(std::numeric_limits<double>::infinity(), 1, 1, 1, 1), std::domain_error);
}

TEST(SurrogateProperties, RandomInstances) {
  testing::SurrogateTally tally;
  for (std::uint64_t seed = 0; seed < 10; ++seed) testing::check_surrogates(1000 + seed, 200, tally);
  EXPECT_TRUE(tally.ok()) << tally.first_failure;
  EXPECT_LT(tally.worst_tightness, 1e-9);
  EXPECT_GT(tally.checks, 10000u);
}

}  // namespace
}  // namespace mmfl
