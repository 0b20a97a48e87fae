#include <cmath>
#include <vector>

#include <boost/math/distributions/normal.hpp>
#include <gtest/gtest.h>

#include "harvest/analytic.hpp"
#include "harvest/sim.hpp"

using namespace harvest;

namespace {

Problem bm(double mu, double sigma, double rho, std::size_t n = 1, double theta = 1.0,
           std::optional<ExtinctionRule> rule = std::nullopt) {
  DiffusionSpec d;
  PriceSpec p{rho, {}};
  for (std::size_t i = 0; i < n; ++i) {
    d.components.push_back(ArithmeticBM{mu, sigma});
    p.components.push_back(PowerHalf{theta});
  }
  return Problem(d, p, rule);
}

SimConfig cfg(std::uint64_t n_paths, double dt = 1e-3, double t_max = 100.0, std::uint64_t seed = 11) {
  SimConfig c;
  c.n_paths = n_paths;
  c.dt = dt;
  c.t_max = t_max;
  c.seed = seed;
  c.threads = 1;
  return c;
}

}  // namespace

TEST(MonteCarlo, TakeAllLeftPriceIsExact) {
  const auto pb = bm(0.1, 1.0, 0.1, 2);
  const std::vector<double> x{1.0, 4.0};
  const auto e = monte_carlo(pb, uniform_policy("take_all", TakeAll{}, 2), x, 0.0, cfg(50));
  EXPECT_DOUBLE_EQ(e.mean, 3.0);
  EXPECT_EQ(e.std_error, 0.0);
}

TEST(MonteCarlo, TakeAllIntegralPriceIsChatterValue) {
  const auto pb = bm(0.1, 1.0, 0.1, 2);
  const std::vector<double> x{1.0, 4.0};
  auto c = cfg(20);
  c.lump_pricing = LumpPricing::IntegralPrice;
  EXPECT_NEAR(monte_carlo(pb, uniform_policy("take_all", TakeAll{}, 2), x, 0.0, c).mean, 6.0, 1e-12);
}

TEST(MonteCarlo, NoHarvestYieldsZero) {
  const auto pb = bm(1.0, 1.0, 0.1);
  const std::vector<double> x{2.0};
  const auto e = monte_carlo(pb, uniform_policy("none", NoHarvest{}, 1), x, 0.0, cfg(50, 1e-2, 10.0));
  EXPECT_EQ(e.mean, 0.0);
}

TEST(MonteCarlo, FineChatteringApproachesChatterValue) {
  const auto pb = bm(0.1, 1.0, 0.1, 2);
  const std::vector<double> x{1.0, 4.0};
  const auto e = monte_carlo(pb, uniform_policy("chatter", Chattering{10000, 0.0}, 2), x, 0.0, cfg(20));
  EXPECT_LT(std::abs(e.mean - 6.0) / 6.0, 0.01);
  EXPECT_LT(e.mean, 6.0);
}

TEST(MonteCarlo, DiscountsByStartTime) {
  const auto pb = bm(0.1, 1.0, 0.1);
  const std::vector<double> x{4.0};
  const auto e = monte_carlo(pb, uniform_policy("take_all", TakeAll{}, 1), x, 3.0, cfg(5));
  EXPECT_NEAR(e.mean, 2.0 * std::exp(-0.3), 1e-14);
}

TEST(MonteCarlo, IndependentOfThreadCount) {
  const auto pb = bm(1.0, 1.0, 0.1, 2);
  const std::vector<double> x{1.0, 2.0};
  const std::vector<Policy> ps{uniform_policy("b", Barrier{1.5}, 2), uniform_policy("c", Chattering{5, 0.5}, 2)};
  auto c1 = cfg(64, 1e-2, 20.0);
  auto c4 = c1;
  c4.threads = 4;
  const auto r1 = monte_carlo_crn(pb, ps, x, 0.0, c1);
  const auto r4 = monte_carlo_crn(pb, ps, x, 0.0, c4);
  for (std::size_t p = 0; p < ps.size(); ++p) {
    EXPECT_EQ(r1[p].per_path, r4[p].per_path);
    EXPECT_EQ(r1[p].yield.mean, r4[p].yield.mean);
    EXPECT_EQ(r1[p].yield.std_error, r4[p].yield.std_error);
  }
}

TEST(MonteCarlo, SeedSelectsStream) {
  const auto pb = bm(1.0, 1.0, 0.1);
  const std::vector<double> x{1.0};
  const auto p = uniform_policy("b", Barrier{2.0}, 1);
  const auto a = monte_carlo(pb, p, x, 0.0, cfg(32, 1e-2, 20.0, 5));
  const auto b = monte_carlo(pb, p, x, 0.0, cfg(32, 1e-2, 20.0, 5));
  const auto c = monte_carlo(pb, p, x, 0.0, cfg(32, 1e-2, 20.0, 6));
  EXPECT_EQ(a.mean, b.mean);
  EXPECT_NE(a.mean, c.mean);
}

TEST(MonteCarlo, CommonRandomNumbersAcrossPolicySets) {
  // A policy's per-path values do not depend on which other policies share the run.
  const auto pb = bm(1.0, 1.0, 0.1);
  const std::vector<double> x{1.0};
  const auto b = uniform_policy("b", Barrier{2.0}, 1);
  const std::vector<Policy> both{uniform_policy("t", TakeAll{}, 1), b};
  const auto alone = monte_carlo_crn(pb, std::span<const Policy>(&b, 1), x, 0.0, cfg(40, 1e-2, 20.0));
  const auto pair = monte_carlo_crn(pb, both, x, 0.0, cfg(40, 1e-2, 20.0));
  EXPECT_EQ(alone[0].per_path, pair[1].per_path);
}

TEST(MonteCarlo, BarrierMatchesAnalyticValue) {
  const auto pb = bm(1.0, 1.0, 0.1);
  const auto vf = solve_value_function(pb);
  const double xs = *vf.threshold(0);
  const std::vector<double> x{xs};
  const auto e = monte_carlo(pb, uniform_policy("b", Barrier{xs}, 1), x, 0.0, cfg(3000, 1e-3, 100.0, 21));
  EXPECT_LT(std::abs(e.mean - vf(0.0, x)), 3.0 * e.std_error) << e.mean << " +- " << e.std_error;
}

TEST(Trajectory, BarrierKeepsStateBelowLevel) {
  const auto pb = bm(1.0, 1.0, 0.1);
  const std::vector<double> x{3.0};
  auto c = cfg(1, 1e-2, 20.0);
  c.trajectory_stride = 1;
  const auto r = simulate_path(pb, uniform_policy("b", Barrier{2.0}, 1), x, 0.0, c, 0);
  ASSERT_FALSE(r.trajectory.empty());
  double last_h = 0.0;
  for (const auto& smp : r.trajectory) {
    EXPECT_LE(smp.x[0], 2.0);
    EXPECT_GE(smp.harvested[0], last_h);
    last_h = smp.harvested[0];
  }
  EXPECT_GE(last_h, 1.0);
}

TEST(Extinction, ReflectionPrincipleWithBridge) {
  // Driftless BM from 1: P(T <= t) = 2 Phi(-1 / sqrt t). A coarse grid with
  // the bridge test stays unbiased.
  const auto pb = bm(0.0, 1.0, 0.1);
  const std::vector<double> x{1.0};
  const auto p = uniform_policy("none", NoHarvest{}, 1);
  auto c = cfg(20000, 0.05, 1.0, 3);
  const auto with = monte_carlo_crn(pb, std::span<const Policy>(&p, 1), x, 0.0, c)[0].extinction;
  const double exact = 2.0 * boost::math::cdf(boost::math::normal(), -1.0);
  const double frac = static_cast<double>(with.n_extinct) / 20000.0;
  const double se = std::sqrt(exact * (1.0 - exact) / 20000.0);
  EXPECT_LT(std::abs(frac - exact), 3.0 * se) << frac << " vs " << exact;

  c.bridge_extinction = false;
  const auto without = monte_carlo_crn(pb, std::span<const Policy>(&p, 1), x, 0.0, c)[0].extinction;
  EXPECT_LT(static_cast<double>(without.n_extinct) / 20000.0, exact - 5.0 * se);
}

TEST(Extinction, DiscountBracketsLaplaceTransform) {
  // E[exp(-rho T)] = exp(-x (mu + sqrt(mu^2 + 2 rho sigma^2)) / sigma^2) for BM with drift.
  const double mu = 0.2, sg = 1.0, rho = 0.5, x0 = 0.8;
  const auto pb = bm(mu, sg, rho);
  const std::vector<double> x{x0};
  const auto d = estimate_extinction_discount(pb, uniform_policy("none", NoHarvest{}, 1), x, cfg(8000, 2e-3, 30.0, 9));
  const double exact = std::exp(-x0 * (mu + std::sqrt(mu * mu + 2 * rho * sg * sg)) / (sg * sg));
  EXPECT_LE(d.lo(), d.hi());
  EXPECT_GT(exact, d.lo() - 3.0 * d.censored_as_zero.std_error);
  EXPECT_LT(exact, d.hi() + 3.0 * d.censored_as_is.std_error);
}

TEST(Extinction, JointRuleStopsEveryComponent) {
  const std::vector<double> x{1.0, 1.0};
  const Policy p{"mixed", {TakeAll{}, Barrier{0.5}}};
  auto c = cfg(50, 1e-2, 20.0);
  const auto joint = monte_carlo(bm(1.0, 1.0, 0.1, 2, 1.0, ExtinctionRule::Joint), p, x, 0.0, c);
  const auto each = monte_carlo(bm(1.0, 1.0, 0.1, 2, 1.0, ExtinctionRule::PerComponent), p, x, 0.0, c);
  // Joint: component 0 is emptied at s, so component 1 only gets its opening lump.
  EXPECT_NEAR(joint.mean, 1.0 + 2.0 * (1.0 - std::sqrt(0.5)), 1e-12);
  EXPECT_GT(each.mean, joint.mean + 0.5);
}

TEST(Validation, RejectsBadInput) {
  const auto pb = bm(1.0, 1.0, 0.1);
  const auto p = uniform_policy("b", Barrier{1.0}, 1);
  const std::vector<double> zero{0.0}, two{1.0, 1.0}, one{1.0};
  EXPECT_THROW(monte_carlo(pb, p, zero, 0.0, cfg(5)), DomainError);
  EXPECT_THROW(monte_carlo(pb, p, two, 0.0, cfg(5)), InvalidParameter);
  auto c = cfg(5);
  c.dt = 0.0;
  EXPECT_THROW(monte_carlo(pb, p, one, 0.0, c), InvalidParameter);
  EXPECT_THROW(monte_carlo(pb, uniform_policy("b", Barrier{1.0}, 2), one, 0.0, cfg(5)), InvalidParameter);
}

TEST(Summary, PairedDifferenceUsesPathwiseGaps) {
  PolicyRun a, b;
  a.per_path = {1.0, 2.0, 3.0, 4.0};
  b.per_path = {0.5, 1.5, 2.5, 3.5};
  const auto d = paired_difference(a, b);
  EXPECT_DOUBLE_EQ(d.mean, 0.5);
  EXPECT_EQ(d.std_error, 0.0);
  const std::vector<double> bad{NAN, NAN};
  EXPECT_THROW(summarize(bad), NumericError);
}
