#include <cmath>
#include <vector>

#include <gtest/gtest.h>

#include "harvest/analytic.hpp"
#include "harvest/bounds.hpp"
#include "support.hpp"

using namespace harvest;

TEST(BigPi, PowerHalfAntiderivative) {
  EXPECT_EQ(big_pi(PowerHalf{1.0}, 4.0), 4.0);
  EXPECT_EQ(big_pi(PowerHalf{1.0}, 0.0), 0.0);
  EXPECT_EQ(big_pi(ConstantPrice{3.0}, 2.0), 6.0);
  EXPECT_THROW(big_pi(PowerHalf{1.0}, -1.0), DomainError);
}

TEST(BigPi, DominatesPriceTimesState) {
  for (double x : {0.01, 0.3, 1.0, 7.0, 120.0}) EXPECT_GE(big_pi(PowerHalf{1.3}, x), price(PowerHalf{1.3}, x) * x);
}

TEST(BigPi, ConcaveOnSamples) {
  for (double a : {0.01, 0.5, 2.0})
    for (double b : {3.0, 10.0}) {
      const PriceFn p = PowerHalf{1.0};
      EXPECT_GE(big_pi(p, 0.5 * (a + b)), 0.5 * (big_pi(p, a) + big_pi(p, b)));
    }
}

TEST(BigPi, GeneralPriceQuadrature) {
  const PriceFn g = GeneralPrice{[](double x) { return 2.0 / std::sqrt(x); }, {}};
  EXPECT_NEAR(big_pi(g, 9.0), 12.0, 1e-9);
  const PriceFn bad = GeneralPrice{[](double x) { return 1.0 / x; }, {}};
  EXPECT_THROW(big_pi(bad, 1.0), DomainError);
}

TEST(Generator, BmPowerHalfMatchesFactoredForm) {
  const ComponentDynamics d = ArithmeticBM{0.7, 1.2};
  for (double x : {0.05, 0.8, 3.0}) {
    const double expect = std::pow(x, -1.5) * (0.7 * x - 1.44 / 4.0 - 2.0 * 0.1 * x * x);
    EXPECT_NEAR(g_rho_pi(d, PowerHalf{1.0}, 0.1, x), expect, 1e-12 * std::max(1.0, std::abs(expect)));
  }
  EXPECT_THROW(g_rho_pi(d, PowerHalf{1.0}, 0.1, 0.0), DomainError);
}

TEST(XTilde, ClosedFormExample) {
  EXPECT_NEAR(x_tilde_bm(0.0, 1.0, 0.5), std::sqrt(3.0) / 2.0, 1e-15);
}

TEST(XTilde, SatisfiesFirstOrderCondition) {
  for (double mu : {-1.0, 0.0, 0.1, 1.0, 5.0}) {
    const double xt = x_tilde_bm(mu, 1.0, 0.1);
    EXPECT_LT(std::abs(g_rho_pi_slope_bm(1.0, mu, 1.0, 0.1, xt)) * xt * xt, 1e-10) << "mu=" << mu;
  }
}

TEST(XTilde, AgreesWithGridMaximum) {
  const ComponentDynamics d = ArithmeticBM{1.0, 1.0};
  const double xt = x_tilde_bm(1.0, 1.0, 0.1);
  double best_x = 0.0, best = -INFINITY;
  const auto grid = numerics::log_grid(1e-6, 100.0, 400001);
  for (double x : grid) {
    const double g = g_rho_pi(d, PowerHalf{1.0}, 0.1, x);
    if (g > best) best = g, best_x = x;
  }
  EXPECT_NEAR(best_x, xt, 1e-6 * std::max(1.0, xt) + 5e-5 * xt);  // grid spacing bounds the argmax error
  EXPECT_NEAR(best, g_rho_pi(d, PowerHalf{1.0}, 0.1, xt), 1e-8);
  for (double x : grid) EXPECT_LE(g_rho_pi(d, PowerHalf{1.0}, 0.1, x), best + 1e-15) << x;
}

TEST(GeneratorSup, MatchesHighPrecisionReference) {
  for (const auto& c : harvest_test::golden()["generator_sup"]) {
    const double mu = c["mu"], sg = c["sigma"], rho = c["rho"], th = c["theta"];
    ComponentDynamics d = ArithmeticBM{mu, sg};
    if (!c["K"].is_null()) d = Logistic{mu, c["K"].get<double>(), sg};
    const auto s = generator_sup(d, PowerHalf{th}, rho);
    EXPECT_NEAR(s.x_tilde, c["x_tilde"].get<double>(), 1e-12);
    EXPECT_NEAR(s.M, c["M"].get<double>(), 1e-12);
  }
}

TEST(GeneratorSup, NumericScanAgreesWithClosedForm) {
  // Same logistic component through the general-dynamics path.
  const ComponentDynamics g = GeneralDynamics{[](double x) { return x * (1.0 - x); }, [](double x) { return 0.5 * x; }};
  const auto s = generator_sup(g, PowerHalf{1.0}, 0.1);
  const auto ref = generator_sup(Logistic{1.0, 1.0, 0.5}, PowerHalf{1.0}, 0.1);
  EXPECT_NEAR(s.x_tilde, ref.x_tilde, 1e-6);
  EXPECT_NEAR(s.M, ref.M, 1e-10);
}

TEST(GeneratorSup, UnboundedGeneratorIsReported) {
  // Linear growth with a constant price: (G Pi)(x) = (a - rho) p x grows without bound.
  const ComponentDynamics g = GeneralDynamics{[](double x) { return 0.5 * x; }, [](double) { return 0.1; }};
  EXPECT_THROW(generator_sup(g, ConstantPrice{1.0}, 0.1), BoundUnavailable);
}

TEST(BoundsReport, ChatterRegimeLowerEqualsValue) {
  const Problem pb(DiffusionSpec{{ArithmeticBM{0.1, 1.0}, ArithmeticBM{0.1, 1.0}}},
                   PriceSpec{0.1, {PowerHalf{1.0}, PowerHalf{1.0}}});
  const std::vector<double> x{1.0, 4.0};
  const auto r = bounds_report(pb, x);
  EXPECT_NEAR(r.lower, solve_value_function(pb)(0.0, x), 1e-12);
  EXPECT_EQ(r.upper_conservative, r.lower);  // M < 0 in this regime
  EXPECT_FALSE(r.upper_mc.has_value());
}

TEST(BoundsReport, ZeroStateLeavesOnlyGeneratorTerm) {
  const Problem pb(DiffusionSpec{{ArithmeticBM{1.0, 1.0}}}, PriceSpec{0.1, {PowerHalf{1.0}}});
  const std::vector<double> x{0.0};
  const auto r = bounds_report(pb, x, 0.25);
  EXPECT_EQ(r.lower, 0.0);
  const double M = r.per_component[0].M;
  EXPECT_GT(M, 0.0);
  EXPECT_NEAR(r.upper_conservative, M / 0.1, 1e-12);
  EXPECT_NEAR(*r.upper_mc, 0.75 * M / 0.1, 1e-12);
}

TEST(BoundsReport, SandwichesAnalyticValue) {
  const Problem pb(DiffusionSpec{{ArithmeticBM{1.0, 1.0}}}, PriceSpec{0.1, {PowerHalf{1.0}}});
  for (double x0 : {0.1, 1.0, 2.0, 5.0}) {
    const std::vector<double> x{x0};
    const auto r = bounds_report(pb, x);
    const double v = solve_value_function(pb)(0.0, x);
    EXPECT_LE(r.lower, v);
    EXPECT_LE(v, r.upper_conservative);
  }
}

TEST(BoundsReport, RejectsBadInput) {
  const Problem pb(DiffusionSpec{{ArithmeticBM{1.0, 1.0}}}, PriceSpec{0.1, {PowerHalf{1.0}}});
  const std::vector<double> neg{-1.0}, two{1.0, 1.0}, one{1.0};
  EXPECT_THROW(bounds_report(pb, neg), DomainError);
  EXPECT_THROW(bounds_report(pb, two), InvalidParameter);
  EXPECT_THROW(bounds_report(pb, one, 1.5), InvalidParameter);
}
