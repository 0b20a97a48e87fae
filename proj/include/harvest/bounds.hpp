#pragma once

// Chattering lower bound and generator-based upper bound for independent,
// time-homogeneous components:
//   sum_i Pi_i(x_i) <= sup J <= sum_i Pi_i(x_i) + sum_i (M_i / rho)(1 - E[e^{-rho T}]),
// with Pi_i the antiderivative of the price and M_i the supremum of
//   (G Pi_i)(x) = 1/2 sigma_i(x)^2 pi_i'(x) + b_i(x) pi_i(x) - rho Pi_i(x).

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <optional>
#include <span>
#include <variant>
#include <vector>

#include <boost/math/quadrature/tanh_sinh.hpp>
#include <boost/math/tools/minima.hpp>

#include "harvest/errors.hpp"
#include "harvest/model.hpp"
#include "harvest/numerics.hpp"

namespace harvest {

/// Integral of the price over [0, x].
inline double big_pi(const PriceFn& price, double x) {
  if (!(x >= 0.0) || !std::isfinite(x)) throw DomainError("big_pi: x must be finite and >= 0");
  if (x == 0.0) return 0.0;
  if (const auto* p = std::get_if<PowerHalf>(&price)) return 2.0 * p->theta * std::sqrt(x);
  if (const auto* p = std::get_if<ConstantPrice>(&price)) return p->p * x;
  const auto& g = std::get<GeneralPrice>(price);
  boost::math::quadrature::tanh_sinh<double> q;
  double err = 0.0, l1 = 0.0;
  double v;
  try {
    v = q.integrate([&g](double u) { return g.pi(u); }, 0.0, x, 1e-10, &err, &l1);
  } catch (const std::exception& e) {
    throw DomainError(std::string("big_pi: price is not integrable at 0 (") + e.what() + ")");
  }
  if (!std::isfinite(v) || err > 1e-6 * std::max(1.0, std::abs(v)))
    throw DomainError("big_pi: price is not integrable at 0");
  return v;
}

/// (G Pi)(x) for one component.
inline double g_rho_pi(const ComponentDynamics& dyn, const PriceFn& price, double rho, double x) {
  if (!(x > 0.0) || !std::isfinite(x)) throw DomainError("g_rho_pi: x must be positive");
  const double sig = volatility(dyn, x);
  return 0.5 * sig * sig * price_slope(price, x) + drift(dyn, x) * harvest::price(price, x) - rho * big_pi(price, x);
}

/// Maximiser of (G Pi) for arithmetic BM with theta x^{-1/2} prices: the
/// positive root of rho x^2 + mu x / 2 - 3 sigma^2 / 8.
inline double x_tilde_bm(double mu, double sigma, double rho) {
  if (!(rho > 0.0) || !std::isfinite(rho)) throw InvalidParameter("x_tilde_bm: rho must be positive");
  if (!std::isfinite(mu) || !std::isfinite(sigma) || sigma == 0.0)
    throw InvalidParameter("x_tilde_bm: mu, sigma must be finite, sigma nonzero");
  const double root = std::sqrt(mu * mu + 6.0 * sigma * sigma * rho);
  if (mu >= 0.0) return 1.5 * sigma * sigma / (mu + root);
  return (root - mu) / (4.0 * rho);
}

/// d/dx (G Pi)(x) for arithmetic BM with theta x^{-1/2} prices.
inline double g_rho_pi_slope_bm(double theta, double mu, double sigma, double rho, double x) {
  return theta * std::pow(x, -2.5) * (-rho * x * x - 0.5 * mu * x + 0.375 * sigma * sigma);
}

struct GeneratorSup {
  double M;
  /// Maximiser; NaN when the supremum is only approached as x -> 0.
  double x_tilde;
};

/// sup_x (G Pi)(x). Closed forms for BM and logistic dynamics with
/// theta x^{-1/2} prices; otherwise a log-grid scan refined by Brent's method.
inline GeneratorSup generator_sup(const ComponentDynamics& dyn, const PriceFn& price, double rho) {
  const auto* ph = std::get_if<PowerHalf>(&price);
  if (ph) {
    if (const auto* b = std::get_if<ArithmeticBM>(&dyn)) {
      const double xt = x_tilde_bm(b->mu, b->sigma, rho);
      return {g_rho_pi(dyn, price, rho, xt), xt};
    }
    if (const auto* l = std::get_if<Logistic>(&dyn)) {
      // (G Pi)(u^2) = theta (a u - mu u^3 / K), a = mu - sigma^2/4 - 2 rho.
      const double a = l->mu - 0.25 * l->sigma * l->sigma - 2.0 * rho;
      if (a <= 0.0) return {0.0, std::numeric_limits<double>::quiet_NaN()};
      const double xt = a * l->K / (3.0 * l->mu);
      return {2.0 / 3.0 * ph->theta * a * std::sqrt(xt), xt};
    }
  }
  constexpr double kLo = 1e-8, kHi = 1e8;
  constexpr std::size_t kN = 2001;
  const auto grid = numerics::log_grid(kLo, kHi, kN);
  std::vector<double> g(kN);
  std::size_t best = 0;
  for (std::size_t k = 0; k < kN; ++k) {
    g[k] = g_rho_pi(dyn, price, rho, grid[k]);
    if (!std::isfinite(g[k]) && g[k] > 0.0) throw BoundUnavailable("generator of Pi is unbounded above");
    if (std::isfinite(g[k]) && (!std::isfinite(g[best]) || g[k] > g[best])) best = k;
  }
  if (!std::isfinite(g[best])) throw BoundUnavailable("generator of Pi is not finite on the scan grid");
  if (best == kN - 1 && g[kN - 1] > g[kN - 2]) throw BoundUnavailable("generator of Pi still increasing at x = 1e8");
  if (best == 0 && g[0] > g[1]) {
    // Supremum approached at the origin; accept it only if it levels off.
    if (std::abs(g[0] - g[1]) > 1e-6 * std::max(1.0, std::abs(g[0])))
      throw BoundUnavailable("generator of Pi increases without bound towards 0");
    return {g[0], std::numeric_limits<double>::quiet_NaN()};
  }
  const double lo = grid[best == 0 ? 0 : best - 1], hi = grid[std::min(best + 1, kN - 1)];
  const auto r = boost::math::tools::brent_find_minima(
      [&](double x) { return -g_rho_pi(dyn, price, rho, x); }, lo, hi, std::numeric_limits<double>::digits / 2);
  return {-r.second, r.first};
}

struct ComponentBound {
  double Pi;
  double M;
  double x_tilde;
};

struct BoundsReport {
  double lower = 0.0;
  double upper_conservative = 0.0;
  std::optional<double> upper_mc;
  std::vector<ComponentBound> per_component;
};

/// Bounds at s = 0. extinction_discount, if given, is an estimate of
/// E[e^{-rho T}] in [0, 1]; pass the low end of its bracket to stay on the safe
/// side, since the bound grows as the discount shrinks.
inline BoundsReport bounds_report(const Problem& pb, std::span<const double> x0,
                                  std::optional<double> extinction_discount = std::nullopt) {
  if (x0.size() != pb.size()) throw InvalidParameter("bounds: x0 has the wrong dimension");
  for (double v : x0)
    if (!(v >= 0.0) || !std::isfinite(v)) throw DomainError("bounds: x0 must be componentwise >= 0");
  if (extinction_discount && !(*extinction_discount >= 0.0 && *extinction_discount <= 1.0))
    throw InvalidParameter("bounds: extinction discount must lie in [0, 1]");
  BoundsReport r;
  double excess = 0.0;
  for (std::size_t i = 0; i < pb.size(); ++i) {
    const auto sup = generator_sup(pb.dynamics(i), pb.price_fn(i), pb.rho());
    const double Pi = big_pi(pb.price_fn(i), x0[i]);
    r.per_component.push_back({Pi, sup.M, sup.x_tilde});
    r.lower += Pi;
    excess += std::max(sup.M, 0.0) / pb.rho();
  }
  r.upper_conservative = r.lower + excess;
  if (extinction_discount) r.upper_mc = r.lower + excess * (1.0 - *extinction_discount);
  return r;
}

}  // namespace harvest
