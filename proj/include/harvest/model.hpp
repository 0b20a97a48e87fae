#pragma once

// Problem instance: per-component dynamics, density-dependent prices, discount
// rate and extinction rule, plus the regime dichotomy of the two closed-form
// examples.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <limits>
#include <optional>
#include <string>
#include <string_view>
#include <type_traits>
#include <utility>
#include <variant>
#include <vector>

#include "harvest/errors.hpp"

namespace harvest {

// ---------------------------------------------------------------------------
// Dynamics
// ---------------------------------------------------------------------------

/// dX = mu dt + sigma dB
struct ArithmeticBM {
  double mu;
  double sigma;
};

/// dX = mu X (1 - X/K) dt + sigma X dB
struct Logistic {
  double mu;
  double K;
  double sigma;
};

/// dX = drift(X) dt + vol(X) dB; accepted by the simulator and the bounds,
/// rejected by the closed-form solvers.
struct GeneralDynamics {
  std::function<double(double)> drift;
  std::function<double(double)> vol;
};

using ComponentDynamics = std::variant<ArithmeticBM, Logistic, GeneralDynamics>;

namespace detail {

inline bool finite(double v) { return std::isfinite(v); }

template <class... Fs>
struct overloaded : Fs... {
  using Fs::operator()...;
};
template <class... Fs>
overloaded(Fs...) -> overloaded<Fs...>;

}  // namespace detail

inline double drift(const ComponentDynamics& c, double x) {
  return std::visit(
      detail::overloaded{
          [](const ArithmeticBM& d) { return d.mu; },
          [x](const Logistic& d) { return d.mu * x * (1.0 - x / d.K); },
          [x](const GeneralDynamics& d) { return d.drift(x); },
      },
      c);
}

inline double volatility(const ComponentDynamics& c, double x) {
  return std::visit(
      detail::overloaded{
          [](const ArithmeticBM& d) { return d.sigma; },
          [x](const Logistic& d) { return d.sigma * x; },
          [x](const GeneralDynamics& d) { return d.vol(x); },
      },
      c);
}

inline void validate(const ComponentDynamics& c) {
  std::visit(detail::overloaded{
                 [](const ArithmeticBM& d) {
                   if (!detail::finite(d.mu) || !detail::finite(d.sigma))
                     throw InvalidParameter("arithmetic BM: non-finite parameter");
                   if (d.sigma == 0.0) throw InvalidParameter("arithmetic BM: sigma must be nonzero");
                 },
                 [](const Logistic& d) {
                   if (!detail::finite(d.mu) || !detail::finite(d.K) || !detail::finite(d.sigma))
                     throw InvalidParameter("logistic: non-finite parameter");
                   if (!(d.mu > 0.0) || !(d.K > 0.0) || !(d.sigma > 0.0))
                     throw InvalidParameter("logistic: mu, K and sigma must be positive");
                 },
                 [](const GeneralDynamics& d) {
                   if (!d.drift || !d.vol) throw InvalidParameter("general dynamics: missing drift or vol");
                 },
             },
             c);
}

inline std::string_view kind_name(const ComponentDynamics& c) {
  return std::visit(detail::overloaded{
                        [](const ArithmeticBM&) { return std::string_view{"bm"}; },
                        [](const Logistic&) { return std::string_view{"logistic"}; },
                        [](const GeneralDynamics&) { return std::string_view{"general"}; },
                    },
                    c);
}

/// Independent components, one Brownian coordinate each.
struct DiffusionSpec {
  std::vector<ComponentDynamics> components;

  std::size_t size() const noexcept { return components.size(); }
};

// ---------------------------------------------------------------------------
// Prices
// ---------------------------------------------------------------------------

/// pi(x) = theta x^{-1/2}
struct PowerHalf {
  double theta;
};

struct ConstantPrice {
  double p;
};

/// Any nonincreasing nonnegative price. `slope` is optional; a central
/// difference is used when it is absent.
struct GeneralPrice {
  std::function<double(double)> pi;
  std::function<double(double)> slope;
};

using PriceFn = std::variant<PowerHalf, ConstantPrice, GeneralPrice>;

/// Price at x, evaluated at (x)^+ so that PowerHalf yields +inf at the origin.
inline double price(const PriceFn& f, double x) {
  const double xp = std::max(x, 0.0);
  return std::visit(detail::overloaded{
                        [xp](const PowerHalf& p) {
                          return xp > 0.0 ? p.theta / std::sqrt(xp)
                                          : std::numeric_limits<double>::infinity();
                        },
                        [](const ConstantPrice& p) { return p.p; },
                        [xp](const GeneralPrice& p) { return p.pi(xp); },
                    },
                    f);
}

/// d pi / dx at x > 0.
inline double price_slope(const PriceFn& f, double x) {
  return std::visit(detail::overloaded{
                        [x](const PowerHalf& p) { return -0.5 * p.theta / (x * std::sqrt(x)); },
                        [](const ConstantPrice&) { return 0.0; },
                        [x](const GeneralPrice& p) {
                          if (p.slope) return p.slope(x);
                          const double h = 1e-5 * std::max(x, 1e-3);
                          const double lo = std::max(x - h, 0.5 * x);
                          return (p.pi(x + h) - p.pi(lo)) / (x + h - lo);
                        },
                    },
                    f);
}

/// Rejects prices that are negative, non-finite or increasing on a log-spaced
/// sample of (0, inf).
inline void validate(const PriceFn& f) {
  if (const auto* p = std::get_if<PowerHalf>(&f)) {
    if (!(p->theta > 0.0) || !detail::finite(p->theta))
      throw InvalidParameter("power_half price: theta must be positive");
    return;
  }
  if (const auto* p = std::get_if<ConstantPrice>(&f)) {
    if (!(p->p > 0.0) || !detail::finite(p->p))
      throw InvalidParameter("constant price: p must be positive");
    return;
  }
  const auto& g = std::get<GeneralPrice>(f);
  if (!g.pi) throw InvalidParameter("general price: missing function");
  constexpr int kSamples = 121;
  double prev = std::numeric_limits<double>::infinity();
  for (int k = 0; k < kSamples; ++k) {
    const double x = std::pow(10.0, -6.0 + 12.0 * k / (kSamples - 1));
    const double v = g.pi(x);
    if (!detail::finite(v) || v < 0.0)
      throw InvalidParameter("general price: negative or non-finite value at x = " + std::to_string(x));
    if (v > prev * (1.0 + 1e-12) + 1e-300)
      throw InvalidParameter("general price: increasing near x = " + std::to_string(x));
    prev = v;
  }
}

struct PriceSpec {
  double rho;
  std::vector<PriceFn> components;
};

// ---------------------------------------------------------------------------
// Regimes
// ---------------------------------------------------------------------------

enum class Regime { ChatterToZero, InteriorThreshold };

inline std::string_view to_string(Regime r) {
  return r == Regime::ChatterToZero ? "chatter_to_zero" : "interior_threshold";
}

/// Chatter to zero iff mu <= 0 or mu^2 <= 2 rho sigma^2 (equality included).
/// For mu <= 0 the chattering candidate's generator is negative on (0, inf).
inline Regime classify_regime_bm(double mu, double sigma, double rho) {
  if (!detail::finite(mu) || !detail::finite(sigma) || !detail::finite(rho))
    throw InvalidParameter("classify_regime_bm: non-finite input");
  if (sigma == 0.0) throw InvalidParameter("classify_regime_bm: sigma must be nonzero");
  if (!(rho > 0.0)) throw InvalidParameter("classify_regime_bm: rho must be positive");
  return mu <= 0.0 || mu * mu <= 2.0 * rho * sigma * sigma ? Regime::ChatterToZero : Regime::InteriorThreshold;
}

/// Chatter to zero iff mu <= 2 rho + sigma^2 / 4 (equality included).
inline Regime classify_regime_logistic(double mu, double sigma, double rho) {
  if (!detail::finite(mu) || !detail::finite(sigma) || !detail::finite(rho))
    throw InvalidParameter("classify_regime_logistic: non-finite input");
  if (!(mu > 0.0) || !(sigma > 0.0) || !(rho > 0.0))
    throw InvalidParameter("classify_regime_logistic: mu, sigma and rho must be positive");
  return mu <= 2.0 * rho + 0.25 * sigma * sigma ? Regime::ChatterToZero : Regime::InteriorThreshold;
}

inline Regime classify_regime(const ComponentDynamics& c, double rho) {
  if (const auto* d = std::get_if<ArithmeticBM>(&c)) return classify_regime_bm(d->mu, d->sigma, rho);
  if (const auto* d = std::get_if<Logistic>(&c)) return classify_regime_logistic(d->mu, d->sigma, rho);
  throw UnsupportedError("no analytic solution for general dynamics");
}

// ---------------------------------------------------------------------------
// Problem
// ---------------------------------------------------------------------------

/// Joint: every component dies once any component reaches 0 (two-population
/// BM example). PerComponent: each component is absorbed at 0 on its own.
enum class ExtinctionRule { Joint, PerComponent };

inline std::string_view to_string(ExtinctionRule r) {
  return r == ExtinctionRule::Joint ? "joint" : "per_component";
}

/// Immutable once constructed; share freely between workers.
class Problem {
 public:
  Problem(DiffusionSpec dynamics, PriceSpec prices, std::optional<ExtinctionRule> extinction = std::nullopt)
      : dynamics_(std::move(dynamics)), prices_(std::move(prices)) {
    if (dynamics_.size() == 0) throw InvalidParameter("problem: at least one component required");
    if (dynamics_.size() != prices_.components.size())
      throw InvalidParameter("problem: dynamics and prices must have the same number of components");
    if (!(prices_.rho > 0.0) || !detail::finite(prices_.rho))
      throw InvalidParameter("problem: rho must be positive and finite");
    for (const auto& c : dynamics_.components) validate(c);
    for (const auto& p : prices_.components) validate(p);
    extinction_ = extinction.value_or(default_extinction());
  }

  std::size_t size() const noexcept { return dynamics_.size(); }
  double rho() const noexcept { return prices_.rho; }
  const ComponentDynamics& dynamics(std::size_t i) const { return dynamics_.components.at(i); }
  const PriceFn& price_fn(std::size_t i) const { return prices_.components.at(i); }
  const DiffusionSpec& dynamics() const noexcept { return dynamics_; }
  const PriceSpec& prices() const noexcept { return prices_; }
  ExtinctionRule extinction() const noexcept { return extinction_; }

  bool has_closed_form() const {
    for (std::size_t i = 0; i < size(); ++i) {
      if (std::holds_alternative<GeneralDynamics>(dynamics(i))) return false;
      if (!std::holds_alternative<PowerHalf>(price_fn(i))) return false;
    }
    return true;
  }

 private:
  // Joint extinction for all-BM instances, absorption per component otherwise.
  ExtinctionRule default_extinction() const {
    for (const auto& c : dynamics_.components)
      if (!std::holds_alternative<ArithmeticBM>(c)) return ExtinctionRule::PerComponent;
    return ExtinctionRule::Joint;
  }

  DiffusionSpec dynamics_;
  PriceSpec prices_;
  ExtinctionRule extinction_{ExtinctionRule::Joint};
};

}  // namespace harvest
