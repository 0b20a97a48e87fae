#pragma once

// Closed-form machinery for the two worked examples (arithmetic BM with
// theta x^{-1/2} prices, and the logistic diffusion) plus a grid verifier for
// the checkable conditions of the verification theorem.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "harvest/errors.hpp"
#include "harvest/model.hpp"
#include "harvest/numerics.hpp"
#include "harvest/specfun.hpp"

namespace harvest {

// ---------------------------------------------------------------------------
// Characteristic roots of  -rho + mu l + 1/2 sigma^2 l^2 = 0
// ---------------------------------------------------------------------------

struct LambdaPair {
  double lambda1;  // > 0
  double lambda2;  // < 0
};

inline LambdaPair lambda_roots(double mu, double sigma, double rho) {
  if (!std::isfinite(mu) || !std::isfinite(sigma) || !std::isfinite(rho))
    throw InvalidParameter("lambda_roots: non-finite input");
  if (sigma == 0.0) throw InvalidParameter("lambda_roots: sigma must be nonzero");
  if (!(rho > 0.0)) throw InvalidParameter("lambda_roots: rho must be positive");
  const double s2 = sigma * sigma;
  const double d = std::sqrt(mu * mu + 2.0 * rho * s2);
  // Evaluate the root without cancellation first, then use l1 l2 = -2 rho / s2.
  if (mu >= 0.0) return {2.0 * rho / (mu + d), -(mu + d) / s2};
  return {(d - mu) / s2, -2.0 * rho / (d - mu)};
}

inline double characteristic_residual(double lambda, double mu, double sigma, double rho) {
  return -rho + mu * lambda + 0.5 * sigma * sigma * lambda * lambda;
}

// ---------------------------------------------------------------------------
// BM threshold system
// ---------------------------------------------------------------------------

struct ThresholdResiduals {
  double value_matching = 0.0;     // C (e^{l1 x} - e^{l2 x}) - A
  double first_derivative = 0.0;   // C (l1 e^{l1 x} - l2 e^{l2 x}) - theta x^{-1/2}
  double second_derivative = 0.0;  // C (l1^2 e^{l1 x} - l2^2 e^{l2 x}) + theta/2 x^{-3/2}
  double reduced_equation = 0.0;   // ratio of the last two lhs + 2x

  double max_system() const { return std::max({value_matching, first_derivative, second_derivative}); }
};

struct ThresholdSolution {
  double x_star = 0.0;
  double C = 0.0;
  double A = 0.0;
  double theta = 1.0;
  LambdaPair lambda{};
  ThresholdResiduals residuals{};
  /// Every root of the reduced equation found by the scan, ascending.
  std::vector<double> reduced_roots;
};

namespace detail {

struct BmKernel {
  LambdaPair l;

  // expm1 keeps full relative accuracy as x -> 0.
  double E(double x) const { return std::expm1(l.lambda1 * x) - std::expm1(l.lambda2 * x); }
  double N(double x) const { return l.lambda1 * std::exp(l.lambda1 * x) - l.lambda2 * std::exp(l.lambda2 * x); }
  double D2(double x) const {
    return l.lambda1 * l.lambda1 * std::exp(l.lambda1 * x) - l.lambda2 * l.lambda2 * std::exp(l.lambda2 * x);
  }
  double D3(double x) const {
    return l.lambda1 * l.lambda1 * l.lambda1 * std::exp(l.lambda1 * x) -
           l.lambda2 * l.lambda2 * l.lambda2 * std::exp(l.lambda2 * x);
  }

  // (N + 2x D2) e^{-l1 x}: the reduced equation cleared of its denominator,
  // which vanishes inside (0, inf) and would otherwise show up as a spurious
  // sign change.
  double scaled_pole_free(double x) const {
    const double r = std::exp((l.lambda2 - l.lambda1) * x);
    const double a = l.lambda1, b = l.lambda2;
    return (a - b * r) + 2.0 * x * (a * a - b * b * r);
  }
  double scaled_pole_free_dx(double x) const {
    const double r = std::exp((l.lambda2 - l.lambda1) * x);
    const double a = l.lambda1, b = l.lambda2, k = b - a;
    return -b * k * r + 2.0 * (a * a - b * b * r) - 2.0 * x * b * b * k * r;
  }
};

inline ThresholdResiduals bm_residuals(const BmKernel& k, double theta, double x, double C, double A) {
  ThresholdResiduals r;
  r.value_matching = std::abs(C * k.E(x) - A);
  r.first_derivative = std::abs(C * k.N(x) - theta / std::sqrt(x));
  r.second_derivative = std::abs(C * k.D2(x) + 0.5 * theta / (x * std::sqrt(x)));
  r.reduced_equation = std::abs(k.N(x) / k.D2(x) + 2.0 * x);
  return r;
}

}  // namespace detail

/// Barrier level x*, and C, A, for a BM component in the interior-threshold
/// regime.
///
/// The reduced equation has two roots below the pole of its left-hand side.
/// Between them the barrier value increases with the barrier level, so the
/// upper root is the maximiser over barrier policies; that is the one
/// returned. Both roots are kept in `reduced_roots`.
inline ThresholdSolution solve_threshold_bm(double theta, double mu, double sigma, double rho) {
  if (!(theta > 0.0) || !std::isfinite(theta)) throw InvalidParameter("solve_threshold_bm: theta must be positive");
  if (classify_regime_bm(mu, sigma, rho) != Regime::InteriorThreshold)
    throw RegimeError("solve_threshold_bm: mu^2 <= 2 rho sigma^2, optimal policy is chattering to zero");

  const detail::BmKernel k{lambda_roots(mu, sigma, rho)};
  auto g = [&k](double x) { return k.scaled_pole_free(x); };
  const auto brackets = numerics::scan_sign_changes(g, 1e-8, 1e3, 20001);

  ThresholdSolution sol;
  sol.theta = theta;
  sol.lambda = k.l;
  std::optional<numerics::Bracket> chosen;
  for (const auto& b : brackets) {
    const double r = numerics::bisect(g, b, 1e-14 * b.hi);
    sol.reduced_roots.push_back(r);
    if (b.f_lo < 0.0 && b.f_hi >= 0.0) chosen = b;
  }
  if (!chosen)
    throw NumericError("solve_threshold_bm: no upward sign change of the reduced equation on (1e-8, 1e3)");

  double x = numerics::bisect(g, *chosen, 1e-12);
  x = numerics::newton_polish(g, [&k](double t) { return k.scaled_pole_free_dx(t); }, x, chosen->lo, chosen->hi, 3);

  sol.x_star = x;
  sol.C = theta / (std::sqrt(x) * k.N(x));
  sol.A = sol.C * k.E(x);
  sol.residuals = detail::bm_residuals(k, theta, x, sol.C, sol.A);
  return sol;
}

/// Barrier solution for an externally chosen level; C and A come from the
/// first-derivative and value-matching equations, second-order contact is not
/// enforced (the residuals say by how much it misses).
inline ThresholdSolution bm_barrier_at(double theta, double mu, double sigma, double rho, double x) {
  if (!(x > 0.0)) throw DomainError("bm_barrier_at: barrier must be positive");
  const detail::BmKernel k{lambda_roots(mu, sigma, rho)};
  ThresholdSolution sol;
  sol.theta = theta;
  sol.lambda = k.l;
  sol.x_star = x;
  sol.C = theta / (std::sqrt(x) * k.N(x));
  sol.A = sol.C * k.E(x);
  sol.residuals = detail::bm_residuals(k, theta, x, sol.C, sol.A);
  return sol;
}

// ---------------------------------------------------------------------------
// Logistic threshold
// ---------------------------------------------------------------------------

struct LogisticThreshold {
  double x_star = 0.0;
  double residual = 0.0;  // |x psi'' + psi'/2| at x_star
  PsiParams psi{};
  std::size_t sign_changes = 0;
};

inline LogisticThreshold solve_threshold_logistic(double mu, double K, double sigma, double rho) {
  if (classify_regime_logistic(mu, sigma, rho) != Regime::InteriorThreshold)
    throw RegimeError("solve_threshold_logistic: mu <= 2 rho + sigma^2/4, optimal policy is chattering to zero");
  LogisticThreshold out;
  out.psi = make_psi_params(mu, K, sigma, rho);
  const auto& p = out.psi;

  // Same sign as x psi'' + psi'/2 since psi' > 0, but O(1) in magnitude.
  auto f = [&p](double x) {
    const auto d = psi_derivs(x, p);
    return x * d.d2 / d.d1 + 0.5;
  };
  const double lo = 1e-8 * K;
  const double hi = std::min(5.0 * K, kKummerMaxAbsZ / p.z_scale * (1.0 - 1e-12));
  const auto brackets = numerics::scan_sign_changes(f, lo, hi, 4001);
  out.sign_changes = brackets.size();
  if (brackets.empty())
    throw NumericError("solve_threshold_logistic: no sign change of x psi'' + psi'/2 on (" + std::to_string(lo) +
                       ", " + std::to_string(hi) + "); f(lo) = " + std::to_string(f(lo)) +
                       ", f(hi) = " + std::to_string(f(hi)));
  out.x_star = numerics::bisect(f, brackets.front(), 1e-15 * brackets.front().hi);
  const auto d = psi_derivs(out.x_star, p);
  out.residual = std::abs(out.x_star * d.d2 + 0.5 * d.d1);
  return out;
}

// ---------------------------------------------------------------------------
// Value functions
// ---------------------------------------------------------------------------

/// 2 theta sqrt(x): immediate chattering down to 0.
struct ChatterValue {
  double theta;
};

/// C (e^{l1 x} - e^{l2 x}) below x*, 2 theta (sqrt x - sqrt x*) + A above.
struct BmThresholdValue {
  ThresholdSolution sol;
};

/// theta psi(x) / (sqrt(x*) psi'(x*)) below x*, and above
/// 2 theta (sqrt x - sqrt x*) + theta sqrt(x*) (mu (1 - x*/K) - sigma^2/4) / rho.
struct LogisticThresholdValue {
  double theta;
  double x_star;
  double psi_d1_star;
  PsiParams psi;
};

using ComponentValue = std::variant<ChatterValue, BmThresholdValue, LogisticThresholdValue>;

enum class Branch { Lower, Upper };

namespace detail {

inline double branch_value(const ComponentValue& cv, double x, Branch br) {
  return std::visit(
      overloaded{
          [x](const ChatterValue& c) { return 2.0 * c.theta * std::sqrt(x); },
          [x, br](const BmThresholdValue& c) {
            const auto& s = c.sol;
            if (br == Branch::Lower) return s.C * (std::expm1(s.lambda.lambda1 * x) - std::expm1(s.lambda.lambda2 * x));
            return 2.0 * s.theta * (std::sqrt(x) - std::sqrt(s.x_star)) + s.A;
          },
          [x, br](const LogisticThresholdValue& c) {
            if (br == Branch::Lower) {
              if (x <= 0.0) return 0.0;
              return c.theta * psi(x, c.psi) / (std::sqrt(c.x_star) * c.psi_d1_star);
            }
            const auto& p = c.psi;
            const double rx = std::sqrt(c.x_star);
            return 2.0 * c.theta * (std::sqrt(x) - rx) +
                   c.theta * rx * (p.mu * (1.0 - c.x_star / p.K) - 0.25 * p.sigma * p.sigma) / p.rho;
          },
      },
      cv);
}

inline std::optional<double> kink_of(const ComponentValue& cv) {
  if (const auto* b = std::get_if<BmThresholdValue>(&cv)) return b->sol.x_star;
  if (const auto* l = std::get_if<LogisticThresholdValue>(&cv)) return l->x_star;
  return std::nullopt;
}

}  // namespace detail

/// phi(s, x) = e^{-rho s} sum_i v_i(x_i); additively separable over the
/// independent components.
class ValueFunction {
 public:
  ValueFunction(double rho, std::vector<ComponentValue> parts, std::vector<Regime> regimes)
      : rho_(rho), parts_(std::move(parts)), regimes_(std::move(regimes)) {}

  std::size_t size() const noexcept { return parts_.size(); }
  double rho() const noexcept { return rho_; }
  Regime regime(std::size_t i) const { return regimes_.at(i); }
  const ComponentValue& part(std::size_t i) const { return parts_.at(i); }
  std::optional<double> threshold(std::size_t i) const { return detail::kink_of(parts_.at(i)); }

  /// v_i(x) without the time factor.
  double component(std::size_t i, double x) const {
    if (x < 0.0) throw DomainError("value function: negative state");
    const auto& cv = parts_.at(i);
    const auto k = detail::kink_of(cv);
    return detail::branch_value(cv, x, (k && x > *k) ? Branch::Upper : Branch::Lower);
  }

  /// One explicit branch, continued past the threshold; used for one-sided
  /// derivatives at the seam.
  double branch(std::size_t i, double x, Branch br) const { return detail::branch_value(parts_.at(i), x, br); }

  double stationary(std::span<const double> x) const {
    if (x.size() != parts_.size()) throw InvalidParameter("value function: dimension mismatch");
    double v = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) v += component(i, x[i]);
    return v;
  }

  double operator()(double s, std::span<const double> x) const { return std::exp(-rho_ * s) * stationary(x); }

 private:
  double rho_;
  std::vector<ComponentValue> parts_;
  std::vector<Regime> regimes_;
};

struct ValueOptions {
  /// Multiplies every solved threshold; 1 leaves the solution untouched.
  double threshold_scale = 1.0;
  /// Use 2 theta sqrt(x) for every component regardless of regime.
  bool force_chatter = false;
};

/// Closed-form value for BM / logistic components with power-half prices.
inline ValueFunction solve_value_function(const Problem& pb, const ValueOptions& opt = {}) {
  std::vector<ComponentValue> parts;
  std::vector<Regime> regimes;
  const double rho = pb.rho();
  for (std::size_t i = 0; i < pb.size(); ++i) {
    const auto& dyn = pb.dynamics(i);
    if (std::holds_alternative<GeneralDynamics>(dyn))
      throw UnsupportedError("no analytic solution: component " + std::to_string(i) + " has general dynamics");
    const auto* price = std::get_if<PowerHalf>(&pb.price_fn(i));
    if (!price)
      throw UnsupportedError("no analytic solution: component " + std::to_string(i) +
                             " price is not theta x^{-1/2}");
    const Regime reg = classify_regime(dyn, rho);
    regimes.push_back(reg);
    if (opt.force_chatter || reg == Regime::ChatterToZero) {
      parts.emplace_back(ChatterValue{price->theta});
      continue;
    }
    if (const auto* bm = std::get_if<ArithmeticBM>(&dyn)) {
      auto sol = solve_threshold_bm(price->theta, bm->mu, bm->sigma, rho);
      if (opt.threshold_scale != 1.0) {
        auto roots = std::move(sol.reduced_roots);
        sol = bm_barrier_at(price->theta, bm->mu, bm->sigma, rho, sol.x_star * opt.threshold_scale);
        sol.reduced_roots = std::move(roots);
      }
      parts.emplace_back(BmThresholdValue{std::move(sol)});
    } else {
      const auto& lg = std::get<Logistic>(dyn);
      const auto th = solve_threshold_logistic(lg.mu, lg.K, lg.sigma, rho);
      const double xs = th.x_star * opt.threshold_scale;
      parts.emplace_back(LogisticThresholdValue{price->theta, xs, psi_derivs(xs, th.psi).d1, th.psi});
    }
  }
  return ValueFunction(rho, std::move(parts), std::move(regimes));
}

/// Phi(s, x) for an all-BM problem.
inline double value_bm(double s, std::span<const double> x, const Problem& pb) {
  for (std::size_t i = 0; i < pb.size(); ++i)
    if (!std::holds_alternative<ArithmeticBM>(pb.dynamics(i)))
      throw UnsupportedError("value_bm: component " + std::to_string(i) + " is not arithmetic BM");
  for (double xi : x)
    if (xi < 0.0) throw DomainError("value_bm: negative state");
  return solve_value_function(pb)(s, x);
}

/// V(x) for a one-component logistic problem.
inline double value_logistic(double x, const Problem& pb) {
  if (pb.size() != 1 || !std::holds_alternative<Logistic>(pb.dynamics(0)))
    throw UnsupportedError("value_logistic: expects a single logistic component");
  if (x < 0.0) throw DomainError("value_logistic: negative state");
  return solve_value_function(pb).component(0, x);
}

// ---------------------------------------------------------------------------
// Verification on a grid
// ---------------------------------------------------------------------------

struct VerifyGrid {
  std::vector<double> lo;
  std::vector<double> hi;
  std::size_t points_per_axis = 50;
  double s = 0.0;
  bool keep_points = false;
};

struct ConditionSummary {
  bool pass = true;
  std::size_t checked = 0;
  std::size_t violations = 0;
  /// Largest quantity / tolerance seen; the condition holds where it is <= 1.
  double worst_ratio = -std::numeric_limits<double>::infinity();
  /// The quantity itself at that point (violation of (i), L phi for (ii), |L phi| for (iii)).
  double worst_value = 0.0;
  std::vector<double> worst_x;

  void record(double quantity, double tolerance, std::span<const double> x) {
    ++checked;
    const double ratio = quantity / tolerance;
    if (ratio > 1.0) {
      ++violations;
      pass = false;
    }
    if (ratio > worst_ratio) {
      worst_ratio = ratio;
      worst_value = quantity;
      worst_x.assign(x.begin(), x.end());
    }
  }
};

struct PastingCheck {
  std::size_t component = 0;
  double x_star = 0.0;
  double value_gap = 0.0;  // relative
  double d1_left = 0.0, d1_right = 0.0, d1_gap = 0.0;
  double d2_left = 0.0, d2_right = 0.0, d2_gap = 0.0;
  bool pass = false;
};

struct GridPoint {
  std::vector<double> x;
  double phi = 0.0;
  double generator = 0.0;
  std::vector<double> margin;  // d phi / dx_i - pi_i
  bool in_d = false;
};

struct VerificationReport {
  ConditionSummary cond_i;    // d phi / dx_i >= pi_i
  ConditionSummary cond_ii;   // L phi <= 0
  ConditionSummary cond_iii;  // L phi = 0 on D
  std::size_t n_points = 0;
  std::size_t n_in_d = 0;
  double max_abs_generator_in_d = 0.0;
  std::vector<PastingCheck> pasting;
  bool pasting_pass = true;
  std::vector<GridPoint> points;

  bool upper_bound_conditions() const { return cond_i.pass && cond_ii.pass; }
  bool all_pass() const { return cond_i.pass && cond_ii.pass && cond_iii.pass && pasting_pass; }
};

struct VerifyTolerances {
  double cond_i = 1e-7;    // times max(1, pi)
  double cond_ii = 1e-7;   // times rho max(1, phi)
  double cond_iii = 1e-6;  // times rho max(1, phi)
  double pasting = 1e-6;   // relative
  double rel_step = 2e-3;  // finite-difference step as a fraction of x
};

/// Left/right one-sided value, first and second derivatives at a threshold.
inline PastingCheck smooth_pasting(const ValueFunction& vf, std::size_t i, double rel_step = 2e-3,
                                   double tol = 1e-6) {
  const auto k = vf.threshold(i);
  if (!k) throw InvalidParameter("smooth_pasting: component has no threshold");
  PastingCheck pc;
  pc.component = i;
  pc.x_star = *k;
  const double h = rel_step * *k;
  auto lower = [&](double x) { return vf.branch(i, x, Branch::Lower); };
  auto upper = [&](double x) { return vf.branch(i, x, Branch::Upper); };
  const auto L = numerics::one_sided_derivs(lower, *k, h, numerics::Side::Left);
  const auto R = numerics::one_sided_derivs(upper, *k, h, numerics::Side::Right);
  auto rel = [](double a, double b) { return std::abs(a - b) / std::max({std::abs(a), std::abs(b), 1e-300}); };
  pc.value_gap = rel(lower(*k), upper(*k));
  pc.d1_left = L.d1;
  pc.d1_right = R.d1;
  pc.d1_gap = rel(L.d1, R.d1);
  pc.d2_left = L.d2;
  pc.d2_right = R.d2;
  pc.d2_gap = rel(L.d2, R.d2);
  pc.pass = pc.value_gap <= tol && pc.d1_gap <= tol && pc.d2_gap <= tol;
  return pc;
}

/// Evaluates conditions (i)-(iii) of the verification theorem on a tensor
/// grid. phi = e^{-rho s} v(x), so L phi = e^{-rho s} ((A - rho) v)(x).
/// Stencils never straddle a threshold: within two steps of one they become
/// one-sided on the side of the evaluation point.
inline VerificationReport verify_conditions(const ValueFunction& vf, const Problem& pb, const VerifyGrid& grid,
                                            const VerifyTolerances& tol = {}) {
  const std::size_t n = pb.size();
  if (vf.size() != n) throw InvalidParameter("verify_conditions: value function / problem dimension mismatch");
  if (grid.lo.size() != n || grid.hi.size() != n)
    throw InvalidParameter("verify_conditions: grid bounds must have one entry per component");
  if (grid.points_per_axis == 0) throw InvalidParameter("verify_conditions: empty grid");
  for (std::size_t i = 0; i < n; ++i) {
    if (!(grid.lo[i] > 0.0)) throw DomainError("verify_conditions: grid must lie in (0, inf)");
    if (grid.hi[i] < grid.lo[i]) throw InvalidParameter("verify_conditions: grid hi < lo");
  }

  VerificationReport rep;
  const double disc = std::exp(-pb.rho() * grid.s);
  std::vector<std::vector<double>> axes(n);
  for (std::size_t i = 0; i < n; ++i) axes[i] = numerics::linear_grid(grid.lo[i], grid.hi[i], grid.points_per_axis);

  std::vector<std::size_t> idx(n, 0);
  std::vector<double> x(n), margin(n);
  for (bool done = false; !done;) {
    for (std::size_t i = 0; i < n; ++i) x[i] = axes[i][idx[i]];
    const double v = vf.stationary(x);
    const double phi = disc * v;
    double av = 0.0;  // sum_i b_i v_i' + 1/2 sigma_i^2 v_i''
    bool in_d = true;
    for (std::size_t i = 0; i < n; ++i) {
      // phi is a sum over components, so d/dx_i only sees v_i. Each branch is
      // smooth, so the stencil stays on the branch that owns x_i. Below a
      // threshold v_i is close to linear near 0 and a step proportional to x_i
      // would let roundoff grow like 1/x_i; the step scales with x* instead.
      const auto k = vf.threshold(i);
      const bool lower = k && x[i] <= *k;
      const double h = lower ? std::min(tol.rel_step * *k, 0.125 * x[i]) : tol.rel_step * x[i];
      const Branch br = lower || !k ? Branch::Lower : Branch::Upper;
      auto f = [&](double t) { return vf.branch(i, t, br); };
      numerics::Derivs d;
      if (k && std::abs(x[i] - *k) < 2.0 * h * (1.0 + 1e-12))
        d = numerics::one_sided_derivs(f, x[i], h, lower ? numerics::Side::Left : numerics::Side::Right);
      else
        d = numerics::central_derivs(f, x[i], h);
      const auto& dyn = pb.dynamics(i);
      const double b = drift(dyn, x[i]);
      const double sg = volatility(dyn, x[i]);
      av += b * d.d1 + 0.5 * sg * sg * d.d2;

      const double pi = disc * price(pb.price_fn(i), x[i]);
      margin[i] = disc * d.d1 - pi;
      const double scale_i = tol.cond_i * std::max(1.0, pi);
      rep.cond_i.record(-margin[i], scale_i, x);
      if (!(margin[i] > scale_i)) in_d = false;
    }
    const double gen = disc * (av - pb.rho() * v);
    const double scale = pb.rho() * std::max(1.0, phi);
    rep.cond_ii.record(gen, tol.cond_ii * scale, x);
    if (in_d) {
      ++rep.n_in_d;
      rep.max_abs_generator_in_d = std::max(rep.max_abs_generator_in_d, std::abs(gen));
      rep.cond_iii.record(std::abs(gen), tol.cond_iii * scale, x);
    }
    ++rep.n_points;
    if (grid.keep_points) rep.points.push_back({x, phi, gen, margin, in_d});

    for (std::size_t i = 0;; ++i) {
      if (i == n) {
        done = true;
        break;
      }
      if (++idx[i] < axes[i].size()) break;
      idx[i] = 0;
    }
  }

  for (std::size_t i = 0; i < n; ++i) {
    if (!vf.threshold(i)) continue;
    rep.pasting.push_back(smooth_pasting(vf, i, tol.rel_step, tol.pasting));
    rep.pasting_pass = rep.pasting_pass && rep.pasting.back().pass;
  }
  return rep;
}

}  // namespace harvest
