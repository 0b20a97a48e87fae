#pragma once

// Small numerical toolbox shared by the solvers and the verifier: log-grid
// sign scans, bisection, Newton polishing, finite-difference stencils and
// compensated summation.

#include <cmath>
#include <cstddef>
#include <limits>
#include <utility>
#include <vector>

#include "harvest/errors.hpp"

namespace harvest::numerics {

inline std::vector<double> log_grid(double lo, double hi, std::size_t n) {
  if (!(lo > 0.0) || !(hi > lo) || n < 2) throw InvalidParameter("log_grid: need 0 < lo < hi and n >= 2");
  std::vector<double> g(n);
  const double a = std::log(lo), b = std::log(hi);
  for (std::size_t k = 0; k < n; ++k) g[k] = std::exp(a + (b - a) * static_cast<double>(k) / static_cast<double>(n - 1));
  g.front() = lo;
  g.back() = hi;
  return g;
}

inline std::vector<double> linear_grid(double lo, double hi, std::size_t n) {
  if (n == 1) return {lo};
  std::vector<double> g(n);
  for (std::size_t k = 0; k < n; ++k) g[k] = lo + (hi - lo) * static_cast<double>(k) / static_cast<double>(n - 1);
  g.back() = hi;
  return g;
}

struct Bracket {
  double lo;
  double hi;
  double f_lo;
  double f_hi;
};

/// All sign changes of f between consecutive points of a log grid on [lo, hi].
/// Non-finite samples break the chain (a pole is never reported as a bracket).
template <class F>
std::vector<Bracket> scan_sign_changes(F&& f, double lo, double hi, std::size_t n) {
  std::vector<Bracket> out;
  const auto grid = log_grid(lo, hi, n);
  double x_prev = grid[0];
  double f_prev = f(x_prev);
  for (std::size_t k = 1; k < grid.size(); ++k) {
    const double x = grid[k];
    const double fx = f(x);
    if (std::isfinite(f_prev) && std::isfinite(fx) && ((f_prev < 0.0) != (fx < 0.0)))
      out.push_back({x_prev, x, f_prev, fx});
    x_prev = x;
    f_prev = fx;
  }
  return out;
}

/// Bisection on a bracket with f(lo), f(hi) of opposite sign. Stops when the
/// bracket is narrower than xtol or cannot be split further.
template <class F>
double bisect(F&& f, Bracket b, double xtol) {
  double lo = b.lo, hi = b.hi, flo = b.f_lo;
  if ((b.f_lo < 0.0) == (b.f_hi < 0.0)) throw NumericError("bisect: endpoints do not bracket a root");
  for (int it = 0; it < 400 && hi - lo > xtol; ++it) {
    const double mid = 0.5 * (lo + hi);
    if (mid <= lo || mid >= hi) break;
    const double fm = f(mid);
    if (fm == 0.0) return mid;
    if ((fm < 0.0) == (flo < 0.0)) {
      lo = mid;
      flo = fm;
    } else {
      hi = mid;
    }
  }
  return 0.5 * (lo + hi);
}

/// A few Newton steps; a step that leaves [lo, hi] or worsens |f| is rejected.
template <class F, class DF>
double newton_polish(F&& f, DF&& df, double x, double lo, double hi, int steps) {
  double fx = f(x);
  for (int k = 0; k < steps; ++k) {
    const double d = df(x);
    if (!(std::abs(d) > 0.0) || !std::isfinite(d)) break;
    const double next = x - fx / d;
    if (!(next > lo && next < hi)) break;
    const double fn = f(next);
    if (!(std::abs(fn) <= std::abs(fx))) break;
    x = next;
    fx = fn;
  }
  return x;
}

struct Derivs {
  double d1;
  double d2;
};

/// Fourth-order central stencil on x +- h, x +- 2h.
template <class F>
Derivs central_derivs(F&& f, double x, double h) {
  const double fm2 = f(x - 2 * h), fm1 = f(x - h), f0 = f(x), fp1 = f(x + h), fp2 = f(x + 2 * h);
  return {(fm2 - 8 * fm1 + 8 * fp1 - fp2) / (12 * h),
          (-fm2 + 16 * fm1 - 30 * f0 + 16 * fp1 - fp2) / (12 * h * h)};
}

enum class Side { Left, Right };

/// Fourth-order one-sided stencils using x, x -+ h, ..., x -+ 5h.
template <class F>
Derivs one_sided_derivs(F&& f, double x, double h, Side side) {
  const double s = side == Side::Right ? h : -h;
  double v[6];
  for (int k = 0; k < 6; ++k) v[k] = f(x + k * s);
  const double d1 = (-25 * v[0] + 48 * v[1] - 36 * v[2] + 16 * v[3] - 3 * v[4]) / (12 * s);
  const double d2 = (45 * v[0] - 154 * v[1] + 214 * v[2] - 156 * v[3] + 61 * v[4] - 10 * v[5]) / (12 * h * h);
  return {d1, d2};
}

/// Neumaier compensated summation; order-dependent only through its inputs.
class CompensatedSum {
 public:
  void add(double v) noexcept {
    const double t = sum_ + v;
    if (std::abs(sum_) >= std::abs(v))
      comp_ += (sum_ - t) + v;
    else
      comp_ += (v - t) + sum_;
    sum_ = t;
  }
  double value() const noexcept { return sum_ + comp_; }

 private:
  double sum_ = 0.0;
  double comp_ = 0.0;
};

}  // namespace harvest::numerics
