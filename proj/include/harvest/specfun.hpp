#pragma once

// Kummer's confluent hypergeometric function M(a, b, z) and the increasing
// fundamental solution psi of (A - rho) u = 0 for the logistic diffusion
//   A = 1/2 sigma^2 x^2 d^2/dx^2 + mu x (1 - x/K) d/dx.

#include <cmath>
#include <string>

#include "harvest/errors.hpp"

namespace harvest {

/// Largest |z| accepted by kummer_m. Beyond it the plain series is not trusted.
inline constexpr double kKummerMaxAbsZ = 50.0;

namespace detail {

// Sum_k (a)_k z^k / ((b)_k k!) for z >= 0 via the term recurrence.
inline double kummer_series(double a, double b, double z) {
  constexpr int kMaxTerms = 10000;
  constexpr double kRelTol = 1e-16;
  double term = 1.0;
  double sum = 1.0;
  double comp = 0.0;
  for (int k = 0; k < kMaxTerms; ++k) {
    const double ratio = (a + k) * z / ((b + k) * (k + 1));
    term *= ratio;
    // Neumaier step; terms may alternate in sign while k < -a.
    const double t = sum + term;
    comp += std::abs(sum) >= std::abs(term) ? (sum - t) + term : (term - t) + sum;
    sum = t;
    if (term == 0.0) return sum + comp;
    if (std::abs(term) < kRelTol * std::abs(sum) && k + 1 > -a && std::abs(ratio) < 0.5) return sum + comp;
  }
  throw NumericError("kummer_m: series did not converge in 10000 terms (a=" + std::to_string(a) +
                     ", b=" + std::to_string(b) + ", z=" + std::to_string(z) + ")");
}

inline bool is_nonpositive_integer(double b) { return b <= 0.0 && b == std::floor(b); }

}  // namespace detail

/// M(a, b, z) for |z| <= 50. Negative z goes through Kummer's transformation
/// M(a, b, z) = e^z M(b - a, b, -z) so that the series never cancels.
inline double kummer_m(double a, double b, double z) {
  if (!std::isfinite(a) || !std::isfinite(b) || !std::isfinite(z))
    throw DomainError("kummer_m: non-finite argument");
  if (detail::is_nonpositive_integer(b)) throw DomainError("kummer_m: b must not be zero or a negative integer");
  if (std::abs(z) > kKummerMaxAbsZ)
    throw RangeError("kummer_m: |z| = " + std::to_string(std::abs(z)) + " exceeds supported range 50");
  if (z == 0.0 || a == 0.0) return 1.0;
  if (z > 0.0) return detail::kummer_series(a, b, z);
  return std::exp(z) * detail::kummer_series(b - a, b, -z);
}

/// dM/dz = (a/b) M(a + 1, b + 1, z).
inline double kummer_m_dz(double a, double b, double z) {
  if (a == 0.0) return 0.0;
  return a / b * kummer_m(a + 1.0, b + 1.0, z);
}

/// Parameters of psi(x) = x^theta M(theta, b_param, z_scale x).
struct PsiParams {
  double theta_exp;
  double b_param;
  double z_scale;
  double mu;
  double sigma;
  double K;
  double rho;
};

inline PsiParams make_psi_params(double mu, double K, double sigma, double rho) {
  if (!(mu > 0.0) || !(K > 0.0) || !(sigma > 0.0) || !(rho > 0.0) || !std::isfinite(mu) || !std::isfinite(K) ||
      !std::isfinite(sigma) || !std::isfinite(rho))
    throw InvalidParameter("psi params: mu, K, sigma, rho must be positive and finite");
  const double s2 = sigma * sigma;
  const double q = 0.5 - mu / s2;
  const double r = 2.0 * rho / s2;
  const double root = std::sqrt(q * q + r);
  // q + root loses digits when q << 0; use the conjugate form there.
  const double theta = q >= 0.0 ? q + root : r / (root - q);
  return {theta, 2.0 * theta + 2.0 * mu / s2, 2.0 * mu / (K * s2), mu, sigma, K, rho};
}

struct PsiValue {
  double value;
  double d1;
  double d2;
};

/// psi and its first two derivatives from the term-wise differentiated series.
inline PsiValue psi_all(double x, const PsiParams& p) {
  if (!(x > 0.0)) throw DomainError("psi: x must be positive");
  const double th = p.theta_exp, b = p.b_param, c = p.z_scale;
  const double z = c * x;
  const double m0 = kummer_m(th, b, z);
  const double m1 = kummer_m(th + 1.0, b + 1.0, z);
  const double m2 = kummer_m(th + 2.0, b + 2.0, z);
  const double xt = std::pow(x, th);
  const double g1 = c * th / b * m1;                                  // d/dx M(th, b, c x)
  const double g2 = c * c * th * (th + 1.0) / (b * (b + 1.0)) * m2;  // d^2/dx^2
  return {xt * m0,
          xt * (th / x * m0 + g1),
          xt * (th * (th - 1.0) / (x * x) * m0 + 2.0 * th / x * g1 + g2)};
}

inline double psi(double x, const PsiParams& p) {
  if (!(x > 0.0)) throw DomainError("psi: x must be positive");
  return std::pow(x, p.theta_exp) * kummer_m(p.theta_exp, p.b_param, p.z_scale * x);
}

struct PsiDerivs {
  double d1;
  double d2;
};

inline PsiDerivs psi_derivs(double x, const PsiParams& p) {
  const auto v = psi_all(x, p);
  return {v.d1, v.d2};
}

}  // namespace harvest
