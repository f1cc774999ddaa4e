#pragma once

#include <algorithm>
#include <cmath>
#include <limits>

#include "pcout/error.hpp"

namespace pcout {

namespace detail {

// Regularized lower incomplete gamma P(a, x) by its power series; converges fast for x < a + 1.
inline double gamma_p_series(double a, double x) {
  double term = 1.0 / a;
  double sum = term;
  for (int k = 1; k < 10000; ++k) {
    term *= x / (a + k);
    sum += term;
    if (std::fabs(term) < std::fabs(sum) * 1e-17) break;
  }
  return sum * std::exp(-x + a * std::log(x) - std::lgamma(a));
}

// Regularized upper incomplete gamma Q(a, x) by its continued fraction (modified Lentz).
inline double gamma_q_fraction(double a, double x) {
  constexpr double tiny = 1e-300;
  double b = x + 1.0 - a;
  double c = 1.0 / tiny;
  double d = 1.0 / b;
  double h = d;
  for (int i = 1; i < 10000; ++i) {
    const double an = -i * (i - a);
    b += 2.0;
    d = an * d + b;
    if (std::fabs(d) < tiny) d = tiny;
    c = b + an / c;
    if (std::fabs(c) < tiny) c = tiny;
    d = 1.0 / d;
    const double delta = d * c;
    h *= delta;
    if (std::fabs(delta - 1.0) < 1e-16) break;
  }
  return std::exp(-x + a * std::log(x) - std::lgamma(a)) * h;
}

inline double gamma_p(double a, double x) {
  if (x <= 0.0) return 0.0;
  if (x < a + 1.0) return gamma_p_series(a, x);
  return 1.0 - gamma_q_fraction(a, x);
}

inline double gamma_q(double a, double x) {
  if (x <= 0.0) return 1.0;
  if (x < a + 1.0) return 1.0 - gamma_p_series(a, x);
  return gamma_q_fraction(a, x);
}

inline double chi2_density(double x, double df) {
  if (x <= 0.0) return 0.0;
  const double k = 0.5 * df;
  return std::exp((k - 1.0) * std::log(x) - 0.5 * x - k * std::log(2.0) - std::lgamma(k));
}

} // namespace detail

// P(X <= x) for X ~ chi-square with df degrees of freedom.
inline double chi2_cdf(double x, double df) {
  if (!(df > 0.0) || !std::isfinite(df)) fail_config("chi-square cdf", "degrees of freedom must be positive");
  if (std::isnan(x) || x < 0.0) fail_config("chi-square cdf", "argument must be nonnegative");
  if (std::isinf(x)) return 1.0;
  return detail::gamma_p(0.5 * df, 0.5 * x);
}

// Inverse of chi2_cdf. Newton steps on the cdf, kept inside a shrinking
// bisection bracket so that a poor step can never leave the root's interval.
inline double chi2_quantile(double prob, double df) {
  if (!(df > 0.0) || !std::isfinite(df)) fail_config("chi-square quantile", "degrees of freedom must be positive");
  if (!(prob > 0.0 && prob < 1.0)) fail_config("chi-square quantile", "probability must lie strictly inside (0, 1)");

  // Wilson-Hilferty starting point from a rough normal quantile.
  const double t = std::sqrt(-2.0 * std::log(prob < 0.5 ? prob : 1.0 - prob));
  double z = t - (2.515517 + 0.802853 * t + 0.010328 * t * t) /
                     (1.0 + 1.432788 * t + 0.189269 * t * t + 0.001308 * t * t * t);
  if (prob < 0.5) z = -z;
  const double h = 2.0 / (9.0 * df);
  double x = df * std::pow(std::max(1.0 - h + z * std::sqrt(h), 1e-3), 3.0);

  double lo = 0.0;
  double hi = std::max(2.0 * x, df + 10.0 * std::sqrt(2.0 * df) + 10.0);
  while (chi2_cdf(hi, df) < prob) {
    lo = hi;
    hi *= 2.0;
  }
  if (!(x > lo && x < hi)) x = 0.5 * (lo + hi);

  for (int iter = 0; iter < 200; ++iter) {
    // cdf(x) - prob, evaluated on whichever tail is smaller to keep relative precision
    const double err = prob < 0.5 ? chi2_cdf(x, df) - prob
                                  : (1.0 - prob) - detail::gamma_q(0.5 * df, 0.5 * x);
    if (err > 0.0)
      hi = x;
    else
      lo = x;
    const double dens = detail::chi2_density(x, df);
    double next = dens > 0.0 ? x - err / dens : 0.5 * (lo + hi);
    if (!(next > lo && next < hi) || !std::isfinite(next)) next = 0.5 * (lo + hi);
    const double step = std::fabs(next - x);
    x = next;
    if (step <= 1e-14 * x || hi - lo <= 1e-15 * hi) break;
  }
  return x;
}

} // namespace pcout
