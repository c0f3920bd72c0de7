#pragma once

#include <cmath>
#include <limits>
#include <stdexcept>
#include <numbers>
#include <vector>

#include <boost/math/special_functions/gamma.hpp>

#include "jcas/quadrature.hpp"

namespace jcas {

/// Density of Gamma(shape, scale) at y >= 0, evaluated in log space so that
/// large shapes (high Gamma orders) do not overflow.
inline double gamma_pdf(double y, double shape, double scale) {
  if (!(scale > 0.0) || !(shape > 0.0)) throw std::domain_error("gamma_pdf: shape and scale must be positive");
  if (y < 0.0) return 0.0;
  if (y == 0.0) {
    if (shape == 1.0) return 1.0 / scale;
    return shape < 1.0 ? std::numeric_limits<double>::infinity() : 0.0;
  }
  const double log_pdf = (shape - 1.0) * std::log(y) - y / scale - shape * std::log(scale) - std::lgamma(shape);
  return std::exp(log_pdf);
}

/// P(Gamma(shape, scale) <= y).
inline double gamma_cdf(double y, double shape, double scale) {
  if (y <= 0.0) return 0.0;
  if (std::isinf(y)) return 1.0;
  return boost::math::gamma_p(shape, y / scale);
}

/// Upper bound on sum_{i >= first} P(Gamma(i, scale) <= y) for integer orders
/// past the mean. Uses P(i+1, x) <= P(i, x) * x / (i + 1), valid once x < i + 1.
/// Returns +inf when the geometric bound does not apply yet.
inline double gamma_cdf_tail_sum(double y, std::size_t first, double scale) {
  const double x = y / scale;
  const double ratio = x / (static_cast<double>(first) + 1.0);
  if (ratio >= 1.0) return std::numeric_limits<double>::infinity();
  return gamma_cdf(y, static_cast<double>(first), scale) / (1.0 - ratio);
}

/// 2F1(1, b; 1 + b; -z) for z >= 0 and 0 < b < 1.
///
/// Small z: the hypergeometric series. Large z: the reflection
///   b * [ pi z^-b / sin(pi b) - sum_n (-1)^n z^-(n+1) / (n + 1 - b) ].
/// In between: b * int_0^1 t^(b-1) / (1 + z t) dt written as
/// int_0^1 dv / (1 + z v^(1/b)) which has a smooth integrand.
inline double hyp2f1_unit_a(double b, double z, double abs_tol = 1e-12) {
  if (!(b > 0.0 && b < 1.0)) throw std::domain_error("hyp2f1_unit_a: need 0 < b < 1");
  if (z < 0.0) throw std::domain_error("hyp2f1_unit_a: need z >= 0");
  if (z == 0.0) return 1.0;
  if (z <= 0.5) {
    double sum = 0.0, power = 1.0;
    for (int n = 0; n < 200; ++n) {
      const double term = b / (b + n) * power;
      sum += term;
      if (std::abs(term) < 1e-17) break;
      power *= -z;
    }
    return sum;
  }
  if (z >= 2.0) {
    double sum = 0.0, power = 1.0 / z;
    for (int n = 0; n < 400; ++n) {
      const double term = power / (n + 1.0 - b);
      sum += (n % 2 == 0) ? term : -term;
      if (term < 1e-18) break;
      power /= z;
    }
    return b * (std::numbers::pi * std::pow(z, -b) / std::sin(std::numbers::pi * b) - sum);
  }
  auto r = integrate([&](double v) { return 1.0 / (1.0 + z * std::pow(v, 1.0 / b)); }, 0.0, 1.0, abs_tol);
  return r.value;
}

/// Signed weights (-1)^(k+1) C(nu, k), k = 1..nu, of the exponential-sum
/// upper bound on the Gamma(nu, 1/nu) ccdf. The bound is exact for nu = 1.
inline std::vector<double> alzer_weights(int nu) {
  if (nu < 1) throw std::domain_error("alzer_weights: nu must be >= 1");
  std::vector<double> w(static_cast<std::size_t>(nu));
  double binom = 1.0;
  for (int k = 1; k <= nu; ++k) {
    binom = binom * (nu - k + 1) / k;
    w[static_cast<std::size_t>(k - 1)] = (k % 2 == 1) ? binom : -binom;
  }
  return w;
}

/// nu * (nu!)^(-1/nu).
inline double alzer_rate(int nu) {
  return nu * std::exp(-std::lgamma(nu + 1.0) / nu);
}

} // namespace jcas
