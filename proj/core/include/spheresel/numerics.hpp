#pragma once

// Special functions used by the threshold solver and the screening rules.
// Everything here is a pure function of its arguments.

#include <cmath>

namespace spheresel::numerics {

// Natural log of a positive quantity. Used where the linear-space value would
// overflow or underflow (Bessel terms at large order, Gamma at large argument).
struct LogValue {
  double log_magnitude = 0.0;

  static LogValue from_linear(double x) { return LogValue{std::log(x)}; }
  double linear() const { return std::exp(log_magnitude); }

  friend LogValue operator*(LogValue a, LogValue b) {
    return LogValue{a.log_magnitude + b.log_magnitude};
  }
  friend LogValue operator/(LogValue a, LogValue b) {
    return LogValue{a.log_magnitude - b.log_magnitude};
  }
  friend bool operator==(LogValue, LogValue) = default;
};

// ln Γ(x) for x > 0.
double log_gamma(double x);

// ln I_ν(x), the modified Bessel function of the first kind, for ν ≥ -1/2 and
// x > 0. Log-space power series for x ≤ max(30, 2ν) (and for small orders),
// Debye uniform expansion for large order beyond that.
double log_bessel_i(double nu, double x);

namespace detail {
// Both branches are exposed so tests can cross-check the switchover region.
double log_bessel_i_series(double nu, double x);
double log_bessel_i_debye(double nu, double x);
}  // namespace detail

// Φ(x). Saturates to exactly 0 or 1 far in the tails.
double std_normal_cdf(double x);

// I_w(a, b) = ∫₀ʷ t^{a-1}(1-t)^{b-1} dt / B(a, b).
double regularized_incomplete_beta(double a, double b, double w);

// c_k = √(2 ln k) − (ln ln k + ln 4π) / (2√(2 ln k)), the extreme-value
// centering for the minimum of k standard normals. Raw formula; may be
// negative for small k. Callers pass the shifted argument they need.
double extreme_value_centering(long long k);

// −ln(−ln u): maps a standard uniform to a standard Gumbel variate.
double gumbel_from_uniform(double u);

}  // namespace spheresel::numerics
