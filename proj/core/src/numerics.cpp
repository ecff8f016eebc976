#include "spheresel/numerics.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <numbers>
#include <string>

#include "spheresel/error.hpp"

namespace spheresel::numerics {

namespace {

constexpr double kLogTwoPi = 1.8378770664093454836;  // ln(2π)

// Stirling series for ln Γ(x), accurate to ~1e-17 relative for x ≥ 10.
double log_gamma_stirling(double x) {
  const double inv = 1.0 / x;
  const double inv2 = inv * inv;
  const double series =
      inv * (1.0 / 12.0 +
             inv2 * (-1.0 / 360.0 +
                     inv2 * (1.0 / 1260.0 +
                             inv2 * (-1.0 / 1680.0 +
                                     inv2 * (1.0 / 1188.0 +
                                             inv2 * (-691.0 / 360360.0 +
                                                     inv2 * (1.0 / 156.0)))))));
  return (x - 0.5) * std::log(x) - x + 0.5 * kLogTwoPi + series;
}

// Debye polynomials u_k(t), k = 0..6. Row k holds the coefficients of
// t^k, t^{k+2}, ..., t^{3k}.
constexpr std::array<std::array<double, 7>, 7> kDebye = {{
    {1.0},
    {0.125, -0.20833333333333334},
    {0.0703125, -0.4010416666666667, 0.3342013888888889},
    {0.0732421875, -0.8912109375, 1.8464626736111112, -1.0258125964506173},
    {0.112152099609375, -2.3640869140625, 8.78912353515625, -11.207002616222994,
     4.669584423426247},
    {0.22710800170898438, -7.368794359479632, 42.53499874538846,
     -91.81824154324002, 84.63621767460073, -28.212072558200244},
    {0.5725014209747314, -26.491430486951554, 218.1905117442116,
     -699.5796273761325, 1059.9904525279999, -765.2524681411817,
     212.57013003921713},
}};

// Below this order the Debye expansion is not accurate to 1e-8; the series
// branch is used instead (it stays exact, only slower for huge x).
constexpr double kDebyeMinOrder = 10.0;

void require_bessel_domain(double nu, double x) {
  if (!(nu >= -0.5) || !std::isfinite(nu)) {
    throw DomainError("log_bessel_i: order must be finite and >= -0.5, got " +
                      std::to_string(nu));
  }
  if (!(x > 0.0) || !std::isfinite(x)) {
    throw DomainError("log_bessel_i: argument must be finite and > 0, got " +
                      std::to_string(x));
  }
}

double beta_continued_fraction(double a, double b, double x) {
  constexpr int kMaxIter = 500;
  constexpr double kEps = 1e-16;
  constexpr double kTiny = 1e-300;
  const double qab = a + b;
  const double qap = a + 1.0;
  const double qam = a - 1.0;
  double c = 1.0;
  double d = 1.0 - qab * x / qap;
  if (std::abs(d) < kTiny) d = kTiny;
  d = 1.0 / d;
  double h = d;
  for (int m = 1; m <= kMaxIter; ++m) {
    const int m2 = 2 * m;
    double aa = m * (b - m) * x / ((qam + m2) * (a + m2));
    d = 1.0 + aa * d;
    if (std::abs(d) < kTiny) d = kTiny;
    c = 1.0 + aa / c;
    if (std::abs(c) < kTiny) c = kTiny;
    d = 1.0 / d;
    h *= d * c;
    aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
    d = 1.0 + aa * d;
    if (std::abs(d) < kTiny) d = kTiny;
    c = 1.0 + aa / c;
    if (std::abs(c) < kTiny) c = kTiny;
    d = 1.0 / d;
    const double del = d * c;
    h *= del;
    if (std::abs(del - 1.0) < kEps) return h;
  }
  throw DomainError("regularized_incomplete_beta: continued fraction did not converge");
}

}  // namespace

double log_gamma(double x) {
  if (!(x > 0.0) || !std::isfinite(x)) {
    throw DomainError("log_gamma: argument must be finite and > 0, got " + std::to_string(x));
  }
  if (x >= 10.0) return log_gamma_stirling(x);
  // Shift up with Γ(x) = Γ(x + n) / (x (x+1) ... (x+n-1)).
  double product = 1.0;
  double shifted = x;
  while (shifted < 10.0) {
    product *= shifted;
    shifted += 1.0;
  }
  return log_gamma_stirling(shifted) - std::log(product);
}

namespace detail {

double log_bessel_i_series(double nu, double x) {
  require_bessel_domain(nu, x);
  // I_ν(x) = Σ_m (x/2)^{2m+ν} / (m! Γ(m+ν+1)). All terms are positive, so
  // the sum is formed around its largest term, scaled to 1.
  const double half_x = 0.5 * x;
  const double q = half_x * half_x;
  const double log_half_x = std::log(half_x);
  const double peak_real = 0.5 * (-(nu + 2.0) + std::sqrt(nu * nu + x * x));
  const double peak = std::max(0.0, std::ceil(peak_real));

  const double log_peak_term =
      (2.0 * peak + nu) * log_half_x - log_gamma(peak + 1.0) - log_gamma(peak + nu + 1.0);

  constexpr double kRelStop = 1e-18;
  double sum = 1.0;
  double term = 1.0;
  for (double m = peak;; m += 1.0) {
    term *= q / ((m + 1.0) * (m + nu + 1.0));
    sum += term;
    if (term < kRelStop * sum) break;
  }
  term = 1.0;
  for (double m = peak; m > 0.0; m -= 1.0) {
    // ratio t_{m-1} / t_m
    term *= (m * (m + nu)) / q;
    sum += term;
    if (term < kRelStop * sum) break;
  }
  return log_peak_term + std::log(sum);
}

double log_bessel_i_debye(double nu, double x) {
  require_bessel_domain(nu, x);
  if (nu <= 0.0) {
    throw DomainError("log_bessel_i_debye: requires positive order");
  }
  const double z = x / nu;
  const double root = std::sqrt(1.0 + z * z);
  const double t = 1.0 / root;
  const double eta = root + std::log(z / (1.0 + root));
  const double t2 = t * t;

  double series = 0.0;
  double inv_nu_pow = 1.0;
  double t_pow = 1.0;  // t^k
  for (std::size_t k = 0; k < kDebye.size(); ++k) {
    double poly = 0.0;
    double tp = t_pow;
    for (std::size_t i = 0; i <= k; ++i) {
      poly += kDebye[k][i] * tp;
      tp *= t2;
    }
    series += poly * inv_nu_pow;
    inv_nu_pow /= nu;
    t_pow *= t;
  }
  return nu * eta - 0.5 * (kLogTwoPi + std::log(nu)) + 0.5 * std::log(t) + std::log(series);
}

}  // namespace detail

double log_bessel_i(double nu, double x) {
  require_bessel_domain(nu, x);
  if (x <= std::max(30.0, 2.0 * nu) || nu < kDebyeMinOrder) {
    return detail::log_bessel_i_series(nu, x);
  }
  return detail::log_bessel_i_debye(nu, x);
}

double std_normal_cdf(double x) {
  if (std::isnan(x)) throw DomainError("std_normal_cdf: NaN argument");
  return 0.5 * std::erfc(-x * std::numbers::sqrt2 * 0.5);
}

double regularized_incomplete_beta(double a, double b, double w) {
  if (!(a > 0.0) || !(b > 0.0) || !std::isfinite(a) || !std::isfinite(b)) {
    throw DomainError("regularized_incomplete_beta: shape parameters must be > 0");
  }
  if (!(w >= 0.0 && w <= 1.0)) {
    throw DomainError("regularized_incomplete_beta: w must lie in [0, 1], got " +
                      std::to_string(w));
  }
  if (w == 0.0) return 0.0;
  if (w == 1.0) return 1.0;
  const double log_front = log_gamma(a + b) - log_gamma(a) - log_gamma(b) + a * std::log(w) +
                           b * std::log1p(-w);
  const double front = std::exp(log_front);
  if (w < (a + 1.0) / (a + b + 2.0)) {
    return front * beta_continued_fraction(a, b, w) / a;
  }
  return 1.0 - front * beta_continued_fraction(b, a, 1.0 - w) / b;
}

double extreme_value_centering(long long k) {
  if (k < 2) {
    throw DomainError("extreme_value_centering: k must be >= 2, got " + std::to_string(k));
  }
  const double log_k = std::log(static_cast<double>(k));
  const double root = std::sqrt(2.0 * log_k);
  return root - (std::log(log_k) + std::log(4.0 * std::numbers::pi)) / (2.0 * root);
}

double gumbel_from_uniform(double u) {
  if (!(u > 0.0 && u < 1.0)) {
    throw DomainError("gumbel_from_uniform: u must lie in (0, 1), got " + std::to_string(u));
  }
  return -std::log(-std::log(u));
}

}  // namespace spheresel::numerics
