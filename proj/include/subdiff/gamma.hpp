#pragma once

// Euler gamma function in double precision via the Lanczos approximation
// (g = 7, nine terms), extended to negative arguments by reflection.

#include <array>
#include <cmath>
#include <limits>
#include <numbers>
#include <sstream>

#include "subdiff/error.hpp"

namespace subdiff::special {

/// sin(pi x) with exact zeros at the integers.
inline double sin_pi(double x) {
  if (!std::isfinite(x)) return std::numeric_limits<double>::quiet_NaN();
  if (x == std::floor(x)) return 0.0;
  double r = std::fmod(x, 2.0);
  if (r < -1.0) r += 2.0;
  else if (r > 1.0) r -= 2.0;
  if (r > 0.5) r = 1.0 - r;
  else if (r < -0.5) r = -1.0 - r;
  return std::sin(std::numbers::pi * r);
}

inline double cos_pi(double x) { return sin_pi(x + 0.5); }

inline bool is_nonpositive_integer(double x) {
  return x <= 0.0 && x == std::floor(x);
}

namespace detail {

inline constexpr double lanczos_g = 7.0;
inline constexpr std::array<double, 9> lanczos_coef = {
    0.99999999999980993,     676.5203681218851,     -1259.1392167224028,
    771.32342877765313,      -176.61502916214059,   12.507343278686905,
    -0.13857109526572012,    9.9843695780195716e-6, 1.5056327351493116e-7};

// Series part A(z) of Gamma(z + 1) = sqrt(2 pi) t^(z + 1/2) e^-t A(z).
inline double lanczos_series(double z) {
  double a = lanczos_coef[0];
  for (std::size_t i = 1; i < lanczos_coef.size(); ++i)
    a += lanczos_coef[i] / (z + static_cast<double>(i));
  return a;
}

inline constexpr double half_log_two_pi = 0.91893853320467274178032973640562;

} // namespace detail

/// Natural log of |Gamma(x)|. Throws at the poles.
inline double log_abs_gamma(double x) {
  if (std::isnan(x)) return x;
  if (is_nonpositive_integer(x)) {
    std::ostringstream os;
    os << "log_abs_gamma: pole at " << x;
    throw DomainError(os.str());
  }
  if (x < 0.5) {
    return std::log(std::numbers::pi) - std::log(std::fabs(sin_pi(x))) -
           log_abs_gamma(1.0 - x);
  }
  const double z = x - 1.0;
  const double t = z + detail::lanczos_g + 0.5;
  return detail::half_log_two_pi + (z + 0.5) * std::log(t) - t +
         std::log(detail::lanczos_series(z));
}

/// Gamma(x). Overflows to +inf past x ~ 171.6; throws at the poles.
inline double gamma(double x) {
  if (std::isnan(x)) return x;
  if (is_nonpositive_integer(x)) {
    std::ostringstream os;
    os << "gamma: pole at " << x;
    throw DomainError(os.str());
  }
  if (x < 0.5) return std::numbers::pi / (sin_pi(x) * gamma(1.0 - x));
  if (x > 171.7) return std::numeric_limits<double>::infinity();
  if (x == std::floor(x) && x <= 23.0) {
    // exact factorials while (x-1)! fits in 53 bits
    double p = 1.0;
    for (double k = 2.0; k < x; k += 1.0) p *= k;
    return p;
  }
  const double z = x - 1.0;
  const double t = z + detail::lanczos_g + 0.5;
  // split the power so t^(z+1/2) cannot overflow before e^-t pulls it back
  const double half = std::pow(t, 0.5 * (z + 0.5));
  return std::sqrt(2.0 * std::numbers::pi) * half * (half * std::exp(-t)) *
         detail::lanczos_series(z);
}

/// log |1/Gamma(x)| together with the sign of 1/Gamma(x); sign is 0 exactly
/// at the poles of Gamma, where the reciprocal vanishes.
struct LogReciprocal {
  double log_abs;
  int sign;
};

inline LogReciprocal log_rgamma(double x) {
  if (is_nonpositive_integer(x))
    return {-std::numeric_limits<double>::infinity(), 0};
  int sign = 1;
  if (x < 0.0) {
    // sign of Gamma(x) on (-n-1, -n) is (-1)^(n+1)
    const double n = std::floor(-x);
    sign = (static_cast<long long>(n) % 2 == 0) ? -1 : 1;
  }
  return {-log_abs_gamma(x), sign};
}

/// 1/Gamma(x), entire; exactly zero at 0, -1, -2, ...
inline double rgamma(double x) {
  if (std::isnan(x)) return x;
  if (is_nonpositive_integer(x)) return 0.0;
  if (x >= 0.5) {
    if (x < 171.0) return 1.0 / gamma(x);
    return std::exp(-log_abs_gamma(x));
  }
  const double y = 1.0 - x;
  if (y < 171.0) return sin_pi(x) * gamma(y) / std::numbers::pi;
  const auto lr = log_rgamma(x);
  return lr.sign * std::exp(lr.log_abs);
}

} // namespace subdiff::special
