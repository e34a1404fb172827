#pragma once

// Two-parameter Mittag-Leffler function E_{rho,beta}(z) on the closed
// negative real half-line, plus the relaxation/kernel pair used by the
// fractional Volterra solvers:
//
//   relaxation(t) = E_{rho,1}(-lam t^rho)
//   kernel(t)     = lam t^(rho-1) E_{rho,rho}(-lam t^rho) = -d/dt relaxation(t)
//   kernel_mass   = integral of kernel over [a, b] = relaxation(a) - relaxation(b)
//
// Evaluation picks among four routes by their own error estimates:
//   * the defining power series, accepted when the cancellation it suffers
//     leaves the target relative accuracy intact;
//   * the algebraic asymptotic expansion truncated at its smallest term
//     (with the decaying exponential pair added when 1 < rho < 2);
//   * for 0 < rho < 1, the real-line integral representation
//       E(-x) = 1/(rho pi) int_0^inf chi^((1-beta)/rho) exp(-chi^(1/rho))
//               (chi sin(pi(1-beta)) + x sin(pi(1-beta+rho)))
//               / (chi^2 + 2 chi x cos(pi rho) + x^2) dchi      (beta < 1+rho)
//     reached by downward recurrence in beta when beta >= 1 + rho;
//   * for rho = 1, exp(-x) and the Euler integral for beta != 1.

#include <cmath>
#include <complex>
#include <limits>
#include <numbers>
#include <optional>
#include <sstream>
#include <vector>

#include "subdiff/error.hpp"
#include "subdiff/gamma.hpp"
#include "subdiff/quadrature.hpp"

namespace subdiff {

struct MlfParams {
  double rho = 1.0;
  double beta = 1.0;

  bool valid() const noexcept {
    return std::isfinite(rho) && rho > 0.0 && rho < 2.0 && std::isfinite(beta);
  }
};

namespace detail {

// Neumaier's variant of compensated summation.
class CompensatedSum {
public:
  void add(double v) {
    const double t = sum_ + v;
    if (std::fabs(sum_) >= std::fabs(v)) comp_ += (sum_ - t) + v;
    else comp_ += (v - t) + sum_;
    sum_ = t;
  }
  double value() const { return sum_ + comp_; }

private:
  double sum_ = 0.0;
  double comp_ = 0.0;
};

inline constexpr std::size_t mlf_series_cap = 500;
// Largest accepted ratio sum|terms| / |sum| times the per-term error.
inline constexpr double mlf_series_rel_target = 5e-13;
inline constexpr double mlf_term_rel_error = 1e-15;
inline constexpr double mlf_asymptotic_rel_target = 1e-14;
inline constexpr double mlf_integral_rel_tol = 1e-13;

// x^k / Gamma(k rho + beta) with the sign of 1/Gamma, overflow-safe.
inline double scaled_reciprocal_gamma(double log_x, double x, int k,
                                      double arg) {
  if (arg < 170.0 && arg > -170.0) {
    const double p = std::pow(x, k);
    if (std::isfinite(p) && p > 0.0) return p * special::rgamma(arg);
  }
  const auto lr = special::log_rgamma(arg);
  if (lr.sign == 0) return 0.0;
  return lr.sign * std::exp(k * log_x + lr.log_abs);
}

inline std::optional<double> mlf_series(double rho, double beta, double x) {
  const double log_x = std::log(x);
  CompensatedSum sum;
  double abs_sum = 0.0;
  int small_run = 0;
  bool terminated = false;
  for (std::size_t k = 0; k < mlf_series_cap; ++k) {
    const double mag = scaled_reciprocal_gamma(log_x, x, static_cast<int>(k),
                                               static_cast<double>(k) * rho + beta);
    if (!std::isfinite(mag) || std::fabs(mag) > 1e20) return std::nullopt;
    const double term = (k % 2 == 0) ? mag : -mag;
    sum.add(term);
    abs_sum += std::fabs(term);
    if (term == 0.0) continue; // pole of Gamma: reciprocal is exactly zero
    const double partial = std::fabs(sum.value());
    if (std::fabs(term) < 1e-16 * partial) {
      if (++small_run == 3) {
        terminated = true;
        break;
      }
    } else {
      small_run = 0;
    }
  }
  if (!terminated) return std::nullopt;
  const double value = sum.value();
  const double err = abs_sum * mlf_term_rel_error;
  if (err <= std::max(mlf_series_rel_target * std::fabs(value), 1e-17))
    return value;
  return std::nullopt;
}

// w^(1-beta) e^w summed over the conjugate pair w = x^(1/rho) e^(+-i pi/rho).
inline double mlf_pole_pair(double rho, double beta, double x) {
  const std::complex<double> w =
      std::pow(x, 1.0 / rho) *
      std::complex<double>(special::cos_pi(1.0 / rho), special::sin_pi(1.0 / rho));
  const std::complex<double> pw =
      std::pow(x, (1.0 - beta) / rho) *
      std::complex<double>(special::cos_pi((1.0 - beta) / rho),
                           special::sin_pi((1.0 - beta) / rho));
  return 2.0 / rho * std::real(pw * std::exp(w));
}

// log of a bound on |1/Gamma(y)| that, unlike |1/Gamma| itself, does not
// dip to zero between the poles: |sin(pi y)| Gamma(1-y)/pi <= Gamma(1-y)/pi for
// y < 0, and 1/Gamma <= 1/Gamma(1.4616...) on [0, 1.4616].
inline double log_reciprocal_gamma_bound(double y, special::LogReciprocal lr) {
  constexpr double gamma_min_arg = 1.4616321449683623;
  constexpr double log_rgamma_max = 0.12148629053584936; // -log Gamma(gamma_min_arg)
  if (y >= gamma_min_arg) return lr.log_abs;
  if (y >= 0.0) return log_rgamma_max;
  return special::log_abs_gamma(1.0 - y) - std::log(std::numbers::pi);
}

// Algebraic expansion sum_{n>=1} (-1)^(n+1) x^-n / Gamma(beta - n rho),
// truncated at its smallest envelope term, which bounds |term_n| and serves
// as the error estimate.
inline std::optional<double> mlf_asymptotic(double rho, double beta, double x) {
  const double log_x = std::log(x);
  constexpr std::size_t cap = 1000;
  CompensatedSum sum;
  double prev_env = std::numeric_limits<double>::infinity();
  double err = prev_env;
  for (std::size_t n = 1; n <= cap; ++n) {
    const double dn = static_cast<double>(n);
    const double y = beta - dn * rho;
    const auto lr = special::log_rgamma(y);
    const double log_env = -dn * log_x + log_reciprocal_gamma_bound(y, lr);
    const double env = std::exp(log_env);
    if (env > prev_env) break;
    err = env;
    if (env <= 1e-17 * std::fabs(sum.value())) break;
    prev_env = env;
    if (lr.sign == 0) continue;
    const double mag = lr.sign * std::exp(-dn * log_x + lr.log_abs);
    sum.add(n % 2 == 1 ? mag : -mag);
  }
  double value = sum.value();
  // exponentially small pair from the roots z^(1/rho) off the real axis
  if (rho > 1.0) value += mlf_pole_pair(rho, beta, x);
  if (value != 0.0 && err <= mlf_asymptotic_rel_target * std::fabs(value))
    return value;
  if (rho > 1.0 && err <= 1e-15) return value;
  return std::nullopt;
}

inline double mlf_negative(double rho, double beta, double x);

// rho in (0, 2) \ {1}, beta < 1 + rho. For rho > 1 the two poles of the
// Hankel-contour integrand enter the sector and contribute mlf_pole_pair.
inline double mlf_integral(double rho, double beta, double x) {
  const double a = (1.0 - beta) / rho;
  // chi = v^m flattens the chi^a endpoint singularity when a < 0
  const double m = a < 0.0 ? 1.0 / (1.0 + a) : 1.0;
  const double jac_power = a < 0.0 ? 0.0 : a; // m*a + m - 1 collapses to 0
  const double s1 = special::sin_pi(1.0 - beta);
  const double s2 = special::sin_pi(1.0 - beta + rho);
  const double c = special::cos_pi(rho);
  const double sn = special::sin_pi(rho);
  const double inv_rho = 1.0 / rho;
  const double chi_max = std::pow(50.0, rho);

  // For rho near 1 the denominator has a root p = x e^(i pi (1 - rho)) close to
  // the real axis and the integrand is a narrow Lorentzian. Its principal
  // part h(p) 2 Re[A / (chi - p)] is subtracted and integrated in closed form.
  const bool near_unit = std::fabs(rho - 1.0) < 0.1;
  const std::complex<double> p = std::polar(x, std::numbers::pi * (1.0 - rho));
  const std::complex<double> A = (p * s1 + x * s2) / (p - std::conj(p));
  const std::complex<double> h_p =
      std::polar(std::pow(x, a), std::numbers::pi * (1.0 - rho) * a) *
      std::exp(-std::polar(std::pow(x, inv_rho), std::numbers::pi * (1.0 - rho) * inv_rho));
  const std::complex<double> principal = A * h_p;

  auto integrand = [&](double v) {
    const double chi = m == 1.0 ? v : std::pow(v, m);
    const double num = chi * s1 + x * s2;
    // chi^2 + 2 chi x cos(pi rho) + x^2 without cancellation near the root
    const double den = (chi + x * c) * (chi + x * c) + (x * sn) * (x * sn);
    const double jac = (jac_power == 0.0 ? 1.0 : std::pow(v, jac_power)) * m;
    const double full = jac * std::exp(-std::pow(chi, inv_rho)) * num / den;
    if (!near_unit) return full;
    const double dchi = m == 1.0 ? 1.0 : m * std::pow(v, m - 1.0);
    return full - dchi * 2.0 * std::real(principal / (chi - p));
  };

  std::vector<double> chi_breaks{0.0};
  if (c < 0.0) {
    const double peak = -x * c;
    const double width = x * sn;
    for (double off : {-5.0, -1.0, 0.0, 1.0, 5.0}) {
      const double b = peak + off * width;
      if (b > chi_breaks.back() && b < chi_max) chi_breaks.push_back(b);
    }
  }
  chi_breaks.push_back(chi_max);
  std::vector<double> v_breaks;
  v_breaks.reserve(chi_breaks.size());
  for (double b : chi_breaks) v_breaks.push_back(m == 1.0 ? b : std::pow(b, 1.0 / m));

  const auto est = quadrature::integrate(integrand, std::span<const double>(v_breaks),
                                         mlf_integral_rel_tol, 1e-300);
  const double poles = rho > 1.0 ? mlf_pole_pair(rho, beta, x) : 0.0;
  double body = est.value;
  if (near_unit) body += 2.0 * std::real(principal * (std::log(chi_max - p) - std::log(-p)));
  const double value = body / (rho * std::numbers::pi) + poles;
  const double err = est.error / (rho * std::numbers::pi);
  if (!est.converged && err > 1e-12 * std::fabs(value) + 1e-16) {
    std::ostringstream os;
    os << "Mittag-Leffler integral did not converge (rho=" << rho
       << ", beta=" << beta << ", z=" << -x << ", est. error " << err << ")";
    throw ConvergenceError(os.str(), est.intervals, err);
  }
  return value;
}

// rho = 1.
inline double mlf_unit_order(double beta, double x) {
  if (beta == 1.0) return std::exp(-x);
  if (beta < 1.0) return special::rgamma(beta) - x * mlf_negative(1.0, beta + 1.0, x);
  // E_{1,beta}(-x) = 1/Gamma(beta) int_0^1 exp(-x (1 - u^(1/(beta-1)))) du
  const double p = 1.0 / (beta - 1.0);
  auto integrand = [&](double u) { return std::exp(-x * (1.0 - std::pow(u, p))); };
  std::vector<double> breaks{0.0};
  if (x > 50.0) {
    const double u0 = std::pow(1.0 - 50.0 / x, beta - 1.0);
    const double u1 = std::pow(1.0 - 1.0 / x, beta - 1.0);
    if (u0 > 0.0) breaks.push_back(u0);
    if (u1 > breaks.back() && u1 < 1.0) breaks.push_back(u1);
  }
  breaks.push_back(1.0);
  const auto est =
      quadrature::integrate(integrand, std::span<const double>(breaks), 1e-14, 1e-300);
  return special::rgamma(beta) * est.value;
}

inline double mlf_negative(double rho, double beta, double x) {
  if (x == 0.0) return special::rgamma(beta);
  if (rho == 1.0 && beta == 1.0) return std::exp(-x);
  const double s = std::pow(x, 1.0 / rho);
  if (s < 40.0)
    if (auto v = mlf_series(rho, beta, x)) return *v;
  if (s > 10.0 && rho != 1.0)
    if (auto v = mlf_asymptotic(rho, beta, x)) return *v;
  if (rho == 1.0) return mlf_unit_order(beta, x);
  if (beta >= 1.0 + rho)
    return (special::rgamma(beta - rho) - mlf_negative(rho, beta - rho, x)) / x;
  return mlf_integral(rho, beta, x);
}

inline void check_order(double rho, const char* who) {
  if (!(std::isfinite(rho) && rho > 0.0 && rho < 2.0)) {
    std::ostringstream os;
    os << who << ": order rho=" << rho << " outside (0, 2)";
    throw DomainError(os.str());
  }
}

} // namespace detail

/// E_{rho,beta}(z) for z <= 0.
inline double eval_mlf(MlfParams params, double z) {
  if (!params.valid()) {
    std::ostringstream os;
    os << "eval_mlf: invalid parameters rho=" << params.rho
       << ", beta=" << params.beta;
    throw DomainError(os.str());
  }
  if (!(z <= 0.0)) {
    std::ostringstream os;
    os << "eval_mlf: argument z=" << z << " must be nonpositive";
    throw DomainError(os.str());
  }
  if (std::isinf(z)) return 0.0;
  return detail::mlf_negative(params.rho, params.beta, -z);
}

/// E_{rho,1}(-lam t^rho).
inline double relaxation(double rho, double lam, double t) {
  detail::check_order(rho, "relaxation");
  if (!(lam > 0.0) || !(t >= 0.0)) {
    std::ostringstream os;
    os << "relaxation: need lam > 0 and t >= 0 (lam=" << lam << ", t=" << t << ")";
    throw DomainError(os.str());
  }
  if (t == 0.0) return 1.0;
  if (std::isinf(t)) return 0.0;
  return detail::mlf_negative(rho, 1.0, lam * std::pow(t, rho));
}

/// lam t^(rho-1) E_{rho,rho}(-lam t^rho); singular at t = 0 when rho < 1.
inline double kernel(double rho, double lam, double t) {
  detail::check_order(rho, "kernel");
  if (!(lam > 0.0) || !(t > 0.0) || std::isinf(t)) {
    std::ostringstream os;
    os << "kernel: need lam > 0 and finite t > 0 (lam=" << lam << ", t=" << t << ")";
    throw DomainError(os.str());
  }
  return lam * std::pow(t, rho - 1.0) *
         detail::mlf_negative(rho, rho, lam * std::pow(t, rho));
}

/// Integral of kernel over [a, b], closed form; b may be +infinity.
inline double kernel_mass(double rho, double lam, double a, double b) {
  detail::check_order(rho, "kernel_mass");
  if (!(a >= 0.0) || !(b >= a)) {
    std::ostringstream os;
    os << "kernel_mass: need 0 <= a <= b (a=" << a << ", b=" << b << ")";
    throw DomainError(os.str());
  }
  if (!(lam > 0.0)) throw DomainError("kernel_mass: lam must be positive");
  if (a == b) return 0.0;
  return relaxation(rho, lam, a) - relaxation(rho, lam, b);
}

} // namespace subdiff
