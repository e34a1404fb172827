#pragma once

// Identity suites for the Mittag-Leffler evaluator and the discrete
// fractional kernels, runnable from a release build without test tooling.

#include <algorithm>
#include <cmath>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "subdiff/frackernel.hpp"
#include "subdiff/gamma.hpp"
#include "subdiff/mlf.hpp"
#include "subdiff/quadrature.hpp"

namespace subdiff::selftest {

struct CheckResult {
  std::string name;
  std::size_t cases = 0;
  std::size_t failures = 0;
  double worst = 0.0; // largest deviation met, in the check's own units
  double tolerance = 0.0;
  bool passed() const { return failures == 0; }
};

struct SuiteResult {
  std::string name;
  std::vector<CheckResult> checks;
  std::size_t passed() const {
    return static_cast<std::size_t>(
        std::count_if(checks.begin(), checks.end(), [](const CheckResult& c) { return c.passed(); }));
  }
  bool all_passed() const { return passed() == checks.size(); }
};

namespace detail {

class Check {
public:
  Check(std::string name, double tol) {
    r_.name = std::move(name);
    r_.tolerance = tol;
  }
  void record(double deviation) {
    ++r_.cases;
    if (!(deviation <= r_.tolerance)) ++r_.failures;
    if (!(deviation <= r_.worst)) r_.worst = deviation;
  }
  CheckResult result() const { return r_; }

private:
  CheckResult r_;
};

inline double mlf(double rho, double beta, double z) { return eval_mlf({rho, beta}, z); }

inline double rel(double got, double want) {
  return std::fabs(got - want) / std::max(std::fabs(want), 1e-300);
}

} // namespace detail

inline SuiteResult mlf_suite(std::uint64_t seed = 20240611) {
  using detail::Check;
  using detail::mlf;
  SuiteResult s{"mlf", {}};
  std::mt19937_64 gen(seed);
  auto uniform = [&](double a, double b) { return std::uniform_real_distribution<double>(a, b)(gen); };

  Check exp_check("E_{1,1}(z) = exp(z) on [-30, 0], relative", 1e-12);
  for (double z = 0.0; z >= -30.0; z -= 0.0625) exp_check.record(detail::rel(mlf(1.0, 1.0, z), std::exp(z)));
  s.checks.push_back(exp_check.result());

  Check unit2("E_{1,2}(-x) = (1 - e^-x)/x, relative", 1e-12);
  for (double x = 0.01; x <= 30.0; x *= 1.25) unit2.record(detail::rel(mlf(1.0, 2.0, -x), -std::expm1(-x) / x));
  s.checks.push_back(unit2.result());

  Check erfc_check("E_{1/2,1}(-x) = exp(x^2) erfc(x), relative", 1e-12);
  for (double x = 0.01; x <= 4.0; x *= 1.2)
    erfc_check.record(detail::rel(mlf(0.5, 1.0, -x), std::exp(x * x) * std::erfc(x)));
  s.checks.push_back(erfc_check.result());

  // 0 <= E_{rho,beta}(-lam t^rho) <= 1/Gamma(beta) for 0 < rho < 1, beta >= rho
  Check bounds("0 <= E <= 1/Gamma(beta) on random admissible tuples", 0.0);
  for (int i = 0; i < 1000; ++i) {
    const double rho = uniform(0.05, 1.0);
    const double beta = rho + uniform(0.0, 2.0);
    const double lam = uniform(0.01, 50.0);
    const double t = uniform(0.0, 10.0);
    const double e = mlf(rho, beta, -lam * std::pow(t, rho));
    const double top = special::rgamma(beta) * (1.0 + 1e-14);
    bounds.record(std::max({0.0, -e, e - top}));
  }
  s.checks.push_back(bounds.result());

  // int_0^t kernel = 1 - E_{rho}(-lam t^rho), with u = s^rho removing the singularity
  Check mass("kernel mass against adaptive quadrature", 1e-12);
  for (int i = 0; i < 40; ++i) {
    const double rho = uniform(0.1, 1.0);
    const double lam = uniform(0.1, 20.0);
    const double t = uniform(0.05, 3.0);
    const double top = std::pow(t, rho);
    const double bp[] = {0.0, top};
    const auto q = quadrature::integrate(
        [&](double u) { return lam / rho * mlf(rho, rho, -lam * u); }, bp, 1e-14, 1e-15);
    mass.record(std::fabs(kernel_mass(rho, lam, 0.0, t) - q.value));
    mass.record(std::fabs(kernel_mass(rho, lam, 0.0, t) + relaxation(rho, lam, t) - 1.0));
  }
  s.checks.push_back(mass.result());

  Check deriv("d/dt E_rho(-lam t^rho) = -kernel, central differences", 1e-6);
  for (int i = 0; i < 200; ++i) {
    const double rho = uniform(0.1, 1.0);
    const double lam = uniform(0.1, 20.0);
    const double t = uniform(0.05, 3.0);
    const double h = 1e-4 * t;
    const double d = -(relaxation(rho, lam, t + h) - relaxation(rho, lam, t - h)) / (2.0 * h);
    deriv.record(std::fabs(kernel(rho, lam, t) - d) / std::max(1.0, std::fabs(d)));
  }
  s.checks.push_back(deriv.result());
  return s;
}

inline SuiteResult frackernel_suite(std::uint64_t seed = 20240612) {
  using detail::Check;
  SuiteResult s{"frackernel", {}};
  std::mt19937_64 gen(seed);
  auto uniform = [&](double a, double b) { return std::uniform_real_distribution<double>(a, b)(gen); };

  Check rows("lam * row sum of weights = 1 - relaxation", 1e-12);
  Check signs("weight shares are nonnegative", 0.0);
  Check constant("convolution of 1 = (1 - relaxation)/lam, relative to 1/lam", 1e-12);
  Check linear("convolution of t = t^(rho+1) E_{rho,rho+2}(-lam t^rho)", 1e-12);
  for (int trial = 0; trial < 20; ++trial) {
    const TimeGrid g(uniform(0.1, 3.0), static_cast<std::size_t>(uniform(1.0, 400.0)));
    const double rho = uniform(0.05, 0.99);
    const double lam = std::exp(uniform(-3.0, 6.0));
    const auto w = build_weights(g, rho, lam);
    for (std::size_t m = 1; m < g.size(); ++m)
      signs.record(std::max({0.0, -w.older()[m], -w.newer()[m]}));
    const auto ones = convolve(w, std::vector<double>(g.size(), 1.0));
    const auto ramp = convolve(w, g.nodes());
    for (std::size_t n = 1; n < g.size(); ++n) {
      double row = 0.0;
      for (std::size_t j = 0; j < n; ++j) row += lam * w(n, j);
      const double t = g.node(n);
      const double relax = relaxation(rho, lam, t);
      rows.record(std::fabs(row - (1.0 - relax)));
      constant.record(lam * std::fabs(ones[n] - (1.0 - relax) / lam));
      const double exact = std::pow(t, rho + 1.0) * detail::mlf(rho, rho + 2.0, -lam * std::pow(t, rho));
      linear.record(std::fabs(ramp[n] - exact) / (1.0 + exact));
    }
  }
  s.checks.push_back(rows.result());
  s.checks.push_back(signs.result());
  s.checks.push_back(constant.result());
  s.checks.push_back(linear.result());

  Check flat("L1 derivative of a constant is zero", 0.0);
  Check ramp_d("L1 derivative of a + b t = b t^(1-rho)/Gamma(2-rho), relative", 1e-12);
  for (int trial = 0; trial < 20; ++trial) {
    const TimeGrid g(uniform(0.1, 3.0), static_cast<std::size_t>(uniform(1.0, 400.0)));
    const double rho = uniform(0.05, 0.99);
    const double a = uniform(-2.0, 2.0), b = uniform(0.5, 2.0);
    const auto d0 = caputo_l1(g, std::vector<double>(g.size(), a), rho);
    std::vector<double> u(g.size());
    for (std::size_t j = 0; j < u.size(); ++j) u[j] = a + b * g.node(j);
    const auto d1 = caputo_l1(g, u, rho);
    for (std::size_t n = 1; n < g.size(); ++n) {
      flat.record(std::fabs(d0[n]));
      ramp_d.record(detail::rel(d1[n], b * std::pow(g.node(n), 1.0 - rho) * special::rgamma(2.0 - rho)));
    }
  }
  s.checks.push_back(flat.result());
  s.checks.push_back(ramp_d.result());
  return s;
}

inline std::vector<SuiteResult> run_all() { return {mlf_suite(), frackernel_suite()}; }

} // namespace subdiff::selftest
