#pragma once

// Reference finite-difference solver: L1 Caputo scheme in time, second-order
// central differences in space, implicit in the spatial operator. It shares
// no code with the spectral mode solver and serves as an independent check.

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>
#include <vector>

#include "subdiff/error.hpp"
#include "subdiff/forward.hpp"

namespace subdiff {

struct FdReport {
  std::size_t dominance_flagged_steps = 0; // steps where c0 + q(t_n) <= 0
  double min_pivot = 0.0;                  // smallest |pivot| met by the elimination
};

namespace detail {

// Thomas algorithm for a constant-coefficient tridiagonal system
//   off x_{i-1} + diag x_i + off x_{i+1} = rhs_i,  i = 0..n-1.
inline void solve_tridiagonal(double diag, double off, std::vector<double>& rhs,
                              std::vector<double>& scratch, double& min_pivot, std::size_t step) {
  const std::size_t n = rhs.size();
  scratch.resize(n);
  // pivots at rounding level relative to the row are treated as zero
  const double tiny = 64.0 * std::numeric_limits<double>::epsilon() * (std::fabs(diag) + 2.0 * std::fabs(off));
  double denom = diag;
  if (std::fabs(denom) < tiny) {
    std::ostringstream os;
    os << "solve_fd: singular system at step " << step;
    throw SingularSystemError(os.str(), step);
  }
  min_pivot = std::min(min_pivot, std::fabs(denom));
  scratch[0] = off / denom;
  rhs[0] /= denom;
  for (std::size_t i = 1; i < n; ++i) {
    denom = diag - off * scratch[i - 1];
    if (std::fabs(denom) < tiny || !std::isfinite(denom)) {
      std::ostringstream os;
      os << "solve_fd: singular system at step " << step << " (row " << i << ")";
      throw SingularSystemError(os.str(), step);
    }
    min_pivot = std::min(min_pivot, std::fabs(denom));
    scratch[i] = off / denom;
    rhs[i] = (rhs[i] - off * rhs[i - 1]) / denom;
  }
  for (std::size_t i = n - 1; i-- > 0;) rhs[i] -= scratch[i] * rhs[i + 1];
}

} // namespace detail

/// Implicit L1 / central-difference solution. The returned FieldSolution holds
/// the nodal field, its projection onto spec.K sine modes, and the spectral
/// u_xx of that projection, so residual_check applies unchanged.
inline FieldSolution solve_fd(const ProblemSpec& spec, FdReport* report = nullptr) {
  spec.check_shapes();
  if (!spec.q) throw DomainError("solve_fd: q is required");
  FieldSolution sol;
  sol.coefficients = validate_coefficients(spec);
  if (!sol.coefficients.positivity.pass)
    throw AdmissibilityError("solve_fd: sigma must be positive (" + sol.coefficients.positivity.detail + ")");

  const TimeGrid& tg = spec.tgrid;
  const SpaceGrid& sg = spec.sgrid;
  const std::size_t nt = tg.size(), ns = sg.size(), ni = ns - 2;
  const double rho = spec.rho;
  const double c0 = std::pow(tg.step(), -rho) / std::tgamma(2.0 - rho);
  const double dx2 = sg.step() * sg.step();

  std::vector<double> b(nt);
  for (std::size_t j = 0; j < nt; ++j)
    b[j] = std::pow(static_cast<double>(j) + 1.0, 1.0 - rho) - std::pow(static_cast<double>(j), 1.0 - rho);

  sol.tgrid = tg;
  sol.sgrid = sg;
  sol.u = Matrix(nt, ns, 0.0);
  for (std::size_t i = 1; i + 1 < ns; ++i) sol.u(0, i) = spec.phi[i];

  FdReport rep;
  rep.min_pivot = std::numeric_limits<double>::infinity();
  std::vector<double> rhs(ni), scratch, hist(ni);
  for (std::size_t n = 1; n < nt; ++n) {
    // history: b_0 u^{n-1} - sum_{j=1}^{n-1} b_j (u^{n-j} - u^{n-j-1})
    for (std::size_t i = 0; i < ni; ++i) hist[i] = sol.u(n - 1, i + 1);
    for (std::size_t j = 1; j < n; ++j) {
      const double* a = sol.u.row(n - j);
      const double* c = sol.u.row(n - j - 1);
      const double bj = b[j];
      for (std::size_t i = 0; i < ni; ++i) hist[i] -= bj * (a[i + 1] - c[i + 1]);
    }
    const double sigma = spec.sigma[n], q = (*spec.q)[n];
    if (!(c0 + q > 0.0)) ++rep.dominance_flagged_steps;
    const double diag = c0 + q + 2.0 * sigma / dx2;
    const double off = -sigma / dx2;
    for (std::size_t i = 0; i < ni; ++i) rhs[i] = spec.f(n, i + 1) + c0 * hist[i];
    detail::solve_tridiagonal(diag, off, rhs, scratch, rep.min_pivot, n);
    for (std::size_t i = 0; i < ni; ++i) sol.u(n, i + 1) = rhs[i];
  }
  if (report) *report = rep;

  sol.f_coeffs = sine_coefficients(sg, spec.f, spec.K);
  sol.phi_coeffs = sine_coefficients(sg, spec.phi, spec.K);
  sol.modes.length = sg.length();
  sol.modes.grid = tg;
  sol.modes.u = sine_coefficients(sg, sol.u, spec.K);
  sol.u_xx = second_derivative_field(sol.modes, sg, tg);
  for (std::size_t i = 0; i < ns; ++i)
    sol.initial_defect = std::max(sol.initial_defect, std::fabs(sol.u(0, i) - spec.phi[i]));
  return sol;
}

} // namespace subdiff
