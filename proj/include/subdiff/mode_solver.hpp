#pragma once

// Per-mode fractional Cauchy problem
//   D^rho u_k + (lam_k^2 sigma(t) + q(t)) u_k = f_k(t),  u_k(0) = phi_k,
// solved as the Volterra fixed point
//   u_k = phi_k E_{rho,1}(-lam_k^2 M t^rho)
//       + int_0^t (t-s)^(rho-1) E_{rho,rho}(-lam_k^2 M (t-s)^rho)
//                 [f_k + (lam_k^2 (M - sigma) - q) u_k](s) ds,
// with M the maximum of sigma.
//
// solve_mode iterates on the remainder r = u_k - U0, where U0 solves the
// problem with every coefficient and the source frozen at t = 0:
//   U0 = phi_k E_{rho,1}(-a0 t^rho) + (f_k(0)/a0)(1 - E_{rho,1}(-a0 t^rho)),
//   a0 = lam_k^2 sigma(0) + q(0).
// U0 carries the initial layer analytically, so the product integration only
// sees the smooth remainder, whose source f_k - f_k(0) - (a(t) - a0) U0
// vanishes at t = 0.

#include <algorithm>
#include <cmath>
#include <limits>
#include <span>
#include <sstream>
#include <vector>

#include "subdiff/error.hpp"
#include "subdiff/frackernel.hpp"
#include "subdiff/profile.hpp"

namespace subdiff {

struct ModeProblem {
  std::size_t k = 1;
  double lam_k = 1.0;
  double rho = 0.5;
  Profile sigma;
  Profile q;
  Profile f;
  double phi = 0.0;

  const TimeGrid& grid() const noexcept { return sigma.grid(); }
  double m_sigma() const { return sigma.min(); }
  double M_sigma() const { return sigma.max(); }
  double n_q() const { return q.min(); }
  double N_q() const { return q.max(); }
  double lam_eff() const { return lam_k * lam_k * M_sigma(); }

  void validate() const {
    require_same_grid(sigma.grid(), q.grid(), "ModeProblem(q)");
    require_same_grid(sigma.grid(), f.grid(), "ModeProblem(f)");
    if (!(rho > 0.0 && rho <= 1.0)) {
      std::ostringstream os;
      os << "ModeProblem: order rho=" << rho << " outside (0, 1]";
      throw DomainError(os.str());
    }
    if (!(lam_k > 0.0) || !std::isfinite(lam_k)) throw DomainError("ModeProblem: lam_k must be positive");
    if (!(m_sigma() > 0.0)) {
      std::ostringstream os;
      os << "ModeProblem: sigma must be positive (min " << m_sigma() << ")";
      throw AdmissibilityError(os.str());
    }
    if (!std::isfinite(phi)) throw DomainError("ModeProblem: phi_k not finite");
  }
};

struct ModeSolution {
  std::vector<double> u;
  std::size_t iterations = 0;
  double final_update = 0.0;
  double contraction_estimate = 0.0;
  double C_k_bound = 0.0;
  std::vector<double> updates; // sup-norm of each Picard correction
};

/// max_n |(M - sigma_n)/M - q_n/(lam_k^2 M)|; values >= 1 mean no
/// contraction is guaranteed.
inline double contraction_bound(const ModeProblem& p) {
  p.validate();
  const double M = p.M_sigma();
  const double l2M = p.lam_k * p.lam_k * M;
  double c = 0.0;
  for (std::size_t n = 0; n < p.grid().size(); ++n)
    c = std::max(c, std::fabs((M - p.sigma[n]) / M - p.q[n] / l2M));
  return c;
}

namespace detail {

inline void check_weights(const ModeProblem& p, const ConvolutionWeights& w) {
  require_same_grid(p.grid(), w.grid(), "picard_step");
  const double want = p.lam_eff();
  if (w.rho() != p.rho || std::fabs(w.lam_eff() - want) > 1e-12 * want) {
    std::ostringstream os;
    os << "picard_step: weights built for rho=" << w.rho() << ", lam_eff=" << w.lam_eff()
       << " but the mode needs rho=" << p.rho << ", lam_eff=" << want;
    throw DomainError(os.str());
  }
}

// lam_k^2 (M - sigma_n) - q_n
inline std::vector<double> bracket(const ModeProblem& p) {
  const double M = p.M_sigma();
  const double l2 = p.lam_k * p.lam_k;
  std::vector<double> b(p.grid().size());
  for (std::size_t n = 0; n < b.size(); ++n) b[n] = l2 * (M - p.sigma[n]) - p.q[n];
  return b;
}

inline double sup_norm(std::span<const double> v) {
  double m = 0.0;
  for (double x : v) m = std::max(m, std::fabs(x));
  return m;
}

} // namespace detail

/// A(current) = phi_k E_{rho,1}(-lam_eff t^rho) + convolve(f_k + bracket * current).
inline std::vector<double> picard_step(const ModeProblem& p, const ConvolutionWeights& w,
                                       std::span<const double> current) {
  p.validate();
  detail::check_weights(p, w);
  if (current.size() != p.grid().size()) throw GridMismatchError("picard_step: iterate length");
  const auto b = detail::bracket(p);
  std::vector<double> g(current.size());
  for (std::size_t n = 0; n < g.size(); ++n) g[n] = p.f[n] + b[n] * current[n];
  auto out = convolve(w, g);
  for (std::size_t n = 0; n < out.size(); ++n) out[n] += p.phi * w.relax()[n];
  return out;
}

/// Rate of the frozen problem, a0 = lam_k^2 sigma(0) + q(0), floored at 0.
inline double layer_rate(const ModeProblem& p) {
  return std::max(0.0, p.lam_k * p.lam_k * p.sigma[0] + p.q[0]);
}

/// E_{rho,1}(-a0 t_n^rho) made nonincreasing like the weights; all ones when a0 = 0.
inline std::vector<double> layer_relaxation(const TimeGrid& g, double rho, double a0) {
  std::vector<double> e(g.size(), 1.0);
  if (a0 > 0.0)
    for (std::size_t n = 1; n < e.size(); ++n) e[n] = std::min(e[n - 1], relaxation(rho, a0, g.node(n)));
  return e;
}

/// Frozen-coefficient trajectory U0 (see the top of this file). For a0 <= 0
/// the frozen problem is taken with a0 = 0: U0 = phi_k + f_k(0) t^rho / Gamma(1+rho).
/// `relax` may carry precomputed layer_relaxation samples for a0.
inline std::vector<double> initial_layer(const ModeProblem& p, std::span<const double> relax = {}) {
  p.validate();
  const double a0 = layer_rate(p);
  const double f0 = p.f[0];
  const TimeGrid& g = p.grid();
  std::vector<double> u0(g.size(), p.phi);
  if (a0 == 0.0) {
    const double c = f0 * special::rgamma(1.0 + p.rho);
    for (std::size_t n = 1; n < u0.size(); ++n) u0[n] = p.phi + c * std::pow(g.node(n), p.rho);
    return u0;
  }
  if (p.phi == 0.0 && f0 == 0.0) return u0;
  std::vector<double> own;
  if (relax.empty()) {
    own = layer_relaxation(g, p.rho, a0);
    relax = own;
  } else if (relax.size() != u0.size()) {
    throw GridMismatchError("initial_layer: relaxation samples length");
  }
  for (std::size_t n = 1; n < u0.size(); ++n) u0[n] = p.phi * relax[n] + f0 / a0 * (1.0 - relax[n]);
  return u0;
}

/// Picard iteration until the sup-norm correction drops below tol, or below
/// the rounding floor of the iterate. `initial` is an optional starting
/// guess for u_k; by default the iteration starts from U0.
inline ModeSolution solve_mode(const ModeProblem& p, const ConvolutionWeights& w, double tol,
                               std::size_t max_iter, std::span<const double> initial = {},
                               std::span<const double> layer_relax = {}) {
  p.validate();
  detail::check_weights(p, w);
  if (!(tol > 0.0)) throw DomainError("solve_mode: tol must be positive");
  const std::size_t n_nodes = p.grid().size();
  const auto b = detail::bracket(p);
  const auto u0 = initial_layer(p, layer_relax);

  // remainder source f - f(0) - (a - a0) U0; a = lam_eff - b, so a - a0 = shift - b
  std::vector<double> src(n_nodes);
  const double shift = p.lam_eff() - layer_rate(p);
  for (std::size_t n = 0; n < n_nodes; ++n) src[n] = p.f[n] - p.f[0] - (shift - b[n]) * u0[n];

  ModeSolution sol;
  sol.C_k_bound = contraction_bound(p);
  std::vector<double> r(n_nodes, 0.0);
  if (!initial.empty()) {
    if (initial.size() != n_nodes) throw GridMismatchError("solve_mode: initial guess length");
    for (std::size_t n = 0; n < n_nodes; ++n) r[n] = initial[n] - u0[n];
  }

  std::vector<double> g(n_nodes), next(n_nodes);
  double prev_update = 0.0;
  for (std::size_t it = 1; it <= max_iter; ++it) {
    for (std::size_t n = 0; n < n_nodes; ++n) g[n] = src[n] + b[n] * r[n];
    convolve_into(w, g, next);
    double update = 0.0, size = 0.0;
    for (std::size_t n = 0; n < n_nodes; ++n) {
      update = std::max(update, std::fabs(next[n] - r[n]));
      size = std::max(size, std::fabs(next[n] + u0[n]));
    }
    r.swap(next);
    sol.iterations = it;
    sol.final_update = update;
    sol.updates.push_back(update);
    const double floor = 64.0 * std::numeric_limits<double>::epsilon() * size;
    if (it > 1 && prev_update > floor && update > floor)
      sol.contraction_estimate = std::max(sol.contraction_estimate, update / prev_update);
    if (update < tol || update <= floor) {
      sol.u.resize(n_nodes);
      for (std::size_t n = 0; n < n_nodes; ++n) sol.u[n] = u0[n] + r[n];
      return sol;
    }
    prev_update = update;
  }
  std::ostringstream os;
  os << "solve_mode: mode " << p.k << " did not converge in " << max_iter
     << " iterations (last update " << sol.final_update << ", contraction estimate "
     << sol.contraction_estimate << ", bound " << sol.C_k_bound << ")";
  throw ConvergenceError(os.str(), sol.iterations, sol.final_update, sol.contraction_estimate);
}

inline ModeSolution solve_mode(const ModeProblem& p, double tol = 1e-10,
                               std::size_t max_iter = 200) {
  p.validate();
  return solve_mode(p, build_weights(p.grid(), p.rho, p.lam_eff()), tol, max_iter);
}

struct ModeDecomposition {
  ModeSolution V; // source only, zero initial value
  ModeSolution W; // initial value only, zero source
};

inline ModeDecomposition decompose_mode(const ModeProblem& p, double tol = 1e-10,
                                        std::size_t max_iter = 200) {
  p.validate();
  const auto w = build_weights(p.grid(), p.rho, p.lam_eff());
  ModeProblem pv = p;
  pv.phi = 0.0;
  ModeProblem pw = p;
  pw.f = Profile::constant(p.grid(), 0.0);
  return {solve_mode(pv, w, tol, max_iter), solve_mode(pw, w, tol, max_iter)};
}

struct AprioriBounds {
  std::vector<double> v_bound;
  std::vector<double> w_bound;
  double lam_lower = 0.0; // lam_k^2 m_sigma + n_q
};

/// Comparison bounds with the slowest admissible relaxation rate
/// lam_k^2 m_sigma + n_q: |V_k| <= int kernel |f_k|, |W_k| <= |phi_k| E_{rho,1}.
inline AprioriBounds apriori_bounds(const ModeProblem& p) {
  p.validate();
  AprioriBounds out;
  out.lam_lower = p.lam_k * p.lam_k * p.m_sigma() + p.n_q();
  if (!(out.lam_lower > 0.0)) {
    std::ostringstream os;
    os << "apriori_bounds: lam_k^2 m_sigma + n_q = " << out.lam_lower << " is not positive";
    throw DomainError(os.str());
  }
  const auto w = build_weights(p.grid(), p.rho, out.lam_lower);
  std::vector<double> abs_f(p.grid().size());
  for (std::size_t n = 0; n < abs_f.size(); ++n) abs_f[n] = std::fabs(p.f[n]);
  out.v_bound = convolve(w, abs_f);
  out.w_bound.resize(abs_f.size());
  for (std::size_t n = 0; n < abs_f.size(); ++n) out.w_bound[n] = std::fabs(p.phi) * w.relax()[n];
  return out;
}

} // namespace subdiff
