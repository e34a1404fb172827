#pragma once

// Orthonormal Dirichlet sine basis e_k(x) = sqrt(2/l) sin(lam_k x),
// lam_k = pi k / l, on a uniform SpaceGrid.

#include <algorithm>
#include <cmath>
#include <numbers>
#include <span>
#include <sstream>
#include <vector>

#include "subdiff/error.hpp"
#include "subdiff/grid.hpp"
#include "subdiff/profile.hpp"

namespace subdiff {

inline double eigenvalue(long k, double l) {
  if (k < 1 || !(l > 0.0) || !std::isfinite(l)) {
    std::ostringstream os;
    os << "eigenvalue: need k >= 1 and l > 0 (k=" << k << ", l=" << l << ")";
    throw DomainError(os.str());
  }
  return std::numbers::pi * static_cast<double>(k) / l;
}

/// Per-mode trajectories u_k(t_n), k = 1..K, stored as u[k-1][n].
struct ModeSet {
  double length = 1.0;
  TimeGrid grid;
  std::vector<std::vector<double>> u;

  std::size_t modes() const noexcept { return u.size(); }
  double lambda(std::size_t k) const { return eigenvalue(static_cast<long>(k), length); }
};

/// e_k(x_i) for k = 1..K as rows; both boundary columns are exactly zero.
inline Matrix basis_matrix(const SpaceGrid& sg, std::size_t K) {
  Matrix b(K, sg.size());
  const double norm = std::sqrt(2.0 / sg.length());
  for (std::size_t k = 1; k <= K; ++k)
    for (std::size_t i = 1; i + 1 < sg.size(); ++i)
      b(k - 1, i) = norm * std::sin(eigenvalue(static_cast<long>(k), sg.length()) * sg.node(i));
  return b;
}

inline void check_aliasing(const SpaceGrid& sg, std::size_t K) {
  if (K == 0 || K > sg.n_cells() / 2) {
    std::ostringstream os;
    os << "sine_coefficients: K=" << K << " modes need 1 <= K <= M/2 = " << sg.n_cells() / 2;
    throw AliasingError(os.str());
  }
}

inline std::vector<double> simpson_weights(const SpaceGrid& sg) {
  std::vector<double> w(sg.size());
  const double h3 = sg.step() / 3.0;
  for (std::size_t i = 0; i < w.size(); ++i)
    w[i] = h3 * ((i == 0 || i + 1 == w.size()) ? 1.0 : (i % 2 == 1 ? 4.0 : 2.0));
  return w;
}

/// c_k = Simpson(g e_k), k = 1..K.
inline std::vector<double> sine_coefficients(const SpaceGrid& sg, std::span<const double> g,
                                             std::size_t K) {
  check_aliasing(sg, K);
  if (g.size() != sg.size()) {
    std::ostringstream os;
    os << "sine_coefficients: " << g.size() << " samples on a grid of " << sg.size() << " nodes";
    throw GridMismatchError(os.str());
  }
  const Matrix b = basis_matrix(sg, K);
  const auto w = simpson_weights(sg);
  std::vector<double> c(K, 0.0);
  for (std::size_t k = 0; k < K; ++k) {
    double acc = 0.0;
    for (std::size_t i = 0; i < sg.size(); ++i) acc += w[i] * g[i] * b(k, i);
    c[k] = acc;
  }
  return c;
}

/// Coefficients of every time row of a field: out[k-1][n].
inline std::vector<std::vector<double>> sine_coefficients(const SpaceGrid& sg, const Matrix& field,
                                                          std::size_t K) {
  check_aliasing(sg, K);
  if (field.cols() != sg.size()) throw GridMismatchError("sine_coefficients: field width");
  const Matrix b = basis_matrix(sg, K);
  const auto w = simpson_weights(sg);
  std::vector<std::vector<double>> c(K, std::vector<double>(field.rows(), 0.0));
  std::vector<double> wb(sg.size());
  for (std::size_t k = 0; k < K; ++k) {
    for (std::size_t i = 0; i < sg.size(); ++i) wb[i] = w[i] * b(k, i);
    for (std::size_t n = 0; n < field.rows(); ++n) {
      const double* row = field.row(n);
      double acc = 0.0;
      for (std::size_t i = 0; i < sg.size(); ++i) acc += wb[i] * row[i];
      c[k][n] = acc;
    }
  }
  return c;
}

namespace detail {

inline void check_modes(const ModeSet& m, const TimeGrid& tg) {
  require_same_grid(m.grid, tg, "spectral");
  for (const auto& uk : m.u)
    if (uk.size() != tg.size()) throw GridMismatchError("spectral: mode trajectory length");
}

// sum_k scale_k u_k(t_n) for every n
inline Profile weighted_mode_sum(const ModeSet& m, const TimeGrid& tg,
                                 const std::vector<double>& scale) {
  check_modes(m, tg);
  std::vector<double> out(tg.size(), 0.0);
  for (std::size_t k = 0; k < m.modes(); ++k)
    for (std::size_t n = 0; n < tg.size(); ++n) out[n] += scale[k] * m.u[k][n];
  return {tg, std::move(out)};
}

// sum_k scale_k u_k(t_n) e_k(x_i)
inline Matrix weighted_field(const ModeSet& m, const SpaceGrid& sg, const TimeGrid& tg,
                             const std::vector<double>& scale) {
  check_modes(m, tg);
  if (m.length != sg.length()) throw GridMismatchError("assemble_field: interval length");
  const Matrix b = basis_matrix(sg, m.modes());
  Matrix f(tg.size(), sg.size(), 0.0);
  for (std::size_t n = 0; n < tg.size(); ++n) {
    double* row = f.row(n);
    for (std::size_t k = 0; k < m.modes(); ++k) {
      const double a = scale[k] * m.u[k][n];
      if (a == 0.0) continue;
      const double* bk = b.row(k);
      for (std::size_t i = 1; i + 1 < sg.size(); ++i) row[i] += a * bk[i];
    }
  }
  return f;
}

inline std::vector<double> lambda_powers(const ModeSet& m, int p, double factor) {
  std::vector<double> s(m.modes());
  for (std::size_t k = 0; k < m.modes(); ++k) s[k] = factor * std::pow(m.lambda(k + 1), p);
  return s;
}

} // namespace detail

/// u(x_i, t_n) = sum_k u_k(t_n) e_k(x_i); rows are time nodes.
inline Matrix assemble_field(const ModeSet& m, const SpaceGrid& sg, const TimeGrid& tg) {
  return detail::weighted_field(m, sg, tg, std::vector<double>(m.modes(), 1.0));
}

/// Spectral second derivative -sum_k lam_k^2 u_k e_k.
inline Matrix second_derivative_field(const ModeSet& m, const SpaceGrid& sg, const TimeGrid& tg) {
  return detail::weighted_field(m, sg, tg, detail::lambda_powers(m, 2, -1.0));
}

/// u_x(0, t) = sum_k lam_k sqrt(2/l) u_k(t).
inline Profile flux_at_left(const ModeSet& m, const TimeGrid& tg) {
  return detail::weighted_mode_sum(m, tg, detail::lambda_powers(m, 1, std::sqrt(2.0 / m.length)));
}

/// u_xxx(0, t) = -sum_k lam_k^3 sqrt(2/l) u_k(t).
inline Profile third_trace_at_left(const ModeSet& m, const TimeGrid& tg) {
  return detail::weighted_mode_sum(m, tg,
                                   detail::lambda_powers(m, 3, -std::sqrt(2.0 / m.length)));
}

/// Weighted coefficient sums sum_k lam_k^p |c_k| with a truncation proxy.
struct TailReport {
  int power = 2;
  double f_sum = 0.0;           // max over t of sum_k lam_k^p |f_k(t)|
  double phi_sum = 0.0;         // sum_k lam_k^p |phi_k|
  double f_last_decade = 0.0;   // contribution of the last ceil(K/10) modes, at the maximizing t
  double phi_last_decade = 0.0;
  bool f_decays = true;
  bool phi_decays = true;
  std::vector<double> phi_partial_sums;
};

inline constexpr double tail_decay_threshold = 1e-3;

/// f_coeffs[k-1][n] and phi_coeffs[k-1] for k = 1..K.
inline TailReport tail_diagnostics(const std::vector<std::vector<double>>& f_coeffs,
                                   const std::vector<double>& phi_coeffs, double l,
                                   int weight_power) {
  TailReport r;
  r.power = weight_power;
  const std::size_t K = std::max(f_coeffs.size(), phi_coeffs.size());
  const std::size_t decade = (K + 9) / 10;
  auto lam_p = [&](std::size_t k) { return std::pow(eigenvalue(static_cast<long>(k), l), weight_power); };

  double acc = 0.0;
  r.phi_partial_sums.reserve(phi_coeffs.size());
  for (std::size_t k = 0; k < phi_coeffs.size(); ++k) {
    const double term = lam_p(k + 1) * std::fabs(phi_coeffs[k]);
    acc += term;
    r.phi_partial_sums.push_back(acc);
    if (k + decade >= phi_coeffs.size()) r.phi_last_decade += term;
  }
  r.phi_sum = acc;

  const std::size_t n_times = f_coeffs.empty() ? 0 : f_coeffs.front().size();
  for (std::size_t n = 0; n < n_times; ++n) {
    double total = 0.0, tail = 0.0;
    for (std::size_t k = 0; k < f_coeffs.size(); ++k) {
      const double term = lam_p(k + 1) * std::fabs(f_coeffs[k][n]);
      total += term;
      if (k + decade >= f_coeffs.size()) tail += term;
    }
    if (total > r.f_sum || n == 0) {
      r.f_sum = total;
      r.f_last_decade = tail;
    }
  }
  r.phi_decays = r.phi_last_decade <= tail_decay_threshold * r.phi_sum;
  r.f_decays = r.f_last_decade <= tail_decay_threshold * r.f_sum;
  return r;
}

} // namespace subdiff
