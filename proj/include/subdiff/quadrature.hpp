#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <queue>
#include <span>
#include <vector>

namespace subdiff::quadrature {

struct Estimate {
  double value = 0.0;
  double error = 0.0;
  std::size_t intervals = 0;
  bool converged = false;
};

namespace detail {

// 15-point Kronrod extension of the 7-point Gauss rule (QUADPACK qk15).
inline constexpr std::array<double, 8> xgk = {
    0.991455371120812639206854697526329, 0.949107912342758524526189684047851,
    0.864864423359769072789712788640926, 0.741531185599394439863864773280788,
    0.586087235467691130294144845693013, 0.405845151377397166906606412076961,
    0.207784955007898467600689403773245, 0.000000000000000000000000000000000};
inline constexpr std::array<double, 8> wgk = {
    0.022935322010529224963732008058970, 0.063092092629978553290700663189204,
    0.104790010322250183839876322541518, 0.140653259715525918745189590510238,
    0.169004726639267902826583426598550, 0.190350578064785409913256402421014,
    0.204432940075298892414161999234649, 0.209482141084727828012999174891714};
inline constexpr std::array<double, 4> wg = {
    0.129484966168869693270611432679082, 0.279705391489276667901467771423780,
    0.381830050505118944950369775488975, 0.417959183673469387755102040816327};

struct Piece {
  double a, b, value, error;
  bool operator<(const Piece& o) const { return error < o.error; }
};

template <class F>
Piece kronrod15(const F& f, double a, double b) {
  const double center = 0.5 * (a + b);
  const double half = 0.5 * (b - a);
  const double fc = f(center);
  double kronrod = fc * wgk[7];
  double gauss = fc * wg[3];
  for (std::size_t j = 0; j < 7; ++j) {
    const double dx = half * xgk[j];
    const double f1 = f(center - dx);
    const double f2 = f(center + dx);
    kronrod += wgk[j] * (f1 + f2);
    if (j % 2 == 1) gauss += wg[j / 2] * (f1 + f2);
  }
  return {a, b, kronrod * half, std::fabs((kronrod - gauss) * half)};
}

} // namespace detail

/// Globally adaptive Gauss-Kronrod integration over consecutive breakpoints.
/// Bisects the interval with the largest error estimate until the total
/// error drops below max(abs_tol, rel_tol * |value|).
template <class F>
Estimate integrate(const F& f, std::span<const double> breakpoints,
                   double rel_tol, double abs_tol = 0.0,
                   std::size_t max_intervals = 4000) {
  std::priority_queue<detail::Piece> heap;
  Estimate est;
  for (std::size_t i = 0; i + 1 < breakpoints.size(); ++i) {
    if (!(breakpoints[i + 1] > breakpoints[i])) continue;
    auto p = detail::kronrod15(f, breakpoints[i], breakpoints[i + 1]);
    est.value += p.value;
    est.error += p.error;
    heap.push(p);
  }
  est.intervals = heap.size();
  while (!heap.empty()) {
    if (est.error <= std::max(abs_tol, rel_tol * std::fabs(est.value))) {
      est.converged = true;
      break;
    }
    if (est.intervals >= max_intervals) break;
    const auto worst = heap.top();
    const double mid = 0.5 * (worst.a + worst.b);
    // interval collapsed to adjacent doubles; nothing left to refine
    if (!(mid > worst.a && mid < worst.b)) break;
    heap.pop();
    auto left = detail::kronrod15(f, worst.a, mid);
    auto right = detail::kronrod15(f, mid, worst.b);
    est.value += left.value + right.value - worst.value;
    est.error += left.error + right.error - worst.error;
    heap.push(left);
    heap.push(right);
    ++est.intervals;
  }
  if (heap.empty()) est.converged = true;
  // recompute the sum from scratch: the running update accumulates rounding
  double value = 0.0, error = 0.0;
  while (!heap.empty()) {
    value += heap.top().value;
    error += heap.top().error;
    heap.pop();
  }
  est.value = value;
  est.error = error;
  return est;
}

template <class F>
Estimate integrate(const F& f, double a, double b, double rel_tol,
                   double abs_tol = 0.0, std::size_t max_intervals = 4000) {
  const std::array<double, 2> bp{a, b};
  return integrate(f, std::span<const double>(bp), rel_tol, abs_tol,
                   max_intervals);
}

} // namespace subdiff::quadrature
