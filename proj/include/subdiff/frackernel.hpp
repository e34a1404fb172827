#pragma once

// Discrete fractional calculus on a uniform time grid: the L1 Caputo
// differentiator and product-integration weights for the Mittag-Leffler
// Volterra kernel t^(rho-1) E_{rho,rho}(-lam t^rho).

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <span>
#include <sstream>
#include <vector>

#include "subdiff/error.hpp"
#include "subdiff/gamma.hpp"
#include "subdiff/grid.hpp"
#include "subdiff/mlf.hpp"

namespace subdiff {

inline constexpr std::size_t default_weight_cap = 16384;

/// L1 approximation of the Caputo derivative of order rho in (0,1) at
/// t_1..t_N. Entry 0 is NaN: the scheme has no value at t_0.
inline std::vector<double> caputo_l1(const TimeGrid& grid, std::span<const double> u,
                                     double rho) {
  if (!(rho > 0.0 && rho < 1.0)) {
    std::ostringstream os;
    os << "caputo_l1: order rho=" << rho << " outside (0, 1)";
    throw DomainError(os.str());
  }
  if (u.size() < 2) throw DomainError("caputo_l1: need at least 2 samples");
  if (u.size() != grid.size()) throw GridMismatchError("caputo_l1: samples do not match grid");
  const std::size_t n_nodes = u.size();
  std::vector<double> b(n_nodes);
  for (std::size_t j = 0; j < n_nodes; ++j) {
    const double dj = static_cast<double>(j);
    b[j] = std::pow(dj + 1.0, 1.0 - rho) - std::pow(dj, 1.0 - rho);
  }
  std::vector<double> diff(n_nodes, 0.0);
  for (std::size_t i = 1; i < n_nodes; ++i) diff[i] = u[i] - u[i - 1];
  const double scale = std::pow(grid.step(), -rho) * special::rgamma(2.0 - rho);
  std::vector<double> out(n_nodes);
  out[0] = std::numeric_limits<double>::quiet_NaN();
  for (std::size_t n = 1; n < n_nodes; ++n) {
    double acc = 0.0;
    for (std::size_t j = 0; j < n; ++j) acc += b[j] * diff[n - j];
    out[n] = scale * acc;
  }
  return out;
}

/// Product-integration weights
///   w[n][j] = int_{t_j}^{t_{j+1}} (t_n - s)^(rho-1) E_{rho,rho}(-lam (t_n - s)^rho) ds
/// from the closed-form kernel mass. On a uniform grid w[n][j] depends only on
/// n - j, so one vector of offsets w_m = (e_{m-1} - e_m) / lam, with
/// e_m = E_{rho,1}(-lam (m h)^rho), represents the whole triangle.
///
/// Each w_m is split between the two endpoints of its subinterval by the
/// kernel's moments against the hat functions:
///   older endpoint  (mean_m - e_m) / lam,   newer endpoint  (e_{m-1} - mean_m) / lam,
/// where mean_m = (G(t_m) - G(t_{m-1})) / h is the average of E_{rho,1} over
/// the subinterval and G(t) = t E_{rho,2}(-lam t^rho).
class ConvolutionWeights {
public:
  ConvolutionWeights(const TimeGrid& grid, double rho, double lam_eff,
                     std::size_t cap = default_weight_cap)
      : grid_(grid), rho_(rho), lam_eff_(lam_eff) {
    if (!(rho > 0.0 && rho <= 1.0)) {
      std::ostringstream os;
      os << "build_weights: order rho=" << rho << " outside (0, 1]";
      throw DomainError(os.str());
    }
    if (!(lam_eff > 0.0) || !std::isfinite(lam_eff)) {
      std::ostringstream os;
      os << "build_weights: lam_eff=" << lam_eff << " must be positive and finite";
      throw DomainError(os.str());
    }
    if (grid.n_steps() > cap) {
      std::ostringstream os;
      os << "build_weights: N=" << grid.n_steps() << " exceeds the weight cap " << cap;
      throw ResourceError(os.str());
    }
    const std::size_t n = grid.size();
    relax_.resize(n);
    offsets_.assign(n, 0.0);
    older_.assign(n, 0.0);
    newer_.assign(n, 0.0);
    relax_[0] = 1.0;
    const double h = grid.step();
    double g_prev = 0.0;
    for (std::size_t m = 1; m < n; ++m) {
      const double t = grid.node(m);
      const double e = relaxation(rho, lam_eff, t);
      // E_{rho,1}(-x) is nonincreasing; clip evaluation noise so no weight is negative
      relax_[m] = std::min(e, relax_[m - 1]);
      offsets_[m] = (relax_[m - 1] - relax_[m]) / lam_eff;
      const double g = t * eval_mlf({rho, 2.0}, -lam_eff * std::pow(t, rho));
      const double mean = std::clamp((g - g_prev) / h, relax_[m], relax_[m - 1]);
      g_prev = g;
      older_[m] = (mean - relax_[m]) / lam_eff;
      newer_[m] = offsets_[m] - older_[m];
    }
  }

  const TimeGrid& grid() const noexcept { return grid_; }
  double rho() const noexcept { return rho_; }
  double lam_eff() const noexcept { return lam_eff_; }

  /// w[n][j] for j < n.
  double operator()(std::size_t n, std::size_t j) const noexcept { return offsets_[n - j]; }
  /// w_m for m = 0..N (w_0 = 0 is unused).
  const std::vector<double>& offsets() const noexcept { return offsets_; }
  /// Shares of w_m on the older (t_j) and newer (t_{j+1}) endpoint; they sum to w_m.
  const std::vector<double>& older() const noexcept { return older_; }
  const std::vector<double>& newer() const noexcept { return newer_; }
  /// E_{rho,1}(-lam_eff t_m^rho) for m = 0..N.
  const std::vector<double>& relax() const noexcept { return relax_; }

private:
  TimeGrid grid_;
  double rho_;
  double lam_eff_;
  std::vector<double> offsets_;
  std::vector<double> older_;
  std::vector<double> newer_;
  std::vector<double> relax_;
};

inline ConvolutionWeights build_weights(const TimeGrid& grid, double rho, double lam_eff,
                                        std::size_t cap = default_weight_cap) {
  return ConvolutionWeights(grid, rho, lam_eff, cap);
}

/// c[n] = int_0^{t_n} kernel(t_n - s) g(s) ds with g piecewise linear between
/// the nodes, i.e. sum_{j<n} (older_{n-j} g_j + newer_{n-j} g_{j+1}); c[0] = 0.
inline void convolve_into(const ConvolutionWeights& w, std::span<const double> g,
                          std::span<double> out) {
  const std::size_t n_nodes = w.grid().size();
  if (g.size() != n_nodes || out.size() != n_nodes) {
    std::ostringstream os;
    os << "convolve: series of length " << g.size() << " on a grid of " << n_nodes << " nodes";
    throw GridMismatchError(os.str());
  }
  const double* older = w.older().data();
  const double* newer = w.newer().data();
  out[0] = 0.0;
  for (std::size_t n = 1; n < n_nodes; ++n) {
    double acc = 0.0;
    // m = n - j runs down as j runs up
    for (std::size_t j = 0; j < n; ++j) acc += older[n - j] * g[j] + newer[n - j] * g[j + 1];
    out[n] = acc;
  }
}

inline std::vector<double> convolve(const ConvolutionWeights& w, std::span<const double> g) {
  std::vector<double> out(w.grid().size());
  convolve_into(w, g, out);
  return out;
}

} // namespace subdiff
