#pragma once

// Forward problem on (0,l) x (0,T]:
//   D^rho u - sigma(t) u_xx + q(t) u = f(x,t),  u(0,t) = u(l,t) = 0,  u(x,0) = phi(x),
// solved mode by mode in the Dirichlet sine basis.

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <memory>
#include <mutex>
#include <numbers>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "subdiff/error.hpp"
#include "subdiff/frackernel.hpp"
#include "subdiff/gamma.hpp"
#include "subdiff/grid.hpp"
#include "subdiff/mode_solver.hpp"
#include "subdiff/parallel.hpp"
#include "subdiff/profile.hpp"
#include "subdiff/spectral.hpp"

namespace subdiff {

struct ProblemSpec {
  TimeGrid tgrid;
  SpaceGrid sgrid;
  double rho = 0.5;
  Profile sigma;
  std::optional<Profile> q; // absent for the inverse problem
  Matrix f;                 // rows are time nodes, columns space nodes
  std::vector<double> phi;  // on sgrid
  std::size_t K = 1;

  double length() const noexcept { return sgrid.length(); }

  void check_shapes() const {
    if (!(rho > 0.0 && rho < 1.0)) {
      std::ostringstream os;
      os << "ProblemSpec: order rho=" << rho << " outside (0, 1)";
      throw DomainError(os.str());
    }
    require_same_grid(tgrid, sigma.grid(), "ProblemSpec(sigma)");
    if (q) require_same_grid(tgrid, q->grid(), "ProblemSpec(q)");
    if (f.rows() != tgrid.size() || f.cols() != sgrid.size()) {
      std::ostringstream os;
      os << "ProblemSpec: source is " << f.rows() << "x" << f.cols() << ", grids need "
         << tgrid.size() << "x" << sgrid.size();
      throw GridMismatchError(os.str());
    }
    if (phi.size() != sgrid.size()) throw GridMismatchError("ProblemSpec: initial datum length");
    check_aliasing(sgrid, K);
  }
};

/// Samples g(x, t) on the product grid.
inline Matrix sample_field(const TimeGrid& tg, const SpaceGrid& sg,
                           const std::function<double(double, double)>& g) {
  Matrix m(tg.size(), sg.size());
  for (std::size_t n = 0; n < tg.size(); ++n)
    for (std::size_t i = 0; i < sg.size(); ++i) m(n, i) = g(sg.node(i), tg.node(n));
  return m;
}

inline std::vector<double> sample_space(const SpaceGrid& sg, const std::function<double(double)>& g) {
  std::vector<double> v(sg.size());
  for (std::size_t i = 0; i < v.size(); ++i) v[i] = g(sg.node(i));
  return v;
}

struct ConditionCheck {
  bool pass = false;
  bool applicable = true;
  double margin = 0.0; // >= 0 when the inequality holds
  std::string detail;
};

struct CoefficientReport {
  double m_sigma = 0.0, M_sigma = 0.0;
  double n_q = 0.0, N_q = 0.0;
  double q_lower = 0.0, q_upper = 0.0; // open window (-m pi^2/l^2, (M-m) pi^2/l^2)
  ConditionCheck positivity;           // (1)
  ConditionCheck q_window;             // (2)
  ConditionCheck boundary;             // (3), with (4) implied by sampling
  bool all_pass() const { return positivity.pass && q_window.pass && boundary.pass; }
};

inline constexpr double boundary_tol = 1e-12;

namespace detail {

// one-sided second difference at the first (dir=+1) or last (dir=-1) node
inline double edge_second_derivative(const double* row, std::size_t size, double h, int dir) {
  const auto at = [&](std::size_t j) { return dir > 0 ? row[j] : row[size - 1 - j]; };
  return (2.0 * at(0) - 5.0 * at(1) + 4.0 * at(2) - at(3)) / (h * h);
}

} // namespace detail

inline CoefficientReport validate_coefficients(const ProblemSpec& spec) {
  CoefficientReport r;
  r.m_sigma = spec.sigma.min();
  r.M_sigma = spec.sigma.max();
  const double l = spec.length();
  const double pi2 = std::numbers::pi * std::numbers::pi / (l * l);
  r.q_lower = -r.m_sigma * pi2;
  r.q_upper = (r.M_sigma - r.m_sigma) * pi2;

  r.positivity.margin = r.m_sigma;
  r.positivity.pass = r.m_sigma > 0.0;
  {
    std::ostringstream os;
    os << "m_sigma=" << r.m_sigma << ", M_sigma=" << r.M_sigma;
    r.positivity.detail = os.str();
  }

  if (spec.q) {
    r.n_q = spec.q->min();
    r.N_q = spec.q->max();
    r.q_window.margin = std::min(r.n_q - r.q_lower, r.q_upper - r.N_q);
    r.q_window.pass = r.n_q > r.q_lower && r.N_q < r.q_upper;
    std::ostringstream os;
    os << "q in [" << r.n_q << ", " << r.N_q << "], window (" << r.q_lower << ", " << r.q_upper << ")";
    r.q_window.detail = os.str();
  } else {
    r.q_window.applicable = false;
    r.q_window.pass = true;
    r.q_window.detail = "q not given";
  }

  // zero traces of phi and f, and of f_xx (estimated by one-sided differences)
  double edge = std::max(std::fabs(spec.phi.front()), std::fabs(spec.phi.back()));
  double curv_edge = 0.0, curv_scale = 0.0;
  const std::size_t ns = spec.sgrid.size();
  const double h = spec.sgrid.step();
  for (std::size_t n = 0; n < spec.f.rows(); ++n) {
    const double* row = spec.f.row(n);
    edge = std::max({edge, std::fabs(row[0]), std::fabs(row[ns - 1])});
    if (ns >= 4) {
      curv_edge = std::max({curv_edge, std::fabs(detail::edge_second_derivative(row, ns, h, 1)),
                            std::fabs(detail::edge_second_derivative(row, ns, h, -1))});
      for (std::size_t i = 1; i + 1 < ns; ++i)
        curv_scale = std::max(curv_scale, std::fabs(row[i - 1] - 2.0 * row[i] + row[i + 1]) / (h * h));
    }
  }
  // the one-sided difference carries an O(h^2) error; judge it against the interior size
  const double curv_tol = 1e-3 * curv_scale + boundary_tol;
  r.boundary.margin = std::min(boundary_tol - edge, curv_tol - curv_edge);
  r.boundary.pass = edge <= boundary_tol && curv_edge <= curv_tol;
  {
    std::ostringstream os;
    os << "max endpoint |phi|,|f| = " << edge << ", max endpoint |f_xx| ~ " << curv_edge
       << " (tolerance " << curv_tol << ")";
    r.boundary.detail = os.str();
  }
  return r;
}

struct ForwardOptions {
  double tol = 1e-10;
  std::size_t max_iter = 200;
  std::size_t threads = 0; // 0: SUBDIFF_THREADS or hardware
  bool residual = true;
  bool diagnostics = true;
  bool assemble = true; // build u and u_xx on the space grid (needed by residual)
};

/// Coefficient-sum surrogates of the u_xx regularity estimates, all with the
/// sup-norm factor sqrt(2/l) of the basis:
///   Q1 = sqrt(2/l) T^rho / Gamma(1+rho) sum_k lam_k^2 max_t |f_k(t)|
///   Q2(t) = sqrt(2/l) C_rho t^-rho sum_k |phi_k| lam_k^2 / (lam_k^2 m_sigma + n_q)
/// with C_rho = sup_{x>=0} (1+x) E_{rho,1}(-x).
struct RegularityReport {
  TailReport tails; // weight power 2 for f and phi
  double c_rho = 0.0;
  double q1_bound = 0.0;
  std::vector<double> q2_bound; // infinite at t_0, NaN when lam_1^2 m_sigma + n_q <= 0
  std::vector<double> uxx_sup;  // max_x |u_xx(x, t_n)|
  bool bound_holds = true;
  double worst_ratio = 0.0; // max_n uxx_sup / (Q1 + Q2), n >= 1
};

struct FieldSolution {
  TimeGrid tgrid;
  SpaceGrid sgrid;
  Matrix u;
  Matrix u_xx;
  ModeSet modes;
  std::vector<ModeSolution> per_mode; // statistics; trajectories live in `modes`
  std::vector<std::vector<double>> f_coeffs;
  std::vector<double> phi_coeffs;
  std::optional<double> residual_norm;
  double initial_defect = 0.0; // max_x |u(x,0) - phi(x)|
  CoefficientReport coefficients;
  std::optional<RegularityReport> regularity;
};

/// sup_{x >= 0} (1 + x) E_{rho,1}(-x), by a logarithmic scan with a 1% cushion.
inline double relaxation_decay_constant(double rho) {
  double c = std::max(1.0, special::rgamma(1.0 - rho));
  for (int i = 0; i <= 240; ++i) {
    const double x = std::pow(10.0, -3.0 + 0.0375 * i);
    c = std::max(c, (1.0 + x) * eval_mlf({rho, 1.0}, -x));
  }
  return 1.01 * c;
}

/// max over interior nodes and t_n >= t_1 of |D^rho u - sigma u_xx + q u - f|,
/// with D^rho u the L1 derivative of each interior column of u and u_xx the
/// spectral diagnostic stored in the solution.
inline double residual_check(const FieldSolution& sol, const ProblemSpec& spec,
                             std::size_t threads = 0) {
  if (!spec.q) throw DomainError("residual_check: q is required");
  require_same_grid(sol.tgrid, spec.tgrid, "residual_check");
  if (!(sol.sgrid == spec.sgrid)) throw GridMismatchError("residual_check: space grid");
  const std::size_t nt = spec.tgrid.size(), ns = spec.sgrid.size();
  if (sol.u.rows() != nt || sol.u.cols() != ns || sol.u_xx.rows() != nt || sol.u_xx.cols() != ns)
    throw GridMismatchError("residual_check: field shape");
  std::vector<double> worst(ns, 0.0);
  parallel_for(ns - 2, resolve_threads(threads), [&](std::size_t c) {
    const std::size_t i = c + 1;
    const auto du = caputo_l1(spec.tgrid, sol.u.column(i), spec.rho);
    double w = 0.0;
    for (std::size_t n = 1; n < nt; ++n) {
      const double r = du[n] - spec.sigma[n] * sol.u_xx(n, i) + (*spec.q)[n] * sol.u(n, i) - spec.f(n, i);
      w = std::max(w, std::fabs(r));
    }
    worst[i] = w;
  });
  return *std::max_element(worst.begin(), worst.end());
}

/// Forward solver with a cache of convolution weights, so repeated solves
/// with the same sigma (the inverse iteration) build them once.
class ForwardSolver {
public:
  explicit ForwardSolver(ForwardOptions options = {}) : options_(options) {}

  const ForwardOptions& options() const noexcept { return options_; }
  ForwardOptions& options() noexcept { return options_; }

  /// Solves the problem; `warm` (same grids and K) seeds each mode's Picard iteration.
  FieldSolution solve(const ProblemSpec& spec, const ModeSet* warm = nullptr) {
    spec.check_shapes();
    if (!spec.q) throw DomainError("solve_forward: q is required");
    FieldSolution sol;
    sol.coefficients = validate_coefficients(spec);
    if (!sol.coefficients.positivity.pass)
      throw AdmissibilityError("solve_forward: sigma must be positive (" +
                               sol.coefficients.positivity.detail + ")");
    const std::size_t K = spec.K;
    if (warm && (warm->modes() != K || !(warm->grid == spec.tgrid)))
      throw GridMismatchError("solve_forward: warm start does not match the problem");

    sol.tgrid = spec.tgrid;
    sol.sgrid = spec.sgrid;
    sol.f_coeffs = sine_coefficients(spec.sgrid, spec.f, K);
    sol.phi_coeffs = sine_coefficients(spec.sgrid, spec.phi, K);

    const double M = sol.coefficients.M_sigma;
    const std::size_t threads = resolve_threads(options_.threads);
    const auto& weights = weights_for(spec, M, threads);

    sol.modes.length = spec.length();
    sol.modes.grid = spec.tgrid;
    sol.modes.u.assign(K, {});
    sol.per_mode.assign(K, {});
    std::vector<std::shared_ptr<const std::vector<double>>> layers(K);
    parallel_for(K, threads, [&](std::size_t i) {
      ModeProblem p;
      p.k = i + 1;
      p.lam_k = eigenvalue(static_cast<long>(i + 1), spec.length());
      p.rho = spec.rho;
      p.sigma = spec.sigma;
      p.q = *spec.q;
      p.f = Profile(spec.tgrid, sol.f_coeffs[i]);
      p.phi = sol.phi_coeffs[i];
      std::span<const double> init;
      if (warm) init = warm->u[i];
      layers[i] = layer_for(spec, layer_rate(p));
      try {
        auto ms = solve_mode(p, *weights[i], options_.tol, options_.max_iter, init, *layers[i]);
        sol.modes.u[i] = std::move(ms.u);
        ms.u.clear();
        sol.per_mode[i] = std::move(ms);
      } catch (const ConvergenceError& e) {
        throw ConvergenceError(std::string("mode ") + std::to_string(i + 1) + ": " + e.what(),
                               e.iterations(), e.last_update(), e.ratio());
      }
    });
    {
      // keep only the layers of this solve: the inverse iteration revisits them
      std::lock_guard lock(mutex_);
      layer_cache_.clear();
      for (std::size_t i = 0; i < K; ++i)
        layer_cache_.push_back({spec.tgrid, spec.rho, layer_rate_of(spec, i), layers[i]});
    }

    if (options_.assemble || options_.residual || options_.diagnostics) {
      sol.u = assemble_field(sol.modes, spec.sgrid, spec.tgrid);
      sol.u_xx = second_derivative_field(sol.modes, spec.sgrid, spec.tgrid);
      for (std::size_t i = 0; i < spec.sgrid.size(); ++i)
        sol.initial_defect = std::max(sol.initial_defect, std::fabs(sol.u(0, i) - spec.phi[i]));
    }
    if (options_.residual) sol.residual_norm = residual_check(sol, spec, threads);
    if (options_.diagnostics) sol.regularity = regularity(sol, spec);
    return sol;
  }

private:
  struct CacheEntry {
    TimeGrid grid;
    double rho;
    double lam_eff;
    std::shared_ptr<const ConvolutionWeights> w;
  };

  std::vector<std::shared_ptr<const ConvolutionWeights>> weights_for(const ProblemSpec& spec, double M,
                                                                     std::size_t threads) {
    const std::size_t K = spec.K;
    std::vector<std::shared_ptr<const ConvolutionWeights>> out(K);
    std::vector<std::size_t> missing;
    {
      std::lock_guard lock(mutex_);
      for (std::size_t i = 0; i < K; ++i) {
        const double lam = eigenvalue(static_cast<long>(i + 1), spec.length());
        const double lam_eff = lam * lam * M;
        for (const auto& e : cache_)
          if (e.grid == spec.tgrid && e.rho == spec.rho && e.lam_eff == lam_eff) out[i] = e.w;
        if (!out[i]) missing.push_back(i);
      }
    }
    parallel_for(missing.size(), threads, [&](std::size_t j) {
      const std::size_t i = missing[j];
      const double lam = eigenvalue(static_cast<long>(i + 1), spec.length());
      out[i] = std::make_shared<const ConvolutionWeights>(spec.tgrid, spec.rho, lam * lam * M);
    });
    std::lock_guard lock(mutex_);
    for (std::size_t i : missing) cache_.push_back({spec.tgrid, spec.rho, out[i]->lam_eff(), out[i]});
    return out;
  }

  static double layer_rate_of(const ProblemSpec& spec, std::size_t i) {
    const double lam = eigenvalue(static_cast<long>(i + 1), spec.length());
    return std::max(0.0, lam * lam * spec.sigma[0] + (*spec.q)[0]);
  }

  std::shared_ptr<const std::vector<double>> layer_for(const ProblemSpec& spec, double a0) {
    {
      std::lock_guard lock(mutex_);
      for (const auto& e : layer_cache_)
        if (e.grid == spec.tgrid && e.rho == spec.rho && e.lam_eff == a0) return e.w;
    }
    return std::make_shared<const std::vector<double>>(layer_relaxation(spec.tgrid, spec.rho, a0));
  }

  static RegularityReport regularity(const FieldSolution& sol, const ProblemSpec& spec) {
    RegularityReport r;
    const double l = spec.length();
    const double norm = std::sqrt(2.0 / l);
    const std::size_t K = spec.K;
    r.tails = tail_diagnostics(sol.f_coeffs, sol.phi_coeffs, l, 2);
    r.c_rho = relaxation_decay_constant(spec.rho);

    double f_sum = 0.0;
    for (std::size_t k = 0; k < K; ++k) {
      const double lam = eigenvalue(static_cast<long>(k + 1), l);
      double fmax = 0.0;
      for (double v : sol.f_coeffs[k]) fmax = std::max(fmax, std::fabs(v));
      f_sum += lam * lam * fmax;
    }
    const double T = spec.tgrid.t_final();
    r.q1_bound = norm * std::pow(T, spec.rho) * special::rgamma(1.0 + spec.rho) * f_sum;

    const double m = sol.coefficients.m_sigma, n_q = sol.coefficients.n_q;
    double phi_sum = 0.0;
    bool defined = true;
    for (std::size_t k = 0; k < K; ++k) {
      const double lam = eigenvalue(static_cast<long>(k + 1), l);
      const double a = lam * lam * m + n_q;
      if (!(a > 0.0)) defined = false;
      phi_sum += std::fabs(sol.phi_coeffs[k]) * lam * lam / a;
    }
    r.q2_bound.resize(spec.tgrid.size());
    r.uxx_sup.resize(spec.tgrid.size());
    for (std::size_t n = 0; n < spec.tgrid.size(); ++n) {
      const double t = spec.tgrid.node(n);
      if (!defined) r.q2_bound[n] = std::numeric_limits<double>::quiet_NaN();
      else if (n == 0) r.q2_bound[n] = phi_sum == 0.0 ? 0.0 : std::numeric_limits<double>::infinity();
      else r.q2_bound[n] = norm * r.c_rho * std::pow(t, -spec.rho) * phi_sum;
      double s = 0.0;
      for (std::size_t i = 0; i < spec.sgrid.size(); ++i) s = std::max(s, std::fabs(sol.u_xx(n, i)));
      r.uxx_sup[n] = s;
      if (n >= 1 && defined) {
        const double bound = r.q1_bound + r.q2_bound[n];
        const double ratio = bound > 0.0 ? s / bound : (s > 0.0 ? std::numeric_limits<double>::infinity() : 0.0);
        r.worst_ratio = std::max(r.worst_ratio, ratio);
      }
    }
    r.bound_holds = defined && r.worst_ratio <= 1.0;
    return r;
  }

  struct LayerEntry {
    TimeGrid grid;
    double rho;
    double lam_eff; // the frozen rate a0
    std::shared_ptr<const std::vector<double>> w;
  };

  ForwardOptions options_;
  std::mutex mutex_;
  std::vector<CacheEntry> cache_;
  std::vector<LayerEntry> layer_cache_;
};

inline FieldSolution solve_forward(const ProblemSpec& spec, double tol = 1e-10,
                                   std::size_t max_iter = 200) {
  ForwardOptions o;
  o.tol = tol;
  o.max_iter = max_iter;
  return ForwardSolver(o).solve(spec);
}

} // namespace subdiff
