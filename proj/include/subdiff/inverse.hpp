#pragma once

// Recovery of q(t) from the flux trace psi(t) = u_x(0,t). Differentiating the
// equation in x at x = 0 gives
//   D^rho psi - sigma u_xxx(0,t) + q psi = f_x(0,t),
// so q is the fixed point of
//   L[q] = q0 + sigma u_xxx(0,t) / psi,   q0 = (f_x(0,t) - D^rho psi) / psi,
// with u the forward solution for the current q and
// u_xxx(0,t) = -sqrt(2/l) sum_k lam_k^3 u_k(t).

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numbers>
#include <optional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "subdiff/error.hpp"
#include "subdiff/forward.hpp"
#include "subdiff/frackernel.hpp"
#include "subdiff/gamma.hpp"
#include "subdiff/spectral.hpp"

namespace subdiff {

struct InverseSpec {
  ProblemSpec spec;              // q is ignored
  Profile psi;                   // observed u_x(0, t)
  double psi0 = 0.0;             // declared lower bound of psi
  Profile fx0;                   // f_x(0, t)
  std::optional<Profile> q_init; // default: see default_q_init
  std::optional<Profile> q_true; // scoring only, never read by the recovery
};

/// f_x(0, t) = sqrt(2/l) sum_k lam_k f_k(t) from the first K sine coefficients.
inline Profile left_source_gradient(const ProblemSpec& spec) {
  ModeSet m;
  m.length = spec.length();
  m.grid = spec.tgrid;
  m.u = sine_coefficients(spec.sgrid, spec.f, spec.K);
  return flux_at_left(m, spec.tgrid);
}

inline InverseSpec make_inverse_spec(ProblemSpec spec, Profile psi, double psi0) {
  require_same_grid(spec.tgrid, psi.grid(), "make_inverse_spec(psi)");
  spec.q.reset();
  InverseSpec inv;
  inv.fx0 = left_source_gradient(spec);
  inv.spec = std::move(spec);
  inv.psi = std::move(psi);
  inv.psi0 = psi0;
  return inv;
}

/// The open window (-m pi^2/l^2, (M - m) pi^2/l^2) that admissible q must occupy.
struct QWindow {
  double lower = 0.0, upper = 0.0;
  bool empty() const noexcept { return !(upper > lower); }
};

inline QWindow q_window(const InverseSpec& inv) {
  const double l = inv.spec.length();
  const double pi2 = std::numbers::pi * std::numbers::pi / (l * l);
  const double m = inv.spec.sigma.min(), M = inv.spec.sigma.max();
  return {-m * pi2, (M - m) * pi2};
}

/// max(0, midpoint of the window intersected with [0, inf)), constant in t.
inline Profile default_q_init(const InverseSpec& inv) {
  const auto w = q_window(inv);
  const double lo = std::max(w.lower, 0.0);
  const double mid = w.upper > lo ? 0.5 * (lo + w.upper) : 0.0;
  return Profile::constant(inv.spec.tgrid, std::max(0.0, mid));
}

inline void require_psi_bound(const InverseSpec& inv, const char* who) {
  require_same_grid(inv.spec.tgrid, inv.psi.grid(), who);
  if (!(inv.psi0 > 0.0) || !(inv.psi.min() >= inv.psi0)) {
    std::ostringstream os;
    os << who << ": need psi >= psi0 > 0 (min psi " << inv.psi.min() << ", psi0 " << inv.psi0 << ")";
    throw AdmissibilityError(os.str());
  }
}

/// q0 at t_n >= t_1 from the L1 derivative of psi; q0(t_0) by quadratic
/// extrapolation from t_1..t_3 (linear or constant on shorter grids).
inline Profile compute_q0(const InverseSpec& inv) {
  require_psi_bound(inv, "compute_q0");
  require_same_grid(inv.spec.tgrid, inv.fx0.grid(), "compute_q0(fx0)");
  const TimeGrid& g = inv.spec.tgrid;
  const auto d = caputo_l1(g, inv.psi.values(), inv.spec.rho);
  std::vector<double> q(g.size());
  for (std::size_t n = 1; n < q.size(); ++n) q[n] = (inv.fx0[n] - d[n]) / inv.psi[n];
  if (q.size() >= 4) q[0] = 3.0 * q[1] - 3.0 * q[2] + q[3];
  else if (q.size() == 3) q[0] = 2.0 * q[1] - q[2];
  else q[0] = q[1];
  return Profile(g, std::move(q));
}

/// Weighted coefficient sums of the data with power 3:
/// S_f = max_t sum_k lam_k^3 |f_k(t)|, S_phi = sum_k lam_k^3 |phi_k|.
struct DataSums {
  double s_f = 0.0, s_phi = 0.0;
  std::vector<std::vector<double>> f_coeffs;
  std::vector<double> phi_coeffs;
};

inline DataSums data_sums(const ProblemSpec& spec) {
  DataSums d;
  d.f_coeffs = sine_coefficients(spec.sgrid, spec.f, spec.K);
  d.phi_coeffs = sine_coefficients(spec.sgrid, spec.phi, spec.K);
  const auto t = tail_diagnostics(d.f_coeffs, d.phi_coeffs, spec.length(), 3);
  d.s_f = t.f_sum;
  d.s_phi = t.phi_sum;
  return d;
}

/// Right side of the bound sum_k lam_k^3 |u_k(t)| <= T^rho/Gamma(1+rho) S_f + S_phi.
inline double cubic_mode_bound(const ProblemSpec& spec, const DataSums& d) {
  const double T = spec.tgrid.t_final();
  return std::pow(T, spec.rho) * special::rgamma(1.0 + spec.rho) * d.s_f + d.s_phi;
}

/// C(T) = sqrt(2/l) M_sigma T^rho / (psi0 Gamma(1+rho)) (T^rho/Gamma(1+rho) S_f + S_phi).
/// Values >= 1 certify nothing.
inline double estimate_CT(const InverseSpec& inv) {
  if (!(inv.psi0 > 0.0)) throw DomainError("estimate_CT: psi0 must be positive");
  const ProblemSpec& s = inv.spec;
  const auto d = data_sums(s);
  const double T = s.tgrid.t_final();
  const double lead = std::sqrt(2.0 / s.length()) * s.sigma.max() * std::pow(T, s.rho) *
                      special::rgamma(1.0 + s.rho) / inv.psi0;
  return lead * cubic_mode_bound(s, d);
}

struct InverseConditionReport {
  ConditionCheck psi_regular;    // (1) psi >= psi0 > 0 with a bounded difference quotient
  ConditionCheck compatibility;  // (2) phi_x(0) = psi(0)
  ConditionCheck q0_window;      // (3) 0 <= T^rho q0 < T^rho pi^2 (M - m)/l^2 - Gamma(1+rho)
  ConditionCheck data_size;      // (4) C(T) < 1
  ConditionCheck data_signs;     // f_k >= 0 and phi_k >= 0 for every mode
  double CT = 0.0;
  double psi_slope = 0.0;        // max |psi(t_{n+1}) - psi(t_n)| / h
  double psi_start_ratio = 0.0;  // slope over [0, h] / slope over [0, 2h]
  double phi_x0 = 0.0;
  bool all_pass() const {
    return psi_regular.pass && compatibility.pass && q0_window.pass && data_size.pass && data_signs.pass;
  }
};

inline InverseConditionReport validate_inverse_conditions(const InverseSpec& inv) {
  InverseConditionReport r;
  const ProblemSpec& s = inv.spec;
  const TimeGrid& g = s.tgrid;
  const double h = g.step();
  for (std::size_t n = 0; n + 1 < g.size(); ++n)
    r.psi_slope = std::max(r.psi_slope, std::fabs(inv.psi[n + 1] - inv.psi[n]) / h);
  {
    // A t^rho component makes the first difference quotient exceed the one
    // over [0, 2h] by the factor 2^(1-rho); a C^1 trace keeps the ratio near 1.
    bool bounded = std::isfinite(r.psi_slope);
    double ratio = 0.0;
    if (g.size() >= 3) {
      const double first = std::fabs(inv.psi[1] - inv.psi[0]) / h;
      const double two = std::fabs(inv.psi[2] - inv.psi[0]) / (2.0 * h);
      const double noise = 64.0 * std::numeric_limits<double>::epsilon() * inv.psi.max() / h;
      const double limit = 1.0 + 0.5 * (std::pow(2.0, 1.0 - s.rho) - 1.0);
      ratio = first > noise ? first / std::max(two, noise) : 0.0;
      bounded = bounded && ratio <= limit;
    }
    r.psi_start_ratio = ratio;
    const double lo = inv.psi.min();
    r.psi_regular.margin = std::min(lo - inv.psi0, inv.psi0);
    r.psi_regular.pass = inv.psi0 > 0.0 && lo >= inv.psi0 && bounded;
    std::ostringstream os;
    os << "min psi " << lo << ", psi0 " << inv.psi0 << ", max |psi'| ~ " << r.psi_slope
       << ", start slope ratio " << ratio;
    r.psi_regular.detail = os.str();
  }

  const auto d = data_sums(s);
  {
    double v = 0.0;
    for (std::size_t k = 0; k < s.K; ++k)
      v += eigenvalue(static_cast<long>(k + 1), s.length()) * d.phi_coeffs[k];
    r.phi_x0 = std::sqrt(2.0 / s.length()) * v;
    const double tol = 1e-6 * (1.0 + std::fabs(inv.psi[0]));
    const double defect = std::fabs(r.phi_x0 - inv.psi[0]);
    r.compatibility.margin = tol - defect;
    r.compatibility.pass = defect <= tol;
    std::ostringstream os;
    os << "phi_x(0) " << r.phi_x0 << ", psi(0) " << inv.psi[0] << ", defect " << defect;
    r.compatibility.detail = os.str();
  }

  if (inv.psi0 > 0.0 && inv.psi.min() >= inv.psi0) {
    const auto q0 = compute_q0(inv);
    const double T = g.t_final(), Tr = std::pow(T, s.rho);
    const double l = s.length();
    const double upper = Tr * std::numbers::pi * std::numbers::pi / (l * l) * (s.sigma.max() - s.sigma.min()) -
                         std::tgamma(1.0 + s.rho);
    double lo = std::numeric_limits<double>::infinity(), hi = -lo;
    for (std::size_t n = 1; n < g.size(); ++n) {
      lo = std::min(lo, Tr * q0[n]);
      hi = std::max(hi, Tr * q0[n]);
    }
    r.q0_window.margin = std::min(lo, upper - hi);
    r.q0_window.pass = lo >= 0.0 && hi < upper;
    std::ostringstream os;
    os << "T^rho q0 in [" << lo << ", " << hi << "], required [0, " << upper << ")";
    r.q0_window.detail = os.str();
  } else {
    r.q0_window.applicable = false;
    r.q0_window.detail = "q0 undefined without psi >= psi0 > 0";
  }

  if (inv.psi0 > 0.0) {
    r.CT = estimate_CT(inv);
    r.data_size.margin = 1.0 - r.CT;
    r.data_size.pass = r.CT < 1.0;
    std::ostringstream os;
    os << "C(T) = " << r.CT;
    r.data_size.detail = os.str();
  } else {
    r.data_size.applicable = false;
    r.data_size.detail = "psi0 not positive";
  }

  {
    double worst = std::numeric_limits<double>::infinity();
    for (std::size_t k = 0; k < s.K; ++k) {
      worst = std::min(worst, d.phi_coeffs[k]);
      for (double v : d.f_coeffs[k]) worst = std::min(worst, v);
    }
    // coefficients of single-mode data carry rounding-level noise in the other modes
    const double scale = std::max(d.s_f, d.s_phi) / std::pow(eigenvalue(1, s.length()), 3);
    const double tol = 1e-12 * std::max(scale, 1.0);
    r.data_signs.margin = worst + tol;
    r.data_signs.pass = worst >= -tol;
    std::ostringstream os;
    os << "min coefficient " << worst;
    r.data_signs.detail = os.str();
  }
  return r;
}

struct InverseOptions {
  double tol = 1e-8;            // sup-norm update that ends the outer iteration
  std::size_t max_iter = 5000;
  double forward_tol = 1e-12;   // Picard tolerance of every forward solve
  std::size_t forward_max_iter = 500;
  std::size_t threads = 0;
};

struct InverseResult {
  Profile q;
  std::vector<double> iterates;   // sup-norm update of each outer step
  double measured_ratio = 0.0;    // largest ratio of successive updates above the rounding floor
  double mean_ratio = 0.0;        // their geometric mean
  double CT_bound = 0.0;
  std::size_t iterations = 0;
  std::size_t clamped_nodes = 0;  // nodewise projections onto the q window
  double cubic_bound_worst_ratio = 0.0; // max over iterates and t of sum lam^3 |u_k| / bound
  double flux_residual = 0.0;       // max_t |u_x(0,t) - psi(t)| of the final solve
  std::optional<double> q_error;    // max |q - q_true| when q_true is known
  InverseConditionReport condition_report;
  FieldSolution final_forward;
};

namespace detail {

inline ProblemSpec with_q(const ProblemSpec& s, const Profile& q) {
  ProblemSpec out = s;
  out.q = q;
  return out;
}

// sum_k lam_k^3 |u_k(t_n)| (orthonormal coefficients), maximized over n
inline double cubic_mode_sum(const ModeSet& m) {
  double worst = 0.0;
  for (std::size_t n = 0; n < m.grid.size(); ++n) {
    double v = 0.0;
    for (std::size_t k = 0; k < m.modes(); ++k) v += std::pow(m.lambda(k + 1), 3) * std::fabs(m.u[k][n]);
    worst = std::max(worst, v);
  }
  return worst;
}

} // namespace detail

/// L[q] from the modes of a forward solve with coefficient q.
inline Profile operator_from_modes(const InverseSpec& inv, const Profile& q0, const ModeSet& modes) {
  const auto uxxx = third_trace_at_left(modes, inv.spec.tgrid);
  std::vector<double> out(q0.size());
  for (std::size_t n = 0; n < out.size(); ++n) out[n] = q0[n] + inv.spec.sigma[n] * uxxx[n] / inv.psi[n];
  return Profile(inv.spec.tgrid, std::move(out));
}

/// One application of L with a fresh forward solve.
inline Profile apply_L(const Profile& q, const InverseSpec& inv, double tol = 1e-12,
                       std::size_t max_iter = 500) {
  require_psi_bound(inv, "apply_L");
  ForwardOptions o;
  o.tol = tol;
  o.max_iter = max_iter;
  o.assemble = o.residual = o.diagnostics = false;
  const auto sol = ForwardSolver(o).solve(detail::with_q(inv.spec, q));
  return operator_from_modes(inv, compute_q0(inv), sol.modes);
}

/// Fixed-point iteration q <- clamp(L[q]) from q_init, warm-starting every
/// forward solve from the previous modes.
inline InverseResult recover_q(const InverseSpec& inv, const InverseOptions& opt = {}) {
  if (!(opt.tol > 0.0)) throw DomainError("recover_q: tol must be positive");
  InverseResult res;
  res.condition_report = validate_inverse_conditions(inv);
  require_psi_bound(inv, "recover_q");
  res.CT_bound = res.condition_report.CT;

  const ProblemSpec& s = inv.spec;
  const TimeGrid& g = s.tgrid;
  const Profile q0 = compute_q0(inv);
  const auto window = q_window(inv);
  // stay strictly inside the open window
  const double pad = window.empty() ? 0.0 : 1e-9 * (window.upper - window.lower);
  const double clamp_lo = window.lower + pad, clamp_hi = window.upper - pad;
  const double bound = cubic_mode_bound(s, data_sums(s));

  ForwardOptions fo;
  fo.tol = opt.forward_tol;
  fo.max_iter = opt.forward_max_iter;
  fo.threads = opt.threads;
  fo.assemble = fo.residual = fo.diagnostics = false;
  ForwardSolver solver(fo);

  Profile q = inv.q_init ? *inv.q_init : default_q_init(inv);
  require_same_grid(g, q.grid(), "recover_q(q_init)");
  ModeSet warm;
  bool have_warm = false;
  double log_ratio_sum = 0.0;
  std::size_t ratio_count = 0;
  for (std::size_t it = 1; it <= opt.max_iter; ++it) {
    FieldSolution sol;
    try {
      sol = solver.solve(detail::with_q(s, q), have_warm ? &warm : nullptr);
    } catch (const ConvergenceError& e) {
      std::ostringstream os;
      os << "recover_q: forward solve failed at iterate " << it << ": " << e.what();
      throw ConvergenceError(os.str(), it, e.last_update(), e.ratio());
    }
    if (bound > 0.0) res.cubic_bound_worst_ratio = std::max(res.cubic_bound_worst_ratio, detail::cubic_mode_sum(sol.modes) / bound);
    auto next = operator_from_modes(inv, q0, sol.modes);
    std::vector<double> v = next.values();
    if (!window.empty())
      for (double& x : v) {
        const double c = std::clamp(x, clamp_lo, clamp_hi);
        if (c != x) ++res.clamped_nodes;
        x = c;
      }
    double update = 0.0, size = 0.0;
    for (std::size_t n = 0; n < v.size(); ++n) {
      update = std::max(update, std::fabs(v[n] - q[n]));
      size = std::max(size, std::fabs(v[n]));
    }
    res.iterates.push_back(update);
    res.iterations = it;
    q = Profile(g, std::move(v));
    warm = std::move(sol.modes);
    have_warm = true;

    const std::size_t m = res.iterates.size();
    const double floor = 64.0 * std::numeric_limits<double>::epsilon() * std::max(size, 1.0);
    if (m >= 2 && res.iterates[m - 2] > floor && update > floor) {
      const double ratio = update / res.iterates[m - 2];
      res.measured_ratio = std::max(res.measured_ratio, ratio);
      log_ratio_sum += std::log(ratio);
      ++ratio_count;
      res.mean_ratio = std::exp(log_ratio_sum / static_cast<double>(ratio_count));
    }
    if (update < opt.tol || update <= floor) break;
    if (it == opt.max_iter) {
      std::ostringstream os;
      os << "recover_q: no convergence in " << opt.max_iter << " iterations (last update " << update
         << ", measured ratio " << res.measured_ratio << ", C(T) " << res.CT_bound << ")";
      throw ConvergenceError(os.str(), it, update, res.measured_ratio);
    }
  }

  ForwardOptions full = fo;
  full.assemble = full.residual = full.diagnostics = true;
  solver.options() = full;
  res.final_forward = solver.solve(detail::with_q(s, q), &warm);
  const auto flux = flux_at_left(res.final_forward.modes, g);
  for (std::size_t n = 0; n < g.size(); ++n)
    res.flux_residual = std::max(res.flux_residual, std::fabs(flux[n] - inv.psi[n]));
  if (inv.q_true) {
    double e = 0.0;
    for (std::size_t n = 0; n < g.size(); ++n) e = std::max(e, std::fabs(q[n] - (*inv.q_true)[n]));
    res.q_error = e;
  }
  res.q = std::move(q);
  return res;
}

/// Flux data from a forward solve with the given q, optionally perturbed by
/// multiplicative uniform noise psi (1 + noise U(-1, 1)) drawn from mt19937_64(seed).
/// psi0 is set to min psi; q moves to q_true.
inline InverseSpec synthesize_data(const ProblemSpec& spec_with_q, double noise_level, std::uint64_t seed,
                                   double tol = 1e-12, std::size_t max_iter = 500) {
  if (!spec_with_q.q) throw DomainError("synthesize_data: q_true is required");
  if (!(noise_level >= 0.0) || !std::isfinite(noise_level))
    throw DomainError("synthesize_data: noise level must be a nonnegative number");
  ForwardOptions o;
  o.tol = tol;
  o.max_iter = max_iter;
  o.assemble = o.residual = o.diagnostics = false;
  const auto sol = ForwardSolver(o).solve(spec_with_q);
  std::vector<double> psi = flux_at_left(sol.modes, spec_with_q.tgrid).values();
  if (noise_level > 0.0) {
    std::mt19937_64 gen(seed);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    for (double& v : psi) v *= 1.0 + noise_level * u(gen);
  }
  const double psi0 = *std::min_element(psi.begin(), psi.end());
  Profile q_true = *spec_with_q.q;
  InverseSpec inv = make_inverse_spec(spec_with_q, Profile(spec_with_q.tgrid, std::move(psi)), psi0);
  inv.q_true = std::move(q_true);
  return inv;
}

} // namespace subdiff
