#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

#include "oracles.hpp"
#include "problems.hpp"
#include "subdiff/forward.hpp"

using namespace subdiff;

namespace {

constexpr double pi = std::numbers::pi;

ProblemSpec single_mode(std::size_t N, std::size_t M, std::size_t K, double rho, double sigma, double q) {
  ProblemSpec s;
  s.tgrid = TimeGrid(1.0, N);
  s.sgrid = SpaceGrid(1.0, M);
  s.rho = rho;
  s.sigma = Profile::constant(s.tgrid, sigma);
  s.q = Profile::constant(s.tgrid, q);
  s.K = K;
  s.f = Matrix(N + 1, M + 1, 0.0);
  s.phi = sample_space(s.sgrid, [](double x) { return std::sqrt(2.0) * std::sin(pi * x); });
  s.phi.back() = 0.0;
  return s;
}

double sup_error(const Matrix& a, const Matrix& b) { return max_abs_difference(a, b); }

} // namespace

TEST(CoefficientConditions, ConstantSigmaWithZeroQFailsTheWindow) {
  const auto s = single_mode(16, 16, 4, 0.5, 1.0, 0.0);
  const auto r = validate_coefficients(s);
  EXPECT_TRUE(r.positivity.pass);
  EXPECT_FALSE(r.q_window.pass);
  EXPECT_NEAR(r.q_lower, -pi * pi, 1e-12);
  EXPECT_EQ(r.q_upper, 0.0);
  EXPECT_TRUE(r.boundary.pass);
  EXPECT_FALSE(r.all_pass());
}

TEST(CoefficientConditions, OscillatingSigmaPasses) {
  auto s = single_mode(1000, 16, 4, 0.5, 1.0, 0.0);
  s.sigma = Profile::sample(s.tgrid, [](double t) { return 2.0 + std::sin(t); });
  const auto r = validate_coefficients(s);
  EXPECT_EQ(r.m_sigma, 2.0);
  EXPECT_NEAR(r.M_sigma, 2.0 + std::sin(1.0), 1e-15);
  EXPECT_NEAR(r.q_lower, -2.0 * pi * pi, 1e-12);
  EXPECT_NEAR(r.q_upper, std::sin(1.0) * pi * pi, 1e-12);
  EXPECT_TRUE(r.q_window.pass);
  EXPECT_TRUE(r.all_pass());
}

TEST(CoefficientConditions, NonzeroEndpointFails) {
  auto s = single_mode(16, 16, 4, 0.5, 1.0, 0.0);
  s.phi = sample_space(s.sgrid, [](double x) { return x; });
  EXPECT_FALSE(validate_coefficients(s).boundary.pass);
}

TEST(CoefficientConditions, MissingQIsNotApplicable) {
  auto s = single_mode(16, 16, 4, 0.5, 1.0, 0.0);
  s.q.reset();
  const auto r = validate_coefficients(s);
  EXPECT_FALSE(r.q_window.applicable);
  EXPECT_TRUE(r.q_window.pass);
}

TEST(CoefficientConditions, CurvedSourceAtTheEdgeFails) {
  auto s = single_mode(8, 64, 4, 0.5, 1.0, 0.0);
  s.f = sample_field(s.tgrid, s.sgrid, [](double x, double) { return x * (1.0 - x); });
  const auto r = validate_coefficients(s);
  EXPECT_FALSE(r.boundary.pass);
  s.f = sample_field(s.tgrid, s.sgrid, [](double x, double t) { return (1.0 + t) * std::sin(pi * x); });
  for (std::size_t n = 0; n < s.f.rows(); ++n) s.f(n, 64) = 0.0;
  EXPECT_TRUE(validate_coefficients(s).boundary.pass);
}

TEST(SolveForward, SingleModeRelaxation) {
  for (double rho : {0.3, 0.5, 0.8}) {
    const double M = 1.7;
    const auto s = single_mode(256, 64, 16, rho, M, 0.0);
    const auto sol = solve_forward(s);
    EXPECT_FALSE(sol.coefficients.q_window.pass);
    double err = 0.0;
    for (std::size_t n = 0; n < s.tgrid.size(); n += 5) {
      const double e = oracle::mlf_reference(rho, 1.0, pi * pi * M * std::pow(s.tgrid.node(n), rho));
      for (std::size_t i = 0; i < s.sgrid.size(); ++i)
        err = std::max(err, std::fabs(sol.u(n, i) - std::sqrt(2.0) * e * std::sin(pi * s.sgrid.node(i))));
    }
    EXPECT_LE(err, 1e-8) << "rho=" << rho;
  }
}

TEST(SolveForward, ZeroDataGivesZero) {
  oracle::Rng rng(1);
  auto s = problems::random_field_problem(rng, 64, 32, 16);
  s.f = Matrix(s.f.rows(), s.f.cols(), 0.0);
  std::fill(s.phi.begin(), s.phi.end(), 0.0);
  const auto sol = solve_forward(s);
  EXPECT_EQ(sol.u.max_abs(), 0.0);
  EXPECT_EQ(sol.u_xx.max_abs(), 0.0);
  ASSERT_TRUE(sol.residual_norm);
  EXPECT_EQ(*sol.residual_norm, 0.0);
}

TEST(SolveForward, BoundaryValuesAreExactlyZero) {
  oracle::Rng rng(2);
  const auto s = problems::random_field_problem(rng, 64, 32, 16);
  const auto sol = solve_forward(s);
  for (std::size_t n = 0; n < s.tgrid.size(); ++n) {
    EXPECT_EQ(sol.u(n, 0), 0.0);
    EXPECT_EQ(sol.u(n, s.sgrid.n_cells()), 0.0);
  }
  EXPECT_LE(sol.initial_defect, 1e-6);
}

TEST(SolveForward, ManufacturedSolution) {
  const auto m = problems::manufactured(1024, 256, 32);
  const auto sol = solve_forward(m.spec);
  EXPECT_LE(sup_error(sol.u, m.exact), 5e-3);
  ASSERT_TRUE(sol.residual_norm);
  EXPECT_LE(*sol.residual_norm, 1e-2);
  EXPECT_TRUE(sol.coefficients.all_pass() == false); // sigma constant: the q window is empty
  ASSERT_TRUE(sol.regularity);
  EXPECT_TRUE(sol.regularity->bound_holds);
}

TEST(SolveForward, RefinementReducesErrorAndResidual) {
  double prev_err = 1e300, prev_res = 1e300;
  for (std::size_t level = 0; level < 4; ++level) {
    const std::size_t N = 128u << level, M = 32u << level;
    const auto m = problems::manufactured(N, M, 16);
    const auto sol = solve_forward(m.spec);
    const double err = sup_error(sol.u, m.exact);
    EXPECT_LT(err, prev_err) << "N=" << N;
    EXPECT_LT(*sol.residual_norm, prev_res) << "N=" << N;
    prev_err = err;
    prev_res = *sol.residual_norm;
  }
}

TEST(SolveForward, PositivityOfModes) {
  oracle::Rng rng(31);
  for (int i = 0; i < 10; ++i) {
    const auto s = problems::random_field_problem(rng, 128, 64, 16, problems::Sign::nonnegative);
    const auto sol = solve_forward(s);
    for (std::size_t k = 0; k < s.K; ++k) {
      // only modes whose data are nonnegative are covered by the sign property
      bool signed_data = sol.phi_coeffs[k] >= 0.0;
      for (double v : sol.f_coeffs[k]) signed_data = signed_data && v >= 0.0;
      if (!signed_data) continue;
      for (double u : sol.modes.u[k]) ASSERT_GE(u, -1e-12) << "draw " << i << " mode " << k + 1;
    }
  }
}

TEST(SolveForward, SecondDerivativeBlowUpRate) {
  const double rho = 0.5;
  ProblemSpec s = single_mode(4096, 256, 128, rho, 1.0, 0.0);
  s.sigma = Profile::sample(s.tgrid, [](double t) { return 1.0 + 0.5 * t; });
  // a plateau datum: lam_k^2 |phi_k| grows with k, so u_xx genuinely blows up like t^-rho
  s.phi = sample_space(s.sgrid, [](double x) { return x > 0.25 && x < 0.75 ? 1.0 : 0.0; });
  const auto sol = solve_forward(s);
  // least-squares slope of log sup|u_xx| against log t over the first decade
  double sx = 0.0, sy = 0.0, sxx = 0.0, sxy = 0.0;
  int n_pts = 0;
  for (std::size_t n = 1; n <= 10; ++n) {
    const double x = std::log(s.tgrid.node(n)), y = std::log(sol.regularity->uxx_sup[n]);
    sx += x;
    sy += y;
    sxx += x * x;
    sxy += x * y;
    ++n_pts;
  }
  const double slope = (n_pts * sxy - sx * sy) / (n_pts * sxx - sx * sx);
  EXPECT_LE(slope, -rho + 0.15);
  EXPECT_GE(slope, -rho - 0.15);
  EXPECT_TRUE(sol.regularity->bound_holds) << sol.regularity->worst_ratio;
}

TEST(SolveForward, WarmStartAndCacheAgree) {
  oracle::Rng rng(12);
  const auto s = problems::random_field_problem(rng, 128, 64, 16);
  ForwardSolver solver;
  const auto a = solver.solve(s);
  const auto b = solver.solve(s);
  EXPECT_EQ(sup_error(a.u, b.u), 0.0);
  const auto c = solver.solve(s, &a.modes);
  EXPECT_LE(sup_error(a.u, c.u), 1e-8);
  for (const auto& pm : c.per_mode) EXPECT_LE(pm.iterations, 2u);
  EXPECT_EQ(sup_error(a.u, solve_forward(s).u), 0.0);
}

TEST(SolveForward, SkippingAssemblyKeepsTheModes) {
  oracle::Rng rng(13);
  const auto s = problems::random_field_problem(rng, 64, 32, 8);
  ForwardOptions o;
  o.assemble = o.residual = o.diagnostics = false;
  const auto lean = ForwardSolver(o).solve(s);
  const auto full = solve_forward(s);
  EXPECT_EQ(lean.u.rows(), 0u);
  EXPECT_FALSE(lean.residual_norm);
  for (std::size_t k = 0; k < s.K; ++k) EXPECT_EQ(lean.modes.u[k], full.modes.u[k]);
}

TEST(SolveForward, Errors) {
  auto s = single_mode(16, 16, 4, 0.5, 1.0, 0.0);
  auto bad = s;
  bad.sigma = Profile::constant(s.tgrid, -1.0);
  EXPECT_THROW(solve_forward(bad), AdmissibilityError);
  bad = s;
  bad.q.reset();
  EXPECT_THROW(solve_forward(bad), DomainError);
  bad = s;
  bad.K = 9;
  EXPECT_THROW(solve_forward(bad), AliasingError);
  bad = s;
  bad.phi.pop_back();
  EXPECT_THROW(solve_forward(bad), GridMismatchError);
  bad = s;
  bad.rho = 1.0;
  EXPECT_THROW(solve_forward(bad), DomainError);

  ForwardOptions o;
  o.tol = 1e-15;
  o.max_iter = 1;
  s.sigma = Profile::sample(s.tgrid, [](double t) { return 1.0 + t; });
  try {
    ForwardSolver(o).solve(s);
    FAIL() << "expected non-convergence";
  } catch (const ConvergenceError& e) {
    EXPECT_NE(std::string(e.what()).find("mode 1"), std::string::npos);
  }
}

TEST(RelaxationDecayConstant, BoundsTheScaledRelaxation) {
  for (double rho : {0.2, 0.5, 0.9}) {
    const double c = relaxation_decay_constant(rho);
    for (double x = 0.0; x < 1e4; x = 1.3 * x + 0.01)
      EXPECT_LE((1.0 + x) * oracle::mlf_reference(rho, 1.0, x), c) << rho << " " << x;
  }
}
