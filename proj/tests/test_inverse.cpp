#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

#include "oracles.hpp"
#include "problems.hpp"
#include "subdiff/inverse.hpp"

using namespace subdiff;

namespace {

constexpr double pi = std::numbers::pi;

double q_const(double) { return 0.3; }
double q_affine(double t) { return 0.2 + 0.1 * t; }

// phi = c sqrt(2) sin(pi x), f = 0, on l = 1; psi supplied by the caller
InverseSpec bare_spec(std::size_t N, double c, const std::function<double(double)>& psi) {
  ProblemSpec s;
  s.tgrid = TimeGrid(1.0, N);
  s.sgrid = SpaceGrid(1.0, 64);
  s.rho = 0.5;
  s.K = 8;
  s.sigma = Profile::sample(s.tgrid, [](double t) { return 2.0 + std::sin(t); });
  s.f = Matrix(N + 1, 65, 0.0);
  s.phi = sample_space(s.sgrid, [&](double x) { return c * std::sqrt(2.0) * std::sin(pi * x); });
  s.phi.back() = 0.0;
  const auto p = Profile::sample(s.tgrid, psi);
  return make_inverse_spec(s, p, p.min());
}

double sup_diff(const Profile& a, const Profile& b) {
  double d = 0.0;
  for (std::size_t n = 0; n < a.size(); ++n) d = std::max(d, std::fabs(a[n] - b[n]));
  return d;
}

} // namespace

TEST(ComputeQ0, ConstantFluxGivesZero) {
  const auto inv = bare_spec(64, 0.1, [](double) { return 2.0; });
  const auto q0 = compute_q0(inv);
  for (double v : q0.values()) EXPECT_EQ(v, 0.0);
}

TEST(ComputeQ0, LinearFlux) {
  const auto inv = bare_spec(128, 0.1, [](double t) { return 1.0 + t; });
  const auto q0 = compute_q0(inv);
  for (std::size_t n = 1; n < q0.size(); ++n) {
    const double t = inv.spec.tgrid.node(n);
    EXPECT_NEAR(q0[n], -std::sqrt(t) / (std::tgamma(1.5) * (1.0 + t)), 1e-12);
  }
  // the extrapolated start sits near the exact value 0
  EXPECT_LT(std::fabs(q0[0]), 0.05);
}

TEST(ComputeQ0, RejectsFluxBelowBound) {
  auto inv = bare_spec(16, 0.1, [](double t) { return 1.0 - t; });
  EXPECT_THROW(compute_q0(inv), AdmissibilityError);
  inv = bare_spec(16, 0.1, [](double) { return 1.0; });
  inv.psi0 = 2.0;
  EXPECT_THROW(compute_q0(inv), AdmissibilityError);
}

TEST(EstimateCT, ZeroDataAndScaling) {
  auto inv = bare_spec(32, 0.0, [](double) { return 1.0; });
  EXPECT_EQ(estimate_CT(inv), 0.0);

  inv = synthesize_data(problems::inverse_scenario(q_const, 128, 64, 16), 0.0, 1);
  const double c = estimate_CT(inv);
  inv.psi0 *= 2.0;
  EXPECT_NEAR(estimate_CT(inv), 0.5 * c, 1e-14 * c);
}

TEST(EstimateCT, ScenarioValueFromClosedForm) {
  const auto s = problems::inverse_scenario(q_const, 256, 64, 16);
  const auto inv = synthesize_data(s, 0.0, 1);
  // single mode: f_1(t) = f0 + t, phi_1 = 0.1
  const double T = 0.5, g = std::tgamma(1.5), M = 2.0 + std::sin(0.5);
  const double f0 = 0.1 * (2.0 * pi * pi + 0.3);
  const double expected = std::sqrt(2.0) * M * std::sqrt(T) / (inv.psi0 * g) *
                          (std::sqrt(T) / g * std::pow(pi, 3) * (f0 + T) + std::pow(pi, 3) * 0.1);
  EXPECT_NEAR(estimate_CT(inv), expected, 1e-8 * expected);
  EXPECT_GT(estimate_CT(inv), 1.0);
}

TEST(EstimateCT, SingleModeDataCannotCertifyAtThisHorizon) {
  // psi0 <= sqrt(2) pi phi_1, so C(T) >= M T^rho pi^2 / Gamma(1 + rho) for any single-mode data
  oracle::Rng rng(9);
  for (int i = 0; i < 5; ++i) {
    const double c = rng.uniform(0.01, 1.0), a = rng.uniform(0.0, 3.0), b = rng.uniform(0.0, 3.0);
    auto s = problems::inverse_scenario(q_const, 64, 32, 8);
    s.phi = sample_space(s.sgrid, [&](double x) { return c * std::sqrt(2.0) * std::sin(pi * x); });
    s.f = sample_field(s.tgrid, s.sgrid, [&](double x, double t) { return (a + b * t) * std::sqrt(2.0) * std::sin(pi * x); });
    s.phi.back() = 0.0;
    for (std::size_t n = 0; n < s.f.rows(); ++n) s.f(n, 32) = 0.0;
    const auto inv = synthesize_data(s, 0.0, 1);
    const double floor = s.sigma.max() * std::sqrt(0.5) * pi * pi / std::tgamma(1.5);
    EXPECT_GE(estimate_CT(inv), floor * (1.0 - 1e-9));
  }
}

TEST(InverseConditions, CompatibleConstantFlux) {
  const double c = 1.0 / (std::sqrt(2.0) * pi);
  const auto inv = bare_spec(64, c, [](double) { return 1.0; });
  const auto r = validate_inverse_conditions(inv);
  EXPECT_TRUE(r.psi_regular.pass);
  EXPECT_TRUE(r.compatibility.pass);
  EXPECT_LE(std::fabs(r.phi_x0 - 1.0), 1e-14);
}

TEST(InverseConditions, ConstantSigmaFailsTheQ0Window) {
  auto inv = bare_spec(64, 0.1, [](double) { return 1.0; });
  inv.spec.sigma = Profile::constant(inv.spec.tgrid, 1.5);
  const auto r = validate_inverse_conditions(inv);
  EXPECT_FALSE(r.q0_window.pass);
  EXPECT_LT(r.q0_window.margin, 0.0);
}

TEST(InverseConditions, ScenarioReport) {
  const auto inv = synthesize_data(problems::inverse_scenario(q_const, 512, 64, 16), 0.0, 1);
  const auto r = validate_inverse_conditions(inv);
  EXPECT_TRUE(r.psi_regular.pass) << r.psi_regular.detail;
  EXPECT_TRUE(r.compatibility.pass) << r.compatibility.detail;
  EXPECT_TRUE(r.data_signs.pass) << r.data_signs.detail;
  // q0 ~ q + sigma pi^2 lies far above the window and the data-size constant exceeds 1
  EXPECT_FALSE(r.q0_window.pass) << r.q0_window.detail;
  EXPECT_FALSE(r.data_size.pass) << r.data_size.detail;
  EXPECT_FALSE(r.all_pass());
}

TEST(InverseConditions, SingularFluxFailsTheC1Surrogate) {
  auto s = problems::inverse_scenario(q_const, 512, 64, 16);
  s.f = Matrix(s.f.rows(), s.f.cols(), 0.0);
  const auto inv = synthesize_data(s, 0.0, 1);
  const auto r = validate_inverse_conditions(inv);
  EXPECT_FALSE(r.psi_regular.pass) << r.psi_regular.detail;
  EXPECT_GT(r.psi_start_ratio, 1.2);
}

TEST(ApplyL, FixedPointDefectShrinksUnderRefinement) {
  double prev = 1e300;
  for (std::size_t N : {256u, 512u, 1024u}) {
    const auto inv = synthesize_data(problems::inverse_scenario(q_const, N, 128, 32), 0.0, 1);
    const double d = sup_diff(apply_L(*inv.q_true, inv), *inv.q_true);
    EXPECT_LT(d, prev) << "N=" << N;
    prev = d;
  }
  EXPECT_LE(prev, 1e-4);
}

TEST(ApplyL, ConsistencyWithZeroSource) {
  // f = 0 leaves a t^rho layer in psi; away from it q = q0 + sigma u_xxx(0)/psi converges to the truth
  double prev = 1e300;
  for (std::size_t N : {256u, 512u, 1024u}) {
    auto s = problems::inverse_scenario(q_const, N, 64, 16);
    s.f = Matrix(s.f.rows(), s.f.cols(), 0.0);
    const auto inv = synthesize_data(s, 0.0, 1);
    const auto Lq = apply_L(*inv.q_true, inv);
    double d = 0.0;
    for (std::size_t n = N / 4; n <= N; ++n) d = std::max(d, std::fabs(Lq[n] - 0.3));
    EXPECT_LT(d, 0.5 * prev) << "N=" << N;
    prev = d;
  }
  EXPECT_LE(prev, 5e-3);
}

TEST(ApplyL, OneStepFromZeroContracts) {
  const auto inv = synthesize_data(problems::inverse_scenario(q_const, 256, 64, 16), 0.0, 1);
  const Profile zero = Profile::constant(inv.spec.tgrid, 0.0);
  const double before = sup_diff(zero, *inv.q_true);
  const double after = sup_diff(apply_L(zero, inv), *inv.q_true);
  EXPECT_LE(after, estimate_CT(inv) * before);
  EXPECT_LT(after, before);
}

TEST(RecoverQ, RoundTripConstant) {
  const auto inv = synthesize_data(problems::inverse_scenario(q_const, 1024, 128, 32), 0.0, 1);
  const auto r = recover_q(inv);
  ASSERT_TRUE(r.q_error);
  EXPECT_LE(*r.q_error, 1e-3);
  EXPECT_LE(r.measured_ratio, r.CT_bound + 0.1);
  for (std::size_t n = 2; n < r.iterates.size(); ++n)
    if (r.iterates[n - 1] > 1e-13) {
      EXPECT_LE(r.iterates[n], (r.measured_ratio + 0.05) * r.iterates[n - 1]);
    }
  EXPECT_LE(r.cubic_bound_worst_ratio, 1.0);
  EXPECT_LE(r.flux_residual, 1e-5);
  EXPECT_EQ(r.clamped_nodes, 0u);
}

TEST(RecoverQ, RoundTripAffine) {
  const auto inv = synthesize_data(problems::inverse_scenario(q_affine, 1024, 128, 32), 0.0, 1);
  const auto r = recover_q(inv);
  EXPECT_LE(*r.q_error, 5e-3);
  EXPECT_LE(r.cubic_bound_worst_ratio, 1.0);
}

TEST(RecoverQ, NullCoefficient) {
  const auto inv = synthesize_data(problems::inverse_scenario([](double) { return 0.0; }, 512, 64, 16), 0.0, 1);
  const auto r = recover_q(inv);
  double m = 0.0;
  for (double v : r.q.values()) m = std::max(m, std::fabs(v));
  EXPECT_LE(m, 1e-4);
}

TEST(RecoverQ, StartingAtTheTruthStopsAtDiscretizationLevel) {
  auto inv = synthesize_data(problems::inverse_scenario(q_const, 512, 64, 16), 0.0, 1);
  const double defect = sup_diff(apply_L(*inv.q_true, inv), *inv.q_true);
  inv.q_init = inv.q_true;
  InverseOptions o;
  o.tol = 10.0 * defect;
  const auto r = recover_q(inv, o);
  EXPECT_LE(r.iterations, 2u);
}

TEST(RecoverQ, NonConvergenceCarriesDiagnostics) {
  const auto inv = synthesize_data(problems::inverse_scenario(q_const, 128, 64, 8), 0.0, 1);
  InverseOptions o;
  o.max_iter = 3;
  try {
    recover_q(inv, o);
    FAIL() << "expected non-convergence";
  } catch (const ConvergenceError& e) {
    EXPECT_EQ(e.iterations(), 3u);
    EXPECT_NE(std::string(e.what()).find("C(T)"), std::string::npos);
  }
}

TEST(RecoverQ, RefusesFluxBelowBound) {
  auto inv = synthesize_data(problems::inverse_scenario(q_const, 64, 32, 8), 0.0, 1);
  inv.psi0 = inv.psi.max() + 1.0;
  EXPECT_THROW(recover_q(inv), AdmissibilityError);
}

TEST(SynthesizeData, NoiseIsSeededAndMultiplicative) {
  const auto s = problems::inverse_scenario(q_const, 128, 64, 8);
  const auto clean = synthesize_data(s, 0.0, 1);
  const auto a = synthesize_data(s, 0.01, 42);
  const auto b = synthesize_data(s, 0.01, 42);
  const auto c = synthesize_data(s, 0.01, 43);
  EXPECT_EQ(a.psi.values(), b.psi.values());
  EXPECT_NE(a.psi.values(), c.psi.values());
  for (std::size_t n = 0; n < clean.psi.size(); ++n)
    EXPECT_LE(std::fabs(a.psi[n] / clean.psi[n] - 1.0), 0.01 + 1e-15);
  EXPECT_EQ(a.psi0, a.psi.min());
  EXPECT_FALSE(a.spec.q);
  ASSERT_TRUE(a.q_true);
  EXPECT_EQ(a.q_true->values(), s.q->values());
  EXPECT_THROW(synthesize_data(s, -1.0, 1), DomainError);
}
