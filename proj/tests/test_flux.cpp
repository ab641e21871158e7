#include <cmath>
#include <numbers>

#include <gtest/gtest.h>

#include "plap/flux.hpp"
#include "plap/radial.hpp"

using namespace plap;

namespace {

// Odd in y plus an even part, so the particle fluxes do not cancel by symmetry.
double quadratic_datum(Point q) { return q.y + (q.x * q.x - q.y * q.y) / 8.0; }

DomainFamily family(BoundaryDatum datum = [](Point q) { return q.y; }) {
  DomainFamily f;
  f.h_far = 0.2;
  f.clearance = 0.5;
  f.datum = std::move(datum);
  return f;
}

SolverConfig with_p(double p) {
  SolverConfig c;
  c.p = p;
  return c;
}

struct Setup {
  DomainSpec dom;
  std::shared_ptr<const Mesh> mesh;
};

Setup setup(const DomainFamily& f, double delta) {
  Setup s{f.domain(delta), nullptr};
  s.mesh = f.mesh(s.dom);
  return s;
}

}  // namespace

TEST(Flux, ConstantSolutionHasNoFlux) {
  auto f = family([](Point) { return 2.0; });
  const auto s = setup(f, 0.04);
  const auto sol = solve_floating(s.mesh, s.dom, with_p(3.0));
  const auto r = flux_report(sol);
  for (const auto* c : {&r.particle1, &r.particle2, &r.outer, &r.s2}) {
    EXPECT_EQ(c->flux, 0.0);
    EXPECT_EQ(c->flux_one_sided, 0.0);
  }
}

class AnnulusFlux : public ::testing::TestWithParam<double> {};

// Radial solution 0 on r = 1/2, 1 on r = 2: the flux |psi'|^{p-2} psi' 2 pi r is the same on every circle.
TEST_P(AnnulusFlux, MatchesRadialFlux) {
  const double p = GetParam();
  const auto exact = fit_two_point(0.5, 0.0, 2.0, 1.0, p, 2);
  const double g = radial_gradient(exact, 2.0);
  const double expected = 2.0 * std::numbers::pi * 2.0 * std::pow(g, p - 1.0);
  const auto dom = DomainSpec::annulus(0.5, 2.0, [](Point) { return 1.0; });
  std::vector<double> err;
  for (double h : {0.1, 0.05}) {
    const auto mesh = std::make_shared<const Mesh>(build_mesh(dom, h, h));
    const auto sol = solve_prescribed(mesh, dom, 0.0, 0.0, with_p(p));
    const double out = boundary_flux(sol, Curve::outer);
    const double in = boundary_flux(sol, Curve::particle1);
    EXPECT_NEAR(out + in, 0.0, 1e-9 * expected);
    EXPECT_NEAR(boundary_flux(sol, Curve::outer, FluxMethod::one_sided), expected, 0.05 * expected);
    err.push_back(std::abs(out - expected) / expected);
    EXPECT_THROW(boundary_flux(sol, Curve::particle2), DomainError);
  }
  EXPECT_LE(err[1], 0.01);
  EXPECT_LT(err[1], err[0]);
}

INSTANTIATE_TEST_SUITE_P(Exponents, AnnulusFlux, ::testing::Values(2.0, 3.0, 4.0));

TEST(Flux, FloatingBalanceAndZeroParticleFlux) {
  const auto s = setup(family(quadratic_datum), 0.02);
  for (double p : {2.0, 3.0}) {
    const auto sol = solve_floating(s.mesh, s.dom, with_p(p));
    const auto r = flux_report(sol);
    EXPECT_GT(r.scale, 1.0);
    EXPECT_LE(r.balance_defect, 1e-9) << p;
    EXPECT_LE(r.particle_defect, 1e-9) << p;
    EXPECT_EQ(r.constraint_defect(ProblemKind::floating), r.particle_defect);
    // one-sided quadrature is only first-order accurate
    EXPECT_LE(r.balance_defect_one_sided, 0.2);
  }
}

TEST(Flux, TiedCombinedFluxVanishes) {
  const auto s = setup(family(quadratic_datum), 0.02);
  for (double p : {2.0, 3.0}) {
    const auto sol = solve_tied(s.mesh, s.dom, with_p(p));
    const auto r = flux_report(sol);
    EXPECT_LE(r.combined_defect, 1e-9);
    EXPECT_LE(r.balance_defect, 1e-9);
    EXPECT_GT(r.particle_defect, 0.01);
    EXPECT_DOUBLE_EQ(r.R_delta, r_delta(sol));
  }
}

TEST(Flux, RDeltaPositiveAndOddInDatum) {
  const auto up = setup(family(), 0.02);
  const auto down = setup(family([](Point q) { return -q.y; }), 0.02);
  for (double p : {2.0, 3.0}) {
    const double a = r_delta(solve_tied(up.mesh, up.dom, with_p(p)));
    const double b = r_delta(solve_tied(down.mesh, down.dom, with_p(p)));
    EXPECT_GT(a, 0.0);
    EXPECT_NEAR(a, -b, 1e-9 * a);
  }
}

TEST(Flux, NeckSplitIsAdditive) {
  const auto s = setup(family(), 0.01);
  const auto sol = solve_tied(s.mesh, s.dom, with_p(2.0));
  const auto r = flux_report(sol);
  EXPECT_NEAR(r.s2.flux + r.particle2_away.flux, r.particle2.flux, 1e-12 * r.scale);
  EXPECT_EQ(r.s2.nodes + r.particle2_away.nodes, r.particle2.nodes);
  const double away = r_delta(sol, -1.0, RSplit::away_from_neck);
  EXPECT_NEAR(r.R_delta - away, -r.s2.flux, 1e-12 * r.scale);
  // the neck arc carries at most its length times the largest neck gradient
  const auto neck = neck_region(*sol.pair, r.w);
  EXPECT_LE(std::abs(r.s2.flux), 2.0 * neck.arc_length() * grad_max(sol, GradRegion::neck).value);
}

TEST(Flux, RDeltaRequiresTiedSolution) {
  const auto s = setup(family(), 0.04);
  EXPECT_THROW(r_delta(solve_floating(s.mesh, s.dom, with_p(2.0))), DomainError);
}

TEST(Flux, CsvHasOneRowPerCurve) {
  const auto s = setup(family(), 0.04);
  std::ostringstream os;
  write_flux_csv(os, flux_report(solve_floating(s.mesh, s.dom, with_p(2.0))));
  const std::string text = os.str();
  EXPECT_EQ(text.rfind("curve,flux,flux_one_sided,magnitude,nodes,edges\n", 0), 0u);
  EXPECT_EQ(std::count(text.begin(), text.end(), '\n'), 6);
  EXPECT_NE(text.find("\nparticle2_away,"), std::string::npos);
}

TEST(LinearIdentity, ReciprocityAndIdentity) {
  for (auto datum : {BoundaryDatum([](Point q) { return q.y; }), BoundaryDatum(quadratic_datum)}) {
    const auto s = setup(family(datum), 0.02);
    const auto v1 = solve_linear_aux(s.mesh, s.dom, LinearAux::v1);
    const auto v2 = solve_linear_aux(s.mesh, s.dom, LinearAux::v2);
    const auto v3 = solve_linear_aux(s.mesh, s.dom, LinearAux::v3);
    const auto tied = solve_tied(s.mesh, s.dom, with_p(2.0));
    const auto q = q_functional(v1, v2, v3, tied);
    EXPECT_LE(q.reciprocity_defect, 1e-9 * std::abs(q.a[0][0]));
    EXPECT_LE(q.relative_identity_defect, 1e-8);
    // v1 falls off away from particle 1, so its flux out of particle 1 is negative
    EXPECT_LT(q.a[0][0], 0.0);
    EXPECT_GT(q.a[0][1], 0.0);
    EXPECT_GT(std::abs(q.Q), 0.0);
  }
}

TEST(LinearIdentity, ZeroDatumGivesZeroQ) {
  const auto s = setup(family([](Point) { return 0.0; }), 0.04);
  const auto v1 = solve_linear_aux(s.mesh, s.dom, LinearAux::v1);
  const auto v2 = solve_linear_aux(s.mesh, s.dom, LinearAux::v2);
  const auto v3 = solve_linear_aux(s.mesh, s.dom, LinearAux::v3);
  const auto tied = solve_tied(s.mesh, s.dom, with_p(2.0));
  const auto q = q_functional(v1, v2, v3, tied);
  EXPECT_EQ(q.Q, 0.0);
  EXPECT_EQ(q.R_delta, 0.0);
}

TEST(LinearIdentity, Preconditions) {
  const auto a = setup(family(), 0.04), b = setup(family(), 0.04);
  const auto v1 = solve_linear_aux(a.mesh, a.dom, LinearAux::v1);
  const auto v2 = solve_linear_aux(a.mesh, a.dom, LinearAux::v2);
  const auto v3 = solve_linear_aux(a.mesh, a.dom, LinearAux::v3);
  EXPECT_THROW(q_functional(v1, v2, v3, solve_tied(b.mesh, b.dom, with_p(2.0))), DomainError);
  EXPECT_THROW(q_functional(v1, v2, v3, solve_tied(a.mesh, a.dom, with_p(3.0))), DomainError);
}

TEST(R0, ExactLinearModelRecovered) {
  const std::vector<double> d{0.04, 0.02, 0.01, 0.005};
  std::vector<double> r;
  for (double x : d) r.push_back(7.5 + 2.0 * x);
  const auto e = extrapolate_r0(d, r);
  EXPECT_NEAR(e.R0, 7.5, 1e-12);
  EXPECT_NEAR(e.slope, 2.0, 1e-9);
  EXPECT_LE(e.max_residual, 1e-12);
  R0Options sq;
  sq.exponent = 0.5;
  std::vector<double> r2;
  for (double x : d) r2.push_back(-1.0 + 3.0 * std::sqrt(x));
  EXPECT_NEAR(extrapolate_r0(d, r2, sq).R0, -1.0, 1e-12);
}

TEST(R0, Errors) {
  EXPECT_THROW(extrapolate_r0({0.1, 0.05}, {1.0, 1.0}), DomainError);
  EXPECT_THROW(extrapolate_r0({0.1, 0.05, 0.02}, {1.0, 1.0}), DomainError);
  EXPECT_THROW(extrapolate_r0({0.1, 0.2, 0.05}, {1.0, 1.0, 1.0}), DomainError);
  EXPECT_THROW(extrapolate_r0({0.1, 0.05, 0.02, 0.01}, {1.0, 3.0, 0.5, 2.0}), NumericalError);
  try {
    extrapolate_r0({0.1, 0.05, 0.02, 0.01}, {1.0, 3.0, 0.5, 2.0});
  } catch (const NumericalError& e) {
    EXPECT_NE(std::string(e.what()).find("(0.02, 0.5)"), std::string::npos);
    EXPECT_GT(e.achieved(), 0.0);
  }
}

TEST(R0, LadderOfTiedSolves) {
  const auto f = family();
  const auto e = estimate_r0(f, with_p(2.0), {0.04, 0.02, 0.01});
  EXPECT_GT(e.R0, 0.0);
  ASSERT_EQ(e.r_deltas.size(), 3u);
  // R_delta decreases toward R0 as the gap closes
  EXPECT_GT(e.r_deltas[0], e.r_deltas[2]);
  EXPECT_LT(std::abs(e.R0 - e.r_deltas[2]), 0.02 * e.R0);
}

TEST(NormalDerivatives, SandwichedNearLeadingTerm) {
  const auto s = setup(family(), 0.01);
  const auto sol = solve_floating(s.mesh, s.dom, with_p(2.0));
  const auto samples = s2_normal_derivatives(sol);
  ASSERT_GT(samples.size(), 10u);
  for (std::size_t i = 1; i < samples.size(); ++i) EXPECT_LE(samples[i - 1].at.x, samples[i].at.x);
  // on the axis the normal derivative is close to (T2 - T1) / delta
  const double leading = (*sol.T2 - *sol.T1) / 0.01;
  double best = 1e300, dn = 0.0;
  for (const auto& smp : samples)
    if (std::abs(smp.at.x) < best) {
      best = std::abs(smp.at.x);
      dn = smp.dn;
    }
  EXPECT_NEAR(dn / leading, 1.0, 0.05);
  for (const auto& smp : samples) EXPECT_GE(smp.slack, 0.0);
}
