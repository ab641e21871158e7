#include <cmath>
#include <numbers>

#include <gtest/gtest.h>

#include "plap/geometry.hpp"

using namespace plap;

namespace {

// Straight from circle geometry: surfaces at y = -delta/2 - (R - sqrt(R^2 - x^2)) and its mirror.
double gap_oracle(double x, double R, double delta) { return 2.0 * R + delta - 2.0 * std::sqrt(R * R - x * x); }

}  // namespace

TEST(ParticlePair, CentersAndSeparation) {
  const ParticlePair pair(1.5, 0.02);
  EXPECT_DOUBLE_EQ(pair.center(1).x, 0.0);
  EXPECT_DOUBLE_EQ(pair.center(1).y, -1.51);
  EXPECT_DOUBLE_EQ(pair.center(2).y, 1.51);
  EXPECT_DOUBLE_EQ(pair.center(2).y - pair.center(1).y, pair.center_separation());
  EXPECT_DOUBLE_EQ(pair.center_separation(), 3.02);
}

TEST(ParticlePair, RejectsBadInputs) {
  EXPECT_THROW(ParticlePair(0.0, 0.1), DomainError);
  EXPECT_THROW(ParticlePair(1.0, -1e-3), DomainError);
  EXPECT_NO_THROW(ParticlePair(1.0, 0.0));
}

TEST(GapWidth, AxisValueIsDelta) {
  for (double d : {0.0, 1e-3, 0.05}) EXPECT_DOUBLE_EQ(gap_width(0.0, ParticlePair(1.0, d)), d);
}

TEST(GapWidth, QuadraticSubstitution) {
  EXPECT_NEAR(gap_width(0.1, ParticlePair(1.0, 0.01), GapMode::quadratic), 0.02, 1e-16);
}

TEST(GapWidth, ExactMatchesCircleGeometry) {
  const double oracle = gap_oracle(0.1, 1.0, 0.01);
  EXPECT_NEAR(oracle, 0.0200251, 1e-7);
  EXPECT_NEAR(gap_width(0.1, ParticlePair(1.0, 0.01)), 0.020025126, 1e-9);
  EXPECT_NEAR(gap_width(0.1, ParticlePair(1.0, 0.01)), oracle, 1e-14);
}

TEST(GapWidth, OrderingExactQuadraticDelta) {
  const ParticlePair pair(1.0, 0.01);
  for (double x = -0.95; x <= 0.95; x += 0.05) {
    const double e = gap_width(x, pair), q = gap_width(x, pair, GapMode::quadratic);
    EXPECT_GE(e, q - 1e-15);
    EXPECT_GE(q, pair.delta());
  }
}

TEST(GapWidth, QuarticDifferenceBounded) {
  const ParticlePair pair(1.0, 0.01);
  for (double x = 0.01; x <= 0.3; x += 0.01) {
    const double diff = gap_width(x, pair) - gap_width(x, pair, GapMode::quadratic);
    EXPECT_LE(diff / std::pow(x, 4), 0.5) << "x = " << x;
    EXPECT_GE(diff, 0.0);
  }
}

TEST(GapWidth, OutsideParticleThrows) {
  EXPECT_THROW(gap_width(1.0, ParticlePair(1.0, 0.01)), DomainError);
  EXPECT_THROW(gap_width(-1.2, ParticlePair(1.0, 0.01)), DomainError);
}

TEST(UpperBarrier, AxisCollapsesToDeltaPlusR1) {
  const auto r = upper_barrier_radii(0.0, 0.01, ParticlePair(1.0, 0.01));
  EXPECT_DOUBLE_EQ(r.inner, 0.01);
  EXPECT_DOUBLE_EQ(r.outer, 0.02);
}

TEST(UpperBarrier, OffAxisValue) {
  // 0.02 + 0.5 * 0.99 * 1.99 * 0.01
  const double oracle = 0.02 + 0.5 * (1.0 - 0.01) * (2.0 - 0.01) * 0.1 * 0.1;
  EXPECT_NEAR(oracle, 0.0298505, 1e-7);
  EXPECT_NEAR(upper_barrier_radii(0.1, 0.01, ParticlePair(1.0, 0.01)).outer, 0.02985050, 1e-10);
}

TEST(UpperBarrier, FullRadiusDropsQuadraticTerm) {
  const auto r = upper_barrier_radii(0.3, 1.0, ParticlePair(1.0, 0.01));
  EXPECT_DOUBLE_EQ(r.outer, 1.01);
}

TEST(UpperBarrier, RejectsR1OutsideRange) {
  EXPECT_THROW(upper_barrier_radii(0.0, 0.0, ParticlePair(1.0, 0.01)), DomainError);
  EXPECT_THROW(upper_barrier_radii(0.0, 1.5, ParticlePair(1.0, 0.01)), DomainError);
}

TEST(UpperBarrier, EvenAndMonotoneInX) {
  const ParticlePair pair(1.0, 0.01);
  double prev = 0.0;
  for (double x = 0.0; x < 0.9; x += 0.05) {
    const double r2 = upper_barrier_radii(x, 0.01, pair).outer;
    EXPECT_DOUBLE_EQ(r2, upper_barrier_radii(-x, 0.01, pair).outer);
    EXPECT_GT(r2, prev);
    prev = r2;
  }
}

TEST(LowerBarrier, AxisValue) {
  const auto r = lower_barrier_radii(0.0, 0.01, ParticlePair(1.0, 0.01));
  EXPECT_NEAR(r.outer, 0.02, 1e-15);
}

TEST(LowerBarrier, OffAxisWithinQuadraticGap) {
  const ParticlePair pair(1.0, 0.01);
  const double R = 1.0, delta = 0.01, rho1 = 0.01, x = 0.05;
  // direct evaluation of the square-root construction
  const double L = 2 * R + delta;
  const double rho2 =
      -R + L * (std::sqrt(1 - x * x / (R * R)) - std::sqrt(std::pow((R - rho1) / L, 2) - x * x / (R * R)));
  const auto r = lower_barrier_radii(x, rho1, pair);
  EXPECT_NEAR(r.outer, rho2, 1e-14);
  EXPECT_NEAR(r.outer, 0.0226002745, 1e-9);
  EXPECT_LE(r.separation(), (delta + x * x / R) * (1 + 2 * delta));
}

TEST(LowerBarrier, BeyondValidityThrows) {
  const ParticlePair pair(1.0, 0.01);
  // inner radicand ((R - rho1)/L)^2 - x^2/R^2 turns negative just past x = (R - rho1) R / L
  const double edge = (1.0 - 0.01) / 2.01;
  EXPECT_NO_THROW(lower_barrier_radii(0.99 * edge, 0.01, pair));
  EXPECT_THROW(lower_barrier_radii(1.01 * edge, 0.01, pair), DomainError);
}

TEST(Barriers, AgreeOnAxis) {
  for (double d : {1e-3, 0.01, 0.1}) {
    const ParticlePair pair(2.0, d);
    EXPECT_NEAR(upper_barrier_radii(0.0, d, pair).separation(), d, 1e-15);
    EXPECT_NEAR(lower_barrier_radii(0.0, d, pair).separation(), d, 1e-14);
  }
}

TEST(Geometry, ScaleCovariance) {
  const ParticlePair pair(1.0, 0.01);
  for (double lambda : {0.5, 3.0}) {
    const ParticlePair s = pair.scaled(lambda);
    EXPECT_NEAR(gap_width(lambda * 0.2, s), lambda * gap_width(0.2, pair), 1e-14);
    EXPECT_NEAR(gap_width(lambda * 0.2, s, GapMode::quadratic), lambda * gap_width(0.2, pair, GapMode::quadratic), 1e-14);
    EXPECT_NEAR(upper_barrier_radii(lambda * 0.1, lambda * 0.01, s).outer,
                lambda * upper_barrier_radii(0.1, 0.01, pair).outer, 1e-14);
    EXPECT_NEAR(lower_barrier_radii(lambda * 0.05, lambda * 0.01, s).outer,
                lambda * lower_barrier_radii(0.05, 0.01, pair).outer, 1e-13);
    EXPECT_NEAR(neck_region(s, lambda * 0.1).arc_length(), lambda * neck_region(pair, 0.1).arc_length(), 1e-14);
  }
}

TEST(Neck, Membership) {
  const ParticlePair pair(1.0, 0.01);
  const NeckSpec neck = neck_region(pair, 0.1);
  EXPECT_TRUE(neck.contains({0.0, 0.0}));
  EXPECT_FALSE(neck.contains({0.2, 0.0}));
  EXPECT_FALSE(neck.contains({0.0, 0.006}));  // inside particle 2
  EXPECT_TRUE(neck.contains({0.09, 0.0}));
}

TEST(Neck, ArcLength) {
  const NeckSpec neck = neck_region(ParticlePair(1.0, 0.01), 0.1);
  EXPECT_NEAR(neck.arc_length(), 2.0 * std::asin(0.1), 1e-15);
  EXPECT_NEAR(neck.arc_length(), 0.2003, 1e-4);
}

TEST(Neck, ArcsAreParticleBoundaries) {
  const ParticlePair pair(1.0, 0.02);
  const NeckSpec neck = neck_region(pair, 0.25);
  for (double x = -0.25; x <= 0.25; x += 0.05) {
    const Point lo{x, neck.lower_arc_y(x)}, hi{x, neck.upper_arc_y(x)};
    EXPECT_NEAR(norm(lo - pair.center(1)), 1.0, 1e-14);
    EXPECT_NEAR(norm(hi - pair.center(2)), 1.0, 1e-14);
    EXPECT_TRUE(neck.on_arc(lo, 1, 1e-12));
    EXPECT_TRUE(neck.on_arc(hi, 2, 1e-12));
    EXPECT_NEAR(hi.y - lo.y, gap_width(x, pair), 1e-14);
  }
}

TEST(Neck, WidthMustBeBelowRadius) {
  EXPECT_THROW(neck_region(ParticlePair(1.0, 0.01), 1.0), DomainError);
  EXPECT_THROW(neck_region(ParticlePair(1.0, 0.01), 0.0), DomainError);
  EXPECT_DOUBLE_EQ(default_neck_width(ParticlePair(2.0, 0.01)), 0.5);
}

TEST(DomainSpec, ClearanceEnforced) {
  const ParticlePair pair(1.0, 0.02);
  EXPECT_NO_THROW(DomainSpec::two_particles(pair, 4.0, [](Point q) { return q.y; }, 1.0));
  EXPECT_THROW(DomainSpec::two_particles(pair, 2.5, [](Point q) { return q.y; }, 1.0), DomainError);
  const auto d = DomainSpec::two_particles(pair, 4.0, [](Point q) { return q.y; });
  EXPECT_TRUE(d.inside({0.0, 0.0}));
  EXPECT_FALSE(d.inside({0.0, 1.0}));
  EXPECT_FALSE(d.inside({0.0, 4.5}));
}
