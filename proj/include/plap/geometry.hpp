#pragma once

// Two equal disks separated by a gap, in the local frame used everywhere in
// this library: the gap is centered at the origin, particle 2 sits above
// particle 1 on the y axis.

#include <cmath>
#include <functional>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "plap/error.hpp"

namespace plap {

struct Point {
  double x = 0.0;
  double y = 0.0;
};

inline Point operator+(Point a, Point b) { return {a.x + b.x, a.y + b.y}; }
inline Point operator-(Point a, Point b) { return {a.x - b.x, a.y - b.y}; }
inline Point operator*(double s, Point a) { return {s * a.x, s * a.y}; }
inline double dot(Point a, Point b) { return a.x * b.x + a.y * b.y; }
inline double cross(Point a, Point b) { return a.x * b.y - a.y * b.x; }
inline double norm(Point a) { return std::hypot(a.x, a.y); }

enum class GapMode { exact, quadratic };

/// Two disks of common radius R whose surfaces are delta apart.
class ParticlePair {
 public:
  ParticlePair(double radius, double delta) : radius_(radius), delta_(delta) {
    if (!(radius > 0.0)) throw DomainError("ParticlePair: radius must be positive");
    if (!(delta >= 0.0)) throw DomainError("ParticlePair: gap must be non-negative");
  }

  double radius() const noexcept { return radius_; }
  double delta() const noexcept { return delta_; }

  Point center(int particle) const {
    const double c = radius_ + 0.5 * delta_;
    return particle == 1 ? Point{0.0, -c} : Point{0.0, c};
  }
  double center_separation() const noexcept { return 2.0 * radius_ + delta_; }

  /// Farthest distance from the origin reached by either particle.
  double extent() const noexcept { return 2.0 * radius_ + 0.5 * delta_; }

  ParticlePair scaled(double lambda) const { return {lambda * radius_, lambda * delta_}; }

 private:
  double radius_;
  double delta_;
};

/// Vertical distance between the particle surfaces at horizontal offset x.
inline double gap_width(double x, const ParticlePair& pair, GapMode mode = GapMode::exact) {
  const double R = pair.radius();
  if (!(std::abs(x) < R)) throw DomainError("gap_width: |x| must be smaller than R");
  if (mode == GapMode::quadratic) return pair.delta() + x * x / R;
  // 2R - 2 sqrt(R^2 - x^2) rewritten to avoid cancellation for small x
  const double s = std::sqrt(R * R - x * x);
  return pair.delta() + 2.0 * x * x / (R + s);
}

struct BarrierRadii {
  double inner;
  double outer;
  double separation() const noexcept { return outer - inner; }
};

/// Concentric circles for the upper barrier: the inner one of radius r1 touches
/// particle 1 from inside at horizontal offset x, the outer one touches particle 2.
inline BarrierRadii upper_barrier_radii(double x, double r1, const ParticlePair& pair) {
  const double R = pair.radius();
  if (!(r1 > 0.0 && r1 <= R)) throw DomainError("upper_barrier_radii: r1 must lie in (0, R]");
  if (!(std::abs(x) < R)) throw DomainError("upper_barrier_radii: |x| must be smaller than R");
  const double q = r1 / R;
  const double r2 = pair.delta() + r1 + 0.5 * (1.0 - q) * (2.0 - q) * x * x / R;
  return {r1, r2};
}

/// Lower barrier: circle of radius rho1 inside particle 2 whose center lies on
/// the line through the boundary point of particle 1 and that particle's center.
/// The returned outer value is the distance from that center to the boundary point.
inline BarrierRadii lower_barrier_radii(double x, double rho1, const ParticlePair& pair) {
  const double R = pair.radius();
  if (!(rho1 > 0.0 && rho1 < R)) throw DomainError("lower_barrier_radii: rho1 must lie in (0, R)");
  const double L = 2.0 * R + pair.delta();
  const double t = x * x / (R * R);
  const double a = (R - rho1) / L;
  const double outer_arg = 1.0 - t;
  const double inner_arg = a * a - t;
  if (outer_arg < 0.0 || inner_arg < 0.0)
    throw DomainError("lower_barrier_radii: x beyond the validity radius of the construction");
  const double rho2 = -R + L * (std::sqrt(outer_arg) - std::sqrt(inner_arg));
  return {rho1, rho2};
}

/// Neck window |x| <= w between the two particle arcs.
class NeckSpec {
 public:
  NeckSpec(const ParticlePair& pair, double w) : pair_(pair), w_(w) {
    if (!(w > 0.0 && w < pair.radius())) throw DomainError("neck_region: w must lie in (0, R)");
  }

  const ParticlePair& pair() const noexcept { return pair_; }
  double half_width() const noexcept { return w_; }

  /// y of the top of particle 1 (lower arc) at horizontal offset x.
  double lower_arc_y(double x) const {
    const double R = pair_.radius();
    return -0.5 * pair_.delta() - x * x / (R + std::sqrt(R * R - x * x));
  }
  double upper_arc_y(double x) const { return -lower_arc_y(x); }

  bool contains(Point p) const {
    if (std::abs(p.x) > w_) return false;
    return p.y >= lower_arc_y(p.x) && p.y <= upper_arc_y(p.x);
  }

  /// True when p lies on arc i (i = 1 lower, 2 upper) within tol.
  bool on_arc(Point p, int particle, double tol) const {
    if (std::abs(p.x) > w_ + tol) return false;
    const Point c = pair_.center(particle);
    return std::abs(norm(p - c) - pair_.radius()) <= tol && (particle == 1 ? p.y > c.y : p.y < c.y);
  }

  /// Length of either particle arc inside the window.
  double arc_length() const { return 2.0 * pair_.radius() * std::asin(w_ / pair_.radius()); }

  /// Height of each lateral side x = +-w.
  double lateral_length() const { return upper_arc_y(w_) - lower_arc_y(w_); }

 private:
  ParticlePair pair_;
  double w_;
};

inline NeckSpec neck_region(const ParticlePair& pair, double w) { return {pair, w}; }
inline double default_neck_width(const ParticlePair& pair) { return 0.25 * pair.radius(); }

enum class BoundaryTag : int { interior = 0, outer = 1, particle1 = 2, particle2 = 3 };

inline const char* to_string(BoundaryTag t) {
  switch (t) {
    case BoundaryTag::interior: return "interior";
    case BoundaryTag::outer: return "outer";
    case BoundaryTag::particle1: return "particle1";
    case BoundaryTag::particle2: return "particle2";
  }
  return "?";
}

struct Circle {
  Point center;
  double radius;
  BoundaryTag tag;
};

using BoundaryDatum = std::function<double(Point)>;

/// Outer disk of radius R_out centered at the origin with circular inclusions.
/// Supported layouts are the particle pair in the local frame and a single
/// inclusion concentric with the outer circle (annulus).
struct DomainSpec {
  double outer_radius = 4.0;
  std::vector<Circle> inclusions;
  BoundaryDatum datum = [](Point p) { return p.y; };
  std::optional<ParticlePair> pair;
  double clearance = 0.0;

  static DomainSpec two_particles(const ParticlePair& pair, double outer_radius, BoundaryDatum datum,
                                  double clearance = 0.0) {
    const double gap_to_outer = outer_radius - pair.extent();
    if (!(gap_to_outer >= clearance && gap_to_outer > 0.0))
      throw DomainError("DomainSpec: particles violate the clearance to the outer boundary");
    DomainSpec d;
    d.outer_radius = outer_radius;
    d.pair = pair;
    d.clearance = clearance;
    d.datum = std::move(datum);
    d.inclusions = {{pair.center(1), pair.radius(), BoundaryTag::particle1},
                    {pair.center(2), pair.radius(), BoundaryTag::particle2}};
    return d;
  }

  static DomainSpec annulus(double inner_radius, double outer_radius, BoundaryDatum datum) {
    if (!(inner_radius > 0.0 && inner_radius < outer_radius))
      throw DomainError("DomainSpec: annulus needs 0 < r_in < r_out");
    DomainSpec d;
    d.outer_radius = outer_radius;
    d.datum = std::move(datum);
    d.inclusions = {{{0.0, 0.0}, inner_radius, BoundaryTag::particle1}};
    return d;
  }

  bool inside(Point p) const {
    if (norm(p) > outer_radius) return false;
    for (const auto& c : inclusions)
      if (norm(p - c.center) < c.radius) return false;
    return true;
  }
};

}  // namespace plap
