#pragma once

// Radial solutions of the p-Laplace equation and the barrier bounds built
// from them on the particle arcs in the neck.

#include <array>
#include <cmath>

#include "plap/error.hpp"
#include "plap/geometry.hpp"

namespace plap {

enum class RadialBranch { power, log };

/// psi(x) = a |x - x0|^beta + b, or a log|x - x0| + b when d == p.
struct RadialProfile {
  std::array<double, 3> center{0.0, 0.0, 0.0};
  double a = 0.0;
  double b = 0.0;
  double p = 2.0;
  int d = 2;

  RadialBranch branch() const { return p == static_cast<double>(d) ? RadialBranch::log : RadialBranch::power; }
  double beta() const { return (p - d) / (p - 1.0); }

  static RadialProfile make(double a, double b, double p, int d) {
    if (!(p >= 2.0)) throw DomainError("RadialProfile: p must be >= 2");
    if (d != 2 && d != 3) throw DomainError("RadialProfile: d must be 2 or 3");
    RadialProfile r;
    r.a = a;
    r.b = b;
    r.p = p;
    r.d = d;
    return r;
  }
};

namespace detail {
inline double radial_basis(const RadialProfile& f, double r) {
  return f.branch() == RadialBranch::log ? std::log(r) : std::pow(r, f.beta());
}
inline void require_positive_radius(double r, const char* who) {
  if (!(r > 0.0)) throw DomainError(std::string(who) + ": radius must be positive");
}
}  // namespace detail

inline double radial_eval(const RadialProfile& f, double r) {
  detail::require_positive_radius(r, "radial_eval");
  return f.a * detail::radial_basis(f, r) + f.b;
}

inline double radial_eval(const RadialProfile& f, const std::array<double, 3>& x) {
  double s = 0.0;
  for (int k = 0; k < f.d; ++k) s += (x[k] - f.center[k]) * (x[k] - f.center[k]);
  return radial_eval(f, std::sqrt(s));
}

/// d psi / dr.
inline double radial_gradient(const RadialProfile& f, double r) {
  detail::require_positive_radius(r, "radial_gradient");
  if (f.branch() == RadialBranch::log) return f.a / r;
  const double beta = f.beta();
  return f.a * beta * std::pow(r, beta - 1.0);
}

/// Profile through (r1, v1) and (r2, v2).
inline RadialProfile fit_two_point(double r1, double v1, double r2, double v2, double p, int d) {
  if (!(r1 > 0.0 && r2 > 0.0)) throw DomainError("fit_two_point: radii must be positive");
  if (r1 == r2) throw DomainError("fit_two_point: degenerate interval r1 == r2");
  if (!(r1 < r2)) throw DomainError("fit_two_point: need r1 < r2");
  RadialProfile f = RadialProfile::make(0.0, 0.0, p, d);
  const double g1 = detail::radial_basis(f, r1);
  const double g2 = detail::radial_basis(f, r2);
  f.a = (v2 - v1) / (g2 - g1);
  f.b = v1 - f.a * g1;
  return f;
}

/// div(|grad psi|^{p-2} grad psi) in radial form,
///   (|psi'|^{p-2} psi' r^{d-1})' / r^{d-1},
/// differentiated in closed form. For psi' = c r^m the bracket is
/// sign(c)|c|^{p-1} r^e with e = m(p-1) + d - 1, and its derivative is e/r times it.
inline double plaplace_residual(const RadialProfile& f, double r) {
  detail::require_positive_radius(r, "plaplace_residual");
  if (f.a == 0.0) return 0.0;
  double c;
  double m;
  if (f.branch() == RadialBranch::log) {
    c = f.a;
    m = -1.0;
  } else {
    c = f.a * f.beta();
    m = f.beta() - 1.0;
  }
  if (c == 0.0) return 0.0;
  const double e = m * (f.p - 1.0) + (f.d - 1.0);
  const double bracket = std::copysign(std::pow(std::abs(c), f.p - 1.0), c) * std::pow(r, e);
  return e * bracket / r / std::pow(r, f.d - 1.0);
}

/// beta r1^{beta-1} (r2 - r1) / (r2^beta - r1^beta): barrier slope at r1 relative
/// to the chord slope. For 0 < beta < 1 concavity makes this >= 1.
inline double barrier_slope_ratio(double beta, double r1, double r2) {
  if (!(0.0 < r1 && r1 < r2)) throw DomainError("barrier_slope_ratio: need 0 < r1 < r2");
  if (beta == 0.0) return (r2 - r1) / (r1 * std::log(r2 / r1));
  return beta * std::pow(r1, beta - 1.0) * (r2 - r1) / (std::pow(r2, beta) - std::pow(r1, beta));
}

/// Two-sided bound on n . grad u at a point of the upper neck arc.
struct FluxBound {
  double lower = 0.0;
  double upper = 0.0;
  double leading = 0.0;   // (T2 - T1) / (delta + x^2 / R)
  double slack = 0.0;     // additive constant C
  bool lower_from_barrier = false;
};

struct BarrierOptions {
  double first_order = 2.0;  // c in the (1 + c delta) factor
  double slack = 0.0;        // additive constant C
};

/// Sandwich bound at horizontal offset x. The upper side uses the upper barrier
/// radii with r1 = delta, the lower side the lower barrier radii with rho1 = delta;
/// outside |x| <= delta^{1/4} or the lower construction's validity the lower side
/// falls back to -C.
inline FluxBound barrier_flux_bound(double x, double T1, double T2, const ParticlePair& pair,
                                    const BarrierOptions& opt = {}) {
  if (T2 < T1) throw DomainError("barrier_flux_bound: T2 < T1, swap the particle labels");
  const double delta = pair.delta();
  if (!(delta > 0.0)) throw DomainError("barrier_flux_bound: delta must be positive");
  const double jump = T2 - T1;
  const double factor = 1.0 + opt.first_order * delta;

  FluxBound fb;
  fb.slack = opt.slack;
  fb.leading = jump / gap_width(x, pair, GapMode::quadratic);
  const BarrierRadii up = upper_barrier_radii(x, delta, pair);
  fb.upper = jump / up.separation() * factor + opt.slack;
  fb.lower = -opt.slack;
  if (std::abs(x) <= std::pow(delta, 0.25)) {
    try {
      const BarrierRadii lo = lower_barrier_radii(x, delta, pair);
      fb.lower = jump / lo.separation() / factor - opt.slack;
      fb.lower_from_barrier = true;
    } catch (const DomainError&) {
    }
  }
  return fb;
}

}  // namespace plap
