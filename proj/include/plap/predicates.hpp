#pragma once

// Orientation and in-circle tests with a floating-point filter and an exact
// rational fallback for near-degenerate configurations.

#include <cmath>
#include <limits>

#include <boost/multiprecision/cpp_int.hpp>

#include "plap/geometry.hpp"

namespace plap::predicates {

namespace detail {
using Exact = boost::multiprecision::cpp_rational;

inline constexpr double eps = std::numeric_limits<double>::epsilon() * 0.5;
inline constexpr double orient_bound = (3.0 + 16.0 * eps) * eps;
inline constexpr double incircle_bound = (10.0 + 96.0 * eps) * eps;

inline int sign_of(const Exact& v) { return v > 0 ? 1 : (v < 0 ? -1 : 0); }

inline int orient_exact(Point a, Point b, Point c) {
  const Exact acx = Exact(a.x) - Exact(c.x), acy = Exact(a.y) - Exact(c.y);
  const Exact bcx = Exact(b.x) - Exact(c.x), bcy = Exact(b.y) - Exact(c.y);
  return sign_of(acx * bcy - acy * bcx);
}

inline int incircle_exact(Point a, Point b, Point c, Point d) {
  const Exact adx = Exact(a.x) - Exact(d.x), ady = Exact(a.y) - Exact(d.y);
  const Exact bdx = Exact(b.x) - Exact(d.x), bdy = Exact(b.y) - Exact(d.y);
  const Exact cdx = Exact(c.x) - Exact(d.x), cdy = Exact(c.y) - Exact(d.y);
  const Exact alift = adx * adx + ady * ady;
  const Exact blift = bdx * bdx + bdy * bdy;
  const Exact clift = cdx * cdx + cdy * cdy;
  const Exact det = alift * (bdx * cdy - bdy * cdx) + blift * (cdx * ady - cdy * adx) + clift * (adx * bdy - ady * bdx);
  return sign_of(det);
}
}  // namespace detail

/// +1 if a, b, c turn counter-clockwise, -1 clockwise, 0 collinear.
inline int orient(Point a, Point b, Point c) {
  const double l = (a.x - c.x) * (b.y - c.y);
  const double r = (a.y - c.y) * (b.x - c.x);
  const double det = l - r;
  const double bound = detail::orient_bound * (std::abs(l) + std::abs(r));
  if (det > bound) return 1;
  if (-det > bound) return -1;
  return detail::orient_exact(a, b, c);
}

/// For counter-clockwise a, b, c: +1 if d lies strictly inside their circumcircle.
inline int incircle(Point a, Point b, Point c, Point d) {
  const double adx = a.x - d.x, ady = a.y - d.y;
  const double bdx = b.x - d.x, bdy = b.y - d.y;
  const double cdx = c.x - d.x, cdy = c.y - d.y;
  const double bc = bdx * cdy - bdy * cdx;
  const double ca = cdx * ady - cdy * adx;
  const double ab = adx * bdy - ady * bdx;
  const double alift = adx * adx + ady * ady;
  const double blift = bdx * bdx + bdy * bdy;
  const double clift = cdx * cdx + cdy * cdy;
  const double det = alift * bc + blift * ca + clift * ab;
  const double perm = (std::abs(bdx * cdy) + std::abs(bdy * cdx)) * alift +
                      (std::abs(cdx * ady) + std::abs(cdy * adx)) * blift +
                      (std::abs(adx * bdy) + std::abs(ady * bdx)) * clift;
  const double bound = detail::incircle_bound * perm;
  if (det > bound) return 1;
  if (-det > bound) return -1;
  return detail::incircle_exact(a, b, c, d);
}

}  // namespace plap::predicates
