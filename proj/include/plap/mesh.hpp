#pragma once

// Body-fitted triangulation of the outer disk minus the inclusions, graded from
// a fine size at the origin (the gap center) to a coarse far-field size.
//
// Points are laid out on rings around the origin, one quarter of the plane at a
// time, with the boundary circles sampled at the local size. The quarter is
// Delaunay-triangulated and mirrored across both axes, so the mesh is exactly
// symmetric under x -> -x and y -> -y.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <sstream>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "plap/delaunay.hpp"
#include "plap/error.hpp"
#include "plap/geometry.hpp"

namespace plap {

struct BoundaryEdge {
  int a = 0;
  int b = 0;
  int triangle = 0;
  BoundaryTag tag = BoundaryTag::interior;
};

struct Mesh {
  std::vector<Point> nodes;
  std::vector<std::array<int, 3>> triangles;  // counter-clockwise
  std::vector<BoundaryTag> node_tags;
  std::vector<BoundaryEdge> boundary_edges;

  double h_far = 0.0;
  double h_neck = 0.0;
  double grading = 0.0;

  std::size_t num_nodes() const { return nodes.size(); }
  std::size_t num_triangles() const { return triangles.size(); }

  double area(int t) const {
    const auto& v = triangles[t];
    return 0.5 * cross(nodes[v[1]] - nodes[v[0]], nodes[v[2]] - nodes[v[0]]);
  }
  Point centroid(int t) const {
    const auto& v = triangles[t];
    return (1.0 / 3.0) * (nodes[v[0]] + nodes[v[1]] + nodes[v[2]]);
  }
};

/// Inradius over circumradius; 0.5 for an equilateral triangle.
inline double triangle_quality(Point a, Point b, Point c) {
  const double la = norm(b - c), lb = norm(c - a), lc = norm(a - b);
  const double A = 0.5 * std::abs(cross(b - a, c - a));
  const double denom = (la + lb + lc) * la * lb * lc;
  return denom > 0.0 ? 8.0 * A * A / denom : 0.0;
}

inline double min_quality(const Mesh& m) {
  double q = 1.0;
  for (const auto& t : m.triangles) q = std::min(q, triangle_quality(m.nodes[t[0]], m.nodes[t[1]], m.nodes[t[2]]));
  return q;
}

struct MeshOptions {
  double grading = -1.0;        // size growth per unit distance; negative selects the default
  double quality_floor = 0.08;  // minimum inradius / circumradius
  double boundary_clearance = 0.55;  // ring points closer than this times the local size to a curve are dropped
};

namespace detail {

struct SizeField {
  double h_near;
  double h_far;
  double grading;
  double operator()(Point p) const { return std::min(h_far, h_near + grading * norm(p)); }
  double at_radius(double r) const { return std::min(h_far, h_near + grading * r); }
};

/// Points on an arc of the circle (c, R) parameterised by phi in [0, phi_end]
/// with P(phi) = c + R (sin phi, -cos phi), spaced by the local size.
inline std::vector<Point> sample_arc(Point c, double R, double phi_end, const SizeField& size, int multiple) {
  auto at = [&](double phi) { return Point{c.x + R * std::sin(phi), c.y - R * std::cos(phi)}; };
  constexpr int kFine = 20000;
  std::vector<double> cum(kFine + 1, 0.0);
  const double dphi = phi_end / kFine;
  for (int i = 1; i <= kFine; ++i) {
    const double f0 = R / size(at((i - 1) * dphi));
    const double f1 = R / size(at(i * dphi));
    cum[i] = cum[i - 1] + 0.5 * (f0 + f1) * dphi;
  }
  int n = std::max(multiple, static_cast<int>(std::ceil(cum.back() - 1e-9)));
  n = ((n + multiple - 1) / multiple) * multiple;
  std::vector<Point> out;
  out.reserve(n + 1);
  out.push_back(at(0.0));
  int j = 0;
  for (int k = 1; k < n; ++k) {
    const double target = cum.back() * k / n;
    while (cum[j + 1] < target) ++j;
    const double t = (target - cum[j]) / (cum[j + 1] - cum[j]);
    out.push_back(at((j + t) * dphi));
  }
  out.push_back(at(phi_end));
  return out;
}

inline std::uint64_t edge_key(int a, int b) {
  if (a > b) std::swap(a, b);
  return (static_cast<std::uint64_t>(static_cast<std::uint32_t>(a)) << 32) | static_cast<std::uint32_t>(b);
}

inline void snap_axes(Point& p) {
  if (std::abs(p.x) < 1e-14) p.x = 0.0;
  if (std::abs(p.y) < 1e-14) p.y = 0.0;
}

}  // namespace detail

inline double default_grading(const DomainSpec& domain) {
  if (!domain.pair) return 0.25;
  const auto& pr = *domain.pair;
  return std::min(0.25, std::sqrt(pr.delta() / (2.0 * pr.radius())));
}

/// Conforming graded triangulation of the domain. For the particle pair h_neck
/// is the size at the gap center and must be at most delta / 4.
inline Mesh build_mesh(const DomainSpec& domain, double h_far, double h_neck, const MeshOptions& opt = {}) {
  constexpr double pi = std::numbers::pi;
  if (!(h_far > 0.0 && h_neck > 0.0 && h_neck <= h_far)) throw MeshError("build_mesh: need 0 < h_neck <= h_far");
  if (domain.pair) {
    const double delta = domain.pair->delta();
    if (!(delta > 0.0)) throw MeshError("build_mesh: touching particles (delta = 0) cannot be meshed; use tied solves at small delta");
    if (h_neck > 0.25 * delta * (1.0 + 1e-12)) throw MeshError("build_mesh: h_neck must be at most delta / 4");
  }
  for (const auto& c : domain.inclusions) {
    const bool centered = c.center.x == 0.0 && c.center.y == 0.0;
    const bool on_axis = c.center.x == 0.0 && c.center.y != 0.0;
    if (!centered && !on_axis) throw MeshError("build_mesh: inclusions must be centered on the y axis");
  }

  const double g = opt.grading > 0.0 ? opt.grading : default_grading(domain);
  const detail::SizeField size{h_neck, h_far, g};
  const double Rout = domain.outer_radius;
  const double length_scale = domain.pair ? domain.pair->radius() : Rout;

  // Quarter point set x >= 0, y >= 0, with the boundary chains kept for checks.
  std::vector<Point> pts;
  std::vector<std::vector<int>> chains;
  auto add_chain = [&](const std::vector<Point>& chain) {
    std::vector<int> ids;
    for (Point p : chain) {
      detail::snap_axes(p);
      ids.push_back(static_cast<int>(pts.size()));
      pts.push_back(p);
    }
    chains.push_back(std::move(ids));
  };

  {
    const double h = size.at_radius(Rout);
    const int m = std::max(2, static_cast<int>(std::ceil(0.5 * pi * Rout / h)));
    std::vector<Point> arc;
    for (int k = 0; k <= m; ++k) {
      const double th = 0.5 * pi * k / m;
      arc.push_back({Rout * std::cos(th), Rout * std::sin(th)});
    }
    add_chain(arc);
  }
  for (const auto& c : domain.inclusions) {
    if (c.center.y < 0.0) continue;  // mirror image of an upper inclusion
    if (c.center.y == 0.0) {
      const double h = size.at_radius(c.radius);
      const int m = std::max(2, static_cast<int>(std::ceil(0.5 * pi * c.radius / h)));
      std::vector<Point> arc;
      for (int k = 0; k <= m; ++k) {
        const double th = 0.5 * pi * k / m;
        arc.push_back({c.radius * std::cos(th), c.radius * std::sin(th)});
      }
      add_chain(arc);
    } else {
      add_chain(detail::sample_arc(c.center, c.radius, pi, size, 2));
    }
  }

  auto far_enough = [&](Point p) {
    const double h = size(p);
    const double clear = opt.boundary_clearance * h;
    if (Rout - norm(p) < clear) return false;
    for (const auto& c : domain.inclusions)
      if (norm(p - c.center) - c.radius < clear) return false;
    return true;
  };

  // Ring points; every ring carries points on both axes so the axis segments are
  // edges of the quarter triangulation.
  if (far_enough({0.0, 0.0})) pts.push_back({0.0, 0.0});
  for (double r = size.at_radius(0.0); r < Rout;) {
    const double h = size.at_radius(r);
    const int m = std::max(1, static_cast<int>(std::lround(0.5 * pi * r / h)));
    for (int j = 0; j <= m; ++j) {
      const double th = 0.5 * pi * j / m;
      Point p{r * std::cos(th), r * std::sin(th)};
      if (j == 0) p.y = 0.0;
      if (j == m) p.x = 0.0;
      if (far_enough(p)) pts.push_back(p);
    }
    r += size.at_radius(r + 0.5 * h);
  }

  const auto quarter_tris = delaunay(pts);

  std::vector<std::array<int, 3>> kept;
  kept.reserve(quarter_tris.size());
  for (const auto& t : quarter_tris) {
    const Point c = (1.0 / 3.0) * (pts[t[0]] + pts[t[1]] + pts[t[2]]);
    if (domain.inside(c)) kept.push_back(t);
  }

  // Boundary chains and the axis segments must survive as edges.
  std::unordered_set<std::uint64_t> edges;
  edges.reserve(kept.size() * 3);
  for (const auto& t : kept)
    for (int i = 0; i < 3; ++i) edges.insert(detail::edge_key(t[i], t[(i + 1) % 3]));
  for (const auto& chain : chains)
    for (std::size_t i = 0; i + 1 < chain.size(); ++i)
      if (!edges.count(detail::edge_key(chain[i], chain[i + 1])))
        throw MeshError("build_mesh: boundary segment lost; the size field is too coarse for the geometry");
  for (int axis = 0; axis < 2; ++axis) {
    std::vector<int> on_axis;
    for (int i = 0; i < static_cast<int>(pts.size()); ++i)
      if ((axis == 0 ? pts[i].y : pts[i].x) == 0.0) on_axis.push_back(i);
    std::sort(on_axis.begin(), on_axis.end(), [&](int a, int b) {
      return axis == 0 ? pts[a].x < pts[b].x : pts[a].y < pts[b].y;
    });
    for (std::size_t i = 0; i + 1 < on_axis.size(); ++i) {
      const Point mid = 0.5 * (pts[on_axis[i]] + pts[on_axis[i + 1]]);
      if (!domain.inside(mid)) continue;
      if (!edges.count(detail::edge_key(on_axis[i], on_axis[i + 1])))
        throw MeshError("build_mesh: symmetry axis segment lost in the quarter triangulation");
    }
  }

  // Mirror into the full plane.
  Mesh mesh;
  mesh.h_far = h_far;
  mesh.h_neck = h_neck;
  mesh.grading = g;
  const int nq = static_cast<int>(pts.size());
  std::vector<std::array<int, 4>> image(nq, {-1, -1, -1, -1});  // (+,+), (-,+), (+,-), (-,-)
  std::vector<char> used(nq, 0);
  for (const auto& t : kept)
    for (int v : t) used[v] = 1;
  for (int i = 0; i < nq; ++i) {
    if (!used[i]) continue;
    const Point p = pts[i];
    for (int q = 0; q < 4; ++q) {
      const bool fx = q & 1, fy = q & 2;
      if (fx && p.x == 0.0) {
        image[i][q] = image[i][q & 2];
        continue;
      }
      if (fy && p.y == 0.0) {
        image[i][q] = image[i][q & 1];
        continue;
      }
      image[i][q] = static_cast<int>(mesh.nodes.size());
      mesh.nodes.push_back({fx ? -p.x : p.x, fy ? -p.y : p.y});
    }
  }
  for (int q = 0; q < 4; ++q) {
    const bool flip = ((q & 1) != 0) != ((q & 2) != 0);
    for (const auto& t : kept) {
      std::array<int, 3> v{image[t[0]][q], image[t[1]][q], image[t[2]][q]};
      if (flip) std::swap(v[1], v[2]);
      mesh.triangles.push_back(v);
    }
  }

  // Tags from geometry.
  const double tag_tol = 1e-12 * length_scale;
  mesh.node_tags.assign(mesh.nodes.size(), BoundaryTag::interior);
  for (std::size_t i = 0; i < mesh.nodes.size(); ++i) {
    const Point p = mesh.nodes[i];
    if (std::abs(norm(p) - Rout) <= 1e-12 * Rout) mesh.node_tags[i] = BoundaryTag::outer;
    for (const auto& c : domain.inclusions)
      if (std::abs(norm(p - c.center) - c.radius) <= tag_tol * 8) mesh.node_tags[i] = c.tag;
  }

  // Boundary edges: edges used by exactly one triangle.
  std::unordered_map<std::uint64_t, int> count;
  count.reserve(mesh.triangles.size() * 3);
  for (const auto& t : mesh.triangles)
    for (int i = 0; i < 3; ++i) ++count[detail::edge_key(t[i], t[(i + 1) % 3])];
  for (int ti = 0; ti < static_cast<int>(mesh.triangles.size()); ++ti) {
    const auto& t = mesh.triangles[ti];
    for (int i = 0; i < 3; ++i) {
      const int a = t[i], b = t[(i + 1) % 3];
      if (count[detail::edge_key(a, b)] != 1) continue;
      const BoundaryTag ta = mesh.node_tags[a], tb = mesh.node_tags[b];
      if (ta != tb || ta == BoundaryTag::interior)
        throw MeshError("build_mesh: mesh boundary edge not on a tagged curve");
      mesh.boundary_edges.push_back({a, b, ti, ta});
    }
  }

  const double q = min_quality(mesh);
  if (q < opt.quality_floor) {
    std::ostringstream msg;
    msg << "build_mesh: minimum element quality " << q << " below floor " << opt.quality_floor;
    throw MeshError(msg.str());
  }
  return mesh;
}

/// Number of element layers crossed by the symmetry axis inside the gap.
inline int gap_layers(const Mesh& mesh, const ParticlePair& pair) {
  int nodes_on_axis = 0;
  const double half = 0.5 * pair.delta();
  for (const auto& p : mesh.nodes)
    if (p.x == 0.0 && std::abs(p.y) <= half * (1.0 + 1e-12)) ++nodes_on_axis;
  return nodes_on_axis - 1;
}

}  // namespace plap
