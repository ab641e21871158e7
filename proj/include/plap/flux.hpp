#pragma once

// Boundary fluxes of |grad u|^{p-2} grad u.
//
// Two quadratures are provided. The consistent flux of a node set S is
//   F_S = sum_{i in S} int a(u) grad u . grad phi_i,   a(u) = (eps^2 + |grad u|^2)^{(p-2)/2},
// which equals int_curve a du/dn ds for the exact solution, sums to zero over all
// boundary nodes up to the interior Newton residual, and for a merged particle
// unknown is exactly the discrete optimality residual. The one-sided flux
// integrates a du/dn over boundary edges with the gradient of the adjacent element.
//
// Curve fluxes use the normal pointing out of Omega_delta (into the particles on
// particle boundaries). R_delta and the quantities of the linear identity use the
// normal pointing out of the particle, so that R_delta > 0 for U = y.

#include <algorithm>
#include <array>
#include <cmath>
#include <map>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "plap/error.hpp"
#include "plap/geometry.hpp"
#include "plap/mesh.hpp"
#include "plap/solver.hpp"

namespace plap {

enum class Curve { particle1, particle2, outer, s2, particle2_away };
enum class FluxMethod { consistent, one_sided };

inline const char* to_string(Curve c) {
  switch (c) {
    case Curve::particle1: return "particle1";
    case Curve::particle2: return "particle2";
    case Curve::outer: return "outer";
    case Curve::s2: return "s2";
    case Curve::particle2_away: return "particle2_away";
  }
  return "?";
}

namespace detail {

inline double flux_coefficient(Point G, double p, double eps) {
  if (p == 2.0) return 1.0;
  const double s = eps * eps + dot(G, G);
  return s > 0.0 ? std::pow(s, 0.5 * p - 1.0) : 0.0;
}

inline BoundaryTag curve_tag(Curve c) {
  switch (c) {
    case Curve::particle1: return BoundaryTag::particle1;
    case Curve::outer: return BoundaryTag::outer;
    default: return BoundaryTag::particle2;
  }
}

inline double neck_width(const DiscreteSolution& sol, double w) {
  if (!sol.pair) throw DomainError("flux: neck-split curves need a particle pair");
  return w > 0.0 ? w : default_neck_width(*sol.pair);
}

/// Whether a point tagged for curve c belongs to it (handles the neck split).
/// The neck arc is the part of particle 2 facing the gap with |x| <= w.
inline bool on_curve(Curve c, Point q, double w, double center_y = 0.0) {
  const bool neck = std::abs(q.x) <= w && q.y < center_y;
  if (c == Curve::s2) return neck;
  if (c == Curve::particle2_away) return !neck;
  return true;
}

}  // namespace detail

/// Per-node consistent fluxes int a(u) grad u . grad phi_i.
inline std::vector<double> node_fluxes(const DiscreteSolution& sol) {
  const Mesh& m = *sol.mesh;
  const ElementGeometry geo(m);
  std::vector<double> f(m.num_nodes(), 0.0);
  for (std::size_t t = 0; t < m.num_triangles(); ++t) {
    const Point G = geo.gradient(t, m, sol.u);
    const double a = detail::flux_coefficient(G, sol.p, sol.epsilon);
    for (int i = 0; i < 3; ++i) f[m.triangles[t][i]] += geo.area[t] * a * dot(G, geo.grad[t][i]);
  }
  return f;
}

struct CurveFlux {
  double flux = 0.0;           // consistent
  double flux_one_sided = 0.0;
  double magnitude = 0.0;      // sum of |nodal flux| over the curve
  int nodes = 0;
  int edges = 0;
};

inline CurveFlux curve_flux(const DiscreteSolution& sol, Curve c, double w = -1.0) {
  const Mesh& m = *sol.mesh;
  const bool split = c == Curve::s2 || c == Curve::particle2_away;
  const double ww = split ? detail::neck_width(sol, w) : 0.0;
  const double cy = split ? sol.pair->center(2).y : 0.0;
  const BoundaryTag tag = detail::curve_tag(c);
  CurveFlux out;
  const auto nf = node_fluxes(sol);
  for (std::size_t i = 0; i < m.num_nodes(); ++i) {
    if (m.node_tags[i] != tag || !detail::on_curve(c, m.nodes[i], ww, cy)) continue;
    out.flux += nf[i];
    out.magnitude += std::abs(nf[i]);
    ++out.nodes;
  }
  const ElementGeometry geo(m);
  for (const auto& e : m.boundary_edges) {
    if (e.tag != tag) continue;
    const Point a = m.nodes[e.a], b = m.nodes[e.b];
    if (!detail::on_curve(c, 0.5 * (a + b), ww, cy)) continue;
    const Point d = b - a;
    const Point n_len{d.y, -d.x};  // outward normal times edge length
    const Point G = geo.gradient(e.triangle, m, sol.u);
    out.flux_one_sided += detail::flux_coefficient(G, sol.p, sol.epsilon) * dot(G, n_len);
    ++out.edges;
  }
  if (out.nodes == 0 && out.edges == 0) {
    std::ostringstream msg;
    msg << "boundary_flux: curve " << to_string(c) << " has no tagged boundary on this mesh";
    throw DomainError(msg.str());
  }
  return out;
}

/// Flux through a curve with the normal pointing out of Omega_delta.
inline double boundary_flux(const DiscreteSolution& sol, Curve c, FluxMethod method = FluxMethod::consistent,
                            double w = -1.0) {
  const auto cf = curve_flux(sol, c, w);
  return method == FluxMethod::consistent ? cf.flux : cf.flux_one_sided;
}

struct FluxReport {
  double w = 0.0;
  CurveFlux particle1, particle2, outer, s2, particle2_away;
  double R_delta = 0.0;          // flux out of particle 2
  double scale = 0.0;            // largest absolute curve flux
  double balance_defect = 0.0;   // |F1 + F2 + F_outer| / scale
  double balance_defect_one_sided = 0.0;
  double particle_defect = 0.0;  // max(|F1|, |F2|) / scale
  double combined_defect = 0.0;  // |F1 + F2| / scale

  /// Defect relevant to the problem kind (per-particle for floating, combined for tied).
  double constraint_defect(ProblemKind k) const {
    if (k == ProblemKind::floating) return particle_defect;
    if (k == ProblemKind::tied) return combined_defect;
    return 0.0;
  }
};

inline FluxReport flux_report(const DiscreteSolution& sol, double w = -1.0) {
  FluxReport r;
  r.particle1 = curve_flux(sol, Curve::particle1);
  r.particle2 = curve_flux(sol, Curve::particle2);
  r.outer = curve_flux(sol, Curve::outer);
  if (sol.pair) {
    r.w = detail::neck_width(sol, w);
    r.s2 = curve_flux(sol, Curve::s2, r.w);
    r.particle2_away = curve_flux(sol, Curve::particle2_away, r.w);
  }
  r.R_delta = -r.particle2.flux;
  r.scale = std::max({r.particle1.magnitude, r.particle2.magnitude, r.outer.magnitude});
  const double s = r.scale > 0.0 ? r.scale : 1.0;
  r.balance_defect = std::abs(r.particle1.flux + r.particle2.flux + r.outer.flux) / s;
  r.balance_defect_one_sided =
      std::abs(r.particle1.flux_one_sided + r.particle2.flux_one_sided + r.outer.flux_one_sided) / s;
  r.particle_defect = std::max(std::abs(r.particle1.flux), std::abs(r.particle2.flux)) / s;
  r.combined_defect = std::abs(r.particle1.flux + r.particle2.flux) / s;
  return r;
}

/// One row per curve: curve,flux,flux_one_sided,magnitude,nodes,edges.
inline void write_flux_csv(std::ostream& os, const FluxReport& r) {
  os << "curve,flux,flux_one_sided,magnitude,nodes,edges\n";
  os.precision(17);
  auto row = [&](const char* name, const CurveFlux& c) {
    os << name << ',' << c.flux << ',' << c.flux_one_sided << ',' << c.magnitude << ',' << c.nodes << ',' << c.edges
       << '\n';
  };
  row("particle1", r.particle1);
  row("particle2", r.particle2);
  row("outer", r.outer);
  if (r.w > 0.0) {
    row("s2", r.s2);
    row("particle2_away", r.particle2_away);
  }
}

enum class RSplit { full, away_from_neck };

/// Flux out of particle 2 for the tied problem, over the whole boundary or outside the neck arc.
inline double r_delta(const DiscreteSolution& sol, double w = -1.0, RSplit split = RSplit::full) {
  if (sol.kind != ProblemKind::tied) throw DomainError("r_delta: defined for tied solutions only");
  const Curve c = split == RSplit::full ? Curve::particle2 : Curve::particle2_away;
  return -boundary_flux(sol, c, FluxMethod::consistent, w);
}

struct R0Estimate {
  std::vector<double> deltas;
  std::vector<double> r_deltas;
  double R0 = 0.0;
  double slope = 0.0;     // coefficient of delta^exponent
  double exponent = 1.0;
  double residual = 0.0;  // |R_delta - fit| at the smallest delta
  double max_residual = 0.0;
};

struct R0Options {
  double exponent = 1.0;  // model R_delta = R0 + c delta^exponent
  double noise_tol = 0.05;  // max fit residual relative to |R0| before the ladder is rejected
};

/// Least-squares fit of R = R0 + c delta^s on a ladder.
inline R0Estimate extrapolate_r0(std::vector<double> deltas, std::vector<double> rs, const R0Options& opt = {}) {
  if (deltas.size() != rs.size()) throw DomainError("estimate_r0: ladder sizes differ");
  if (deltas.size() < 3) throw DomainError("estimate_r0: ladder needs at least 3 points");
  for (std::size_t i = 1; i < deltas.size(); ++i)
    if (!(deltas[i] < deltas[i - 1])) throw DomainError("estimate_r0: ladder must be strictly decreasing");
  R0Estimate e;
  e.deltas = std::move(deltas);
  e.r_deltas = std::move(rs);
  e.exponent = opt.exponent;
  const double n = static_cast<double>(e.deltas.size());
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  for (std::size_t i = 0; i < e.deltas.size(); ++i) {
    const double x = std::pow(e.deltas[i], opt.exponent);
    sx += x;
    sy += e.r_deltas[i];
    sxx += x * x;
    sxy += x * e.r_deltas[i];
  }
  const double det = n * sxx - sx * sx;
  e.slope = (n * sxy - sx * sy) / det;
  e.R0 = (sy - e.slope * sx) / n;
  for (std::size_t i = 0; i < e.deltas.size(); ++i) {
    const double fit = e.R0 + e.slope * std::pow(e.deltas[i], opt.exponent);
    e.max_residual = std::max(e.max_residual, std::abs(e.r_deltas[i] - fit));
    if (i + 1 == e.deltas.size()) e.residual = std::abs(e.r_deltas[i] - fit);
  }
  const double scale = std::max(std::abs(e.R0), *std::max_element(e.r_deltas.begin(), e.r_deltas.end(),
                                                                   [](double a, double b) { return std::abs(a) < std::abs(b); }));
  if (e.max_residual > opt.noise_tol * std::abs(scale)) {
    std::ostringstream msg;
    msg << "estimate_r0: extrapolation unreliable (max residual " << e.max_residual << "); ladder:";
    for (std::size_t i = 0; i < e.deltas.size(); ++i) msg << " (" << e.deltas[i] << ", " << e.r_deltas[i] << ")";
    throw NumericalError(msg.str(), e.max_residual);
  }
  return e;
}

/// Tied solves over the ladder and extrapolation of R_delta to delta = 0.
inline R0Estimate estimate_r0(const DomainFamily& family, const SolverConfig& cfg, const std::vector<double>& ladder,
                              const R0Options& opt = {}) {
  if (ladder.size() < 3) throw DomainError("estimate_r0: ladder needs at least 3 points");
  for (std::size_t i = 1; i < ladder.size(); ++i)
    if (!(ladder[i] < ladder[i - 1])) throw DomainError("estimate_r0: ladder must be strictly decreasing");
  std::vector<double> rs;
  for (double delta : ladder) {
    const auto dom = family.domain(delta);
    rs.push_back(r_delta(solve_tied(family.mesh(dom), dom, cfg)));
  }
  return extrapolate_r0(ladder, rs, opt);
}

struct QReport {
  double Q = 0.0;
  std::array<std::array<double, 2>, 2> a{};  // a[i][j]: flux of v_j out of particle i
  std::array<double, 2> b{};                 // flux of v3 out of particle i
  double outer_v1 = 0.0;                     // flux of v1 out through the outer boundary
  double outer_v2 = 0.0;
  double R_delta = 0.0;
  double reciprocity_defect = 0.0;  // |a12 - a21|
  double identity_defect = 0.0;     // |Q + (outer_v1 + outer_v2) R_delta|
  double relative_identity_defect = 0.0;
};

/// Linear-case functional Q = b1 F_out(v2) - b2 F_out(v1) and its identity
/// Q = -(F_out(v1) + F_out(v2)) R_delta, checked against an independent tied solve.
inline QReport q_functional(const DiscreteSolution& v1, const DiscreteSolution& v2, const DiscreteSolution& v3,
                            const DiscreteSolution& tied) {
  if (v1.mesh != v2.mesh || v1.mesh != v3.mesh || v1.mesh != tied.mesh)
    throw DomainError("q_functional: solutions live on different meshes");
  for (const auto* s : {&v1, &v2, &v3, &tied})
    if (s->p != 2.0) throw DomainError("q_functional: linear auxiliaries require p = 2");
  QReport q;
  const DiscreteSolution* v[2] = {&v1, &v2};
  for (int j = 0; j < 2; ++j) {
    q.a[0][j] = -boundary_flux(*v[j], Curve::particle1);
    q.a[1][j] = -boundary_flux(*v[j], Curve::particle2);
  }
  q.b[0] = -boundary_flux(v3, Curve::particle1);
  q.b[1] = -boundary_flux(v3, Curve::particle2);
  q.outer_v1 = boundary_flux(v1, Curve::outer);
  q.outer_v2 = boundary_flux(v2, Curve::outer);
  q.Q = q.b[0] * q.outer_v2 - q.b[1] * q.outer_v1;
  q.R_delta = r_delta(tied);
  q.reciprocity_defect = std::abs(q.a[0][1] - q.a[1][0]);
  q.identity_defect = std::abs(q.Q + (q.outer_v1 + q.outer_v2) * q.R_delta);
  q.relative_identity_defect = q.Q != 0.0 ? q.identity_defect / std::abs(q.Q) : q.identity_defect;
  return q;
}

struct NormalSample {
  Point at;            // edge midpoint on s2
  double dn = 0.0;     // grad u . n, n pointing into particle 2
  double slack = 0.0;  // largest jump of grad u . n to the neighbouring elements
};

/// Normal derivative samples on the neck arc of particle 2, one per boundary edge.
inline std::vector<NormalSample> s2_normal_derivatives(const DiscreteSolution& sol, double w = -1.0) {
  const Mesh& m = *sol.mesh;
  const double ww = detail::neck_width(sol, w);
  const ElementGeometry geo(m);
  std::map<std::uint64_t, std::vector<int>> edge_tris;
  for (std::size_t t = 0; t < m.num_triangles(); ++t)
    for (int i = 0; i < 3; ++i)
      edge_tris[detail::edge_key(m.triangles[t][i], m.triangles[t][(i + 1) % 3])].push_back(static_cast<int>(t));
  std::vector<NormalSample> out;
  for (const auto& e : m.boundary_edges) {
    if (e.tag != BoundaryTag::particle2) continue;
    const Point a = m.nodes[e.a], b = m.nodes[e.b];
    const Point mid = 0.5 * (a + b);
    if (!detail::on_curve(Curve::s2, mid, ww, sol.pair->center(2).y)) continue;
    const Point d = b - a;
    const Point n = (1.0 / norm(d)) * Point{d.y, -d.x};
    NormalSample s;
    s.at = mid;
    s.dn = dot(geo.gradient(e.triangle, m, sol.u), n);
    const auto& tv = m.triangles[e.triangle];
    for (int i = 0; i < 3; ++i) {
      for (int nb : edge_tris[detail::edge_key(tv[i], tv[(i + 1) % 3])]) {
        if (nb == e.triangle) continue;
        s.slack = std::max(s.slack, std::abs(dot(geo.gradient(nb, m, sol.u), n) - s.dn));
      }
    }
    out.push_back(s);
  }
  std::sort(out.begin(), out.end(), [](const NormalSample& l, const NormalSample& r) { return l.at.x < r.at.x; });
  return out;
}

}  // namespace plap
