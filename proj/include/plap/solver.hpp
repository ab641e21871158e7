#pragma once

// Piecewise-linear minimization of the p-Dirichlet energy
//   E(u) = int (eps^2 + |grad u|^2)^{p/2} dx
// over the mesh, with the particle values either prescribed, free per particle
// (floating), or shared by both particles (tied). Free particle values are
// single merged unknowns, so their zero-flux conditions are the natural
// optimality conditions of the discrete energy.

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <memory>
#include <optional>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include <Eigen/Sparse>
#include <Eigen/SparseCholesky>

#include "plap/error.hpp"
#include "plap/geometry.hpp"
#include "plap/mesh.hpp"

namespace plap {

enum class ProblemKind { floating, prescribed, tied, linear_aux };

inline const char* to_string(ProblemKind k) {
  switch (k) {
    case ProblemKind::floating: return "floating";
    case ProblemKind::prescribed: return "prescribed";
    case ProblemKind::tied: return "tied";
    case ProblemKind::linear_aux: return "linear_aux";
  }
  return "?";
}

struct SolverConfig {
  double p = 2.0;
  double epsilon = -1.0;      // negative: 1e-8 (max U - min U) / R
  double tol = 1e-10;         // residual relative to the size of its summands
  double stage_tol = 1e-7;    // same, for intermediate continuation stages
  int max_iter = 60;          // Newton iterations per stage
  double armijo = 1e-4;
  double backtrack = 0.5;
  int max_backtracks = 50;
  double p_step = 0.5;        // continuation step in p, starting from p = 2
  double hessian_floor = 1e-10;  // relative floor on the degenerate diffusion coefficient
};

struct NewtonTrace {
  std::vector<double> stage_p;
  std::vector<double> residuals;  // relative residual after each iteration (all stages)
  std::vector<double> energies;   // energy after each iteration (all stages)
  int iterations = 0;
};

struct DiscreteSolution {
  std::shared_ptr<const Mesh> mesh;
  std::optional<ParticlePair> pair;
  std::vector<double> u;  // nodal values
  ProblemKind kind = ProblemKind::floating;
  std::optional<double> T1;
  std::optional<double> T2;
  double p = 2.0;
  double epsilon = 0.0;
  double energy = 0.0;
  double residual = 0.0;
  bool converged = false;
  NewtonTrace trace;
};

/// Per-element area and basis-function gradients.
struct ElementGeometry {
  std::vector<double> area;
  std::vector<std::array<Point, 3>> grad;

  explicit ElementGeometry(const Mesh& m) : area(m.num_triangles()), grad(m.num_triangles()) {
    for (std::size_t t = 0; t < m.num_triangles(); ++t) {
      const auto& v = m.triangles[t];
      const Point a = m.nodes[v[0]], b = m.nodes[v[1]], c = m.nodes[v[2]];
      const double twice = cross(b - a, c - a);
      area[t] = 0.5 * twice;
      grad[t] = {Point{b.y - c.y, c.x - b.x}, Point{c.y - a.y, a.x - c.x}, Point{a.y - b.y, b.x - a.x}};
      for (auto& g : grad[t]) g = (1.0 / twice) * g;
    }
  }

  Point gradient(std::size_t t, const Mesh& m, std::span<const double> u) const {
    // differences keep the gradient of a constant field exactly zero
    const auto& v = m.triangles[t];
    return (u[v[1]] - u[v[0]]) * grad[t][1] + (u[v[2]] - u[v[0]]) * grad[t][2];
  }
};

/// Element gradients of a nodal field.
inline std::vector<Point> element_gradients(const Mesh& m, std::span<const double> u) {
  const ElementGeometry geo(m);
  std::vector<Point> g(m.num_triangles());
  for (std::size_t t = 0; t < g.size(); ++t) g[t] = geo.gradient(t, m, u);
  return g;
}

/// int (eps^2 + |grad u|^2)^{p/2} with one-point quadrature (exact for P1 fields).
inline double energy(const Mesh& m, std::span<const double> u, double p, double eps = 0.0) {
  const ElementGeometry geo(m);
  double e = 0.0;
  for (std::size_t t = 0; t < m.num_triangles(); ++t) {
    const Point g = geo.gradient(t, m, u);
    e += geo.area[t] * std::pow(eps * eps + dot(g, g), 0.5 * p);
  }
  return e;
}

inline double energy(const DiscreteSolution& s) { return energy(*s.mesh, s.u, s.p, s.epsilon); }

namespace detail {

/// How every node enters the unknown vector.
struct DofMap {
  std::vector<int> dof;        // -1 for Dirichlet nodes
  std::vector<double> fixed;   // Dirichlet values
  int ndof = 0;
  int particle_dof[2] = {-1, -1};
};

struct ParticleConstraint {
  enum class Mode { free, shared, fixed } mode = Mode::fixed;
  double value = 0.0;
};

inline DofMap make_dofs(const Mesh& m, const BoundaryDatum& datum, ParticleConstraint c1, ParticleConstraint c2) {
  DofMap map;
  const std::size_t n = m.num_nodes();
  map.dof.assign(n, -1);
  map.fixed.assign(n, 0.0);
  int next = 0;
  int shared = -1;
  auto particle_dof = [&](int which, ParticleConstraint c) -> int {
    if (c.mode == ParticleConstraint::Mode::fixed) return -1;
    if (c.mode == ParticleConstraint::Mode::shared) {
      if (shared < 0) shared = next++;
      return shared;
    }
    if (map.particle_dof[which] < 0) map.particle_dof[which] = next++;
    return map.particle_dof[which];
  };
  for (std::size_t i = 0; i < n; ++i) {
    switch (m.node_tags[i]) {
      case BoundaryTag::outer:
        map.fixed[i] = datum(m.nodes[i]);
        break;
      case BoundaryTag::particle1:
        map.dof[i] = particle_dof(0, c1);
        map.fixed[i] = c1.value;
        break;
      case BoundaryTag::particle2:
        map.dof[i] = particle_dof(1, c2);
        map.fixed[i] = c2.value;
        break;
      case BoundaryTag::interior:
        map.dof[i] = next++;
        break;
    }
  }
  if (shared >= 0) map.particle_dof[0] = map.particle_dof[1] = shared;
  map.ndof = next;
  return map;
}

class NewtonSolver {
 public:
  NewtonSolver(const Mesh& m, const DofMap& dofs) : m_(m), geo_(m), dofs_(dofs) { build_pattern(); }

  void expand(const Eigen::VectorXd& x, std::vector<double>& u) const {
    u.resize(m_.num_nodes());
    for (std::size_t i = 0; i < u.size(); ++i) u[i] = dofs_.dof[i] < 0 ? dofs_.fixed[i] : x[dofs_.dof[i]];
  }

  double energy_of(const Eigen::VectorXd& x, double p, double eps) const {
    std::vector<double> u;
    expand(x, u);
    double e = 0.0;
    for (std::size_t t = 0; t < m_.num_triangles(); ++t) {
      const Point g = geo_.gradient(t, m_, u);
      e += geo_.area[t] * std::pow(eps * eps + dot(g, g), 0.5 * p);
    }
    return e;
  }

  /// Gradient of the energy and the scale of its summands (for relative tests).
  void residual(const Eigen::VectorXd& x, double p, double eps, Eigen::VectorXd& g, double& scale) const {
    std::vector<double> u;
    expand(x, u);
    g.setZero(dofs_.ndof);
    Eigen::VectorXd mag = Eigen::VectorXd::Zero(dofs_.ndof);
    for (std::size_t t = 0; t < m_.num_triangles(); ++t) {
      const Point G = geo_.gradient(t, m_, u);
      const double s = eps * eps + dot(G, G);
      const double c1 = p == 2.0 ? 1.0 : std::pow(s, 0.5 * p - 1.0);
      const auto& v = m_.triangles[t];
      for (int i = 0; i < 3; ++i) {
        const int di = dofs_.dof[v[i]];
        if (di < 0) continue;
        const double term = geo_.area[t] * p * c1 * dot(G, geo_.grad[t][i]);
        g[di] += term;
        mag[di] += std::abs(term);
      }
    }
    scale = mag.size() ? mag.maxCoeff() : 0.0;
  }

  void hessian(const Eigen::VectorXd& x, double p, double eps, double floor_rel) {
    std::vector<double> u;
    expand(x, u);
    std::vector<double> c1(m_.num_triangles()), c2(m_.num_triangles());
    std::vector<Point> G(m_.num_triangles());
    double cmax = 0.0;
    for (std::size_t t = 0; t < m_.num_triangles(); ++t) {
      G[t] = geo_.gradient(t, m_, u);
      const double s = eps * eps + dot(G[t], G[t]);
      c1[t] = p == 2.0 ? 1.0 : std::pow(s, 0.5 * p - 1.0);
      c2[t] = p == 2.0 ? 0.0 : (p - 2.0) * std::pow(s, 0.5 * p - 2.0);
      if (!std::isfinite(c2[t])) c2[t] = 0.0;
      cmax = std::max(cmax, c1[t]);
    }
    const double floor = cmax > 0.0 ? floor_rel * cmax : 1.0;
    double* values = H_.valuePtr();
    std::fill(values, values + H_.nonZeros(), 0.0);
    for (std::size_t t = 0; t < m_.num_triangles(); ++t) {
      const double a = std::max(c1[t], floor);
      const auto& gr = geo_.grad[t];
      double gG[3];
      for (int i = 0; i < 3; ++i) gG[i] = dot(G[t], gr[i]);
      for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 3; ++j) {
          const int slot = slots_[9 * t + 3 * i + j];
          if (slot < 0) continue;
          values[slot] += geo_.area[t] * p * (a * dot(gr[i], gr[j]) + c2[t] * gG[i] * gG[j]);
        }
    }
  }

  bool solve(const Eigen::VectorXd& rhs, Eigen::VectorXd& out) {
    if (!analyzed_) {
      ldlt_.analyzePattern(H_);
      analyzed_ = true;
    }
    ldlt_.factorize(H_);
    if (ldlt_.info() != Eigen::Success) return false;
    out = ldlt_.solve(rhs);
    return ldlt_.info() == Eigen::Success && out.allFinite();
  }

  int ndof() const { return dofs_.ndof; }

 private:
  void build_pattern() {
    const int n = dofs_.ndof;
    std::vector<Eigen::Triplet<double>> trip;
    trip.reserve(9 * m_.num_triangles());
    for (const auto& v : m_.triangles)
      for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 3; ++j) {
          const int di = dofs_.dof[v[i]], dj = dofs_.dof[v[j]];
          if (di >= 0 && dj >= 0) trip.emplace_back(di, dj, 1.0);
        }
    H_.resize(n, n);
    H_.setFromTriplets(trip.begin(), trip.end());
    H_.makeCompressed();
    slots_.assign(9 * m_.num_triangles(), -1);
    const int* outer = H_.outerIndexPtr();
    const int* inner = H_.innerIndexPtr();
    for (std::size_t t = 0; t < m_.num_triangles(); ++t) {
      const auto& v = m_.triangles[t];
      for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 3; ++j) {
          const int di = dofs_.dof[v[i]], dj = dofs_.dof[v[j]];
          if (di < 0 || dj < 0) continue;
          // column-major: column dj holds row di
          const int* first = inner + outer[dj];
          const int* last = inner + outer[dj + 1];
          const int* it = std::lower_bound(first, last, di);
          slots_[9 * t + 3 * i + j] = static_cast<int>(it - inner);
        }
    }
  }

  const Mesh& m_;
  ElementGeometry geo_;
  const DofMap& dofs_;
  Eigen::SparseMatrix<double> H_;
  std::vector<int> slots_;
  Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>> ldlt_;
  bool analyzed_ = false;
};

inline double datum_range(const Mesh& m, const BoundaryDatum& datum, double& lo, double& hi) {
  lo = std::numeric_limits<double>::infinity();
  hi = -lo;
  for (std::size_t i = 0; i < m.num_nodes(); ++i) {
    if (m.node_tags[i] != BoundaryTag::outer) continue;
    const double v = datum(m.nodes[i]);
    lo = std::min(lo, v);
    hi = std::max(hi, v);
  }
  return hi - lo;
}

inline DiscreteSolution run_newton(std::shared_ptr<const Mesh> mesh, const DomainSpec& domain, const DofMap& dofs,
                                   ProblemKind kind, const SolverConfig& cfg) {
  if (!(cfg.p >= 2.0)) throw DomainError("solver: p must be >= 2");
  if (!(cfg.tol > 0.0)) throw DomainError("solver: tolerance must be positive");
  const Mesh& m = *mesh;
  double lo, hi;
  const double range = datum_range(m, domain.datum, lo, hi);
  const double length = domain.pair ? domain.pair->radius() : domain.outer_radius;
  const double eps = cfg.epsilon >= 0.0 ? cfg.epsilon : 1e-8 * range / length;

  NewtonSolver newton(m, dofs);
  Eigen::VectorXd x = Eigen::VectorXd::Constant(dofs.ndof, std::isfinite(lo) ? 0.5 * (lo + hi) : 0.0);

  std::vector<double> stages{2.0};
  if (cfg.p > 2.0) {
    const double step = cfg.p_step > 0.0 ? cfg.p_step : cfg.p - 2.0;
    for (double q = 2.0 + step; q < cfg.p - 1e-12; q += step) stages.push_back(q);
    stages.push_back(cfg.p);
  }

  DiscreteSolution sol;
  sol.mesh = mesh;
  sol.pair = domain.pair;
  sol.kind = kind;
  sol.p = cfg.p;
  sol.epsilon = eps;

  Eigen::VectorXd g, d, xt, gt;
  for (std::size_t s = 0; s < stages.size(); ++s) {
    const double p = stages[s];
    const bool last = s + 1 == stages.size();
    const double tol = last ? cfg.tol : std::max(cfg.tol, cfg.stage_tol);
    sol.trace.stage_p.push_back(p);
    double energy = newton.energy_of(x, p, eps);
    bool stage_converged = false;
    double rel = 0.0;
    for (int it = 0; it <= cfg.max_iter; ++it) {
      double scale = 0.0;
      newton.residual(x, p, eps, g, scale);
      const double gmax = g.size() ? g.cwiseAbs().maxCoeff() : 0.0;
      rel = scale > 0.0 ? gmax / scale : 0.0;
      if (gmax == 0.0 || rel <= tol) {
        stage_converged = true;
        break;
      }
      if (it == cfg.max_iter) break;

      newton.hessian(x, p, eps, cfg.hessian_floor);
      if (!newton.solve(-g, d)) {
        std::ostringstream msg;
        msg << "solver: Newton system could not be factorized at p = " << p << ", iteration " << it;
        throw SolverError(msg.str());
      }
      const double slope = g.dot(d);
      // Below this predicted decrease energy comparisons are roundoff; steps are
      // then judged by the residual instead.
      const double noise = 1e3 * std::numeric_limits<double>::epsilon() * std::abs(energy);
      double t = 1.0;
      double e_new = 0.0;
      bool accepted = false;
      if (-slope > noise) {
        for (int k = 0; k < cfg.max_backtracks; ++k) {
          xt = x + t * d;
          e_new = newton.energy_of(xt, p, eps);
          if (e_new <= energy + cfg.armijo * t * slope) {
            accepted = true;
            break;
          }
          t *= cfg.backtrack;
          if (-t * slope <= noise) break;
        }
      }
      if (!accepted) {
        const double gnorm = g.norm();
        t = 1.0;
        for (int k = 0; k < cfg.max_backtracks && !accepted; ++k, t *= cfg.backtrack) {
          xt = x + t * d;
          double sc2 = 0.0;
          newton.residual(xt, p, eps, gt, sc2);
          accepted = gt.norm() < gnorm;
        }
        if (!accepted) {
          std::ostringstream msg;
          msg << "solver: line search failed at p = " << p << ", iteration " << it << ", residual trace:";
          for (double r : sol.trace.residuals) msg << ' ' << r;
          throw SolverError(msg.str());
        }
        e_new = newton.energy_of(xt, p, eps);
      }
      x = xt;
      energy = e_new;
      ++sol.trace.iterations;
      sol.trace.energies.push_back(energy);
      double sc3 = 0.0;
      newton.residual(x, p, eps, g, sc3);
      sol.trace.residuals.push_back(sc3 > 0.0 ? (g.size() ? g.cwiseAbs().maxCoeff() : 0.0) / sc3 : 0.0);
    }
    if (!stage_converged) {
      std::ostringstream msg;
      msg << "solver: Newton did not converge at p = " << p << " (relative residual " << rel << "); trace:";
      for (double r : sol.trace.residuals) msg << ' ' << r;
      throw SolverError(msg.str());
    }
    sol.residual = rel;
  }

  newton.expand(x, sol.u);
  sol.energy = newton.energy_of(x, cfg.p, eps);
  sol.converged = true;
  if (dofs.particle_dof[0] >= 0) sol.T1 = x[dofs.particle_dof[0]];
  if (dofs.particle_dof[1] >= 0) sol.T2 = x[dofs.particle_dof[1]];
  return sol;
}

inline bool has_tag(const Mesh& m, BoundaryTag tag) {
  return std::find(m.node_tags.begin(), m.node_tags.end(), tag) != m.node_tags.end();
}

}  // namespace detail

/// Both particle values free: the zero-flux conditions hold naturally.
inline DiscreteSolution solve_floating(std::shared_ptr<const Mesh> mesh, const DomainSpec& domain, const SolverConfig& cfg) {
  using PC = detail::ParticleConstraint;
  const auto dofs = detail::make_dofs(*mesh, domain.datum, {PC::Mode::free, 0.0}, {PC::Mode::free, 0.0});
  return detail::run_newton(std::move(mesh), domain, dofs, ProblemKind::floating, cfg);
}

/// Particle values pinned to T1 and T2.
inline DiscreteSolution solve_prescribed(std::shared_ptr<const Mesh> mesh, const DomainSpec& domain, double T1,
                                         double T2, const SolverConfig& cfg) {
  using PC = detail::ParticleConstraint;
  const auto dofs = detail::make_dofs(*mesh, domain.datum, {PC::Mode::fixed, T1}, {PC::Mode::fixed, T2});
  auto sol = detail::run_newton(std::move(mesh), domain, dofs, ProblemKind::prescribed, cfg);
  if (detail::has_tag(*sol.mesh, BoundaryTag::particle1)) sol.T1 = T1;
  if (detail::has_tag(*sol.mesh, BoundaryTag::particle2)) sol.T2 = T2;
  return sol;
}

/// One value shared by both particles; only the combined flux vanishes.
inline DiscreteSolution solve_tied(std::shared_ptr<const Mesh> mesh, const DomainSpec& domain, const SolverConfig& cfg) {
  using PC = detail::ParticleConstraint;
  const auto dofs = detail::make_dofs(*mesh, domain.datum, {PC::Mode::shared, 0.0}, {PC::Mode::shared, 0.0});
  return detail::run_newton(std::move(mesh), domain, dofs, ProblemKind::tied, cfg);
}

enum class LinearAux { v1, v2, v3 };

/// Harmonic auxiliaries: v1 = 1 on particle 1 and 0 elsewhere on the boundary,
/// v2 likewise for particle 2, v3 = 0 on both particles and U on the outer boundary.
inline DiscreteSolution solve_linear_aux(std::shared_ptr<const Mesh> mesh, const DomainSpec& domain, LinearAux which,
                                         SolverConfig cfg = {}) {
  cfg.p = 2.0;
  DomainSpec d = domain;
  double T1 = 0.0, T2 = 0.0;
  if (which != LinearAux::v3) d.datum = [](Point) { return 0.0; };
  if (which == LinearAux::v1) T1 = 1.0;
  if (which == LinearAux::v2) T2 = 1.0;
  auto sol = solve_prescribed(std::move(mesh), d, T1, T2, cfg);
  sol.kind = ProblemKind::linear_aux;
  return sol;
}

enum class GradRegion { all, neck, away };

struct GradMax {
  double value = 0.0;
  Point location;
  int triangle = -1;
};

/// Largest element gradient magnitude over the region; the neck is Pi_delta(w).
inline GradMax grad_max(const DiscreteSolution& sol, GradRegion region, double w = -1.0) {
  const Mesh& m = *sol.mesh;
  std::optional<NeckSpec> neck;
  if (region != GradRegion::all) {
    if (!sol.pair) throw DomainError("grad_max: neck regions need a particle pair");
    neck.emplace(*sol.pair, w > 0.0 ? w : default_neck_width(*sol.pair));
  }
  const ElementGeometry geo(m);
  GradMax best;
  for (std::size_t t = 0; t < m.num_triangles(); ++t) {
    const Point c = m.centroid(static_cast<int>(t));
    if (neck) {
      const bool in = neck->contains(c);
      if ((region == GradRegion::neck) != in) continue;
    }
    const double v = norm(geo.gradient(t, m, sol.u));
    if (best.triangle < 0 || v > best.value) {
      best.value = v;
      best.location = c;
      best.triangle = static_cast<int>(t);
    }
  }
  return best;
}

/// Domain and mesh for one member of the delta family used by sweeps and ladders.
struct DomainFamily {
  double R = 1.0;
  double outer_radius = 4.0;
  double clearance = 0.0;
  BoundaryDatum datum = [](Point p) { return p.y; };
  double h_far = 0.1;
  double h_neck_fraction = 0.25;  // h_neck = fraction * delta
  MeshOptions mesh_options;

  DomainSpec domain(double delta) const {
    return DomainSpec::two_particles(ParticlePair(R, delta), outer_radius, datum, clearance);
  }
  std::shared_ptr<const Mesh> mesh(const DomainSpec& d) const {
    const double delta = d.pair->delta();
    return std::make_shared<const Mesh>(build_mesh(d, h_far, std::min(h_far, h_neck_fraction * delta), mesh_options));
  }
};

}  // namespace plap
