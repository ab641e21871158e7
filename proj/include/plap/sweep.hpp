#pragma once

// delta sweeps: one floating and one tied solve per delta on a shared mesh,
// power-law fits of the potential gap and the gradient maximum, comparison with
// the asymptotic predictions, and the report files.

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <limits>
#include <numbers>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "json.hpp"

#include "plap/asymptotics.hpp"
#include "plap/error.hpp"
#include "plap/flux.hpp"
#include "plap/geometry.hpp"
#include "plap/io.hpp"
#include "plap/mesh.hpp"
#include "plap/radial.hpp"
#include "plap/solver.hpp"

namespace plap {

using nlohmann::json;

// ---------------------------------------------------------------- configuration

struct DatumConfig {
  std::string preset = "linear-y";  // linear-y | quadratic | constant | table
  double scale = 1.0;
  double value = 0.0;  // constant preset
  std::vector<std::array<double, 2>> table;  // (angle in radians, value), interpolated periodically
};

struct LadderConfig {
  double start = 0.04;
  double ratio = 0.5;
  int count = 5;

  std::vector<double> values() const {
    std::vector<double> v;
    double d = start;
    for (int i = 0; i < count; ++i, d *= ratio) v.push_back(d);
    return v;
  }
};

struct VerdictConfig {
  double band_lo = 0.85;
  double band_hi = 1.15;
  double slope_tol = 0.1;
  double barrier_fraction = 0.95;
  double barrier_delta = 0.01;   // ladder point used for the barrier check
  double first_order = 2.0;      // c in (1 + c delta)
  double flux_balance_tol = 1e-6;
  double flux_constraint_tol = 1e-4;
  double away_factor = 2.0;
  double identity_tol = 1e-6;
};

struct SolveConfig {
  double delta = 0.01;
  std::string kind = "floating";  // floating | tied | prescribed
  double T1 = 0.0;
  double T2 = 0.0;
};

struct SweepConfig {
  double R = 1.0;
  double R_out = 4.0;
  double clearance = 0.5;
  double p = 2.0;
  DatumConfig datum;
  LadderConfig ladder;
  double h_far = 0.1;
  double h_neck_fraction = 0.25;
  MeshOptions mesh;
  SolverConfig solver;
  double neck_width = -1.0;  // negative selects R / 4
  std::string output_dir = "out";
  std::vector<double> r0_ladder;  // empty: the sweep ladder
  R0Options r0;
  VerdictConfig verdict;
  SolveConfig solve;
  int threads = 1;
  bool record_timing = false;  // off keeps the outputs byte-deterministic

  double w() const { return neck_width > 0.0 ? neck_width : 0.25 * R; }
};

inline BoundaryDatum make_datum(const DatumConfig& c, double R_out) {
  const double s = c.scale;
  if (c.preset == "linear-y") return [s](Point q) { return s * q.y; };
  if (c.preset == "quadratic") return [s, R_out](Point q) { return s * (q.y + (q.x * q.x - q.y * q.y) / (2.0 * R_out)); };
  if (c.preset == "constant") {
    const double v = s * c.value;
    return [v](Point) { return v; };
  }
  if (c.preset == "table") {
    if (c.table.size() < 2) throw DomainError("datum table needs at least two entries");
    auto t = c.table;
    constexpr double two_pi = 2.0 * std::numbers::pi;
    for (auto& e : t) e[0] = std::fmod(std::fmod(e[0], two_pi) + two_pi, two_pi);
    std::sort(t.begin(), t.end());
    return [t, s](Point q) {
      double a = std::atan2(q.y, q.x);
      if (a < 0.0) a += two_pi;
      auto hi = std::upper_bound(t.begin(), t.end(), a, [](double v, const std::array<double, 2>& e) { return v < e[0]; });
      const auto& r = hi == t.end() ? t.front() : *hi;
      const auto& l = hi == t.begin() ? t.back() : *(hi - 1);
      double span = r[0] - l[0];
      double off = a - l[0];
      if (span <= 0.0) span += two_pi;
      if (off < 0.0) off += two_pi;
      return s * (l[1] + (r[1] - l[1]) * off / span);
    };
  }
  throw DomainError("unknown datum preset '" + c.preset + "'");
}

inline DomainFamily make_family(const SweepConfig& c) {
  DomainFamily f;
  f.R = c.R;
  f.outer_radius = c.R_out;
  f.clearance = c.clearance;
  f.datum = make_datum(c.datum, c.R_out);
  f.h_far = c.h_far;
  f.h_neck_fraction = c.h_neck_fraction;
  f.mesh_options = c.mesh;
  return f;
}

inline SolverConfig solver_config(const SweepConfig& c) {
  SolverConfig s = c.solver;
  s.p = c.p;
  return s;
}

inline void validate(const SweepConfig& c) {
  if (!(c.R > 0.0)) throw DomainError("config: R must be positive");
  if (!(c.p >= 2.0)) throw DomainError("config: p must be >= 2");
  if (c.ladder.count < 1) throw DomainError("config: ladder needs at least one point");
  if (!(c.ladder.start > 0.0 && c.ladder.ratio > 0.0 && c.ladder.ratio < 1.0))
    throw DomainError("config: ladder must be positive and strictly decreasing");
  if (!(c.h_neck_fraction > 0.0 && c.h_neck_fraction <= 0.25))
    throw DomainError("config: h_neck_fraction must lie in (0, 1/4] to keep four layers across the gap");
  if (!(c.h_far > 0.0)) throw DomainError("config: h_far must be positive");
  if (!(c.w() < c.R)) throw DomainError("config: neck width must be below R");
  if (c.threads < 1) throw DomainError("config: threads must be >= 1");
  for (double d : c.ladder.values())
    if (c.R_out - (2.0 * c.R + 0.5 * d) < c.clearance)
      throw DomainError("config: clearance to the outer boundary violated at delta = " + std::to_string(d));
  for (std::size_t i = 1; i < c.r0_ladder.size(); ++i)
    if (!(c.r0_ladder[i] < c.r0_ladder[i - 1])) throw DomainError("config: r0 ladder must be strictly decreasing");
}

namespace detail {

template <class T>
void get_if(const json& j, const char* key, T& out) {
  if (j.contains(key)) out = j.at(key).get<T>();
}

inline void check_keys(const json& j, std::initializer_list<const char*> keys, const char* where) {
  if (!j.is_object()) throw IoError(std::string("config: ") + where + " must be an object");
  for (const auto& [k, v] : j.items()) {
    if (std::none_of(keys.begin(), keys.end(), [&](const char* x) { return k == x; }))
      throw IoError(std::string("config: unknown key '") + k + "' in " + where);
  }
}

}  // namespace detail

inline json to_json(const SweepConfig& c) {
  json table = json::array();
  for (const auto& e : c.datum.table) table.push_back({e[0], e[1]});
  return {
      {"R", c.R},
      {"R_out", c.R_out},
      {"clearance", c.clearance},
      {"p", c.p},
      {"datum", {{"preset", c.datum.preset}, {"scale", c.datum.scale}, {"value", c.datum.value}, {"table", table}}},
      {"ladder", {{"start", c.ladder.start}, {"ratio", c.ladder.ratio}, {"count", c.ladder.count}}},
      {"mesh",
       {{"h_far", c.h_far},
        {"h_neck_fraction", c.h_neck_fraction},
        {"grading", c.mesh.grading},
        {"quality_floor", c.mesh.quality_floor},
        {"boundary_clearance", c.mesh.boundary_clearance}}},
      {"solver",
       {{"epsilon", c.solver.epsilon},
        {"tol", c.solver.tol},
        {"stage_tol", c.solver.stage_tol},
        {"max_iter", c.solver.max_iter},
        {"armijo", c.solver.armijo},
        {"backtrack", c.solver.backtrack},
        {"max_backtracks", c.solver.max_backtracks},
        {"p_step", c.solver.p_step},
        {"hessian_floor", c.solver.hessian_floor}}},
      {"neck_width", c.neck_width},
      {"output_dir", c.output_dir},
      {"r0", {{"ladder", c.r0_ladder}, {"exponent", c.r0.exponent}, {"noise_tol", c.r0.noise_tol}}},
      {"verdict",
       {{"band", {c.verdict.band_lo, c.verdict.band_hi}},
        {"slope_tol", c.verdict.slope_tol},
        {"barrier_fraction", c.verdict.barrier_fraction},
        {"barrier_delta", c.verdict.barrier_delta},
        {"first_order", c.verdict.first_order},
        {"flux_balance_tol", c.verdict.flux_balance_tol},
        {"flux_constraint_tol", c.verdict.flux_constraint_tol},
        {"away_factor", c.verdict.away_factor},
        {"identity_tol", c.verdict.identity_tol}}},
      {"solve", {{"delta", c.solve.delta}, {"kind", c.solve.kind}, {"T1", c.solve.T1}, {"T2", c.solve.T2}}},
      {"threads", c.threads},
      {"record_timing", c.record_timing},
  };
}

/// Missing keys keep their defaults; unknown keys are rejected.
inline SweepConfig config_from_json(const json& j) {
  using detail::check_keys;
  using detail::get_if;
  SweepConfig c;
  try {
    check_keys(j,
               {"R", "R_out", "clearance", "p", "datum", "ladder", "mesh", "solver", "neck_width", "output_dir", "r0",
                "verdict", "solve", "threads", "record_timing"},
               "config");
    get_if(j, "R", c.R);
    get_if(j, "R_out", c.R_out);
    get_if(j, "clearance", c.clearance);
    get_if(j, "p", c.p);
    get_if(j, "neck_width", c.neck_width);
    get_if(j, "output_dir", c.output_dir);
    get_if(j, "threads", c.threads);
    get_if(j, "record_timing", c.record_timing);
    if (j.contains("datum")) {
      const auto& d = j.at("datum");
      check_keys(d, {"preset", "scale", "value", "table"}, "datum");
      get_if(d, "preset", c.datum.preset);
      get_if(d, "scale", c.datum.scale);
      get_if(d, "value", c.datum.value);
      if (d.contains("table"))
        for (const auto& e : d.at("table")) c.datum.table.push_back({e.at(0).get<double>(), e.at(1).get<double>()});
    }
    if (j.contains("ladder")) {
      const auto& l = j.at("ladder");
      check_keys(l, {"start", "ratio", "count"}, "ladder");
      get_if(l, "start", c.ladder.start);
      get_if(l, "ratio", c.ladder.ratio);
      get_if(l, "count", c.ladder.count);
    }
    if (j.contains("mesh")) {
      const auto& m = j.at("mesh");
      check_keys(m, {"h_far", "h_neck_fraction", "grading", "quality_floor", "boundary_clearance"}, "mesh");
      get_if(m, "h_far", c.h_far);
      get_if(m, "h_neck_fraction", c.h_neck_fraction);
      get_if(m, "grading", c.mesh.grading);
      get_if(m, "quality_floor", c.mesh.quality_floor);
      get_if(m, "boundary_clearance", c.mesh.boundary_clearance);
    }
    if (j.contains("solver")) {
      const auto& s = j.at("solver");
      check_keys(s,
                 {"epsilon", "tol", "stage_tol", "max_iter", "armijo", "backtrack", "max_backtracks", "p_step",
                  "hessian_floor"},
                 "solver");
      get_if(s, "epsilon", c.solver.epsilon);
      get_if(s, "tol", c.solver.tol);
      get_if(s, "stage_tol", c.solver.stage_tol);
      get_if(s, "max_iter", c.solver.max_iter);
      get_if(s, "armijo", c.solver.armijo);
      get_if(s, "backtrack", c.solver.backtrack);
      get_if(s, "max_backtracks", c.solver.max_backtracks);
      get_if(s, "p_step", c.solver.p_step);
      get_if(s, "hessian_floor", c.solver.hessian_floor);
    }
    if (j.contains("r0")) {
      const auto& r = j.at("r0");
      check_keys(r, {"ladder", "exponent", "noise_tol"}, "r0");
      get_if(r, "ladder", c.r0_ladder);
      get_if(r, "exponent", c.r0.exponent);
      get_if(r, "noise_tol", c.r0.noise_tol);
    }
    if (j.contains("verdict")) {
      const auto& v = j.at("verdict");
      check_keys(v,
                 {"band", "slope_tol", "barrier_fraction", "barrier_delta", "first_order", "flux_balance_tol",
                  "flux_constraint_tol", "away_factor", "identity_tol"},
                 "verdict");
      if (v.contains("band")) {
        c.verdict.band_lo = v.at("band").at(0).get<double>();
        c.verdict.band_hi = v.at("band").at(1).get<double>();
      }
      get_if(v, "slope_tol", c.verdict.slope_tol);
      get_if(v, "barrier_fraction", c.verdict.barrier_fraction);
      get_if(v, "barrier_delta", c.verdict.barrier_delta);
      get_if(v, "first_order", c.verdict.first_order);
      get_if(v, "flux_balance_tol", c.verdict.flux_balance_tol);
      get_if(v, "flux_constraint_tol", c.verdict.flux_constraint_tol);
      get_if(v, "away_factor", c.verdict.away_factor);
      get_if(v, "identity_tol", c.verdict.identity_tol);
    }
    if (j.contains("solve")) {
      const auto& s = j.at("solve");
      check_keys(s, {"delta", "kind", "T1", "T2"}, "solve");
      get_if(s, "delta", c.solve.delta);
      get_if(s, "kind", c.solve.kind);
      get_if(s, "T1", c.solve.T1);
      get_if(s, "T2", c.solve.T2);
    }
  } catch (const json::exception& e) {
    throw IoError(std::string("config: ") + e.what());
  }
  validate(c);
  return c;
}

inline SweepConfig load_config(const std::filesystem::path& path) {
  json j;
  try {
    j = json::parse(load_text(path));
  } catch (const json::exception& e) {
    throw IoError("config " + path.string() + ": " + e.what());
  }
  return config_from_json(j);
}

// ---------------------------------------------------------------- barrier check

struct BarrierCheck {
  double delta = 0.0;
  int samples = 0;
  int within = 0;
  double fraction = 0.0;
  double slack_C = 0.0;  // additive constant, from the far-field gradient bound
  double max_disc_slack = 0.0;
};

/// Compares n . grad u on the neck arc of particle 2 with the barrier sandwich,
/// each bound widened by the local discretization slack (gradient jump to the
/// neighbouring elements).
inline BarrierCheck barrier_check(const DiscreteSolution& floating, double w, double first_order, double slack_C = -1.0) {
  if (floating.kind != ProblemKind::floating || !floating.pair || !floating.T1 || !floating.T2)
    throw DomainError("barrier_check: needs a floating two-particle solution");
  BarrierCheck bc;
  bc.delta = floating.pair->delta();
  if (*floating.T2 < *floating.T1) throw SignError("barrier_check: T2 < T1, swap the particle labels");
  bc.slack_C = slack_C >= 0.0 ? slack_C : grad_max(floating, GradRegion::away, w).value;
  BarrierOptions opt;
  opt.first_order = first_order;
  opt.slack = bc.slack_C;
  for (const auto& s : s2_normal_derivatives(floating, w)) {
    const FluxBound fb = barrier_flux_bound(s.at.x, *floating.T1, *floating.T2, *floating.pair, opt);
    ++bc.samples;
    bc.max_disc_slack = std::max(bc.max_disc_slack, s.slack);
    if (fb.lower - s.slack <= s.dn && s.dn <= fb.upper + s.slack) ++bc.within;
  }
  bc.fraction = bc.samples ? static_cast<double>(bc.within) / bc.samples : 0.0;
  return bc;
}

// ---------------------------------------------------------------- sweep

struct SweepRecord {
  double delta = 0.0;
  double T1 = 0.0;
  double T2 = 0.0;
  double gap = 0.0;
  double gradmax_all = 0.0;
  double gradmax_neck = 0.0;
  double gradmax_away = 0.0;
  double r_delta = 0.0;
  double flux_defect = 0.0;  // largest of the balance and constraint defects below
  double energy = 0.0;
  int newton_iters = 0;
  double wall_ms = 0.0;

  double r_delta_away = 0.0;
  double floating_balance = 0.0;
  double floating_particle = 0.0;
  double tied_balance = 0.0;
  double tied_combined = 0.0;
  double one_sided_balance = 0.0;
  double energy_tied = 0.0;
  int nodes = 0;
  bool labels_swapped = false;
  double barrier_fraction = std::numeric_limits<double>::quiet_NaN();
  int barrier_samples = 0;
  double q = std::numeric_limits<double>::quiet_NaN();  // linear functional (p = 2 only)
  double q_identity = std::numeric_limits<double>::quiet_NaN();
  double q_reciprocity = std::numeric_limits<double>::quiet_NaN();
  bool ok = true;
  std::string error;
};

/// Floating and tied solves at one delta, on one mesh.
inline SweepRecord run_point(const SweepConfig& c, double delta) {
  const auto t0 = std::chrono::steady_clock::now();
  SweepRecord r;
  r.delta = delta;
  const DomainFamily fam = make_family(c);
  const SolverConfig cfg = solver_config(c);
  const double w = c.w();
  const auto dom = fam.domain(delta);
  const auto mesh = fam.mesh(dom);
  r.nodes = static_cast<int>(mesh->num_nodes());

  const auto fl = solve_floating(mesh, dom, cfg);
  const auto ti = solve_tied(mesh, dom, cfg);
  const auto ff = flux_report(fl, w);
  const auto tf = flux_report(ti, w);

  r.T1 = *fl.T1;
  r.T2 = *fl.T2;
  r.r_delta = tf.R_delta;
  r.r_delta_away = -tf.particle2_away.flux;
  if (r.T2 < r.T1) {
    std::swap(r.T1, r.T2);
    r.r_delta = -tf.particle1.flux;
    r.r_delta_away = std::numeric_limits<double>::quiet_NaN();
    r.labels_swapped = true;
  }
  r.gap = r.T2 - r.T1;
  r.gradmax_all = grad_max(fl, GradRegion::all).value;
  r.gradmax_neck = grad_max(fl, GradRegion::neck, w).value;
  r.gradmax_away = grad_max(fl, GradRegion::away, w).value;
  r.floating_balance = ff.balance_defect;
  r.floating_particle = ff.particle_defect;
  r.tied_balance = tf.balance_defect;
  r.tied_combined = tf.combined_defect;
  r.one_sided_balance = ff.balance_defect_one_sided;
  r.flux_defect = std::max({r.floating_balance, r.floating_particle, r.tied_balance, r.tied_combined});
  r.energy = fl.energy;
  r.energy_tied = ti.energy;
  r.newton_iters = fl.trace.iterations + ti.trace.iterations;

  if (!r.labels_swapped) {
    const auto bc = barrier_check(fl, w, c.verdict.first_order);
    r.barrier_fraction = bc.fraction;
    r.barrier_samples = bc.samples;
  }
  if (c.p == 2.0) {
    const auto v1 = solve_linear_aux(mesh, dom, LinearAux::v1, cfg);
    const auto v2 = solve_linear_aux(mesh, dom, LinearAux::v2, cfg);
    const auto v3 = solve_linear_aux(mesh, dom, LinearAux::v3, cfg);
    const auto q = q_functional(v1, v2, v3, ti);
    r.q = q.Q;
    r.q_identity = q.relative_identity_defect;
    r.q_reciprocity = q.reciprocity_defect;
  }
  if (c.record_timing)
    r.wall_ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
  return r;
}

/// One record per ladder delta, in ladder order (decreasing delta) whatever the
/// completion order. Failed points are kept with ok = false.
inline std::vector<SweepRecord> run_sweep(const SweepConfig& c) {
  validate(c);
  const auto ladder = c.ladder.values();
  std::vector<SweepRecord> out(ladder.size());
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < ladder.size(); i = next++) {
      try {
        out[i] = run_point(c, ladder[i]);
      } catch (const std::exception& e) {
        out[i] = SweepRecord{};
        out[i].delta = ladder[i];
        out[i].ok = false;
        out[i].error = e.what();
      }
    }
  };
  const int n = std::min<int>(c.threads, static_cast<int>(ladder.size()));
  if (n <= 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    for (int k = 0; k < n; ++k) pool.emplace_back(worker);
  }
  if (!out.empty() && std::none_of(out.begin(), out.end(), [](const SweepRecord& r) { return r.ok; })) {
    std::ostringstream msg;
    msg << "sweep: every point failed";
    for (const auto& r : out) msg << "\n  delta = " << r.delta << ": " << r.error;
    throw SweepError(msg.str());
  }
  return out;
}

// ---------------------------------------------------------------- fits

enum class Quantity { gap, gradmax };

inline const char* to_string(Quantity q) { return q == Quantity::gap ? "gap" : "gradmax"; }

struct FitResult {
  std::string quantity;
  int points = 0;
  double slope = 0.0;
  double prefactor = 0.0;
  double residual = 0.0;  // RMS of the log residuals
  double predicted_slope = std::numeric_limits<double>::quiet_NaN();
  double predicted_prefactor = std::numeric_limits<double>::quiet_NaN();
  double slope_deviation = std::numeric_limits<double>::quiet_NaN();
  double prefactor_deviation = std::numeric_limits<double>::quiet_NaN();  // relative
};

/// Least squares for y = A x^s on (log x, log y).
inline FitResult fit_power_law(const std::vector<double>& x, const std::vector<double>& y) {
  if (x.size() != y.size()) throw DomainError("fit_power_law: size mismatch");
  if (x.size() < 3) throw DomainError("fit_power_law: needs at least 3 points");
  std::ostringstream bad;
  for (std::size_t i = 0; i < x.size(); ++i)
    if (!(x[i] > 0.0 && y[i] > 0.0)) bad << ' ' << x[i];
  if (!bad.str().empty()) throw DomainError("fit_power_law: non-positive values at delta =" + bad.str());
  const double n = static_cast<double>(x.size());
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double lx = std::log(x[i]), ly = std::log(y[i]);
    sx += lx;
    sy += ly;
    sxx += lx * lx;
    sxy += lx * ly;
  }
  FitResult f;
  f.points = static_cast<int>(x.size());
  f.slope = (n * sxy - sx * sy) / (n * sxx - sx * sx);
  const double b = (sy - f.slope * sx) / n;
  f.prefactor = std::exp(b);
  double ss = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double e = std::log(y[i]) - (b + f.slope * std::log(x[i]));
    ss += e * e;
  }
  f.residual = std::sqrt(ss / n);
  return f;
}

/// Fit over the successful records, with predictions for 2-D solves when R0 is given.
inline FitResult fit_power_law(const std::vector<SweepRecord>& records, Quantity q, double p, double R,
                               std::optional<double> R0 = std::nullopt) {
  std::vector<double> x, y;
  for (const auto& r : records) {
    if (!r.ok) continue;
    x.push_back(r.delta);
    y.push_back(q == Quantity::gap ? r.gap : r.gradmax_all);
  }
  FitResult f = fit_power_law(x, y);
  f.quantity = to_string(q);
  const GammaExponent ge = gamma_exponent(p, 2);
  f.predicted_slope = ge.gamma / (p - 1.0) - (q == Quantity::gradmax ? 1.0 : 0.0);
  f.slope_deviation = f.slope - f.predicted_slope;
  if (R0 && *R0 > 0.0) {
    f.predicted_prefactor = std::pow(*R0 / asymptotic_constant(p, 2, R), 1.0 / (p - 1.0));
    f.prefactor_deviation = f.prefactor / f.predicted_prefactor - 1.0;
  }
  return f;
}

// ---------------------------------------------------------------- verdicts

struct TheoremVerdict {
  double R0 = 0.0;
  double C_o = 0.0;
  double gamma = 0.0;
  double band_lo = 0.85;
  double band_hi = 1.15;
  std::vector<double> deltas;
  std::vector<double> ratios;  // gap^{p-1} delta^{-gamma} C_o / R0
  bool band_ok = false;        // last two ratios inside the band
  bool monotone_ok = false;    // |ratio - 1| non-increasing along the ladder
  bool pass = false;
};

inline TheoremVerdict verify_theorem(const std::vector<SweepRecord>& records, double R0, double p, double R,
                                     double band_lo = 0.85, double band_hi = 1.15) {
  if (!(R0 > 0.0)) throw SignError("verify_theorem: R0 <= 0, swap the particle labels");
  TheoremVerdict v;
  v.R0 = R0;
  v.C_o = asymptotic_constant(p, 2, R);
  v.gamma = gamma_exponent(p, 2).gamma;
  v.band_lo = band_lo;
  v.band_hi = band_hi;
  for (const auto& r : records) {
    if (!r.ok) continue;
    v.deltas.push_back(r.delta);
    v.ratios.push_back(std::pow(r.gap, p - 1.0) * std::pow(r.delta, -v.gamma) * v.C_o / R0);
  }
  const std::size_t n = v.ratios.size();
  if (n >= 2) {
    auto in = [&](double x) { return x >= band_lo && x <= band_hi; };
    v.band_ok = in(v.ratios[n - 1]) && in(v.ratios[n - 2]);
    v.monotone_ok = true;
    for (std::size_t i = 1; i < n; ++i)
      if (std::abs(v.ratios[i] - 1.0) > std::abs(v.ratios[i - 1] - 1.0) + 1e-12) v.monotone_ok = false;
  }
  v.pass = v.band_ok && v.monotone_ok;
  return v;
}

struct Verdict {
  std::string name;
  bool pass = false;
  double value = 0.0;
  std::string detail;
};

struct SweepReport {
  double p = 2.0;
  double R = 1.0;
  std::vector<SweepRecord> records;
  std::optional<R0Estimate> r0;
  std::string r0_error;
  std::optional<FitResult> gap_fit;
  std::optional<FitResult> grad_fit;
  std::optional<TheoremVerdict> theorem;
  std::vector<Verdict> verdicts;

  bool pass() const {
    return !verdicts.empty() && std::all_of(verdicts.begin(), verdicts.end(), [](const Verdict& v) { return v.pass; });
  }
};

/// Fits and verdicts from sweep records. R0 comes from the tied R_delta of the
/// records unless an estimate is supplied.
inline SweepReport analyze(const SweepConfig& c, std::vector<SweepRecord> records,
                           std::optional<R0Estimate> r0 = std::nullopt) {
  SweepReport rep;
  rep.p = c.p;
  rep.R = c.R;
  rep.records = std::move(records);
  const auto& recs = rep.records;
  const auto& vc = c.verdict;
  auto add = [&](std::string name, bool pass, double value, std::string detail) {
    rep.verdicts.push_back({std::move(name), pass, value, std::move(detail)});
  };
  std::vector<const SweepRecord*> good;
  for (const auto& r : recs)
    if (r.ok) good.push_back(&r);
  add("all_points_solved", good.size() == recs.size(), static_cast<double>(good.size()),
      std::to_string(good.size()) + " of " + std::to_string(recs.size()) + " points solved");

  if (r0) {
    rep.r0 = std::move(r0);
  } else {
    std::vector<double> d, rd;
    for (const auto* r : good) {
      d.push_back(r->delta);
      rd.push_back(r->r_delta);
    }
    try {
      rep.r0 = extrapolate_r0(d, rd, c.r0);
    } catch (const std::exception& e) {
      rep.r0_error = e.what();
    }
  }
  const std::optional<double> R0 = rep.r0 ? std::optional<double>(rep.r0->R0) : std::nullopt;

  auto fit = [&](Quantity q, std::optional<FitResult>& slot) {
    const char* name = q == Quantity::gap ? "gap_slope" : "gradmax_slope";
    try {
      slot = fit_power_law(recs, q, c.p, c.R, R0);
      std::ostringstream d;
      d << "fitted " << slot->slope << ", predicted " << slot->predicted_slope << " +/- " << vc.slope_tol;
      add(name, std::abs(slot->slope_deviation) <= vc.slope_tol, slot->slope, d.str());
    } catch (const std::exception& e) {
      add(name, false, std::numeric_limits<double>::quiet_NaN(), e.what());
    }
  };
  fit(Quantity::gap, rep.gap_fit);
  fit(Quantity::gradmax, rep.grad_fit);

  if (R0 && *R0 > 0.0) {
    rep.theorem = verify_theorem(recs, *R0, c.p, c.R, vc.band_lo, vc.band_hi);
    std::ostringstream d;
    d << "ratios";
    for (double x : rep.theorem->ratios) d << ' ' << x;
    d << (rep.theorem->band_ok ? "; last two in band" : "; last two NOT in band")
      << (rep.theorem->monotone_ok ? ", deviation decreasing" : ", deviation NOT decreasing");
    add("theorem_ratio", rep.theorem->pass, rep.theorem->ratios.empty() ? 0.0 : rep.theorem->ratios.back(), d.str());
  } else {
    add("theorem_ratio", false, std::numeric_limits<double>::quiet_NaN(),
        rep.r0_error.empty() ? "R0 <= 0: swap the particle labels or change the datum" : rep.r0_error);
  }

  double worst_balance = 0.0, worst_constraint = 0.0;
  for (const auto* r : good) {
    worst_balance = std::max({worst_balance, r->floating_balance, r->tied_balance});
    worst_constraint = std::max({worst_constraint, r->floating_particle, r->tied_combined});
  }
  {
    std::ostringstream d;
    d << "balance " << worst_balance << " (tol " << vc.flux_balance_tol << "), constraint " << worst_constraint
      << " (tol " << vc.flux_constraint_tol << ")";
    add("flux_invariants", worst_balance <= vc.flux_balance_tol && worst_constraint <= vc.flux_constraint_tol,
        std::max(worst_balance, worst_constraint), d.str());
  }

  if (good.size() >= 2) {
    double lo = std::numeric_limits<double>::infinity(), hi = 0.0;
    for (const auto* r : good) {
      lo = std::min(lo, r->gradmax_away);
      hi = std::max(hi, r->gradmax_away);
    }
    const double factor = lo > 0.0 ? hi / lo : (hi > 0.0 ? std::numeric_limits<double>::infinity() : 1.0);
    std::ostringstream d;
    d << "gradmax_away varies by " << factor << " (limit " << vc.away_factor << ")";
    add("away_bounded", factor <= vc.away_factor, factor, d.str());
  }

  const SweepRecord* bp = nullptr;
  for (const auto* r : good)
    if (!bp || std::abs(std::log(r->delta / vc.barrier_delta)) < std::abs(std::log(bp->delta / vc.barrier_delta)))
      bp = r;
  if (bp && !std::isnan(bp->barrier_fraction)) {
    std::ostringstream d;
    d << "delta " << bp->delta << ": " << bp->barrier_fraction * 100.0 << "% of " << bp->barrier_samples
      << " samples inside (need " << vc.barrier_fraction * 100.0 << "%)";
    add("barrier_sandwich", bp->barrier_fraction >= vc.barrier_fraction, bp->barrier_fraction, d.str());
  }

  if (c.p == 2.0) {
    bool ok = !good.empty();
    double worst = 0.0;
    for (const auto* r : good) {
      if (std::isnan(r->q)) continue;
      worst = std::max(worst, r->q_identity);
      if ((r->q > 0.0) != (r->r_delta > 0.0) || !(r->q_identity <= vc.identity_tol)) ok = false;
    }
    std::ostringstream d;
    d << "sign(Q) = sign(R_delta) at every point; worst relative identity defect " << worst;
    add("linear_identity", ok, worst, d.str());
  }
  return rep;
}

// ---------------------------------------------------------------- files

inline const char* sweep_csv_header() {
  return "delta,T1,T2,gap,gradmax_all,gradmax_neck,gradmax_away,r_delta,flux_defect,energy,newton_iters,wall_ms";
}

namespace detail {
inline std::string fmt(double v) {
  if (std::isnan(v)) return "nan";
  std::ostringstream os;
  os.precision(17);
  os << v;
  return os.str();
}

inline json num(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

inline double from_json_num(const json& j) { return j.is_null() ? std::numeric_limits<double>::quiet_NaN() : j.get<double>(); }
}  // namespace detail

inline void write_sweep_csv(std::ostream& os, const std::vector<SweepRecord>& records) {
  using detail::fmt;
  os << sweep_csv_header() << '\n';
  const double nan = std::numeric_limits<double>::quiet_NaN();
  for (const auto& r : records) {
    const bool ok = r.ok;
    os << fmt(r.delta) << ',' << fmt(ok ? r.T1 : nan) << ',' << fmt(ok ? r.T2 : nan) << ',' << fmt(ok ? r.gap : nan)
       << ',' << fmt(ok ? r.gradmax_all : nan) << ',' << fmt(ok ? r.gradmax_neck : nan) << ','
       << fmt(ok ? r.gradmax_away : nan) << ',' << fmt(ok ? r.r_delta : nan) << ',' << fmt(ok ? r.flux_defect : nan)
       << ',' << fmt(ok ? r.energy : nan) << ',' << r.newton_iters << ',' << fmt(r.wall_ms) << '\n';
  }
}

/// Reads the documented columns; rows with a non-finite gap are marked failed.
inline std::vector<SweepRecord> read_sweep_csv(std::istream& is) {
  std::string line;
  if (!std::getline(is, line)) throw IoError("sweep csv: empty input");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (line != sweep_csv_header()) throw IoError("sweep csv: unexpected header '" + line + "'");
  std::vector<SweepRecord> out;
  int lineno = 1;
  while (std::getline(is, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::vector<std::string> cells;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) cells.push_back(cell);
    if (cells.size() != 12) throw IoError("sweep csv: line " + std::to_string(lineno) + " has " + std::to_string(cells.size()) + " columns");
    auto d = [&](int i) {
      try {
        return cells[i] == "nan" ? std::numeric_limits<double>::quiet_NaN() : std::stod(cells[i]);
      } catch (const std::exception&) {
        throw IoError("sweep csv: bad number '" + cells[i] + "' on line " + std::to_string(lineno));
      }
    };
    SweepRecord r;
    r.delta = d(0);
    r.T1 = d(1);
    r.T2 = d(2);
    r.gap = d(3);
    r.gradmax_all = d(4);
    r.gradmax_neck = d(5);
    r.gradmax_away = d(6);
    r.r_delta = d(7);
    r.flux_defect = d(8);
    r.energy = d(9);
    r.newton_iters = static_cast<int>(d(10));
    r.wall_ms = d(11);
    r.floating_balance = r.tied_balance = r.floating_particle = r.tied_combined = std::isnan(r.flux_defect) ? 0.0 : r.flux_defect;
    r.ok = std::isfinite(r.gap);
    if (!r.ok) r.error = "failed in the original sweep";
    out.push_back(r);
  }
  return out;
}

inline json to_json(const FitResult& f) {
  using detail::num;
  return {{"quantity", f.quantity},
          {"points", f.points},
          {"slope", num(f.slope)},
          {"prefactor", num(f.prefactor)},
          {"residual", num(f.residual)},
          {"predicted_slope", num(f.predicted_slope)},
          {"predicted_prefactor", num(f.predicted_prefactor)},
          {"slope_deviation", num(f.slope_deviation)},
          {"prefactor_deviation", num(f.prefactor_deviation)}};
}

inline FitResult fit_from_json(const json& j) {
  using detail::from_json_num;
  FitResult f;
  f.quantity = j.at("quantity").get<std::string>();
  f.points = j.at("points").get<int>();
  f.slope = from_json_num(j.at("slope"));
  f.prefactor = from_json_num(j.at("prefactor"));
  f.residual = from_json_num(j.at("residual"));
  f.predicted_slope = from_json_num(j.at("predicted_slope"));
  f.predicted_prefactor = from_json_num(j.at("predicted_prefactor"));
  f.slope_deviation = from_json_num(j.at("slope_deviation"));
  f.prefactor_deviation = from_json_num(j.at("prefactor_deviation"));
  return f;
}

inline json to_json(const SweepRecord& r) {
  using detail::num;
  return {{"delta", num(r.delta)},
          {"ok", r.ok},
          {"error", r.error},
          {"T1", num(r.T1)},
          {"T2", num(r.T2)},
          {"gap", num(r.gap)},
          {"gradmax_all", num(r.gradmax_all)},
          {"gradmax_neck", num(r.gradmax_neck)},
          {"gradmax_away", num(r.gradmax_away)},
          {"r_delta", num(r.r_delta)},
          {"r_delta_away", num(r.r_delta_away)},
          {"flux_defect", num(r.flux_defect)},
          {"floating_balance", num(r.floating_balance)},
          {"floating_particle", num(r.floating_particle)},
          {"tied_balance", num(r.tied_balance)},
          {"tied_combined", num(r.tied_combined)},
          {"one_sided_balance", num(r.one_sided_balance)},
          {"energy", num(r.energy)},
          {"energy_tied", num(r.energy_tied)},
          {"newton_iters", r.newton_iters},
          {"nodes", r.nodes},
          {"labels_swapped", r.labels_swapped},
          {"barrier_fraction", num(r.barrier_fraction)},
          {"barrier_samples", r.barrier_samples},
          {"q", num(r.q)},
          {"q_identity_defect", num(r.q_identity)},
          {"q_reciprocity_defect", num(r.q_reciprocity)},
          {"wall_ms", num(r.wall_ms)}};
}

inline json to_json(const SweepReport& rep) {
  using detail::num;
  json j;
  j["p"] = rep.p;
  j["R"] = rep.R;
  j["verdict"] = rep.pass() ? "PASS" : "FAIL";
  json recs = json::array();
  for (const auto& r : rep.records) recs.push_back(to_json(r));
  j["records"] = recs;
  if (rep.r0) {
    j["r0"] = {{"R0", num(rep.r0->R0)},
               {"slope", num(rep.r0->slope)},
               {"exponent", num(rep.r0->exponent)},
               {"residual", num(rep.r0->residual)},
               {"max_residual", num(rep.r0->max_residual)},
               {"deltas", rep.r0->deltas},
               {"r_deltas", rep.r0->r_deltas}};
  } else {
    j["r0"] = {{"error", rep.r0_error}};
  }
  json fits = json::object();
  if (rep.gap_fit) fits["gap"] = to_json(*rep.gap_fit);
  if (rep.grad_fit) fits["gradmax"] = to_json(*rep.grad_fit);
  j["fits"] = fits;
  if (rep.theorem) {
    const auto& t = *rep.theorem;
    json ratios = json::array();
    for (double x : t.ratios) ratios.push_back(num(x));
    j["theorem"] = {{"R0", num(t.R0)},   {"C_o", num(t.C_o)},       {"gamma", num(t.gamma)},
                    {"band", {t.band_lo, t.band_hi}}, {"deltas", t.deltas}, {"ratios", ratios},
                    {"band_ok", t.band_ok}, {"monotone_ok", t.monotone_ok}, {"pass", t.pass}};
  }
  json verdicts = json::array();
  for (const auto& v : rep.verdicts)
    verdicts.push_back({{"name", v.name}, {"pass", v.pass}, {"value", num(v.value)}, {"detail", v.detail}});
  j["verdicts"] = verdicts;
  return j;
}

namespace detail {
inline std::string gnuplot_script(const char* column, const char* ylabel, const std::optional<FitResult>& fit,
                                  const char* image) {
  std::ostringstream s;
  s.precision(17);
  s << "# log-log plot of " << ylabel << " against delta from sweep.csv\n"
    << "set datafile separator ','\n"
    << "set logscale xy\n"
    << "set xlabel 'delta'\n"
    << "set ylabel '" << ylabel << "'\n"
    << "set key top left\n"
    << "set terminal pngcairo size 800,600\n"
    << "set output '" << image << "'\n";
  if (fit && std::isfinite(fit->predicted_slope)) {
    s << "fit_A = " << fit->prefactor << "\n"
      << "fit_s = " << fit->slope << "\n"
      << "pred_s = " << fit->predicted_slope << "\n";
    const double A = std::isfinite(fit->predicted_prefactor) ? fit->predicted_prefactor : fit->prefactor;
    s << "pred_A = " << A << "\n"
      << "plot 'sweep.csv' using 1:" << column << " every ::1 with linespoints title 'measured', \\\n"
      << "     fit_A * x**fit_s title sprintf('fit, slope %.3f', fit_s), \\\n"
      << "     pred_A * x**pred_s dashtype 2 title sprintf('predicted slope %.3f', pred_s)\n";
  } else {
    s << "plot 'sweep.csv' using 1:" << column << " every ::1 with linespoints title 'measured'\n";
  }
  return s.str();
}
}  // namespace detail

/// sweep.csv, report.json, gap.gp and gradmax.gp in outdir.
inline void emit_report(const SweepReport& rep, const std::filesystem::path& outdir) {
  std::error_code ec;
  std::filesystem::create_directories(outdir, ec);
  if (ec) throw IoError("cannot create " + outdir.string() + ": " + ec.message());
  std::ostringstream csv;
  write_sweep_csv(csv, rep.records);
  save_text(outdir / "sweep.csv", csv.str());
  save_text(outdir / "report.json", to_json(rep).dump(2) + "\n");
  save_text(outdir / "gap.gp", detail::gnuplot_script("4", "T2 - T1", rep.gap_fit, "gap.png"));
  save_text(outdir / "gradmax.gp", detail::gnuplot_script("5", "max |grad u|", rep.grad_fit, "gradmax.png"));
}

}  // namespace plap
