#pragma once

// Blow-up exponent, the asymptotic constant C_o and the predictions
//   (T2 - T1)^{p-1} delta^{-gamma} -> R0 / C_o,
//   max|grad u| = (R0 / C_o)^{1/(p-1)} delta^{gamma/(p-1) - 1} (1 + O(delta)).
// C_o is the delta -> 0 limit of delta^gamma times the neck integral.

#include <cmath>
#include <numbers>
#include <sstream>
#include <string>
#include <vector>

#include <boost/math/quadrature/gauss_kronrod.hpp>

#include "plap/error.hpp"

namespace plap {

struct GammaExponent {
  double gamma = 0.0;
  bool log_case = false;  // p = 2, d = 3: delta^gamma is replaced by 1 / ln(1/delta)
};

inline void check_dimension(int d) {
  if (d != 2 && d != 3) throw DomainError("dimension must be 2 or 3");
}

inline GammaExponent gamma_exponent(double p, int d) {
  check_dimension(d);
  if (!(p >= 2.0)) throw DomainError("gamma_exponent: p must be >= 2");
  if (d == 3 && p == 2.0) return {0.0, true};
  if (static_cast<double>(d) > p) throw DomainError("gamma_exponent: d > p is outside the supported regime");
  return {d == 2 ? p - 1.5 : p - 2.0, false};
}

/// prod_{k=1}^{p-2} (k - 1/2) / k; equals pi^{-1} times the integral of (1+t^2)^{1-p} over R.
inline double wallis_product(int p) {
  if (p < 2) throw DomainError("wallis_product: p must be >= 2");
  double prod = 1.0;
  for (int k = 1; k <= p - 2; ++k) prod *= (k - 0.5) / k;
  return prod;
}

namespace detail {
inline int require_integer_p(double p) {
  const double r = std::round(p);
  if (std::abs(p - r) > 0.0 || r < 2.0) throw DomainError("c_o_table: p must be an integer >= 2");
  return static_cast<int>(r);
}
}  // namespace detail

/// Closed-form constants as printed in the table. The d = 3 column has
/// explicit rows for p = 3, 4 and a general row used for p >= 5; the p = 2, d = 3
/// cell belongs to the log case and is available from c_o_table_log_cell.
inline double c_o_table(double p, int d, double R) {
  check_dimension(d);
  const int ip = detail::require_integer_p(p);
  if (!(R > 0.0)) throw DomainError("c_o_table: R must be positive");
  constexpr double pi = std::numbers::pi;
  if (d == 2) return pi * wallis_product(ip) * std::sqrt(R);
  switch (ip) {
    case 2: throw DomainError("c_o_table: (p, d) = (2, 3) is the log case");
    case 3: return pi * R / 2.0;
    case 4: return pi * R / 8.0;
    default: return pi / (std::ldexp(1.0, ip - 1) * (ip - 2)) * R;
  }
}

/// General d = 3 row pi / (2^{p-1} (p-2)) R, evaluated even where an explicit row exists.
inline double c_o_table_general_row_d3(int p, double R) {
  if (p < 3) throw DomainError("c_o_table_general_row_d3: p must be >= 3");
  return std::numbers::pi / (std::ldexp(1.0, p - 1) * (p - 2)) * R;
}

/// Printed entry for p = 2, d = 3: pi R ln R.
inline double c_o_table_log_cell(double R) { return std::numbers::pi * R * std::log(R); }

struct QuadratureOptions {
  double rel_tol = 1e-10;
  unsigned max_depth = 15;
};

/// d = 2: int_{-w}^{w} (delta + x^2/R)^{1-p} dx.
/// d = 3: 2 pi int_0^w r (delta + r^2/R)^{1-p} dr.
inline double neck_integral(double delta, double w, double R, double p, int d, const QuadratureOptions& opt = {}) {
  check_dimension(d);
  if (!(delta > 0.0)) throw DomainError("neck_integral: delta must be positive");
  if (!(w > 0.0 && w < R)) throw DomainError("neck_integral: w must lie in (0, R)");
  if (!(p >= 2.0)) throw DomainError("neck_integral: p must be >= 2");

  auto f = [&](double x) {
    const double g = std::pow(delta + x * x / R, 1.0 - p);
    return d == 2 ? 2.0 * g : 2.0 * std::numbers::pi * x * g;
  };

  // Break [0, w] at multiples of the neck length scale sqrt(R delta) so every
  // piece sees a smooth integrand.
  std::vector<double> nodes{0.0};
  for (double s = std::sqrt(R * delta); s < w; s *= 4.0) nodes.push_back(s);
  nodes.push_back(w);

  using GK = boost::math::quadrature::gauss_kronrod<double, 61>;
  double total = 0.0;
  double abs_total = 0.0;
  double err_total = 0.0;
  for (std::size_t i = 0; i + 1 < nodes.size(); ++i) {
    double err = 0.0;
    double l1 = 0.0;
    total += GK::integrate(f, nodes[i], nodes[i + 1], opt.max_depth, opt.rel_tol, &err, &l1);
    abs_total += l1;
    err_total += err;
  }
  if (err_total > opt.rel_tol * abs_total) {
    std::ostringstream msg;
    msg << "neck_integral: quadrature reached relative error " << err_total / abs_total << " > " << opt.rel_tol;
    throw NumericalError(msg.str(), err_total / abs_total);
  }
  return total;
}

struct LadderPoint {
  double delta;
  double scaled;  // delta^gamma * neck_integral
};

struct ConstantEstimate {
  double value = 0.0;
  double last_correction = 0.0;  // |change between the two best Richardson estimates|
  std::vector<LadderPoint> ladder;
};

struct ExtrapolationOptions {
  double delta_start = 1e-4;
  double ratio = 0.1;
  int count = 5;
  double w = -1.0;          // neck half-width; negative selects R/4
  double stable_tol = 1e-7; // relative agreement of the two best estimates
};

/// Richardson tableau for a sequence whose error expands in powers
/// delta^{gamma}, delta^{gamma+1}, ... (finite-window tail of the neck integral).
inline std::vector<std::vector<double>> richardson_tableau(const std::vector<LadderPoint>& ladder, double gamma) {
  std::vector<std::vector<double>> t;
  std::vector<double> col;
  for (const auto& pt : ladder) col.push_back(pt.scaled);
  t.push_back(col);
  for (std::size_t j = 1; j < ladder.size(); ++j) {
    const double expo = gamma + static_cast<double>(j - 1);
    std::vector<double> next;
    for (std::size_t i = j; i < ladder.size(); ++i) {
      const double q = std::pow(ladder[i - 1].delta / ladder[i].delta, expo);  // > 1
      const double a = t[j - 1][i - j];      // larger delta
      const double b = t[j - 1][i - j + 1];  // smaller delta
      next.push_back((q * b - a) / (q - 1.0));
    }
    t.push_back(next);
  }
  return t;
}

inline ConstantEstimate c_o_quadrature(double p, int d, double R, const ExtrapolationOptions& opt = {}) {
  const GammaExponent ge = gamma_exponent(p, d);
  if (ge.log_case) throw DomainError("c_o_quadrature: the log case has no power-law constant");
  if (opt.count < 3) throw DomainError("c_o_quadrature: ladder needs at least 3 points");
  const double w = opt.w > 0.0 ? opt.w : 0.25 * R;

  ConstantEstimate est;
  double delta = opt.delta_start;
  for (int k = 0; k < opt.count; ++k, delta *= opt.ratio)
    est.ladder.push_back({delta, std::pow(delta, ge.gamma) * neck_integral(delta, w, R, p, d)});

  const auto t = richardson_tableau(est.ladder, ge.gamma);
  const double best = t.back().front();
  const double prev = t[t.size() - 2].back();
  est.value = best;
  est.last_correction = std::abs(best - prev);
  if (!(est.last_correction <= opt.stable_tol * std::abs(best))) {
    std::ostringstream msg;
    msg << "c_o_quadrature: extrapolation not stabilizing; ladder:";
    for (const auto& pt : est.ladder) msg << " (" << pt.delta << ", " << pt.scaled << ")";
    throw NumericalError(msg.str(), est.last_correction / std::abs(best));
  }
  return est;
}

/// Coefficient of ln(1/delta) in the d = 3, p = 2 neck integral: pi R.
inline double log_case_coefficient(double R) { return std::numbers::pi * R; }

/// Constant used by predictions: the table for integer p in d = 2, the
/// quadrature oracle otherwise (including all of d = 3, see d3_table_report).
inline double asymptotic_constant(double p, int d, double R) {
  const GammaExponent ge = gamma_exponent(p, d);
  if (ge.log_case) return log_case_coefficient(R);
  if (d == 2 && std::round(p) == p) return c_o_table(p, d, R);
  return c_o_quadrature(p, d, R).value;
}

struct D3TableReport {
  int p = 3;
  double R = 1.0;
  double oracle = 0.0;           // quadrature value
  double oracle_closed_form = 0.0;  // pi R / (p - 2)
  double table = 0.0;            // c_o_table(p, 3, R)
  double table_general_row = 0.0;
  double ratio = 0.0;            // oracle / table
  double ratio_general_row = 0.0;
  bool mismatch = false;
};

/// Side-by-side d = 3 constants. The quadrature of the disk neck integral gives
/// pi R / (p - 2); the printed entries differ from it by powers of two.
inline D3TableReport d3_table_report(int p, double R, double rel_tol = 1e-4) {
  D3TableReport r;
  r.p = p;
  r.R = R;
  r.oracle = c_o_quadrature(p, 3, R).value;
  r.oracle_closed_form = std::numbers::pi * R / (p - 2);
  r.table = c_o_table(p, 3, R);
  r.table_general_row = c_o_table_general_row_d3(p, R);
  r.ratio = r.oracle / r.table;
  r.ratio_general_row = r.oracle / r.table_general_row;
  r.mismatch = std::abs(r.ratio - 1.0) > rel_tol;
  return r;
}

struct AsymptoticPrediction {
  double p = 2.0;
  int d = 2;
  double R = 1.0;
  double gamma = 0.0;
  double C_o = 0.0;
  bool log_case = false;
  double R0 = 0.0;
  double delta = 0.0;
  double gap = 0.0;       // predicted T2 - T1
  double grad_max = 0.0;  // predicted max |grad u|
  double gap_slope = 0.0;
  double grad_slope = 0.0;
  double gap_prefactor = 0.0;   // gap = gap_prefactor * delta^gap_slope
  double grad_prefactor = 0.0;
  bool degenerate = false;  // R0 == 0
};

inline AsymptoticPrediction predict_with_constant(double p, int d, double R, double R0, double delta, double C_o) {
  if (R0 < 0.0) throw SignError("predict: R0 < 0, swap the particle labels");
  if (!(delta > 0.0)) throw DomainError("predict: delta must be positive");
  const GammaExponent ge = gamma_exponent(p, d);
  AsymptoticPrediction a;
  a.p = p;
  a.d = d;
  a.R = R;
  a.gamma = ge.gamma;
  a.log_case = ge.log_case;
  a.C_o = C_o;
  a.R0 = R0;
  a.delta = delta;
  a.degenerate = R0 == 0.0;
  const double e = 1.0 / (p - 1.0);
  const double base = std::pow(R0 / C_o, e);
  if (ge.log_case) {
    const double L = std::log(1.0 / delta);
    a.gap = std::pow(R0 / (C_o * L), e);
    a.grad_max = base * std::pow(L, e) / delta;
    a.gap_slope = 0.0;
    a.grad_slope = -1.0;
    a.gap_prefactor = a.gap;
    a.grad_prefactor = base * std::pow(L, e);
    return a;
  }
  a.gap_slope = ge.gamma * e;
  a.grad_slope = a.gap_slope - 1.0;
  a.gap_prefactor = base;
  a.grad_prefactor = base;
  a.gap = base * std::pow(delta, a.gap_slope);
  a.grad_max = base * std::pow(delta, a.grad_slope);
  return a;
}

inline AsymptoticPrediction predict(double p, int d, double R, double R0, double delta) {
  return predict_with_constant(p, d, R, R0, delta, asymptotic_constant(p, d, R));
}

}  // namespace plap
