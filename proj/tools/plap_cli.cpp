// Command-line front end: constants, solve, sweep, fit, report.
// Exit status: 0 when every verdict passes, 2 when one fails, 1 on errors.

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>

#include "CLI11.hpp"
#include "json.hpp"

#include "plap/plap.hpp"

namespace fs = std::filesystem;
using namespace plap;

namespace {

constexpr int kPass = 0;
constexpr int kError = 1;
constexpr int kFail = 2;

void print_verdicts(const SweepReport& rep) {
  for (const auto& v : rep.verdicts)
    std::printf("%-18s %s  %s\n", v.name.c_str(), v.pass ? "PASS" : "FAIL", v.detail.c_str());
  std::printf("overall            %s\n", rep.pass() ? "PASS" : "FAIL");
}

int cmd_constants(double p, int d, double R) {
  const GammaExponent ge = gamma_exponent(p, d);
  std::printf("p = %g, d = %d, R = %g\n", p, d, R);
  if (ge.log_case) {
    std::printf("log case: gap ~ (R0 / (C ln(1/delta)))^{1/(p-1)}\n");
    std::printf("coefficient of ln(1/delta) (quadrature)  %.15g\n", log_case_coefficient(R));
    std::printf("table entry pi R ln R                     %.15g\n", c_o_table_log_cell(R));
    return kPass;
  }
  const auto est = c_o_quadrature(p, d, R);
  std::printf("gamma                 %.15g\n", ge.gamma);
  std::printf("C_o quadrature        %.15g  (last correction %.3g)\n", est.value, est.last_correction);
  const bool integer_p = std::round(p) == p;
  if (!integer_p) {
    std::printf("C_o table             n/a (non-integer p)\n");
    return kPass;
  }
  const double table = c_o_table(p, d, R);
  std::printf("C_o table             %.15g\n", table);
  std::printf("difference            %.3g  (relative %.3g)\n", est.value - table, (est.value - table) / table);
  if (d == 3) {
    const auto r = d3_table_report(static_cast<int>(p), R);
    std::printf("closed form pi R/(p-2) %.15g\n", r.oracle_closed_form);
    std::printf("general row           %.15g\n", r.table_general_row);
    std::printf("ratio quadrature/table %.15g, quadrature/general row %.15g%s\n", r.ratio, r.ratio_general_row,
                r.mismatch ? "  (MISMATCH)" : "");
  }
  return kPass;
}

int cmd_solve(const std::string& config_path, const fs::path& out) {
  const SweepConfig c = load_config(config_path);
  const DomainFamily fam = make_family(c);
  const SolverConfig cfg = solver_config(c);
  const auto dom = fam.domain(c.solve.delta);
  const auto mesh = fam.mesh(dom);
  DiscreteSolution sol;
  if (c.solve.kind == "floating")
    sol = solve_floating(mesh, dom, cfg);
  else if (c.solve.kind == "tied")
    sol = solve_tied(mesh, dom, cfg);
  else if (c.solve.kind == "prescribed")
    sol = solve_prescribed(mesh, dom, c.solve.T1, c.solve.T2, cfg);
  else
    throw DomainError("solve: unknown kind '" + c.solve.kind + "'");

  fs::create_directories(out);
  std::ostringstream ms, ss, fs_;
  write_mesh(ms, *mesh);
  write_solution(ss, sol);
  const auto fr = flux_report(sol, c.w());
  write_flux_csv(fs_, fr);
  save_text(out / "mesh.txt", ms.str());
  save_text(out / "solution.txt", ss.str());
  save_text(out / "flux.csv", fs_.str());

  nlohmann::json j;
  auto opt = [](const std::optional<double>& v) { return v ? nlohmann::json(*v) : nlohmann::json(nullptr); };
  j["kind"] = to_string(sol.kind);
  j["delta"] = c.solve.delta;
  j["p"] = sol.p;
  j["nodes"] = mesh->num_nodes();
  j["triangles"] = mesh->num_triangles();
  j["min_quality"] = min_quality(*mesh);
  j["T1"] = opt(sol.T1);
  j["T2"] = opt(sol.T2);
  j["energy"] = sol.energy;
  j["newton_iters"] = sol.trace.iterations;
  j["residual"] = sol.residual;
  j["gradmax_all"] = grad_max(sol, GradRegion::all).value;
  j["gradmax_neck"] = grad_max(sol, GradRegion::neck, c.w()).value;
  j["gradmax_away"] = grad_max(sol, GradRegion::away, c.w()).value;
  j["flux_balance_defect"] = fr.balance_defect;
  j["flux_constraint_defect"] = fr.constraint_defect(sol.kind);
  save_text(out / "summary.json", j.dump(2) + "\n");
  std::cout << j.dump(2) << "\n";
  return kPass;
}

int cmd_sweep(const std::string& config_path, const std::optional<std::string>& out_opt) {
  const SweepConfig c = load_config(config_path);
  const fs::path out = out_opt ? fs::path(*out_opt) : fs::path(c.output_dir);
  auto records = run_sweep(c);
  for (const auto& r : records) {
    if (r.ok)
      std::printf("delta %-8g gap %-12.6g gradmax %-10.5g R_delta %-10.6g iters %d\n", r.delta, r.gap, r.gradmax_all,
                  r.r_delta, r.newton_iters);
    else
      std::printf("delta %-8g FAILED: %s\n", r.delta, r.error.c_str());
  }
  std::optional<R0Estimate> r0;
  if (!c.r0_ladder.empty()) r0 = estimate_r0(make_family(c), solver_config(c), c.r0_ladder, c.r0);
  const auto rep = analyze(c, std::move(records), r0);
  emit_report(rep, out);
  print_verdicts(rep);
  return rep.pass() ? kPass : kFail;
}

SweepConfig config_for_records(const std::optional<std::string>& config_path, std::optional<double> p,
                               std::optional<double> R) {
  SweepConfig c = config_path ? load_config(*config_path) : SweepConfig{};
  if (p) c.p = *p;
  if (R) c.R = *R;
  return c;
}

std::vector<SweepRecord> load_records(const std::string& path) {
  std::istringstream is(load_text(path));
  return read_sweep_csv(is);
}

int cmd_fit(const std::string& records_path, const SweepConfig& c) {
  const auto records = load_records(records_path);
  const auto rep = analyze(c, records);
  for (const auto* f : {&rep.gap_fit, &rep.grad_fit}) {
    if (!*f) continue;
    const FitResult& r = **f;
    std::printf("%-8s slope %.6f (predicted %.6f, deviation %+.4f)  prefactor %.6g (predicted %.6g)  residual %.3g  n=%d\n",
                r.quantity.c_str(), r.slope, r.predicted_slope, r.slope_deviation, r.prefactor, r.predicted_prefactor,
                r.residual, r.points);
  }
  bool ok = rep.gap_fit && rep.grad_fit;
  for (const auto& v : rep.verdicts)
    if (v.name == "gap_slope" || v.name == "gradmax_slope") {
      std::printf("%-18s %s  %s\n", v.name.c_str(), v.pass ? "PASS" : "FAIL", v.detail.c_str());
      ok = ok && v.pass;
    }
  return ok ? kPass : kFail;
}

int cmd_report(const std::string& records_path, const fs::path& out, const SweepConfig& c) {
  const auto rep = analyze(c, load_records(records_path));
  emit_report(rep, out);
  print_verdicts(rep);
  return rep.pass() ? kPass : kFail;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Two-inclusion p-Laplace blow-up laboratory"};
  app.require_subcommand(1);

  double p = 2.0, R = 1.0;
  int d = 2;
  auto* constants = app.add_subcommand("constants", "Blow-up exponent and asymptotic constant");
  constants->add_option("--p", p, "Exponent p >= 2")->required();
  constants->add_option("--d", d, "Dimension (2 or 3)")->required();
  constants->add_option("--R", R, "Particle radius")->required();

  std::string config_path;
  std::string out_dir;
  auto* solve = app.add_subcommand("solve", "Single solve; writes mesh, solution, fluxes and a summary");
  solve->add_option("--config", config_path, "JSON configuration")->required()->check(CLI::ExistingFile);
  solve->add_option("--out", out_dir, "Output directory")->required();

  std::optional<std::string> sweep_out;
  auto* sweep = app.add_subcommand("sweep", "delta sweep with fits and verdicts");
  sweep->add_option("--config", config_path, "JSON configuration")->required()->check(CLI::ExistingFile);
  sweep->add_option("--out", sweep_out, "Output directory (default: output_dir from the config)");

  std::string records_path;
  std::optional<std::string> rec_config;
  std::optional<double> rec_p, rec_R;
  auto add_record_options = [&](CLI::App* sub) {
    sub->add_option("--records", records_path, "sweep.csv from a previous sweep")->required()->check(CLI::ExistingFile);
    sub->add_option("--config", rec_config, "Configuration the records came from")->check(CLI::ExistingFile);
    sub->add_option("--p", rec_p, "Exponent p (overrides the config)");
    sub->add_option("--R", rec_R, "Particle radius (overrides the config)");
  };
  auto* fit = app.add_subcommand("fit", "Power-law fits of a sweep.csv");
  add_record_options(fit);
  auto* report = app.add_subcommand("report", "Fits, verdicts and plot scripts from a sweep.csv");
  add_record_options(report);
  report->add_option("--out", out_dir, "Output directory")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kPass : kError;
  }

  try {
    if (*constants) return cmd_constants(p, d, R);
    if (*solve) return cmd_solve(config_path, out_dir);
    if (*sweep) return cmd_sweep(config_path, sweep_out);
    if (*fit) return cmd_fit(records_path, config_for_records(rec_config, rec_p, rec_R));
    if (*report) return cmd_report(records_path, out_dir, config_for_records(rec_config, rec_p, rec_R));
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kError;
  }
  return kError;
}
