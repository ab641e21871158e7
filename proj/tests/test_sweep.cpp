#include <algorithm>
#include <cmath>
#include <filesystem>
#include <sstream>

#include <gtest/gtest.h>

#include "plap/sweep.hpp"

using namespace plap;

namespace {

SweepConfig coarse_config() {
  SweepConfig c;
  c.h_far = 0.3;
  c.ladder = {0.04, 0.5, 3};
  c.verdict.barrier_delta = 0.01;
  return c;
}

std::vector<SweepRecord> synthetic_records(double p, double R, double R0) {
  // exact asymptotics: gap^{p-1} = (R0 / C_o) delta^gamma
  const double C = asymptotic_constant(p, 2, R);
  const double gamma = gamma_exponent(p, 2).gamma;
  std::vector<SweepRecord> out;
  for (double d : {0.04, 0.02, 0.01, 0.005}) {
    SweepRecord r;
    r.delta = d;
    r.gap = std::pow(R0 / C * std::pow(d, gamma), 1.0 / (p - 1.0));
    r.T1 = -0.5 * r.gap;
    r.T2 = 0.5 * r.gap;
    r.gradmax_all = r.gap / d;
    r.gradmax_away = 1.0;
    r.r_delta = R0;
    out.push_back(r);
  }
  return out;
}

}  // namespace

TEST(PowerLaw, RecoversSyntheticLaw) {
  std::vector<double> x, y;
  for (double d = 0.1; d > 1e-4; d *= 0.5) {
    x.push_back(d);
    y.push_back(3.5 * std::pow(d, 0.75));
  }
  const auto f = fit_power_law(x, y);
  EXPECT_NEAR(f.slope, 0.75, 1e-12);
  EXPECT_NEAR(f.prefactor, 3.5, 1e-11);
  EXPECT_LE(f.residual, 1e-12);
}

TEST(PowerLaw, Errors) {
  EXPECT_THROW(fit_power_law({1.0, 2.0}, {1.0, 2.0}), DomainError);
  EXPECT_THROW(fit_power_law({1.0, 2.0, 3.0}, {1.0, 2.0}), DomainError);
  try {
    fit_power_law({0.1, 0.05, 0.02}, {1.0, 0.0, 2.0});
    FAIL();
  } catch (const DomainError& e) {
    EXPECT_NE(std::string(e.what()).find("0.05"), std::string::npos);
  }
}

TEST(PowerLaw, PredictionsFromRecords) {
  for (double p : {2.0, 3.0, 4.0}) {
    const auto recs = synthetic_records(p, 1.0, 8.0);
    const auto gap = fit_power_law(recs, Quantity::gap, p, 1.0, 8.0);
    const auto grad = fit_power_law(recs, Quantity::gradmax, p, 1.0, 8.0);
    EXPECT_NEAR(gap.slope_deviation, 0.0, 1e-12);
    EXPECT_NEAR(grad.slope_deviation, 0.0, 1e-12);
    EXPECT_NEAR(gap.prefactor_deviation, 0.0, 1e-10);
    EXPECT_EQ(gap.quantity, "gap");
  }
}

TEST(Theorem, SyntheticRatiosAreOne) {
  const auto recs = synthetic_records(3.0, 1.0, 5.0);
  const auto v = verify_theorem(recs, 5.0, 3.0, 1.0);
  ASSERT_EQ(v.ratios.size(), 4u);
  for (double r : v.ratios) EXPECT_NEAR(r, 1.0, 1e-12);
  EXPECT_TRUE(v.pass);
  EXPECT_THROW(verify_theorem(recs, -1.0, 3.0, 1.0), SignError);
}

TEST(Theorem, DivergingRatiosFail) {
  auto recs = synthetic_records(2.0, 1.0, 5.0);
  recs.back().gap *= 1.5;
  const auto v = verify_theorem(recs, 5.0, 2.0, 1.0);
  EXPECT_FALSE(v.band_ok);
  EXPECT_FALSE(v.monotone_ok);
  EXPECT_FALSE(v.pass);
}

TEST(Analyze, SyntheticRecordsPassTheirVerdicts) {
  SweepConfig c;
  c.p = 3.0;
  const auto rep = analyze(c, synthetic_records(3.0, 1.0, 5.0));
  ASSERT_TRUE(rep.r0.has_value());
  EXPECT_NEAR(rep.r0->R0, 5.0, 1e-12);
  for (const auto& v : rep.verdicts) EXPECT_TRUE(v.pass) << v.name << ": " << v.detail;
  EXPECT_TRUE(rep.pass());
}

TEST(SweepCsv, RoundTripAndFailedRows) {
  auto recs = synthetic_records(2.0, 1.0, 3.0);
  recs[1].ok = false;
  std::ostringstream os;
  write_sweep_csv(os, recs);
  EXPECT_EQ(os.str().substr(0, os.str().find('\n')), sweep_csv_header());
  std::istringstream is(os.str());
  const auto back = read_sweep_csv(is);
  ASSERT_EQ(back.size(), recs.size());
  EXPECT_FALSE(back[1].ok);
  EXPECT_TRUE(back[0].ok);
  EXPECT_EQ(back[0].gap, recs[0].gap);
  EXPECT_EQ(back[3].gradmax_all, recs[3].gradmax_all);
  EXPECT_NE(os.str().find(",nan,"), std::string::npos);
}

TEST(SweepCsv, EmptyAndMalformed) {
  std::ostringstream os;
  write_sweep_csv(os, {});
  EXPECT_EQ(os.str(), std::string(sweep_csv_header()) + "\n");
  std::istringstream empty(os.str());
  EXPECT_TRUE(read_sweep_csv(empty).empty());
  std::istringstream wrong_header("delta,gap\n");
  EXPECT_THROW(read_sweep_csv(wrong_header), IoError);
  std::istringstream short_row(std::string(sweep_csv_header()) + "\n0.1,2\n");
  EXPECT_THROW(read_sweep_csv(short_row), IoError);
}

TEST(ReportJson, FitRoundTrip) {
  const auto recs = synthetic_records(2.0, 1.0, 3.0);
  const auto f = fit_power_law(recs, Quantity::gradmax, 2.0, 1.0, 3.0);
  const auto g = fit_from_json(nlohmann::json::parse(to_json(f).dump()));
  EXPECT_EQ(g.quantity, f.quantity);
  EXPECT_EQ(g.slope, f.slope);
  EXPECT_EQ(g.predicted_prefactor, f.predicted_prefactor);
  FitResult bare = fit_power_law({0.1, 0.05, 0.02}, {1.0, 2.0, 3.0});
  EXPECT_TRUE(std::isnan(fit_from_json(to_json(bare)).predicted_slope));
}

TEST(Config, JsonRoundTripAndDefaults) {
  SweepConfig c = coarse_config();
  c.p = 3.0;
  c.datum.preset = "quadratic";
  c.r0_ladder = {0.02, 0.01, 0.005};
  const auto back = config_from_json(to_json(c));
  EXPECT_EQ(to_json(back), to_json(c));
  const auto d = config_from_json(nlohmann::json::object());
  EXPECT_EQ(d.p, 2.0);
  EXPECT_EQ(d.ladder.count, 5);
  EXPECT_DOUBLE_EQ(d.w(), 0.25);
}

TEST(Config, RejectsUnknownKeysAndBadValues) {
  EXPECT_THROW(config_from_json(nlohmann::json::parse(R"({"pp": 3})")), IoError);
  EXPECT_THROW(config_from_json(nlohmann::json::parse(R"({"mesh": {"h": 0.1}})")), IoError);
  EXPECT_THROW(config_from_json(nlohmann::json::parse(R"({"p": "three"})")), IoError);
  EXPECT_THROW(config_from_json(nlohmann::json::parse(R"({"p": 1.5})")), DomainError);
  EXPECT_THROW(config_from_json(nlohmann::json::parse(R"({"mesh": {"h_neck_fraction": 0.5}})")), DomainError);
  EXPECT_THROW(config_from_json(nlohmann::json::parse(R"({"R_out": 2.2})")), DomainError);
}

TEST(Datum, Presets) {
  DatumConfig d;
  EXPECT_EQ(make_datum(d, 4.0)({0.3, 0.7}), 0.7);
  d.preset = "quadratic";
  EXPECT_NEAR(make_datum(d, 4.0)({2.0, 1.0}), 1.0 + 3.0 / 8.0, 1e-15);
  d.preset = "constant";
  d.value = 2.0;
  d.scale = 3.0;
  EXPECT_EQ(make_datum(d, 4.0)({1.0, 1.0}), 6.0);
  d.preset = "table";
  d.scale = 1.0;
  d.table = {{0.0, 0.0}, {M_PI, 2.0}};
  EXPECT_NEAR(make_datum(d, 4.0)({0.0, 1.0}), 1.0, 1e-12);
  EXPECT_NEAR(make_datum(d, 4.0)({0.0, -1.0}), 1.0, 1e-12);
  d.preset = "spiral";
  EXPECT_THROW(make_datum(d, 4.0), DomainError);
}

TEST(Sweep, DeterministicAndOrdered) {
  SweepConfig c = coarse_config();
  const auto a = run_sweep(c);
  c.threads = 2;
  const auto b = run_sweep(c);
  std::ostringstream sa, sb;
  write_sweep_csv(sa, a);
  write_sweep_csv(sb, b);
  EXPECT_EQ(sa.str(), sb.str());
  ASSERT_EQ(a.size(), 3u);
  EXPECT_GT(a[0].delta, a[2].delta);
  for (const auto& r : a) {
    EXPECT_TRUE(r.ok) << r.error;
    EXPECT_GT(r.gap, 0.0);
    EXPECT_GT(r.r_delta, 0.0);
    EXPECT_EQ(r.wall_ms, 0.0);
    EXPECT_LE(r.flux_defect, 1e-8);
    EXPECT_LE(r.q_identity, 1e-8);
  }
  EXPECT_GT(a[1].gradmax_neck, a[0].gradmax_neck);
}

TEST(Sweep, ConstantDatumIsDegenerate) {
  SweepConfig c = coarse_config();
  c.datum.preset = "constant";
  c.datum.value = 1.0;
  const auto recs = run_sweep(c);
  for (const auto& r : recs) {
    EXPECT_TRUE(r.ok) << r.error;
    EXPECT_NEAR(r.gap, 0.0, 1e-12);
    EXPECT_NEAR(r.r_delta, 0.0, 1e-10);
  }
  const auto rep = analyze(c, recs);
  EXPECT_FALSE(rep.pass());
  const auto gap = std::find_if(rep.verdicts.begin(), rep.verdicts.end(), [](const Verdict& v) { return v.name == "gap_slope"; });
  ASSERT_NE(gap, rep.verdicts.end());
  EXPECT_FALSE(gap->pass);
}

TEST(Sweep, EveryPointFailingThrows) {
  SweepConfig c = coarse_config();
  c.solver.max_iter = 0;
  c.p = 3.0;
  EXPECT_THROW(run_sweep(c), SweepError);
}

TEST(Sweep, EmitReportWritesFiles) {
  SweepConfig c;
  c.p = 3.0;
  const auto rep = analyze(c, synthetic_records(3.0, 1.0, 5.0));
  const auto dir = std::filesystem::temp_directory_path() / "plap_sweep_test";
  std::filesystem::remove_all(dir);
  emit_report(rep, dir);
  for (const char* f : {"sweep.csv", "report.json", "gap.gp", "gradmax.gp"}) EXPECT_TRUE(std::filesystem::exists(dir / f)) << f;
  const auto j = nlohmann::json::parse(load_text(dir / "report.json"));
  EXPECT_EQ(j.at("verdict"), "PASS");
  EXPECT_EQ(j.at("records").size(), 4u);
  std::filesystem::remove_all(dir);
}
