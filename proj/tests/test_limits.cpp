#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <cstdlib>
#include <random>

#include "qlimit/limits.hpp"

using namespace qlimit;

namespace {

ConvergenceReport run(ExperimentKind kind, const std::string& schedule,
                      const std::vector<std::pair<std::string, std::string>>& params = {}) {
  ExperimentConfig cfg(kind);
  if (!schedule.empty()) cfg.set_schedule(HbarSchedule::parse(schedule));
  for (const auto& [k, v] : params) cfg.set(k, v);
  return run_experiment(cfg);
}

bool same_rows(const std::vector<ReportRow>& a, const std::vector<ReportRow>& b) {
  if (a.size() != b.size()) return false;
  for (std::size_t i = 0; i < a.size(); ++i)
    if (a[i].hbar != b[i].hbar || a[i].dim != b[i].dim || a[i].metric != b[i].metric || a[i].value != b[i].value ||
        a[i].reference != b[i].reference || a[i].defect != b[i].defect || a[i].rate_flag != b[i].rate_flag)
      return false;
  return true;
}

}  // namespace

TEST_CASE("fit_rate_exact_power_laws") {
  const std::vector<double> hs = {1, 0.5, 0.25, 0.125};
  std::vector<double> lin, quad;
  for (double h : hs) {
    lin.push_back(3 * h);
    quad.push_back(0.2 * h * h);
  }
  CHECK(fit_rate(hs, lin) == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(fit_rate(hs, quad) == doctest::Approx(2.0).epsilon(1e-12));
}

TEST_CASE("fit_rate_noisy_linear_data") {
  std::mt19937 rng(17);
  std::uniform_real_distribution<double> noise(-0.05, 0.05);
  for (int trial = 0; trial < 20; ++trial) {
    std::vector<double> hs, vs;
    for (int k = 0; k < 7; ++k) {
      const double h = std::ldexp(1.0, -k);
      hs.push_back(h);
      vs.push_back(0.7 * h * (1 + noise(rng)));
    }
    const double rate = fit_rate(hs, vs);
    CHECK(rate >= 0.85);
    CHECK(rate <= 1.15);
  }
}

TEST_CASE("fit_rate_rejects_short_or_nonpositive_input") {
  CHECK_THROWS(fit_rate(std::vector<double>{1, 0.5}, std::vector<double>{1, 0.5}));
  CHECK_THROWS(fit_rate(std::vector<double>{1, 0.5, 0.25}, std::vector<double>{1, 0, 0.5}));
}

TEST_CASE("hbar_schedule_parsing_and_validation") {
  const auto s = HbarSchedule::parse("1, 1/2,0.25");
  REQUIRE(s.size() == 3);
  CHECK(s.values()[1] == 0.5);
  CHECK(HbarSchedule().values().back() == 1.0 / 64);
  CHECK(HbarSchedule().size() == 7);
  CHECK_THROWS_AS(HbarSchedule::parse("1,2"), ConfigError);
  CHECK_THROWS_AS(HbarSchedule::parse("1,,0.5"), ConfigError);
  CHECK_THROWS_AS(HbarSchedule::parse("1,-0.5"), ConfigError);
  CHECK_THROWS_AS(HbarSchedule::parse("abc"), ConfigError);
  CHECK_THROWS_AS(HbarSchedule(std::vector<double>{}), ConfigError);
}

TEST_CASE("kind_names_round_trip") {
  CHECK(all_kinds().size() == 14);
  for (auto k : all_kinds()) {
    REQUIRE(parse_kind(to_string(k)).has_value());
    CHECK(*parse_kind(to_string(k)) == k);
    CHECK_FALSE(parameter_specs(k).empty());
  }
  CHECK_FALSE(parse_kind("nosuch").has_value());
}

TEST_CASE("config_validation") {
  ExperimentConfig cfg(ExperimentKind::product);
  CHECK_THROWS_AS(cfg.set("nosuch", "1"), ConfigError);
  CHECK_THROWS_AS(cfg.set("resolution", "34"), ConfigError);
  CHECK_THROWS_AS(cfg.set("resolution", "31"), ConfigError);
  CHECK_THROWS_AS(cfg.set("eta", "1"), ConfigError);
  CHECK_THROWS_AS(cfg.set("window", "-2"), ConfigError);
  CHECK_THROWS_AS(cfg.set("dim", "5000"), ConfigError);
  cfg.set("eta", "0.5,-1");
  CHECK(cfg.point("eta").p(0) == -1.0);
  ExperimentConfig wkb(ExperimentKind::wkb);
  CHECK_THROWS_AS(wkb.set("amplitude", "square"), ConfigError);
  ExperimentConfig eig(ExperimentKind::eigenstate);
  CHECK_THROWS_AS(eig.set_schedule(HbarSchedule::parse("1,0.5,0.25")), ConfigError);
  eig.set("levels", "4,16");
  CHECK(eig.schedule().values()[1] == doctest::Approx(1 / 16.5));
}

TEST_CASE("angle_offset_from_seed") {
  ExperimentConfig a(ExperimentKind::resolvent), b(ExperimentKind::resolvent);
  CHECK(a.angle_offset() == 0.0);
  a.set_seed(7);
  b.set_seed(7);
  CHECK(a.angle_offset() == b.angle_offset());
  CHECK(a.angle_offset() > 0.0);
}

TEST_CASE("dimension_policy") {
  CHECK(coherent_dim(1.0, 0.0) == 30);
  // n = 4^2 / (2/64) = 512
  CHECK(coherent_dim(1.0 / 64, 4.0) == Index(std::ceil(512 + 8 * std::sqrt(512.0) + 30)));
  CHECK(coherent_dim(1e-9, 0.0) >= 8);
  // Window L = 2 at hbar = 1e-4 needs more than max_dim levels.
  CHECK_THROWS_AS(run(ExperimentKind::weyl_limit, "1e-4"), DimensionError);
}

TEST_CASE("weyl_limit_rows_and_closed_form") {
  const auto r = run(ExperimentKind::weyl_limit, "1,0.5,0.25");
  REQUIRE(r.rows.size() == 3);
  for (const auto& row : r.rows) {
    REQUIRE(row.reference.has_value());
    CHECK(row.reference.value() == doctest::Approx(1 - std::exp(-row.hbar / 4)).epsilon(1e-14));
    CHECK(std::abs(row.value - *row.reference) <= std::max(1e-3, 5 * row.defect));
    CHECK(row.rate_flag);
  }
  CHECK(r.verdict.pass);
  REQUIRE(r.rate.has_value());
  CHECK(*r.rate == doctest::Approx(1.0).epsilon(0.1));
}

TEST_CASE("closed_form_kinds_agree_row_by_row") {
  for (auto kind : {ExperimentKind::position_momentum, ExperimentKind::fourier_measure, ExperimentKind::product,
                    ExperimentKind::bracket, ExperimentKind::point_measure}) {
    const auto r = run(kind, "1,0.25,0.0625");
    CAPTURE(to_string(kind));
    for (const auto& row : r.rows)
      if (row.reference) CHECK(std::abs(row.value - *row.reference) <= std::max(1e-3, 5 * row.defect));
    // Rates are not judged here: three coarse points sit partly outside the asymptotic regime.
    for (const auto& c : r.verdict.checks)
      if (c.name.find("closed form") != std::string::npos) CHECK(c.pass);
  }
}

TEST_CASE("primary_metrics_nonincreasing") {
  for (auto kind : {ExperimentKind::weyl_limit, ExperimentKind::product, ExperimentKind::basic_sequence}) {
    const auto r = run(kind, "1,0.5,0.25,0.125");
    double prev = 1e300;
    for (const auto& row : metric_rows(r, r.primary_metric)) {
      CHECK(row.value <= prev * (1 + 1e-9));
      prev = row.value;
    }
  }
}

TEST_CASE("counterexample_verdict_is_negative_assertion") {
  const auto r = run(ExperimentKind::oscillation_counterexample, "1,0.25,0.0625");
  CHECK(r.verdict.negative);
  CHECK(r.verdict.pass);
  for (const auto& row : metric_rows(r, "symbol_norm")) CHECK(row.value <= *row.reference + 2e-3);
  CHECK(metric_rows(r, "modulus").back().value >= 1.9);
  // Raising the floor above the largest possible modulus makes the assertion fail.
  const auto tampered = run(ExperimentKind::oscillation_counterexample, "1,0.25,0.0625", {{"modulus_floor", "2.1"}});
  CHECK_FALSE(tampered.verdict.pass);
}

TEST_CASE("rate_flags_follow_defect_rule") {
  const auto r = run(ExperimentKind::point_measure, "1,0.5,0.25");
  for (const auto& row : r.rows)
    CHECK(row.rate_flag == (row.hbar > 0 && std::isfinite(row.value) && row.value > 0 && row.defect < 0.1 * row.value));
}

TEST_CASE("reports_are_deterministic_across_thread_counts") {
  ::setenv("HBAR_LIMIT_THREADS", "1", 1);
  const auto serial = run(ExperimentKind::product, "1,0.5,0.25,0.125");
  ::setenv("HBAR_LIMIT_THREADS", "4", 1);
  const auto parallel = run(ExperimentKind::product, "1,0.5,0.25,0.125");
  ::unsetenv("HBAR_LIMIT_THREADS");
  CHECK(same_rows(serial.rows, parallel.rows));
  CHECK(serial.rate == parallel.rate);
}

TEST_CASE("eigenstate_schedule_from_levels") {
  const auto r = run(ExperimentKind::eigenstate, "", {{"levels", "4,8,16"}, {"mass_floor", "0.5"}});
  const auto mass = metric_rows(r, "annulus_mass");
  REQUIRE(mass.size() == 3);
  CHECK(mass[0].hbar == doctest::Approx(1 / 4.5));
  for (const auto& row : mass) CHECK(std::abs(row.value - *row.reference) <= 1e-6);
}
