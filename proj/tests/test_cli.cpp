#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "qlimit/cli.hpp"

using namespace qlimit;
namespace fs = std::filesystem;

namespace {

struct Result {
  int code;
  std::string out, err;
};

Result cli(const std::vector<std::string>& args) {
  std::ostringstream out, err;
  const int code = run_cli(args, out, err);
  return {code, out.str(), err.str()};
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::vector<std::vector<std::string>> parse_csv(const std::string& text) {
  std::vector<std::vector<std::string>> table;
  std::istringstream lines(text);
  std::string line;
  while (std::getline(lines, line)) {
    std::vector<std::string> cells;
    std::istringstream fields(line);
    std::string cell;
    while (std::getline(fields, cell, ',')) cells.push_back(cell);
    if (!line.empty() && line.back() == ',') cells.emplace_back();
    table.push_back(cells);
  }
  return table;
}

fs::path scratch(const std::string& name) {
  const auto dir = fs::temp_directory_path() / ("qlimit_cli_test_" + name);
  fs::remove_all(dir);
  return dir;
}

// Runs the installed binary when the harness provides it.
int run_binary(const std::string& args) {
  const char* bin = std::getenv("QLIMIT_BIN");
  if (!bin) return -1;
  return std::system((std::string(bin) + " " + args + " > /dev/null 2>&1").c_str());
}

}  // namespace

TEST_CASE("parse_run_with_schedule") {
  const auto inv = parse_invocation({"run", "--experiment", "product", "--hbar", "1,0.5,0.25"});
  CHECK(inv.command == Command::run);
  REQUIRE(inv.kind.has_value());
  CHECK(*inv.kind == ExperimentKind::product);
  REQUIRE(inv.schedule.has_value());
  CHECK(inv.schedule->size() == 3);
  CHECK(inv.format == Format::csv);
}

TEST_CASE("parse_overrides_and_seed") {
  const auto inv = parse_invocation({"run", "-e", "product", "--set", "window=3", "--seed", "9", "--format", "json"});
  REQUIRE(inv.overrides.size() == 1);
  CHECK(inv.overrides[0].key == "window");
  CHECK(inv.overrides[0].value == "3");
  CHECK(inv.seed == 9);
  CHECK(inv.format == Format::json);
  CHECK(make_config(inv, ExperimentKind::product).number("window") == 3.0);
}

TEST_CASE("parse_suite_requires_out_and_qualified_keys") {
  const auto inv = parse_invocation({"suite", "--out", "dir/", "--only", "product,bracket", "--set", "product.window=3"});
  CHECK(inv.command == Command::suite);
  CHECK(inv.out == "dir/");
  CHECK(inv.only.size() == 2);
  REQUIRE(inv.overrides.size() == 1);
  CHECK(inv.overrides[0].kind == ExperimentKind::product);
  CHECK_THROWS_AS(parse_invocation({"suite"}), UsageError);
  CHECK_THROWS_AS(parse_invocation({"suite", "--out", "d", "--set", "window=3"}), UsageError);
}

TEST_CASE("unknown_experiment_lists_valid_kinds") {
  const auto r = cli({"run", "--experiment", "nosuch"});
  CHECK(r.code == exit_code::usage);
  CHECK(r.err.find("nosuch") != std::string::npos);
  for (auto kind : all_kinds()) CHECK(r.err.find(to_string(kind)) != std::string::npos);
}

TEST_CASE("usage_errors_exit_two") {
  CHECK(cli({"frob"}).code == exit_code::usage);
  CHECK(cli({"run", "-e", "product", "--set", "foo=1"}).code == exit_code::usage);
  CHECK(cli({"run", "-e", "product", "--set", "resolution=34"}).code == exit_code::usage);
  CHECK(cli({"run", "-e", "product", "--hbar", "0.5,1"}).code == exit_code::usage);
  CHECK(cli({"run", "-e", "product", "--format", "xml"}).code == exit_code::usage);
  CHECK(cli({"run", "-e", "eigenstate", "--hbar", "1,0.5,0.25"}).code == exit_code::usage);
}

TEST_CASE("list_and_describe") {
  const auto list = cli({"list"});
  CHECK(list.code == 0);
  for (auto kind : all_kinds()) CHECK(list.out.find(to_string(kind) + "\t") != std::string::npos);
  const auto desc = cli({"describe", "weyl_limit"});
  CHECK(desc.code == 0);
  CHECK(desc.out.find("window") != std::string::npos);
  CHECK(desc.out.find("resolution") != std::string::npos);
}

TEST_CASE("empty_report_is_header_only_csv") {
  ConvergenceReport empty{ExperimentKind::product, ExperimentConfig(ExperimentKind::product)};
  CHECK(to_csv(empty) == std::string(csv_header) + "\n");
}

TEST_CASE("json_round_trip_preserves_rows") {
  ConvergenceReport r{ExperimentKind::product, ExperimentConfig(ExperimentKind::product)};
  r.rows.push_back({0.25, 84, "product_gap", 0.125, 0.1250000001, 3e-15, true});
  r.rows.push_back({0.125, 101, "product_gap", 1.0 / 3, std::nullopt, 0.5, false});
  const auto back = rows_from_json(to_json(r));
  REQUIRE(back.size() == 2);
  CHECK(back[0].hbar == 0.25);
  CHECK(back[0].dim == 84);
  CHECK(back[0].reference.value() == 0.1250000001);
  CHECK(back[0].rate_flag);
  CHECK(back[1].value == std::stod(format_number(1.0 / 3)));
  CHECK_FALSE(back[1].reference.has_value());
  CHECK_FALSE(back[1].rate_flag);
}

TEST_CASE("number_format_is_twelve_significant_digits") {
  CHECK(format_number(1) == "1");
  CHECK(format_number(0.015625) == "0.015625");
  CHECK(format_number(1.0 / 3) == "0.333333333333");
  CHECK(format_number(2.5e-17) == "2.5e-17");
}

TEST_CASE("weyl_limit_matches_golden_file") {
  const auto r = cli({"run", "--experiment", "weyl_limit", "--hbar", "1,0.5,0.25"});
  REQUIRE(r.code == 0);
  const auto got = parse_csv(r.out);
  const auto want = parse_csv(slurp(fs::path(QLIMIT_SOURCE_DIR) / "tests/golden/weyl_limit.csv"));
  REQUIRE(got.size() == want.size());
  CHECK(got[0] == want[0]);
  for (std::size_t i = 1; i < got.size(); ++i) {
    REQUIRE(got[i].size() == 8);
    for (std::size_t c : {0, 1, 2, 3, 5, 7}) CHECK(got[i][c] == want[i][c]);
    CHECK(std::abs(std::stod(got[i][4]) - std::stod(want[i][4])) <= 1e-11);
    CHECK(std::stod(got[i][6]) <= 1e-9);
  }
}

TEST_CASE("repeat_runs_are_byte_identical") {
  const auto a = cli({"run", "-e", "bracket", "--hbar", "1,0.5,0.25", "--format", "json", "--seed", "3"});
  const auto b = cli({"run", "-e", "bracket", "--hbar", "1,0.5,0.25", "--format", "json", "--seed", "3"});
  CHECK(a.out == b.out);
  CHECK_FALSE(a.out.empty());
}

TEST_CASE("run_writes_file_and_leaves_no_partial_output_on_error") {
  const auto dir = scratch("run");
  fs::create_directories(dir);
  const auto ok = cli({"run", "-e", "weyl_limit", "--hbar", "1,0.5", "-o", (dir / "ok.csv").string()});
  CHECK(ok.code == 0);
  CHECK(ok.out.empty());
  CHECK(slurp(dir / "ok.csv").rfind(csv_header, 0) == 0);
  // hbar = 1e-4 on the default window needs more than the maximal dimension.
  const auto bad = cli({"run", "-e", "weyl_limit", "--hbar", "1,1e-4", "-o", (dir / "bad.csv").string()});
  CHECK(bad.code == exit_code::runtime);
  CHECK(std::distance(fs::directory_iterator(dir), fs::directory_iterator()) == 1);
  fs::remove_all(dir);
}

TEST_CASE("tampered_threshold_fails_suite") {
  const auto dir = scratch("tampered");
  const auto r = cli({"suite", "--out", dir.string(), "--only", "product", "--set", "product.rate_high=0.5"});
  CHECK(r.code == exit_code::verdict_failed);
  CHECK(r.err.find("failing kinds: product") != std::string::npos);
  CHECK(slurp(dir / "summary.csv").find("product,0,fail,") != std::string::npos);
  fs::remove_all(dir);
}

TEST_CASE("small_suite_passes_with_matching_summary") {
  const auto dir = scratch("small");
  const auto r = cli({"suite", "--out", dir.string(), "--only", "weyl_limit,point_measure,oscillation_counterexample",
                      "--set", "oscillation_counterexample.angular_samples=16"});
  CHECK(r.code == 0);
  const auto summary = parse_csv(slurp(dir / "summary.csv"));
  REQUIRE(summary.size() == 4);
  CHECK(summary[0][0] == "experiment");
  CHECK(summary[1][0] == "weyl_limit");
  CHECK(summary[2][0] == "point_measure");
  CHECK(summary[3][0] == "oscillation_counterexample");
  CHECK(summary[3][1] == "1");
  for (std::size_t i = 1; i < 4; ++i) CHECK(summary[i][2] == "pass");
  for (const char* f : {"weyl_limit.csv", "point_measure.csv", "oscillation_counterexample.csv", "summary.csv"})
    CHECK(fs::exists(dir / f));
  CHECK(std::distance(fs::directory_iterator(dir), fs::directory_iterator()) == 4);
  fs::remove_all(dir);
}

TEST_CASE("binary_exit_codes") {
  if (!std::getenv("QLIMIT_BIN")) return;
  CHECK(WEXITSTATUS(run_binary("list")) == 0);
  CHECK(WEXITSTATUS(run_binary("run --experiment nosuch")) == 2);
  CHECK(WEXITSTATUS(run_binary("run --experiment point_measure --hbar 1,0.5,0.25")) == 0);
}
