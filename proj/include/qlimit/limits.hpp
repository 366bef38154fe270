#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "qlimit/phase_point.hpp"

namespace qlimit {

enum class ExperimentKind {
  position_momentum,
  weyl_limit,
  fourier_measure,
  product,
  bracket,
  evolution,
  resolvent,
  oscillation_counterexample,
  point_measure,
  eigenstate,
  wkb,
  interference,
  basic_sequence,
  wigner_state,
};

const std::vector<ExperimentKind>& all_kinds();
std::string to_string(ExperimentKind kind);
std::optional<ExperimentKind> parse_kind(std::string_view name);
std::string kind_list();  // comma-separated names, for error messages
std::string summary(ExperimentKind kind);   // one line
std::string describe(ExperimentKind kind);  // summary, default schedule and parameters

class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// The dimension policy asks for more levels than max_dim.
class DimensionError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class HbarSchedule {
 public:
  HbarSchedule() : HbarSchedule(geometric(1.0, 7).values()) {}
  explicit HbarSchedule(std::vector<double> values);

  // first, first/2, ... (count values)
  static HbarSchedule geometric(double first, int count);
  // "1,0.5,0.25" or "1/64"-style fractions
  static HbarSchedule parse(std::string_view text);

  const std::vector<double>& values() const { return values_; }
  std::size_t size() const { return values_.size(); }

 private:
  std::vector<double> values_;
};

enum class ParamType { number, integer, point, point_list, number_list, weighted_points, name };

struct ParamSpec {
  std::string key;
  ParamType type;
  std::string default_value;
  std::string help;
  std::vector<std::string> choices = {};  // for ParamType::name
};

const std::vector<ParamSpec>& parameter_specs(ExperimentKind kind);

// A validated experiment description. Parameters are stored as text and checked against the kind's specs on every set.
class ExperimentConfig {
 public:
  explicit ExperimentConfig(ExperimentKind kind);

  ExperimentKind kind() const { return kind_; }
  const HbarSchedule& schedule() const { return schedule_; }
  void set_schedule(HbarSchedule s);
  std::uint64_t seed() const { return seed_; }
  void set_seed(std::uint64_t s) { seed_ = s; }

  void set(const std::string& key, const std::string& value);
  const std::map<std::string, std::string>& params() const { return params_; }
  std::string valid_keys() const;

  double number(const std::string& key) const;
  long integer(const std::string& key) const;
  Point point(const std::string& key) const;
  std::vector<Point> points(const std::string& key) const;
  std::vector<double> numbers(const std::string& key) const;
  std::vector<std::pair<double, Point>> weighted_points(const std::string& key) const;
  std::string text(const std::string& key) const;

  // Angle offset for sampled moduli: 0 for seed 0, otherwise drawn from the seed.
  double angle_offset() const;

 private:
  const ParamSpec& spec(const std::string& key) const;

  ExperimentKind kind_;
  HbarSchedule schedule_;
  std::uint64_t seed_ = 0;
  std::map<std::string, std::string> params_;
};

struct ReportRow {
  double hbar = 0;  // 0 marks a classical-only row
  Index dim = 0;
  std::string metric;
  double value = 0;
  std::optional<double> reference;
  double defect = 0;
  bool rate_flag = false;  // row usable for the rate fit
};

struct Check {
  std::string name;
  bool pass = false;
  std::string detail;
};

struct Verdict {
  bool pass = false;
  bool negative = false;  // the kind asserts non-convergence
  std::vector<Check> checks;
};

struct ConvergenceReport {
  ExperimentKind kind;
  ExperimentConfig config;
  std::vector<ReportRow> rows;
  std::string primary_metric;
  std::optional<double> rate;
  std::map<std::string, double> rates;
  Verdict verdict;
};

// Least-squares slope of log(value) against log(hbar); needs at least three positive rows.
double fit_rate(const std::vector<ReportRow>& rows);
double fit_rate(const std::vector<double>& hbars, const std::vector<double>& values);

// Rows of one metric, in schedule order.
std::vector<ReportRow> metric_rows(const ConvergenceReport& report, const std::string& metric);

ConvergenceReport run_experiment(const ExperimentConfig& config);

// Memory/size policy: levels needed for coherent states out to phase-space radius r.
Index coherent_dim(double hbar, double radius);
constexpr Index max_dim = 4096;

}  // namespace qlimit
