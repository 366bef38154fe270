#pragma once

#include <functional>
#include <string>
#include <vector>

#include "qlimit/correspondence.hpp"
#include "qlimit/limits.hpp"

namespace qlimit::experiments {

using RowFn = std::function<std::vector<ReportRow>(const ExperimentConfig&, double hbar)>;
using ClassicalFn = std::function<std::vector<ReportRow>(const ExperimentConfig&)>;
using JudgeFn = std::function<void(ConvergenceReport&)>;

struct Driver {
  std::string primary;
  std::vector<std::string> rate_metrics;
  bool negative = false;
  RowFn rows;
  ClassicalFn classical;  // rows with hbar = 0, appended after the schedule
  JudgeFn judge;
};

Driver position_momentum();
Driver weyl_limit();
Driver fourier_measure();
Driver product();
Driver bracket();
Driver basic_sequence();
Driver point_measure();
Driver evolution();
Driver resolvent();
Driver oscillation_counterexample();
Driver eigenstate();
Driver wkb();
Driver interference();
Driver wigner_state();

// Shared helpers.
Window<double> metric_window(const ExperimentConfig& cfg);
double corner_radius(const Window<double>& w);
// Dimension from the "dim" override or the coherent policy at radius r.
Index dimension(const ExperimentConfig& cfg, double hbar, double radius);
std::vector<Point> nodes_of(const Window<double>& w);
double sup_gap(const MatrixC<double>& a, const MatrixC<double>& b);
Index odd_at_least(double n);

ReportRow row(double hbar, Index dim, std::string metric, double value, std::optional<double> reference, double defect);

void add_check(ConvergenceReport& r, std::string name, bool pass, std::string detail);
void check_nonincreasing(ConvergenceReport& r, const std::string& metric);
void check_increasing(ConvergenceReport& r, const std::string& metric);
void check_reference(ConvergenceReport& r, const std::string& metric, double tol);
// Every row of `metric` (optionally only hbar <= hbar_max) satisfies value <= bound, or >= bound when `at_least`.
void check_bound(ConvergenceReport& r, const std::string& metric, double bound, bool at_least = false,
                 double hbar_max = 1e300);
void check_last(ConvergenceReport& r, const std::string& metric, double bound);
void check_rate(ConvergenceReport& r, const std::string& metric, double lo, double hi);
std::string fmt(double v);

}  // namespace qlimit::experiments
