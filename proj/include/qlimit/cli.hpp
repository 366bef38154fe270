#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "qlimit/limits.hpp"
#include "qlimit/report.hpp"

namespace qlimit {

class UsageError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

enum class Command { run, list, describe, suite };

struct Override {
  std::optional<ExperimentKind> kind;  // set for suite-qualified keys "kind.key"
  std::string key;
  std::string value;
};

struct CliInvocation {
  Command command = Command::list;
  std::optional<ExperimentKind> kind;
  std::vector<Override> overrides;
  std::optional<HbarSchedule> schedule;
  std::string out;  // empty: stdout for run
  Format format = Format::csv;
  std::uint64_t seed = 0;
  std::vector<ExperimentKind> only;  // suite subset; empty means every kind
};

namespace exit_code {
inline constexpr int ok = 0;
inline constexpr int verdict_failed = 1;
inline constexpr int usage = 2;
inline constexpr int runtime = 3;
}  // namespace exit_code

// Arguments exclude the program name. Throws UsageError naming the offending token.
CliInvocation parse_invocation(const std::vector<std::string>& args);

// The configuration a run or suite member uses, overrides applied.
ExperimentConfig make_config(const CliInvocation& inv, ExperimentKind kind);

struct SuiteEntry {
  ExperimentKind kind;
  bool pass = false;
  std::optional<double> rate;
  std::string failed;  // names of failed checks, or the error text
};

int run_suite(const CliInvocation& inv, std::ostream& out, std::ostream& err);

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace qlimit
