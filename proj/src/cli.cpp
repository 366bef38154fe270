#include "qlimit/cli.hpp"

#include <algorithm>
#include <filesystem>
#include <iostream>

#include <CLI11.hpp>

namespace qlimit {

namespace {

ExperimentKind kind_or_throw(const std::string& name) {
  if (auto k = parse_kind(name)) return *k;
  throw UsageError("unknown experiment '" + name + "'; valid kinds: " + kind_list());
}

Override parse_override(const std::string& text, bool qualified) {
  const auto eq = text.find('=');
  if (eq == std::string::npos || eq == 0) throw UsageError("override '" + text + "' is not key=value");
  Override o;
  std::string key = text.substr(0, eq);
  o.value = text.substr(eq + 1);
  const auto dot = key.find('.');
  if (dot != std::string::npos) {
    o.kind = kind_or_throw(key.substr(0, dot));
    key = key.substr(dot + 1);
  } else if (qualified) {
    throw UsageError("suite override '" + text + "' must be written kind.key=value");
  }
  o.key = key;
  return o;
}

// Applies every override that targets `kind`; unknown keys become usage errors.
void apply_overrides(ExperimentConfig& cfg, const std::vector<Override>& overrides) {
  for (const auto& o : overrides) {
    if (o.kind && *o.kind != cfg.kind()) continue;
    try {
      cfg.set(o.key, o.value);
    } catch (const ConfigError& e) {
      throw UsageError(e.what());
    }
  }
}

std::string joined(const std::vector<std::string>& names) {
  std::string s;
  for (const auto& n : names) s += (s.empty() ? "" : "; ") + n;
  return s;
}

std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string q = "\"";
  for (char c : s) q += c == '"' ? std::string("\"\"") : std::string(1, c);
  return q + "\"";
}

void print_verdict(const ConvergenceReport& r, std::ostream& err) {
  err << to_string(r.kind) << ": " << (r.verdict.pass ? "PASS" : "FAIL") << (r.verdict.negative ? " (negative kind)" : "");
  if (r.rate) err << ", rate " << format_number(*r.rate);
  err << "\n";
  for (const auto& c : r.verdict.checks) err << "  [" << (c.pass ? "ok" : "FAILED") << "] " << c.name << ": " << c.detail << "\n";
}

int run_single(const CliInvocation& inv, std::ostream& out, std::ostream& err) {
  const auto report = run_experiment(make_config(inv, *inv.kind));
  if (inv.out.empty()) {
    out << (inv.format == Format::csv ? to_csv(report) : to_json(report));
  } else {
    emit_report(report, inv.format, inv.out);
  }
  print_verdict(report, err);
  return report.verdict.pass ? exit_code::ok : exit_code::verdict_failed;
}

}  // namespace

CliInvocation parse_invocation(const std::vector<std::string>& args) {
  CLI::App app{"classical-limit convergence experiments", "qlimit"};
  app.require_subcommand(1);
  std::string experiment, hbar, format = "csv", out, only;
  std::vector<std::string> sets;
  std::uint64_t seed = 0;

  auto* run = app.add_subcommand("run", "run one experiment and write its convergence table");
  run->add_option("--experiment,-e", experiment, "experiment kind")->required();
  run->add_option("--hbar", hbar, "hbar schedule, e.g. 1,0.5,0.25 or 1/64");
  run->add_option("--set", sets, "parameter override key=value");
  run->add_option("--out,-o", out, "output file (default: stdout)");
  run->add_option("--format", format, "csv or json");
  run->add_option("--seed", seed, "seed for sampled modulus angles");

  auto* list = app.add_subcommand("list", "list experiment kinds");
  auto* desc = app.add_subcommand("describe", "describe an experiment and its parameters");
  desc->add_option("experiment", experiment, "experiment kind")->required();

  auto* suite = app.add_subcommand("suite", "run every experiment at default settings");
  suite->add_option("--out,-o", out, "output directory")->required();
  suite->add_option("--set", sets, "override kind.key=value");
  suite->add_option("--format", format, "csv or json");
  suite->add_option("--seed", seed, "seed for sampled modulus angles");
  suite->add_option("--only", only, "comma-separated subset of kinds");

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) throw;  // --help
    std::string msg = e.what();
    if (!args.empty() && !run->parsed() && !list->parsed() && !desc->parsed() && !suite->parsed())
      msg = "unknown subcommand '" + args.front() + "' (valid: run, list, describe, suite)";
    throw UsageError(msg);
  }

  CliInvocation inv;
  try {
    inv.format = parse_format(format);
  } catch (const std::invalid_argument& e) {
    throw UsageError(e.what());
  }
  inv.out = out;
  inv.seed = seed;
  if (list->parsed()) {
    inv.command = Command::list;
  } else if (desc->parsed()) {
    inv.command = Command::describe;
    inv.kind = kind_or_throw(experiment);
  } else if (run->parsed()) {
    inv.command = Command::run;
    inv.kind = kind_or_throw(experiment);
    for (const auto& s : sets) {
      auto o = parse_override(s, false);
      if (o.kind && *o.kind != *inv.kind)
        throw UsageError("override '" + s + "' targets " + to_string(*o.kind) + ", not " + to_string(*inv.kind));
      inv.overrides.push_back(std::move(o));
    }
    if (!hbar.empty()) {
      try {
        inv.schedule = HbarSchedule::parse(hbar);
      } catch (const std::invalid_argument& e) {
        throw UsageError("malformed schedule '" + hbar + "': " + e.what());
      }
    }
  } else {
    inv.command = Command::suite;
    for (const auto& s : sets) inv.overrides.push_back(parse_override(s, true));
    if (!only.empty()) {
      std::size_t start = 0;
      while (start <= only.size()) {
        const auto comma = std::min(only.find(',', start), only.size());
        inv.only.push_back(kind_or_throw(only.substr(start, comma - start)));
        start = comma + 1;
      }
    }
  }
  // Validate every override against its kind now, so typos fail before any work starts.
  for (const auto& o : inv.overrides) {
    for (auto kind : all_kinds()) {
      if (o.kind ? *o.kind != kind : (!inv.kind || *inv.kind != kind)) continue;
      ExperimentConfig probe(kind);
      try {
        probe.set(o.key, o.value);
      } catch (const ConfigError& e) {
        throw UsageError(e.what());
      }
    }
  }
  return inv;
}

ExperimentConfig make_config(const CliInvocation& inv, ExperimentKind kind) {
  ExperimentConfig cfg(kind);
  cfg.set_seed(inv.seed);
  apply_overrides(cfg, inv.overrides);
  if (inv.schedule) {
    try {
      cfg.set_schedule(*inv.schedule);
    } catch (const ConfigError& e) {
      throw UsageError(e.what());
    }
  }
  return cfg;
}

int run_suite(const CliInvocation& inv, std::ostream& out, std::ostream& err) {
  const std::filesystem::path dir(inv.out);
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (!std::filesystem::is_directory(dir)) throw std::runtime_error("cannot create directory '" + inv.out + "'");
  const auto& kinds = inv.only.empty() ? all_kinds() : inv.only;
  const char* ext = inv.format == Format::csv ? ".csv" : ".json";

  std::string summary = "experiment,negative,verdict,rate,failed_checks\n";
  std::vector<std::string> failing;
  for (auto kind : kinds) {
    const std::string name = to_string(kind);
    std::string verdict, rate, failed;
    bool negative = false;
    try {
      const auto report = run_experiment(make_config(inv, kind));
      emit_report(report, inv.format, dir / (name + ext));
      negative = report.verdict.negative;
      verdict = report.verdict.pass ? "pass" : "fail";
      if (report.rate) rate = format_number(*report.rate);
      std::vector<std::string> names;
      for (const auto& c : report.verdict.checks)
        if (!c.pass) names.push_back(c.name);
      failed = joined(names);
      if (!report.verdict.pass) print_verdict(report, err);
    } catch (const std::exception& e) {
      verdict = "error";
      failed = e.what();
      err << name << ": error: " << e.what() << "\n";
    }
    if (verdict != "pass") failing.push_back(name);
    summary += name + "," + (negative ? "1" : "0") + "," + verdict + "," + rate + "," + csv_field(failed) + "\n";
    out << name << ": " << verdict << "\n";
  }
  write_atomically(dir / "summary.csv", summary);
  if (failing.empty()) return exit_code::ok;
  std::string names;
  for (const auto& n : failing) names += (names.empty() ? "" : ", ") + n;
  err << "failing kinds: " << names << "\n";
  return exit_code::verdict_failed;
}

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CliInvocation inv;
  try {
    inv = parse_invocation(args);
  } catch (const UsageError& e) {
    err << "usage error: " << e.what() << "\n";
    return exit_code::usage;
  } catch (const CLI::ParseError& e) {
    // help or version request
    out << e.what() << "\n";
    return exit_code::ok;
  }
  try {
    switch (inv.command) {
      case Command::list:
        for (auto kind : all_kinds()) out << to_string(kind) << "\t" << summary(kind) << "\n";
        return exit_code::ok;
      case Command::describe:
        out << describe(*inv.kind);
        return exit_code::ok;
      case Command::run:
        return run_single(inv, out, err);
      case Command::suite:
        return run_suite(inv, out, err);
    }
  } catch (const UsageError& e) {
    err << "usage error: " << e.what() << "\n";
    return exit_code::usage;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return exit_code::runtime;
  }
  return exit_code::runtime;
}

}  // namespace qlimit
