#include "qlimit/report.hpp"

#include <cstdio>
#include <fstream>
#include <stdexcept>

#include <json.hpp>

namespace qlimit {

namespace {

using nlohmann::ordered_json;

// The JSON number carrying the same 12 significant digits as the CSV.
double rounded(double v) { return std::stod(format_number(v)); }

}  // namespace

Format parse_format(const std::string& name) {
  if (name == "csv") return Format::csv;
  if (name == "json") return Format::json;
  throw std::invalid_argument("unknown format '" + name + "' (valid: csv, json)");
}

std::string format_number(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.12g", v);
  return buf;
}

std::string to_csv(const ConvergenceReport& report) {
  std::string out = std::string(csv_header) + "\n";
  const std::string kind = to_string(report.kind);
  for (const auto& r : report.rows) {
    out += kind + "," + format_number(r.hbar) + "," + std::to_string(r.dim) + "," + r.metric + "," + format_number(r.value) +
           "," + (r.reference ? format_number(*r.reference) : "") + "," + format_number(r.defect) + "," +
           (r.rate_flag ? "1" : "0") + "\n";
  }
  return out;
}

std::string to_json(const ConvergenceReport& report) {
  ordered_json j;
  j["experiment"] = to_string(report.kind);
  ordered_json config;
  config["schedule"] = ordered_json::array();
  for (double h : report.config.schedule().values()) config["schedule"].push_back(rounded(h));
  config["seed"] = report.config.seed();
  config["params"] = report.config.params();
  j["config"] = config;
  j["primary_metric"] = report.primary_metric;
  j["rate"] = report.rate ? ordered_json(rounded(*report.rate)) : ordered_json(nullptr);
  ordered_json rates = ordered_json::object();
  for (const auto& [k, v] : report.rates) rates[k] = rounded(v);
  j["rates"] = rates;
  ordered_json rows = ordered_json::array();
  for (const auto& r : report.rows) {
    rows.push_back({{"experiment", to_string(report.kind)},
                    {"hbar", rounded(r.hbar)},
                    {"dim", r.dim},
                    {"metric", r.metric},
                    {"value", rounded(r.value)},
                    {"reference", r.reference ? ordered_json(rounded(*r.reference)) : ordered_json(nullptr)},
                    {"defect", rounded(r.defect)},
                    {"rate_flag", r.rate_flag ? 1 : 0}});
  }
  j["rows"] = rows;
  ordered_json checks = ordered_json::array();
  for (const auto& c : report.verdict.checks) checks.push_back({{"name", c.name}, {"pass", c.pass}, {"detail", c.detail}});
  j["verdict"] = {{"pass", report.verdict.pass}, {"negative", report.verdict.negative}, {"checks", checks}};
  return j.dump(2) + "\n";
}

std::vector<ReportRow> rows_from_json(const std::string& text) {
  const auto j = ordered_json::parse(text);
  std::vector<ReportRow> rows;
  for (const auto& r : j.at("rows")) {
    ReportRow row;
    row.hbar = r.at("hbar").get<double>();
    row.dim = r.at("dim").get<Index>();
    row.metric = r.at("metric").get<std::string>();
    row.value = r.at("value").get<double>();
    if (!r.at("reference").is_null()) row.reference = r.at("reference").get<double>();
    row.defect = r.at("defect").get<double>();
    row.rate_flag = r.at("rate_flag").get<int>() != 0;
    rows.push_back(std::move(row));
  }
  return rows;
}

void write_atomically(const std::filesystem::path& path, const std::string& content) {
  auto tmp = path;
  tmp += ".tmp";
  {
    std::ofstream f(tmp, std::ios::binary | std::ios::trunc);
    if (!f) throw std::runtime_error("cannot write '" + path.string() + "'");
    f << content;
    f.close();
    if (!f) {
      std::error_code ec;
      std::filesystem::remove(tmp, ec);
      throw std::runtime_error("write to '" + path.string() + "' failed");
    }
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) {
    std::filesystem::remove(tmp, ec);
    throw std::runtime_error("cannot move report into '" + path.string() + "'");
  }
}

void emit_report(const ConvergenceReport& report, Format format, const std::filesystem::path& path) {
  write_atomically(path, format == Format::csv ? to_csv(report) : to_json(report));
}

}  // namespace qlimit
