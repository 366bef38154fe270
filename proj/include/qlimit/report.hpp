#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "qlimit/limits.hpp"

namespace qlimit {

enum class Format { csv, json };

Format parse_format(const std::string& name);

inline constexpr const char* csv_header = "experiment,hbar,dim,metric,value,reference,defect,rate_flag";

// %.12g, the textual form of every number in reports.
std::string format_number(double v);

std::string to_csv(const ConvergenceReport& report);
std::string to_json(const ConvergenceReport& report);

// Rows recovered from to_json output.
std::vector<ReportRow> rows_from_json(const std::string& text);

// Writes to a sibling temporary and renames it into place, so `path` is either complete or untouched.
void write_atomically(const std::filesystem::path& path, const std::string& content);

void emit_report(const ConvergenceReport& report, Format format, const std::filesystem::path& path);

}  // namespace qlimit
