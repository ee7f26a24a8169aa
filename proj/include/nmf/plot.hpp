#pragma once

#include <filesystem>
#include <string>

#include "nmf/harness.hpp"

namespace nmf {

// Parses a report CSV; the header must match kReportCsvHeader exactly.
EvalReport read_report_csv(const std::filesystem::path& path);

/// SVG line chart of accuracy against predicted fraction, one line per
/// (variant, observed fraction), averaged over seeds.
std::string render_accuracy_svg(const EvalReport& report);

}  // namespace nmf
