#include "nmf/plot.hpp"

#include <algorithm>
#include <array>
#include <fstream>
#include <map>
#include <sstream>

#include "nmf/errors.hpp"

namespace nmf {

namespace {

std::vector<std::string> split(const std::string& line, char sep) {
  std::vector<std::string> fields;
  std::string field;
  std::istringstream in(line);
  while (std::getline(in, field, sep)) fields.push_back(field);
  if (!line.empty() && line.back() == sep) fields.emplace_back();
  return fields;
}

double parse_number(const std::string& text, const std::string& where) {
  try {
    std::size_t used = 0;
    const double v = std::stod(text, &used);
    if (used != text.size()) throw std::invalid_argument(text);
    return v;
  } catch (const std::exception&) {
    throw FormatError(where + ": '" + text + "' is not a number");
  }
}

}  // namespace

EvalReport read_report_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw FormatError("cannot open report " + path.string());
  std::string line;
  if (!std::getline(in, line) || line != kReportCsvHeader) {
    throw FormatError(path.string() + ": header must be exactly '" + std::string(kReportCsvHeader) + "'");
  }
  EvalReport report;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    const std::string where = path.string() + ":" + std::to_string(line_no);
    const auto fields = split(line, ',');
    if (fields.size() != 6) throw FormatError(where + ": expected 6 fields, got " + std::to_string(fields.size()));
    EvalRow row;
    row.variant = fields[0];
    row.seed = static_cast<std::uint64_t>(parse_number(fields[1], where));
    row.observed_frac = parse_number(fields[2], where);
    row.predicted_frac = parse_number(fields[3], where);
    row.accuracy = parse_number(fields[4], where);
    row.num_sequences = static_cast<std::size_t>(parse_number(fields[5], where));
    report.rows.push_back(row);
  }
  return report;
}

std::string render_accuracy_svg(const EvalReport& report) {
  // (variant, observed) -> predicted -> (sum, count)
  std::map<std::pair<std::string, double>, std::map<double, std::pair<double, int>>> series;
  for (const auto& row : report.rows) {
    auto& cell = series[{row.variant, row.observed_frac}][row.predicted_frac];
    cell.first += row.accuracy;
    cell.second += 1;
  }
  double x_max = 0.0;
  for (const auto& [key, points] : series)
    for (const auto& [x, acc] : points) x_max = std::max(x_max, x);
  if (x_max <= 0.0) x_max = 1.0;

  constexpr double width = 640, height = 420, left = 60, right = 170, top = 30, bottom = 50;
  const double plot_w = width - left - right;
  const double plot_h = height - top - bottom;
  auto px = [&](double x) { return left + plot_w * x / x_max; };
  auto py = [&](double y) { return top + plot_h * (1.0 - y); };
  static const std::array<const char*, 8> palette{"#1f77b4", "#ff7f0e", "#2ca02c", "#d62728",
                                                  "#9467bd", "#8c564b", "#e377c2", "#7f7f7f"};

  std::ostringstream svg;
  svg << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width << "\" height=\"" << height << "\">\n";
  svg << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  svg << "<line x1=\"" << left << "\" y1=\"" << py(0) << "\" x2=\"" << left + plot_w << "\" y2=\"" << py(0)
      << "\" stroke=\"black\"/>\n";
  svg << "<line x1=\"" << left << "\" y1=\"" << py(0) << "\" x2=\"" << left << "\" y2=\"" << py(1)
      << "\" stroke=\"black\"/>\n";
  for (int tick = 0; tick <= 4; ++tick) {
    const double y = tick / 4.0;
    svg << "<text x=\"" << left - 8 << "\" y=\"" << py(y) + 4 << "\" font-size=\"11\" text-anchor=\"end\">" << y
        << "</text>\n";
  }
  svg << "<text x=\"" << left + plot_w / 2 << "\" y=\"" << height - 12
      << "\" font-size=\"12\" text-anchor=\"middle\">predicted fraction</text>\n";
  svg << "<text x=\"16\" y=\"" << top + plot_h / 2 << "\" font-size=\"12\" transform=\"rotate(-90 16 "
      << top + plot_h / 2 << ")\" text-anchor=\"middle\">accuracy</text>\n";

  std::size_t index = 0;
  for (const auto& [key, points] : series) {
    const char* colour = palette[index % palette.size()];
    svg << "<polyline fill=\"none\" stroke=\"" << colour << "\" stroke-width=\"2\" points=\"";
    for (const auto& [x, acc] : points) svg << px(x) << ',' << py(acc.first / acc.second) << ' ';
    svg << "\"/>\n";
    for (const auto& [x, acc] : points) {
      svg << "<circle cx=\"" << px(x) << "\" cy=\"" << py(acc.first / acc.second) << "\" r=\"3\" fill=\"" << colour
          << "\"/>\n";
      svg << "<text x=\"" << px(x) << "\" y=\"" << py(0) + 16 << "\" font-size=\"11\" text-anchor=\"middle\">" << x
          << "</text>\n";
    }
    svg << "<text x=\"" << left + plot_w + 12 << "\" y=\"" << top + 16 * (index + 1) << "\" font-size=\"12\" fill=\""
        << colour << "\">" << key.first << " (obs " << key.second << ")</text>\n";
    ++index;
  }
  svg << "</svg>\n";
  return svg.str();
}

}  // namespace nmf
