#pragma once

// Static SVG figures: bar chart of a backgrounds report, mean-J-over-time curves
// of a tracking report, loss curves of a metrics stream. Output bytes depend only
// on the input values.

#include <filesystem>
#include <map>
#include <string>
#include <vector>

namespace previts {

struct Series {
    std::string name;
    std::vector<double> x, y;
};

struct Axes {
    double x_min = 0, x_max = 1, y_min = 0, y_max = 1;
};

// Covers every point; a degenerate range is widened by one unit.
Axes axes_for(const std::vector<Series>& series, bool include_zero);

std::string svg_bar_chart(const std::string& title, const std::vector<std::pair<std::string, double>>& bars);
std::string svg_line_chart(const std::string& title, const std::string& x_label, const std::vector<Series>& series);

// Detects the report kind (backgrounds JSON, tracking JSON, or metrics.jsonl) and
// writes <stem>.svg into out_dir, one file per input. Throws std::invalid_argument
// on an empty input list or an unrecognised report.
std::vector<std::filesystem::path> plot_reports(const std::vector<std::filesystem::path>& inputs,
                                                const std::filesystem::path& out_dir);

}  // namespace previts
