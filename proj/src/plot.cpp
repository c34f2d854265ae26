#include "previts/plot.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <map>
#include <sstream>
#include <stdexcept>

namespace previts {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr int kWidth = 640, kHeight = 400;
constexpr int kLeft = 60, kRight = 20, kTop = 40, kBottom = 70;
constexpr const char* kPalette[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b"};

std::string num(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.2f", v);
    return buf;
}

std::string escape(const std::string& s) {
    std::string out;
    for (char c : s) {
        if (c == '<') out += "&lt;";
        else if (c == '>') out += "&gt;";
        else if (c == '&') out += "&amp;";
        else out += c;
    }
    return out;
}

struct Frame {
    Axes ax;
    double px(double x) const {
        return kLeft + (x - ax.x_min) / (ax.x_max - ax.x_min) * (kWidth - kLeft - kRight);
    }
    double py(double y) const {
        return kHeight - kBottom - (y - ax.y_min) / (ax.y_max - ax.y_min) * (kHeight - kTop - kBottom);
    }
};

void open_svg(std::ostringstream& os, const std::string& title) {
    os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << kWidth << "\" height=\"" << kHeight
       << "\" font-family=\"sans-serif\" font-size=\"11\">\n"
       << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n"
       << "<text x=\"" << kWidth / 2 << "\" y=\"20\" text-anchor=\"middle\" font-size=\"14\">" << escape(title)
       << "</text>\n";
}

void y_axis(std::ostringstream& os, const Frame& f) {
    os << "<line x1=\"" << kLeft << "\" y1=\"" << kTop << "\" x2=\"" << kLeft << "\" y2=\"" << kHeight - kBottom
       << "\" stroke=\"black\"/>\n";
    os << "<line x1=\"" << kLeft << "\" y1=\"" << kHeight - kBottom << "\" x2=\"" << kWidth - kRight << "\" y2=\""
       << kHeight - kBottom << "\" stroke=\"black\"/>\n";
    for (int i = 0; i <= 4; ++i) {
        const double v = f.ax.y_min + (f.ax.y_max - f.ax.y_min) * i / 4.0;
        os << "<text x=\"" << kLeft - 6 << "\" y=\"" << num(f.py(v) + 4) << "\" text-anchor=\"end\">" << num(v)
           << "</text>\n";
        os << "<line x1=\"" << kLeft << "\" y1=\"" << num(f.py(v)) << "\" x2=\"" << kWidth - kRight << "\" y2=\""
           << num(f.py(v)) << "\" stroke=\"#ddd\"/>\n";
    }
}

}  // namespace

Axes axes_for(const std::vector<Series>& series, bool include_zero) {
    const double inf = std::numeric_limits<double>::infinity();
    Axes a{inf, -inf, inf, -inf};
    for (const auto& s : series) {
        for (double x : s.x) a.x_min = std::min(a.x_min, x), a.x_max = std::max(a.x_max, x);
        for (double y : s.y) a.y_min = std::min(a.y_min, y), a.y_max = std::max(a.y_max, y);
    }
    if (!std::isfinite(a.x_min) || !std::isfinite(a.y_min)) throw std::invalid_argument("nothing to plot");
    if (include_zero) a.y_min = std::min(a.y_min, 0.0), a.y_max = std::max(a.y_max, 0.0);
    if (a.x_max == a.x_min) a.x_max += 1.0;
    if (a.y_max == a.y_min) a.y_max += 1.0;
    return a;
}

std::string svg_bar_chart(const std::string& title, const std::vector<std::pair<std::string, double>>& bars) {
    if (bars.empty()) throw std::invalid_argument("bar chart needs at least one bar");
    Series s;
    for (std::size_t i = 0; i < bars.size(); ++i) {
        s.x.push_back(static_cast<double>(i));
        s.y.push_back(bars[i].second);
    }
    Frame f{axes_for({s}, true)};
    f.ax.x_min = -0.5;
    f.ax.x_max = static_cast<double>(bars.size()) - 0.5;

    std::ostringstream os;
    open_svg(os, title);
    y_axis(os, f);
    const double w = 0.7 * (kWidth - kLeft - kRight) / static_cast<double>(bars.size());
    for (std::size_t i = 0; i < bars.size(); ++i) {
        const double cx = f.px(static_cast<double>(i));
        const double top = f.py(std::max(0.0, bars[i].second)), base = f.py(std::min(0.0, bars[i].second));
        os << "<rect x=\"" << num(cx - w / 2) << "\" y=\"" << num(top) << "\" width=\"" << num(w) << "\" height=\""
           << num(base - top) << "\" fill=\"" << kPalette[0] << "\"/>\n";
        os << "<text x=\"" << num(cx) << "\" y=\"" << num(top - 4) << "\" text-anchor=\"middle\">"
           << num(bars[i].second) << "</text>\n";
        os << "<text x=\"" << num(cx) << "\" y=\"" << kHeight - kBottom + 16 << "\" text-anchor=\"middle\">"
           << escape(bars[i].first) << "</text>\n";
    }
    os << "</svg>\n";
    return os.str();
}

std::string svg_line_chart(const std::string& title, const std::string& x_label, const std::vector<Series>& series) {
    if (series.empty()) throw std::invalid_argument("line chart needs at least one series");
    for (const auto& s : series)
        if (s.x.size() != s.y.size()) throw std::invalid_argument("series '" + s.name + "' has mismatched x/y");
    const Frame f{axes_for(series, false)};

    std::ostringstream os;
    open_svg(os, title);
    y_axis(os, f);
    for (int i = 0; i <= 4; ++i) {
        const double v = f.ax.x_min + (f.ax.x_max - f.ax.x_min) * i / 4.0;
        os << "<text x=\"" << num(f.px(v)) << "\" y=\"" << kHeight - kBottom + 16 << "\" text-anchor=\"middle\">"
           << num(v) << "</text>\n";
    }
    os << "<text x=\"" << (kWidth + kLeft) / 2 << "\" y=\"" << kHeight - kBottom + 34 << "\" text-anchor=\"middle\">"
       << escape(x_label) << "</text>\n";
    for (std::size_t k = 0; k < series.size(); ++k) {
        const char* colour = kPalette[k % std::size(kPalette)];
        os << "<polyline fill=\"none\" stroke=\"" << colour << "\" stroke-width=\"1.5\" points=\"";
        for (std::size_t i = 0; i < series[k].x.size(); ++i) {
            if (i) os << ' ';
            os << num(f.px(series[k].x[i])) << ',' << num(f.py(series[k].y[i]));
        }
        os << "\"/>\n";
        const int ly = kHeight - 20;
        const int lx = kLeft + static_cast<int>(k) * 120;
        os << "<rect x=\"" << lx << "\" y=\"" << ly - 9 << "\" width=\"10\" height=\"10\" fill=\"" << colour
           << "\"/>\n<text x=\"" << lx + 14 << "\" y=\"" << ly << "\">" << escape(series[k].name) << "</text>\n";
    }
    os << "</svg>\n";
    return os.str();
}

namespace {

std::string plot_one(const fs::path& input) {
    std::ifstream in(input);
    if (!in) throw std::runtime_error("cannot read " + input.string());
    std::stringstream ss;
    ss << in.rdbuf();
    const std::string text = ss.str();
    const std::string stem = input.stem().string();

    if (input.extension() == ".jsonl") {
        std::vector<Series> s{{"total", {}, {}}, {"l_moco", {}, {}}, {"l_speed", {}, {}}, {"l_att", {}, {}}};
        std::istringstream lines(text);
        std::string line;
        while (std::getline(lines, line)) {
            if (line.empty()) continue;
            const auto j = json::parse(line);
            for (auto& series : s) {
                series.x.push_back(j.at("step").get<double>());
                series.y.push_back(j.at(series.name).get<double>());
            }
        }
        if (s[0].x.empty()) throw std::invalid_argument(input.string() + " holds no records");
        return svg_line_chart("losses: " + stem, "step", s);
    }

    const auto j = json::parse(text);
    if (j.contains("accuracy")) {
        std::vector<std::pair<std::string, double>> bars;
        for (const auto& [k, v] : j.at("accuracy").items()) bars.emplace_back(k, v.get<double>());
        return svg_bar_chart("linear probe accuracy: " + stem, bars);
    }
    if (j.contains("top_k")) {
        std::vector<std::pair<std::string, double>> bars;
        for (const auto& [k, v] : j.at("top_k").items()) bars.emplace_back("top-" + k, v.get<double>());
        std::sort(bars.begin(), bars.end(), [](const auto& a, const auto& b) {
            return std::stoi(a.first.substr(4)) < std::stoi(b.first.substr(4));
        });
        return svg_bar_chart("retrieval: " + stem, bars);
    }
    if (j.contains("per_video")) {
        std::vector<double> sum, count;
        for (const auto& seq : j.at("per_video")) {
            for (std::size_t k = 0; k < seq.size(); ++k) {
                if (sum.size() <= k) sum.resize(k + 1, 0.0), count.resize(k + 1, 0.0);
                sum[k] += seq[k].get<double>();
                count[k] += 1.0;
            }
        }
        if (sum.empty()) throw std::invalid_argument(input.string() + " holds no sequences");
        Series s{"mean J", {}, {}};
        for (std::size_t k = 0; k < sum.size(); ++k) {
            s.x.push_back(static_cast<double>(k + 1));
            s.y.push_back(sum[k] / count[k]);
        }
        return svg_line_chart("region similarity over time: " + stem, "frame", {s});
    }
    throw std::invalid_argument(input.string() + " is not a recognised report");
}

}  // namespace

std::vector<fs::path> plot_reports(const std::vector<fs::path>& inputs, const fs::path& out_dir) {
    if (inputs.empty()) throw std::invalid_argument("plot needs at least one report");
    fs::create_directories(out_dir);
    std::vector<fs::path> out;
    std::map<std::string, int> used;
    for (const auto& input : inputs) {
        const std::string svg = plot_one(input);
        std::string name = input.stem().string();
        if (const int n = used[name]++; n > 0) name += "_" + std::to_string(n + 1);
        const fs::path path = out_dir / (name + ".svg");
        std::ofstream f(path, std::ios::binary);
        if (!f) throw std::runtime_error("cannot write " + path.string());
        f << svg;
        out.push_back(path);
    }
    return out;
}

}  // namespace previts
