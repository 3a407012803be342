#pragma once

// Static plot output: a tidy long-format CSV of every trace and one SVG line
// chart per (dataset, spectrum) with log-scale suboptimality.

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <regex>
#include <sstream>
#include <string>
#include <vector>

#include "sorel/trace.hpp"

namespace sorel {

struct TraceFileInfo {
  std::filesystem::path path;
  std::string dataset, spectrum, method;
  std::uint64_t seed = 0;
};

/// Splits "{dataset}__{spectrum}__{method}__seed{N}.csv".
inline std::optional<TraceFileInfo> parse_trace_name(const std::filesystem::path& path) {
  static const std::regex pattern(R"(^(.+?)__(.+?)__(.+?)__seed(\d+)\.csv$)");
  std::smatch m;
  const std::string name = path.filename().string();
  if (!std::regex_match(name, m, pattern)) return std::nullopt;
  return TraceFileInfo{path, m[1], m[2], m[3], std::stoull(m[4])};
}

inline std::vector<TraceFileInfo> discover_traces(const std::filesystem::path& dir) {
  if (!std::filesystem::is_directory(dir))
    throw std::runtime_error("trace directory '" + dir.string() + "' does not exist");
  std::vector<TraceFileInfo> out;
  for (const auto& entry : std::filesystem::directory_iterator(dir))
    if (entry.is_regular_file())
      if (auto info = parse_trace_name(entry.path())) out.push_back(*info);
  std::sort(out.begin(), out.end(), [](const TraceFileInfo& a, const TraceFileInfo& b) {
    return a.path < b.path;
  });
  return out;
}

enum class XAxis { passes, seconds };

inline XAxis x_axis_from_string(const std::string& s) {
  if (s == "passes") return XAxis::passes;
  if (s == "seconds") return XAxis::seconds;
  throw std::invalid_argument("x axis must be 'passes' or 'seconds', got '" + s + "'");
}

struct PlotOptions {
  XAxis x = XAxis::passes;
  double floor = 1e-12;
  std::filesystem::path out_dir;  // empty: next to the first trace
};

struct PlotOutputs {
  std::filesystem::path table;
  std::vector<std::filesystem::path> charts;
};

namespace detail {

struct Series {
  std::string method;
  std::vector<double> x, y;
  std::vector<bool> clamped;
};

inline std::string svg_escape(const std::string& s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      default: out += c;
    }
  }
  return out;
}

inline std::string fmt(double v) {
  std::ostringstream os;
  os.precision(4);
  os << v;
  return os.str();
}

inline void write_svg(const std::filesystem::path& path, const std::string& title,
                      const std::vector<Series>& series, const PlotOptions& opt) {
  static const char* palette[] = {"#1f77b4", "#d62728", "#2ca02c", "#ff7f0e",
                                  "#9467bd", "#8c564b", "#e377c2", "#17becf"};
  const double W = 720, H = 460, left = 80, right = 170, top = 40, bottom = 70;
  const double pw = W - left - right, ph = H - top - bottom;

  double xmax = 0.0, ymax = opt.floor * 10.0;
  bool any_clamped = false;
  for (const auto& s : series) {
    for (double v : s.x) xmax = std::max(xmax, v);
    for (double v : s.y) ymax = std::max(ymax, v);
    any_clamped = any_clamped || std::any_of(s.clamped.begin(), s.clamped.end(), [](bool b) { return b; });
  }
  if (xmax <= 0.0) xmax = 1.0;
  const int dlo = static_cast<int>(std::floor(std::log10(opt.floor)));
  const int dhi = std::max(dlo + 1, static_cast<int>(std::ceil(std::log10(ymax))));
  auto px = [&](double x) { return left + pw * x / xmax; };
  auto py = [&](double y) {
    return top + ph * (1.0 - (std::log10(y) - dlo) / static_cast<double>(dhi - dlo));
  };

  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write chart " + path.string());
  out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << W << "\" height=\"" << H
      << "\" font-family=\"sans-serif\" font-size=\"12\">\n";
  out << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  out << "<text x=\"" << left + pw / 2 << "\" y=\"22\" text-anchor=\"middle\" font-size=\"14\">"
      << svg_escape(title) << "</text>\n";
  out << "<rect x=\"" << left << "\" y=\"" << top << "\" width=\"" << pw << "\" height=\"" << ph
      << "\" fill=\"none\" stroke=\"black\"/>\n";

  const int step = std::max(1, (dhi - dlo + 7) / 8);
  for (int e = dlo; e <= dhi; e += step) {
    const double y = py(std::pow(10.0, e));
    out << "<line x1=\"" << left << "\" x2=\"" << left + pw << "\" y1=\"" << y << "\" y2=\"" << y
        << "\" stroke=\"#ddd\"/>\n";
    out << "<text x=\"" << left - 6 << "\" y=\"" << y + 4 << "\" text-anchor=\"end\">1e" << e
        << "</text>\n";
  }
  for (int i = 0; i <= 5; ++i) {
    const double xv = xmax * i / 5.0;
    out << "<text x=\"" << px(xv) << "\" y=\"" << top + ph + 16 << "\" text-anchor=\"middle\">"
        << fmt(xv) << "</text>\n";
  }
  out << "<text x=\"" << left + pw / 2 << "\" y=\"" << top + ph + 36
      << "\" text-anchor=\"middle\">" << (opt.x == XAxis::passes ? "passes" : "seconds")
      << "</text>\n";
  out << "<text transform=\"translate(18," << top + ph / 2
      << ") rotate(-90)\" text-anchor=\"middle\">suboptimality</text>\n";

  for (std::size_t si = 0; si < series.size(); ++si) {
    const auto& s = series[si];
    const char* color = palette[si % 8];
    out << "<polyline fill=\"none\" stroke=\"" << color << "\" stroke-width=\"1.5\" points=\"";
    for (std::size_t i = 0; i < s.x.size(); ++i) out << px(s.x[i]) << ',' << py(s.y[i]) << ' ';
    out << "\"/>\n";
    for (std::size_t i = 0; i < s.x.size(); ++i)
      if (s.clamped[i])
        out << "<circle cx=\"" << px(s.x[i]) << "\" cy=\"" << py(s.y[i])
            << "\" r=\"2.5\" fill=\"none\" stroke=\"" << color << "\"/>\n";
    const double ly = top + 14 + 18.0 * static_cast<double>(si);
    out << "<line x1=\"" << left + pw + 12 << "\" x2=\"" << left + pw + 36 << "\" y1=\"" << ly - 4
        << "\" y2=\"" << ly - 4 << "\" stroke=\"" << color << "\" stroke-width=\"2\"/>\n";
    out << "<text x=\"" << left + pw + 42 << "\" y=\"" << ly << "\">" << svg_escape(s.method)
        << "</text>\n";
  }
  if (any_clamped)
    out << "<text x=\"" << left << "\" y=\"" << H - 10 << "\" font-size=\"11\">"
        << "* circles mark values at or below " << fmt(opt.floor)
        << " (including negative suboptimality) drawn at the floor</text>\n";
  out << "</svg>\n";
}

}  // namespace detail

/// Writes traces_long.csv and one chart per (dataset, spectrum). Seeds of the
/// same method are averaged row by row.
inline PlotOutputs emit_plots(const std::vector<TraceFileInfo>& traces,
                              const PlotOptions& opt = {}) {
  if (traces.empty()) throw std::invalid_argument("emit_plots: no trace files");
  require(opt.floor > 0.0, "emit_plots: floor must be positive");
  const std::filesystem::path dir =
      opt.out_dir.empty() ? traces.front().path.parent_path() : opt.out_dir;
  if (!dir.empty()) std::filesystem::create_directories(dir);

  PlotOutputs outputs;
  outputs.table = dir / "traces_long.csv";
  std::ofstream table(outputs.table);
  if (!table) throw std::runtime_error("cannot write " + outputs.table.string());
  table << "dataset,spectrum,method,seed," << kTraceHeader << '\n';
  table.precision(17);

  using Key = std::pair<std::string, std::string>;
  std::map<Key, std::map<std::string, std::vector<TrainingTrace>>> groups;
  for (const auto& info : traces) {
    TrainingTrace t = TrainingTrace::read_csv(info.path);
    for (const auto& r : t.rows()) {
      table << info.dataset << ',' << info.spectrum << ',' << info.method << ',' << info.seed
            << ',' << r.k << ',' << r.passes << ',' << r.seconds << ',' << r.objective << ',';
      if (!std::isnan(r.subopt)) table << r.subopt;
      table << '\n';
    }
    groups[{info.dataset, info.spectrum}][info.method].push_back(std::move(t));
  }

  for (const auto& [key, methods] : groups) {
    std::vector<detail::Series> series;
    for (const auto& [method, runs] : methods) {
      detail::Series s{method, {}, {}, {}};
      std::size_t len = runs.front().size();
      for (const auto& r : runs) len = std::min(len, r.size());
      for (std::size_t i = 0; i < len; ++i) {
        double x = 0.0, y = 0.0;
        bool pending = false;
        for (const auto& r : runs) {
          const auto& row = r.rows()[i];
          x += (opt.x == XAxis::passes ? row.passes : row.seconds);
          y += row.subopt;
          pending = pending || std::isnan(row.subopt);
        }
        if (pending) continue;
        x /= static_cast<double>(runs.size());
        y /= static_cast<double>(runs.size());
        const bool clamp = !(y > opt.floor);
        s.x.push_back(x);
        s.y.push_back(clamp ? opt.floor : y);
        s.clamped.push_back(clamp);
      }
      series.push_back(std::move(s));
    }
    const auto chart = dir / ("plot__" + key.first + "__" + key.second + ".svg");
    detail::write_svg(chart, key.first + " / " + key.second, series, opt);
    outputs.charts.push_back(chart);
  }
  return outputs;
}

}  // namespace sorel
