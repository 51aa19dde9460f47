#pragma once

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>
#include <string>
#include <vector>

#include "gflow/error.hpp"
#include "gflow/experiments/csv.hpp"

namespace gflow::experiments {

class MissingColumnError : public Error {
public:
  explicit MissingColumnError(const std::string& name) : Error("trace has no column '" + name + "'") {}
};

struct Series {
  std::string label;
  std::vector<double> x;
  std::vector<double> y;
};

struct PlotSpec {
  std::string title;
  std::string x_label = "x";
  std::string y_label = "y";
  bool log_y = false;
  int width = 640;
  int height = 400;
};

namespace detail {

inline std::string fmt(double v) {
  // fixed precision keeps coordinates short and stable
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", v);
  return buf;
}

inline std::string tick_label(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.3g", v);
  return buf;
}

inline std::string escape_xml(const std::string& s) {
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

inline const char* palette(std::size_t i) {
  static const char* colors[] = {"#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b"};
  return colors[i % 6];
}

} // namespace detail

/// Deterministic line plot. Empty input yields a valid document with axes only.
inline std::string render_svg(const std::vector<Series>& series, const PlotSpec& spec) {
  const double left = 70.0;
  const double right = 20.0;
  const double top = 40.0;
  const double bottom = 50.0;
  const double pw = spec.width - left - right;
  const double ph = spec.height - top - bottom;

  const auto ty = [&](double y) { return spec.log_y ? std::log10(y) : y; };
  double xmin = std::numeric_limits<double>::infinity();
  double xmax = -xmin;
  double ymin = xmin;
  double ymax = -xmin;
  for (const auto& s : series) {
    for (std::size_t i = 0; i < std::min(s.x.size(), s.y.size()); ++i) {
      if (!std::isfinite(s.x[i]) || !std::isfinite(s.y[i]) || (spec.log_y && !(s.y[i] > 0.0))) continue;
      xmin = std::min(xmin, s.x[i]);
      xmax = std::max(xmax, s.x[i]);
      ymin = std::min(ymin, ty(s.y[i]));
      ymax = std::max(ymax, ty(s.y[i]));
    }
  }
  if (!std::isfinite(xmin)) {
    xmin = 0.0;
    xmax = 1.0;
    ymin = 0.0;
    ymax = 1.0;
  }
  if (xmax == xmin) xmax = xmin + 1.0;
  if (ymax == ymin) {
    ymin -= 0.5;
    ymax += 0.5;
  }
  const auto px = [&](double x) { return left + (x - xmin) / (xmax - xmin) * pw; };
  const auto py = [&](double y) { return top + (1.0 - (ty(y) - ymin) / (ymax - ymin)) * ph; };
  const auto py_raw = [&](double t) { return top + (1.0 - (t - ymin) / (ymax - ymin)) * ph; };

  std::ostringstream os;
  os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << spec.width << "\" height=\"" << spec.height
     << "\" viewBox=\"0 0 " << spec.width << ' ' << spec.height << "\">\n";
  os << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  if (!spec.title.empty())
    os << "<text x=\"" << detail::fmt(spec.width / 2.0) << "\" y=\"22\" text-anchor=\"middle\" font-size=\"15\">"
       << detail::escape_xml(spec.title) << "</text>\n";

  os << "<g stroke=\"black\" stroke-width=\"1\">\n";
  os << "<line x1=\"" << detail::fmt(left) << "\" y1=\"" << detail::fmt(top + ph) << "\" x2=\"" << detail::fmt(left + pw)
     << "\" y2=\"" << detail::fmt(top + ph) << "\"/>\n";
  os << "<line x1=\"" << detail::fmt(left) << "\" y1=\"" << detail::fmt(top) << "\" x2=\"" << detail::fmt(left)
     << "\" y2=\"" << detail::fmt(top + ph) << "\"/>\n";
  os << "</g>\n";

  os << "<g font-size=\"11\" fill=\"black\">\n";
  const int ticks = 5;
  for (int k = 0; k <= ticks; ++k) {
    const double fx = xmin + (xmax - xmin) * k / ticks;
    const double fy = ymin + (ymax - ymin) * k / ticks;
    const double yv = spec.log_y ? std::pow(10.0, fy) : fy;
    os << "<text x=\"" << detail::fmt(px(fx)) << "\" y=\"" << detail::fmt(top + ph + 16)
       << "\" text-anchor=\"middle\">" << detail::tick_label(fx) << "</text>\n";
    os << "<text x=\"" << detail::fmt(left - 6) << "\" y=\"" << detail::fmt(py_raw(fy) + 4)
       << "\" text-anchor=\"end\">" << detail::tick_label(yv) << "</text>\n";
  }
  os << "<text x=\"" << detail::fmt(left + pw / 2) << "\" y=\"" << detail::fmt(spec.height - 12.0)
     << "\" text-anchor=\"middle\">" << detail::escape_xml(spec.x_label) << "</text>\n";
  os << "<text x=\"16\" y=\"" << detail::fmt(top + ph / 2) << "\" text-anchor=\"middle\" transform=\"rotate(-90 16 "
     << detail::fmt(top + ph / 2) << ")\">" << detail::escape_xml(spec.y_label) << "</text>\n";
  os << "</g>\n";

  for (std::size_t s = 0; s < series.size(); ++s) {
    os << "<polyline fill=\"none\" stroke=\"" << detail::palette(s) << "\" stroke-width=\"1.5\" points=\"";
    bool first = true;
    const auto& sr = series[s];
    for (std::size_t i = 0; i < std::min(sr.x.size(), sr.y.size()); ++i) {
      if (!std::isfinite(sr.x[i]) || !std::isfinite(sr.y[i]) || (spec.log_y && !(sr.y[i] > 0.0))) continue;
      if (!first) os << ' ';
      os << detail::fmt(px(sr.x[i])) << ',' << detail::fmt(py(sr.y[i]));
      first = false;
    }
    os << "\"/>\n";
  }

  if (!series.empty()) {
    os << "<g font-size=\"11\">\n";
    for (std::size_t s = 0; s < series.size(); ++s) {
      const double ly = top + 10 + 16.0 * static_cast<double>(s);
      const double lx = left + pw - 150;
      os << "<line x1=\"" << detail::fmt(lx) << "\" y1=\"" << detail::fmt(ly) << "\" x2=\"" << detail::fmt(lx + 20)
         << "\" y2=\"" << detail::fmt(ly) << "\" stroke=\"" << detail::palette(s) << "\" stroke-width=\"2\"/>\n";
      os << "<text x=\"" << detail::fmt(lx + 26) << "\" y=\"" << detail::fmt(ly + 4) << "\">"
         << detail::escape_xml(series[s].label) << "</text>\n";
    }
    os << "</g>\n";
  }
  os << "</svg>\n";
  return os.str();
}

/// Plots y_columns against x_column of one CSV trace.
inline std::string svg_from_csv(std::string_view csv_text, const std::string& x_column,
                                const std::vector<std::string>& y_columns, PlotSpec spec) {
  const auto cols = parse_numeric_csv(csv_text);
  if (!cols.names.empty() && !cols.has(x_column)) throw MissingColumnError(x_column);
  std::vector<Series> series;
  for (const auto& y : y_columns) {
    if (cols.names.empty()) break;
    if (!cols.has(y)) throw MissingColumnError(y);
    series.push_back({y, cols.column(x_column), cols.column(y)});
  }
  return render_svg(series, spec);
}

struct LabeledTrace {
  std::string label;
  std::string csv_text;
};

/// One series per trace, all drawn from the same (x, y) columns, with a legend.
inline std::string svg_from_traces(const std::vector<LabeledTrace>& traces, const std::string& x_column,
                                   const std::string& y_column, PlotSpec spec) {
  std::vector<Series> series;
  for (const auto& t : traces) {
    const auto cols = parse_numeric_csv(t.csv_text);
    if (!cols.has(x_column)) throw MissingColumnError(x_column);
    if (!cols.has(y_column)) throw MissingColumnError(y_column);
    series.push_back({t.label, cols.column(x_column), cols.column(y_column)});
  }
  return render_svg(series, spec);
}

inline void save_text(const std::string& path, const std::string& text) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("cannot open " + path + " for writing");
  os << text;
}

} // namespace gflow::experiments
