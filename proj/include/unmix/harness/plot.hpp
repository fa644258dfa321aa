#pragma once

// Metric-vs-SNR line charts from summary.csv, rendered as standalone SVG.
// One polyline per (solver, beta); markers carry data-snr / data-value so
// the numbers can be recovered from the file.

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <limits>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "unmix/error.hpp"
#include "unmix/io.hpp"

namespace unmix::harness {

struct Series {
  std::string label;
  std::vector<std::pair<double, double>> points;  // (snr, value), snr ascending
};

struct Chart {
  std::string title;
  std::string y_label;
  std::vector<Series> series;
};

inline std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : line) {
    if (c == ',') {
      out.push_back(io::trim(cur));
      cur.clear();
    } else if (c != '\r') {
      cur.push_back(c);
    }
  }
  out.push_back(io::trim(cur));
  return out;
}

// Reads a long-format summary and groups `column` by method/beta.
inline Chart chart_from_summary(const std::filesystem::path& summary_csv,
                                const std::string& column, const std::string& title) {
  std::ifstream in(summary_csv);
  if (!in) throw DataFormatError("cannot open " + summary_csv.string());
  std::string line;
  if (!std::getline(in, line)) throw DataFormatError(summary_csv.string() + " is empty");
  const auto header = split_csv_line(line);
  auto col = [&](const std::string& name) {
    auto it = std::find(header.begin(), header.end(), name);
    if (it == header.end())
      throw DataFormatError(summary_csv.string() + ": missing column '" + name + "'");
    return static_cast<std::size_t>(it - header.begin());
  };
  const std::size_t c_method = col("method"), c_beta = col("beta"), c_snr = col("snr_db"),
                    c_val = col(column);

  Chart chart;
  chart.title = title;
  chart.y_label = column;
  std::map<std::string, std::size_t> index;
  std::size_t rows = 0;
  while (std::getline(in, line)) {
    if (io::trim(line).empty()) continue;
    const auto f = split_csv_line(line);
    if (f.size() != header.size())
      throw DataFormatError(summary_csv.string() + ": ragged row");
    ++rows;
    const std::string label =
        f[c_beta] == "na" ? f[c_method] : f[c_method] + " beta=" + f[c_beta];
    auto [it, added] = index.try_emplace(label, chart.series.size());
    if (added) chart.series.push_back({label, {}});
    const double snr = io::parse_double(f[c_snr], "snr_db");
    double v = std::numeric_limits<double>::quiet_NaN();
    if (f[c_val] != "nan") v = io::parse_double(f[c_val], column);
    chart.series[it->second].points.emplace_back(snr, v);
  }
  if (rows == 0) throw DataFormatError(summary_csv.string() + " has no data rows");
  for (auto& s : chart.series) std::sort(s.points.begin(), s.points.end());
  return chart;
}

namespace detail {

inline std::string xml_escape(const std::string& s) {
  std::string o;
  for (char c : s) {
    switch (c) {
      case '&': o += "&amp;"; break;
      case '<': o += "&lt;"; break;
      case '>': o += "&gt;"; break;
      case '"': o += "&quot;"; break;
      default: o.push_back(c);
    }
  }
  return o;
}

inline std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.10g", v);
  return buf;
}

inline const char* palette(std::size_t i) {
  static const char* colors[] = {"#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd",
                                 "#8c564b", "#e377c2", "#7f7f7f", "#bcbd22", "#17becf"};
  return colors[i % 10];
}

}  // namespace detail

// Log-scale y axis; non-positive and NaN values are skipped.
inline std::string render_svg(const Chart& chart) {
  constexpr double W = 720, H = 480, left = 80, right = 220, top = 40, bottom = 60;
  double xmin = INFINITY, xmax = -INFINITY, ymin = INFINITY, ymax = -INFINITY;
  for (const auto& s : chart.series)
    for (auto [x, y] : s.points) {
      if (!std::isfinite(x) || !(y > 0.0) || !std::isfinite(y)) continue;
      xmin = std::min(xmin, x);
      xmax = std::max(xmax, x);
      ymin = std::min(ymin, y);
      ymax = std::max(ymax, y);
    }
  if (!std::isfinite(xmin)) throw DataFormatError("nothing to plot: no positive values");
  if (xmax == xmin) {
    xmin -= 1.0;
    xmax += 1.0;
  }
  double ly0 = std::floor(std::log10(ymin)), ly1 = std::ceil(std::log10(ymax));
  if (ly1 == ly0) ly1 += 1.0;
  const double pw = W - left - right, ph = H - top - bottom;
  auto sx = [&](double x) { return left + (x - xmin) / (xmax - xmin) * pw; };
  auto sy = [&](double y) { return top + (ly1 - std::log10(y)) / (ly1 - ly0) * ph; };

  using detail::num;
  std::ostringstream o;
  o << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << W << "\" height=\"" << H
    << "\" viewBox=\"0 0 " << W << " " << H << "\">\n";
  o << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  o << "<text x=\"" << W / 2 << "\" y=\"24\" text-anchor=\"middle\" font-size=\"16\">"
    << detail::xml_escape(chart.title) << "</text>\n";
  o << "<g stroke=\"black\" fill=\"none\"><rect x=\"" << left << "\" y=\"" << top
    << "\" width=\"" << pw << "\" height=\"" << ph << "\"/></g>\n";
  for (double e = ly0; e <= ly1; e += 1.0) {
    const double y = sy(std::pow(10.0, e));
    o << "<line x1=\"" << left << "\" x2=\"" << left + pw << "\" y1=\"" << num(y)
      << "\" y2=\"" << num(y) << "\" stroke=\"#ddd\"/>\n";
    o << "<text x=\"" << left - 6 << "\" y=\"" << num(y + 4)
      << "\" text-anchor=\"end\" font-size=\"11\">1e" << static_cast<int>(e) << "</text>\n";
  }
  std::vector<double> ticks;
  for (const auto& s : chart.series)
    for (auto [x, y] : s.points)
      if (std::find(ticks.begin(), ticks.end(), x) == ticks.end()) ticks.push_back(x);
  for (double x : ticks)
    o << "<text x=\"" << num(sx(x)) << "\" y=\"" << top + ph + 16
      << "\" text-anchor=\"middle\" font-size=\"11\">" << num(x) << "</text>\n";
  o << "<text x=\"" << left + pw / 2 << "\" y=\"" << H - 16
    << "\" text-anchor=\"middle\" font-size=\"13\">SNR (dB)</text>\n";
  o << "<text x=\"18\" y=\"" << top + ph / 2 << "\" text-anchor=\"middle\" font-size=\"13\""
    << " transform=\"rotate(-90 18 " << top + ph / 2 << ")\">"
    << detail::xml_escape(chart.y_label) << "</text>\n";

  for (std::size_t i = 0; i < chart.series.size(); ++i) {
    const auto& s = chart.series[i];
    const char* color = detail::palette(i);
    o << "<g class=\"series\" data-label=\"" << detail::xml_escape(s.label) << "\">\n";
    std::string pts;
    std::size_t drawn = 0;
    for (auto [x, y] : s.points) {
      if (!(y > 0.0) || !std::isfinite(y)) continue;
      pts += num(sx(x)) + "," + num(sy(y)) + " ";
      ++drawn;
    }
    if (drawn > 1)
      o << "<polyline fill=\"none\" stroke=\"" << color << "\" stroke-width=\"1.5\" points=\""
        << pts << "\"/>\n";
    for (auto [x, y] : s.points) {
      if (!(y > 0.0) || !std::isfinite(y)) continue;
      o << "<circle cx=\"" << num(sx(x)) << "\" cy=\"" << num(sy(y)) << "\" r=\"3\" fill=\""
        << color << "\" data-snr=\"" << num(x) << "\" data-value=\"" << num(y) << "\"/>\n";
    }
    const double ly = top + 14 + 18.0 * static_cast<double>(i);
    o << "<line x1=\"" << left + pw + 12 << "\" x2=\"" << left + pw + 32 << "\" y1=\"" << ly
      << "\" y2=\"" << ly << "\" stroke=\"" << color << "\" stroke-width=\"2\"/>\n";
    o << "<text x=\"" << left + pw + 38 << "\" y=\"" << ly + 4 << "\" font-size=\"11\">"
      << detail::xml_escape(s.label) << "</text>\n";
    o << "</g>\n";
  }
  o << "</svg>\n";
  return o.str();
}

struct PlotFiles {
  static constexpr const char* kMse = "mse_abundance.svg";
  static constexpr const char* kRecon = "mse_reconstruction.svg";
  static constexpr const char* kAad = "aad_rad.svg";
};

inline std::vector<std::filesystem::path> plot_sweep(const std::filesystem::path& summary_csv,
                                                     const std::filesystem::path& out_dir) {
  const std::pair<const char*, std::pair<const char*, const char*>> specs[] = {
      {PlotFiles::kMse, {"mean_mse_abundance", "Abundance MSE vs SNR"}},
      {PlotFiles::kRecon, {"mean_mse_reconstruction", "Reconstruction MSE vs SNR"}},
      {PlotFiles::kAad, {"mean_aad_rad", "Abundance angle distance (rad) vs SNR"}},
  };
  std::vector<Chart> charts;
  for (const auto& [file, s] : specs)
    charts.push_back(chart_from_summary(summary_csv, s.first, s.second));
  std::filesystem::create_directories(out_dir);
  std::vector<std::filesystem::path> written;
  for (std::size_t i = 0; i < charts.size(); ++i) {
    const auto path = out_dir / specs[i].first;
    io::write_text(path, render_svg(charts[i]));
    written.push_back(path);
  }
  return written;
}

}  // namespace unmix::harness
