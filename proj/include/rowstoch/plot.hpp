#pragma once

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <string>
#include <utility>
#include <vector>

#include "rowstoch/analysis.hpp"
#include "rowstoch/errors.hpp"

namespace rowstoch {

namespace detail {

inline const std::vector<std::string>& plot_palette() {
  static const std::vector<std::string> palette = {
      "#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b"};
  return palette;
}

inline std::string xml_escape(const std::string& s) {
  std::string out;
  out.reserve(s.size());
  for (char ch : s) {
    switch (ch) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      default: out += ch;
    }
  }
  return out;
}

inline std::string coord(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.8f", v);
  return buf;
}

inline double nice_step(double raw) {
  const double mag = std::pow(10.0, std::floor(std::log10(raw)));
  const double r = raw / mag;
  const double f = r <= 1.0 ? 1.0 : r <= 2.0 ? 2.0 : r <= 5.0 ? 5.0 : 10.0;
  return f * mag;
}

}  // namespace detail

/// Renders the residual curves of one or more traces as an SVG line chart
/// with a log-scale vertical axis. Records with nonpositive residuals are
/// skipped (they have no logarithm); throws MalformedTrace when nothing
/// remains to draw. Long series are downsampled to a fixed point budget so
/// the output stays small.
inline std::string render_convergence_svg(
    const std::vector<ConvergenceTrace>& traces,
    const std::vector<std::string>& labels = {},
    const std::string& title = "residual vs iteration") {
  struct Series {
    std::string label;
    std::vector<std::pair<double, double>> pts;  // (k, log10 residual)
  };
  std::vector<Series> series;
  double xmin = std::numeric_limits<double>::infinity(), xmax = -xmin;
  double ymin = xmin, ymax = -xmin;
  for (std::size_t i = 0; i < traces.size(); ++i) {
    Series s;
    if (i < labels.size() && !labels[i].empty()) {
      s.label = labels[i];
    } else {
      char buf[96];
      std::snprintf(buf, sizeof buf, "%s@%g", traces[i].algorithm.c_str(),
                    traces[i].alpha);
      s.label = buf;
    }
    for (const auto& r : traces[i].records) {
      if (!(r.residual2 > 0.0) || !std::isfinite(r.residual2)) continue;
      const double x = static_cast<double>(r.k);
      const double y = std::log10(r.residual2);
      s.pts.emplace_back(x, y);
      xmin = std::min(xmin, x);
      xmax = std::max(xmax, x);
      ymin = std::min(ymin, y);
      ymax = std::max(ymax, y);
    }
    constexpr std::size_t kBudget = 2000;
    if (s.pts.size() > kBudget) {
      std::vector<std::pair<double, double>> kept;
      const std::size_t stride = (s.pts.size() + kBudget - 1) / kBudget;
      for (std::size_t j = 0; j < s.pts.size(); j += stride) kept.push_back(s.pts[j]);
      if (kept.back() != s.pts.back()) kept.push_back(s.pts.back());
      s.pts = std::move(kept);
    }
    if (!s.pts.empty()) series.push_back(std::move(s));
  }
  if (series.empty()) {
    throw MalformedTrace("render_convergence_svg: no plottable points");
  }
  if (xmax == xmin) { xmin -= 1.0; xmax += 1.0; }
  if (ymax == ymin) { ymin -= 1.0; ymax += 1.0; }

  const double W = 960, H = 600, ml = 80, mr = 30, mt = 46, mb = 64;
  const double pw = W - ml - mr, ph = H - mt - mb;
  auto px = [&](double x) { return ml + (x - xmin) / (xmax - xmin) * pw; };
  auto py = [&](double y) { return mt + (ymax - y) / (ymax - ymin) * ph; };

  std::string svg;
  svg += "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"960\" height=\"600\" "
         "viewBox=\"0 0 960 600\">\n";
  svg += "<rect width=\"960\" height=\"600\" fill=\"#ffffff\"/>\n";
  svg += "<text x=\"480\" y=\"24\" text-anchor=\"middle\" font-family=\"sans-serif\" "
         "font-size=\"16\" fill=\"#222222\">" +
         detail::xml_escape(title) + "</text>\n";

  // vertical-axis ticks and grid
  {
    const double step = detail::nice_step((ymax - ymin) / 5.0);
    for (double v = std::ceil(ymin / step) * step; v <= ymax + 1e-9 * step; v += step) {
      const double y = py(v);
      svg += "<line x1=\"" + detail::coord(ml) + "\" y1=\"" + detail::coord(y) +
             "\" x2=\"" + detail::coord(ml + pw) + "\" y2=\"" + detail::coord(y) +
             "\" stroke=\"#dddddd\" stroke-width=\"1\"/>\n";
      char lbl[48];
      std::snprintf(lbl, sizeof lbl, "%.0e", std::pow(10.0, v));
      svg += "<text x=\"" + detail::coord(ml - 8) + "\" y=\"" + detail::coord(y + 4) +
             "\" text-anchor=\"end\" font-family=\"sans-serif\" font-size=\"12\" "
             "fill=\"#444444\">" +
             lbl + "</text>\n";
    }
  }
  // horizontal-axis ticks
  {
    const double step = detail::nice_step((xmax - xmin) / 6.0);
    for (double v = std::ceil(xmin / step) * step; v <= xmax + 1e-9 * step; v += step) {
      const double x = px(v);
      svg += "<line x1=\"" + detail::coord(x) + "\" y1=\"" + detail::coord(mt + ph) +
             "\" x2=\"" + detail::coord(x) + "\" y2=\"" + detail::coord(mt + ph + 6) +
             "\" stroke=\"#444444\" stroke-width=\"1\"/>\n";
      char lbl[48];
      std::snprintf(lbl, sizeof lbl, "%g", v);
      svg += "<text x=\"" + detail::coord(x) + "\" y=\"" + detail::coord(mt + ph + 22) +
             "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"12\" "
             "fill=\"#444444\">" +
             lbl + "</text>\n";
    }
  }
  // frame
  svg += "<rect x=\"" + detail::coord(ml) + "\" y=\"" + detail::coord(mt) +
         "\" width=\"" + detail::coord(pw) + "\" height=\"" + detail::coord(ph) +
         "\" fill=\"none\" stroke=\"#444444\" stroke-width=\"1\"/>\n";
  // axis labels
  svg += "<text x=\"" + detail::coord(ml + pw / 2) + "\" y=\"" +
         detail::coord(H - 14) +
         "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"13\" "
         "fill=\"#222222\">iteration k</text>\n";
  svg += "<text x=\"20\" y=\"" + detail::coord(mt + ph / 2) +
         "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"13\" "
         "fill=\"#222222\" transform=\"rotate(-90 20 " +
         detail::coord(mt + ph / 2) + ")\">residual (log scale)</text>\n";

  // series
  const auto& palette = detail::plot_palette();
  for (std::size_t i = 0; i < series.size(); ++i) {
    const std::string& color = palette[i % palette.size()];
    if (series[i].pts.size() == 1) {
      svg += "<circle cx=\"" + detail::coord(px(series[i].pts[0].first)) + "\" cy=\"" +
             detail::coord(py(series[i].pts[0].second)) + "\" r=\"3\" fill=\"" +
             color + "\"/>\n";
      continue;
    }
    svg += "<polyline fill=\"none\" stroke=\"" + color +
           "\" stroke-width=\"1.5\" points=\"";
    for (const auto& [x, y] : series[i].pts) {
      svg += detail::coord(px(x)) + "," + detail::coord(py(y)) + " ";
    }
    svg += "\"/>\n";
  }

  // legend, top right inside the frame
  for (std::size_t i = 0; i < series.size(); ++i) {
    const double y = mt + 16 + 18 * static_cast<double>(i);
    const std::string& color = palette[i % palette.size()];
    svg += "<line x1=\"" + detail::coord(ml + pw - 190) + "\" y1=\"" +
           detail::coord(y) + "\" x2=\"" + detail::coord(ml + pw - 160) + "\" y2=\"" +
           detail::coord(y) + "\" stroke=\"" + color + "\" stroke-width=\"2\"/>\n";
    svg += "<text x=\"" + detail::coord(ml + pw - 152) + "\" y=\"" +
           detail::coord(y + 4) +
           "\" font-family=\"sans-serif\" font-size=\"12\" fill=\"#222222\">" +
           detail::xml_escape(series[i].label) + "</text>\n";
  }

  svg += "</svg>\n";
  return svg;
}

}  // namespace rowstoch
