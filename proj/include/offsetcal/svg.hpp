#pragma once

// Small self-contained SVG emitters for the reproduction figures: a heatmap
// for the delta grid and log-scale line charts for the variance sweeps. No
// plotting dependency; output is plain markup.

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <string>
#include <vector>

namespace offsetcal {

namespace detail {

inline std::string svg_num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.2f", v);
  return buf;
}

// Diverging blue -> white -> red over [0, 1].
inline std::string diverging_color(double t) {
  t = std::clamp(t, 0.0, 1.0);
  int r, g, b;
  if (t < 0.5) {
    const double u = t / 0.5;
    r = int(59 + u * (255 - 59));
    g = int(76 + u * (255 - 76));
    b = int(192 + u * (255 - 192));
  } else {
    const double u = (t - 0.5) / 0.5;
    r = int(255 - u * (255 - 180));
    g = int(255 - u * (255 - 4));
    b = int(255 - u * (255 - 38));
  }
  char buf[16];
  std::snprintf(buf, sizeof(buf), "#%02x%02x%02x", r, g, b);
  return buf;
}

} // namespace detail

struct SvgSeries {
  std::string label;
  std::string color;
  std::vector<double> y;
};

// values[row * cols + col]; rows labeled by `row_labels` (N axis), columns by
// `col_labels` (K axis). Colors span [vmin, vmax].
inline std::string svg_heatmap(const std::vector<double>& values,
                               const std::vector<int>& row_labels,
                               const std::vector<int>& col_labels, const std::string& title,
                               double vmin, double vmax) {
  const int rows = int(row_labels.size());
  const int cols = int(col_labels.size());
  const double cell = 42.0, left = 70.0, top = 50.0;
  const double width = left + cols * cell + 30.0;
  const double height = top + rows * cell + 60.0;
  std::string out = "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" +
                    detail::svg_num(width) + "\" height=\"" + detail::svg_num(height) + "\">\n";
  out += "<text x=\"" + detail::svg_num(width / 2) +
         "\" y=\"24\" text-anchor=\"middle\" font-size=\"15\">" + title + "</text>\n";
  for (int i = 0; i < rows; ++i) {
    for (int j = 0; j < cols; ++j) {
      const double v = values[std::size_t(i) * cols + j];
      const double t = (vmax > vmin) ? (v - vmin) / (vmax - vmin) : 0.5;
      const double x = left + j * cell;
      const double y = top + i * cell;
      out += "<rect x=\"" + detail::svg_num(x) + "\" y=\"" + detail::svg_num(y) + "\" width=\"" +
             detail::svg_num(cell) + "\" height=\"" + detail::svg_num(cell) + "\" fill=\"" +
             detail::diverging_color(t) + "\"/>\n";
      char label[16];
      std::snprintf(label, sizeof(label), "%.3f", v);
      out += "<text x=\"" + detail::svg_num(x + cell / 2) + "\" y=\"" +
             detail::svg_num(y + cell / 2 + 4) +
             "\" text-anchor=\"middle\" font-size=\"9\">" + label + "</text>\n";
    }
  }
  for (int i = 0; i < rows; ++i)
    out += "<text x=\"" + detail::svg_num(left - 8) + "\" y=\"" +
           detail::svg_num(top + i * cell + cell / 2 + 4) +
           "\" text-anchor=\"end\" font-size=\"11\">N=" + std::to_string(row_labels[i]) +
           "</text>\n";
  for (int j = 0; j < cols; ++j)
    out += "<text x=\"" + detail::svg_num(left + j * cell + cell / 2) + "\" y=\"" +
           detail::svg_num(top + rows * cell + 16) +
           "\" text-anchor=\"middle\" font-size=\"11\">K=" + std::to_string(col_labels[j]) +
           "</text>\n";
  out += "</svg>\n";
  return out;
}

// Log10-scale line chart; x is shared across series.
inline std::string svg_line_chart(const std::vector<double>& x, const std::vector<SvgSeries>& series,
                                  const std::string& title, const std::string& x_label) {
  const double width = 560.0, height = 400.0, left = 80.0, right = 30.0, top = 50.0, bottom = 60.0;
  double ymin = 1e300, ymax = -1e300, xmin = 1e300, xmax = -1e300;
  for (double v : x) {
    xmin = std::min(xmin, v);
    xmax = std::max(xmax, v);
  }
  for (const auto& s : series)
    for (double v : s.y) {
      if (v <= 0) continue;
      ymin = std::min(ymin, v);
      ymax = std::max(ymax, v);
    }
  if (!(ymax > 0)) ymin = 1e-6, ymax = 1.0;
  const double ly0 = std::floor(std::log10(ymin)), ly1 = std::ceil(std::log10(ymax));
  const double plot_w = width - left - right, plot_h = height - top - bottom;
  auto map_x = [&](double v) {
    return left + (xmax > xmin ? (v - xmin) / (xmax - xmin) : 0.5) * plot_w;
  };
  auto map_y = [&](double v) {
    return top + plot_h - (std::log10(v) - ly0) / std::max(1.0, ly1 - ly0) * plot_h;
  };

  std::string out = "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" + detail::svg_num(width) +
                    "\" height=\"" + detail::svg_num(height) + "\">\n";
  out += "<text x=\"" + detail::svg_num(width / 2) +
         "\" y=\"24\" text-anchor=\"middle\" font-size=\"15\">" + title + "</text>\n";
  out += "<rect x=\"" + detail::svg_num(left) + "\" y=\"" + detail::svg_num(top) + "\" width=\"" +
         detail::svg_num(plot_w) + "\" height=\"" + detail::svg_num(plot_h) +
         "\" fill=\"none\" stroke=\"#333\"/>\n";
  for (double d = ly0; d <= ly1; d += 1.0) {
    const double yy = map_y(std::pow(10.0, d));
    out += "<line x1=\"" + detail::svg_num(left) + "\" y1=\"" + detail::svg_num(yy) + "\" x2=\"" +
           detail::svg_num(left + plot_w) + "\" y2=\"" + detail::svg_num(yy) +
           "\" stroke=\"#ddd\"/>\n";
    char lab[16];
    std::snprintf(lab, sizeof(lab), "1e%d", int(d));
    out += "<text x=\"" + detail::svg_num(left - 6) + "\" y=\"" + detail::svg_num(yy + 4) +
           "\" text-anchor=\"end\" font-size=\"10\">" + lab + "</text>\n";
  }
  for (double v : x)
    out += "<text x=\"" + detail::svg_num(map_x(v)) + "\" y=\"" +
           detail::svg_num(top + plot_h + 16) + "\" text-anchor=\"middle\" font-size=\"10\">" +
           std::to_string(int(v)) + "</text>\n";
  out += "<text x=\"" + detail::svg_num(left + plot_w / 2) + "\" y=\"" +
         detail::svg_num(height - 14) + "\" text-anchor=\"middle\" font-size=\"12\">" + x_label +
         "</text>\n";

  double legend_y = top + 14;
  for (const auto& s : series) {
    std::string points;
    for (std::size_t i = 0; i < x.size() && i < s.y.size(); ++i) {
      if (s.y[i] <= 0) continue;
      points += detail::svg_num(map_x(x[i])) + "," + detail::svg_num(map_y(s.y[i])) + " ";
    }
    out += "<polyline fill=\"none\" stroke=\"" + s.color + "\" stroke-width=\"1.5\" points=\"" +
           points + "\"/>\n";
    out += "<text x=\"" + detail::svg_num(left + plot_w - 6) + "\" y=\"" +
           detail::svg_num(legend_y) + "\" text-anchor=\"end\" font-size=\"11\" fill=\"" +
           s.color + "\">" + s.label + "</text>\n";
    legend_y += 14;
  }
  out += "</svg>\n";
  return out;
}

} // namespace offsetcal
