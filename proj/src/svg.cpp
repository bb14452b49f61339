#include "admplan/svg.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>

namespace admplan::svg {

namespace {

const char* const kPalette[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd",
                                "#ff7f0e", "#8c564b", "#17becf", "#7f7f7f"};
constexpr int kPaletteSize = 8;

std::string escape(const std::string& s) {
  std::string out;
  out.reserve(s.size());
  for (char c : s) {
    if (c == '&')
      out += "&amp;";
    else if (c == '<')
      out += "&lt;";
    else if (c == '>')
      out += "&gt;";
    else
      out += c;
  }
  return out;
}

std::string num(double v) {
  char buf[48];
  std::snprintf(buf, sizeof buf, "%.2f", v);
  return buf;
}

std::string tick_label(double v) {
  char buf[48];
  std::snprintf(buf, sizeof buf, "%.4g", v);
  return buf;
}

struct Range {
  double lo = 0.0, hi = 1.0;

  void widen(double v) {
    if (!std::isfinite(v)) return;
    if (empty) {
      lo = hi = v;
      empty = false;
      return;
    }
    lo = std::min(lo, v);
    hi = std::max(hi, v);
  }

  void finish() {
    if (empty) {
      lo = 0.0;
      hi = 1.0;
    } else if (lo == hi) {
      const double pad = lo == 0.0 ? 0.5 : std::abs(lo) * 0.1;
      lo -= pad;
      hi += pad;
    }
  }

  bool empty = true;
};

}  // namespace

std::string line_chart(const std::string& title, const std::string& x_label,
                       const std::string& y_label, const std::vector<Series>& series,
                       int width, int height) {
  const double ml = 64, mr = 16, mt = 36, mb = 48;
  const double pw = width - ml - mr, ph = height - mt - mb;

  Range rx, ry;
  for (const Series& s : series) {
    for (double v : s.x) rx.widen(v);
    for (double v : s.y) ry.widen(v);
  }
  rx.finish();
  ry.finish();

  auto px = [&](double v) { return ml + (v - rx.lo) / (rx.hi - rx.lo) * pw; };
  auto py = [&](double v) { return mt + ph - (v - ry.lo) / (ry.hi - ry.lo) * ph; };

  std::string out;
  out += "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" + std::to_string(width) +
         "\" height=\"" + std::to_string(height) + "\" viewBox=\"0 0 " + std::to_string(width) +
         " " + std::to_string(height) + "\">\n";
  out += "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  out += "<text x=\"" + num(width / 2.0) +
         "\" y=\"20\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"14\">" +
         escape(title) + "</text>\n";

  // Axes and ticks.
  out += "<g stroke=\"#333\" stroke-width=\"1\">\n";
  out += "<line x1=\"" + num(ml) + "\" y1=\"" + num(mt + ph) + "\" x2=\"" + num(ml + pw) +
         "\" y2=\"" + num(mt + ph) + "\"/>\n";
  out += "<line x1=\"" + num(ml) + "\" y1=\"" + num(mt) + "\" x2=\"" + num(ml) + "\" y2=\"" +
         num(mt + ph) + "\"/>\n";
  out += "</g>\n";
  out += "<g font-family=\"sans-serif\" font-size=\"11\" fill=\"#333\">\n";
  const int n_ticks = 5;
  for (int i = 0; i < n_ticks; ++i) {
    const double fx = rx.lo + (rx.hi - rx.lo) * i / (n_ticks - 1);
    const double fy = ry.lo + (ry.hi - ry.lo) * i / (n_ticks - 1);
    out += "<line x1=\"" + num(px(fx)) + "\" y1=\"" + num(mt + ph) + "\" x2=\"" + num(px(fx)) +
           "\" y2=\"" + num(mt + ph + 4) + "\" stroke=\"#333\"/>\n";
    out += "<text x=\"" + num(px(fx)) + "\" y=\"" + num(mt + ph + 16) +
           "\" text-anchor=\"middle\">" + tick_label(fx) + "</text>\n";
    out += "<line x1=\"" + num(ml - 4) + "\" y1=\"" + num(py(fy)) + "\" x2=\"" + num(ml) +
           "\" y2=\"" + num(py(fy)) + "\" stroke=\"#333\"/>\n";
    out += "<text x=\"" + num(ml - 8) + "\" y=\"" + num(py(fy) + 4) +
           "\" text-anchor=\"end\">" + tick_label(fy) + "</text>\n";
  }
  out += "<text x=\"" + num(ml + pw / 2) + "\" y=\"" + num(height - 10.0) +
         "\" text-anchor=\"middle\">" + escape(x_label) + "</text>\n";
  out += "<text x=\"14\" y=\"" + num(mt + ph / 2) + "\" text-anchor=\"middle\" transform=\"rotate(-90 14 " +
         num(mt + ph / 2) + ")\">" + escape(y_label) + "</text>\n";
  out += "</g>\n";

  for (std::size_t i = 0; i < series.size(); ++i) {
    const Series& s = series[i];
    const char* color = kPalette[i % kPaletteSize];
    std::string points;
    const std::size_t n = std::min(s.x.size(), s.y.size());
    for (std::size_t k = 0; k < n; ++k) {
      if (!std::isfinite(s.x[k]) || !std::isfinite(s.y[k])) continue;
      points += num(px(s.x[k])) + "," + num(py(s.y[k])) + " ";
    }
    out += "<polyline fill=\"none\" stroke=\"" + std::string(color) +
           "\" stroke-width=\"1.5\" points=\"" + points + "\"/>\n";
  }

  // Legend, top right of the plot area.
  out += "<g font-family=\"sans-serif\" font-size=\"11\" fill=\"#333\">\n";
  for (std::size_t i = 0; i < series.size(); ++i) {
    const double ly = mt + 14 + 16 * static_cast<double>(i);
    const double lx = ml + pw - 130;
    out += "<line x1=\"" + num(lx) + "\" y1=\"" + num(ly - 4) + "\" x2=\"" + num(lx + 20) +
           "\" y2=\"" + num(ly - 4) + "\" stroke=\"" + kPalette[i % kPaletteSize] +
           "\" stroke-width=\"2\"/>\n";
    out += "<text x=\"" + num(lx + 26) + "\" y=\"" + num(ly) + "\">" + escape(series[i].label) +
           "</text>\n";
  }
  out += "</g>\n</svg>\n";
  return out;
}

}  // namespace admplan::svg
