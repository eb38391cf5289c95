#include "padrl/svg.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <sstream>

namespace padrl::svg {

namespace {

constexpr int kPanelW = 420;
constexpr int kPanelH = 300;
constexpr int kMarginL = 60;
constexpr int kMarginR = 20;
constexpr int kMarginT = 36;
constexpr int kMarginB = 44;
constexpr int kLegendRow = 18;

const char* const kPalette[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e",
                                "#8c564b", "#e377c2", "#7f7f7f", "#bcbd22", "#17becf"};

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", v);
  return buf;
}

std::string tick(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.4g", v);
  return buf;
}

struct Range {
  double lo = std::numeric_limits<double>::infinity();
  double hi = -std::numeric_limits<double>::infinity();
  void add(double v) {
    if (!std::isfinite(v)) return;
    lo = std::min(lo, v);
    hi = std::max(hi, v);
  }
  void finish() {
    if (!std::isfinite(lo)) lo = 0.0, hi = 1.0;
    if (hi - lo < 1e-12) {
      const double pad = std::max(1e-6, std::abs(lo) * 0.05);
      lo -= pad;
      hi += pad;
    }
  }
};

}  // namespace

std::string escape(const std::string& text) {
  std::string out;
  out.reserve(text.size());
  for (char c : text) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      case '\'': out += "&apos;"; break;
      default: out += c;
    }
  }
  return out;
}

std::string render(const std::vector<Panel>& panels, int columns, const std::string& title) {
  columns = std::max(1, columns);
  const int rows = static_cast<int>((panels.size() + static_cast<std::size_t>(columns) - 1) / static_cast<std::size_t>(columns));

  std::vector<std::string> legend;
  for (const auto& p : panels)
    for (const auto& s : p.series)
      if (std::find(legend.begin(), legend.end(), s.name) == legend.end()) legend.push_back(s.name);
  auto color_of = [&](const std::string& name) {
    const auto i = static_cast<std::size_t>(std::find(legend.begin(), legend.end(), name) - legend.begin());
    return kPalette[i % std::size(kPalette)];
  };

  const int top = title.empty() ? 0 : 30;
  const int legend_h = static_cast<int>(legend.size()) * kLegendRow + 16;
  const int width = columns * kPanelW;
  const int height = top + rows * kPanelH + legend_h;

  std::ostringstream o;
  o << "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n";
  o << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width << "\" height=\"" << height
    << "\" viewBox=\"0 0 " << width << ' ' << height << "\" font-family=\"sans-serif\" font-size=\"11\">\n";
  o << "<rect x=\"0\" y=\"0\" width=\"" << width << "\" height=\"" << height << "\" fill=\"white\"/>\n";
  if (!title.empty())
    o << "<text x=\"" << width / 2 << "\" y=\"20\" text-anchor=\"middle\" font-size=\"15\">" << escape(title)
      << "</text>\n";

  for (std::size_t pi = 0; pi < panels.size(); ++pi) {
    const auto& p = panels[pi];
    const int ox = static_cast<int>(pi % static_cast<std::size_t>(columns)) * kPanelW;
    const int oy = top + static_cast<int>(pi / static_cast<std::size_t>(columns)) * kPanelH;
    const double pw = kPanelW - kMarginL - kMarginR;
    const double ph = kPanelH - kMarginT - kMarginB;
    const double x0 = ox + kMarginL, y0 = oy + kMarginT;

    Range xr, yr;
    for (const auto& s : p.series) {
      for (double v : s.x) xr.add(v);
      for (double v : s.y) yr.add(v);
    }
    xr.finish();
    yr.finish();
    auto sx = [&](double v) { return x0 + (v - xr.lo) / (xr.hi - xr.lo) * pw; };
    auto sy = [&](double v) { return y0 + ph - (v - yr.lo) / (yr.hi - yr.lo) * ph; };

    o << "<g>\n";
    o << "<text x=\"" << fmt(x0 + pw / 2) << "\" y=\"" << oy + 20 << "\" text-anchor=\"middle\" font-size=\"13\">"
      << escape(p.title) << "</text>\n";
    o << "<rect x=\"" << fmt(x0) << "\" y=\"" << fmt(y0) << "\" width=\"" << fmt(pw) << "\" height=\"" << fmt(ph)
      << "\" fill=\"none\" stroke=\"#333\"/>\n";
    for (int t = 0; t <= 4; ++t) {
      const double fx = xr.lo + (xr.hi - xr.lo) * t / 4.0;
      const double fy = yr.lo + (yr.hi - yr.lo) * t / 4.0;
      o << "<line x1=\"" << fmt(sx(fx)) << "\" y1=\"" << fmt(y0 + ph) << "\" x2=\"" << fmt(sx(fx)) << "\" y2=\""
        << fmt(y0 + ph + 4) << "\" stroke=\"#333\"/>\n";
      o << "<text x=\"" << fmt(sx(fx)) << "\" y=\"" << fmt(y0 + ph + 16) << "\" text-anchor=\"middle\">" << tick(fx)
        << "</text>\n";
      o << "<line x1=\"" << fmt(x0) << "\" y1=\"" << fmt(sy(fy)) << "\" x2=\"" << fmt(x0 + pw) << "\" y2=\""
        << fmt(sy(fy)) << "\" stroke=\"#ddd\"/>\n";
      o << "<text x=\"" << fmt(x0 - 6) << "\" y=\"" << fmt(sy(fy) + 4) << "\" text-anchor=\"end\">" << tick(fy)
        << "</text>\n";
    }
    o << "<text x=\"" << fmt(x0 + pw / 2) << "\" y=\"" << fmt(y0 + ph + 34) << "\" text-anchor=\"middle\">"
      << escape(p.x_label) << "</text>\n";
    o << "<text x=\"" << fmt(ox + 14) << "\" y=\"" << fmt(y0 + ph / 2) << "\" text-anchor=\"middle\" transform=\"rotate(-90 "
      << fmt(ox + 14) << ' ' << fmt(y0 + ph / 2) << ")\">" << escape(p.y_label) << "</text>\n";
    for (const auto& s : p.series) {
      o << "<polyline fill=\"none\" stroke-width=\"1.5\" stroke=\"" << color_of(s.name) << "\" points=\"";
      const std::size_t n = std::min(s.x.size(), s.y.size());
      bool first = true;
      for (std::size_t i = 0; i < n; ++i) {
        if (!std::isfinite(s.x[i]) || !std::isfinite(s.y[i])) continue;
        if (!first) o << ' ';
        o << fmt(sx(s.x[i])) << ',' << fmt(sy(s.y[i]));
        first = false;
      }
      o << "\"/>\n";
    }
    o << "</g>\n";
  }

  const int ly = top + rows * kPanelH + 8;
  for (std::size_t i = 0; i < legend.size(); ++i) {
    const int y = ly + static_cast<int>(i) * kLegendRow;
    o << "<line x1=\"" << kMarginL << "\" y1=\"" << y + 6 << "\" x2=\"" << kMarginL + 24 << "\" y2=\"" << y + 6
      << "\" stroke-width=\"3\" stroke=\"" << color_of(legend[i]) << "\"/>\n";
    o << "<text x=\"" << kMarginL + 30 << "\" y=\"" << y + 10 << "\">" << escape(legend[i]) << "</text>\n";
  }
  o << "</svg>\n";
  return o.str();
}

}  // namespace padrl::svg
