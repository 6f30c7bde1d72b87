#include "tcdc/plot.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

namespace tcdc {

namespace {

constexpr const char* kPalette[] = {"#1f77b4", "#d62728", "#2ca02c",
                                    "#9467bd", "#ff7f0e", "#8c564b",
                                    "#17becf", "#7f7f7f"};
constexpr int kPaletteSize = 8;

std::string escape_xml(const std::string& s) {
  std::string out;
  out.reserve(s.size());
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

std::string fmt(real v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.6g", v);
  return buf;
}

// Largest step from {1,2,5}*10^k giving at least four intervals.
real nice_step(real span) {
  const real raw = span / 4.0;
  const real mag = std::pow(10.0, std::floor(std::log10(raw)));
  for (real mult : {5.0, 2.0, 1.0}) {
    if (mult * mag <= raw) return mult * mag;
  }
  return mag;
}

}  // namespace

void write_rate_accuracy_svg(const std::string& path,
                             const std::vector<RateAccuracyCurve>& curves,
                             const PlotOptions& opt) {
  require(!curves.empty(), "plot needs at least one curve");
  for (const auto& c : curves) validate_curve(c, /*min_points=*/1);

  real x_min = 1e300, x_max = -1e300, y_min = 1e300, y_max = -1e300;
  auto tx = [&](real bpp) { return opt.log_x ? std::log10(bpp) : bpp; };
  for (const auto& c : curves) {
    for (const auto& p : c.points) {
      x_min = std::min(x_min, tx(p.bpp));
      x_max = std::max(x_max, tx(p.bpp));
      y_min = std::min(y_min, 100.0 * p.top1);
      y_max = std::max(y_max, 100.0 * p.top1);
    }
  }
  if (opt.baseline_top1 >= 0.0) {
    y_min = std::min(y_min, 100.0 * opt.baseline_top1);
    y_max = std::max(y_max, 100.0 * opt.baseline_top1);
  }
  if (x_max - x_min < 1e-12) { x_min -= 0.5; x_max += 0.5; }
  if (y_max - y_min < 1e-12) { y_min -= 1.0; y_max += 1.0; }
  const real xpad = 0.04 * (x_max - x_min);
  const real ypad = 0.08 * (y_max - y_min);
  x_min -= xpad; x_max += xpad;
  y_min -= ypad; y_max += ypad;

  const int left = 64, right = 18, top = 42, bottom = 52;
  const real pw = static_cast<real>(opt.width - left - right);
  const real ph = static_cast<real>(opt.height - top - bottom);
  auto px = [&](real x) { return left + pw * (x - x_min) / (x_max - x_min); };
  auto py = [&](real y) { return top + ph * (y_max - y) / (y_max - y_min); };

  std::ostringstream svg;
  svg << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << opt.width
      << "\" height=\"" << opt.height << "\" viewBox=\"0 0 " << opt.width
      << " " << opt.height << "\">\n"
      << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n"
      << "<text x=\"" << opt.width / 2 << "\" y=\"24\" text-anchor=\"middle\""
      << " font-family=\"sans-serif\" font-size=\"15\" fill=\"#222\">"
      << escape_xml(opt.title) << "</text>\n";

  // gridlines and ticks
  svg << "<g font-family=\"sans-serif\" font-size=\"11\" fill=\"#444\">\n";
  const real ystep = nice_step(y_max - y_min);
  for (real v = std::ceil(y_min / ystep) * ystep; v <= y_max + 1e-9;
       v += ystep) {
    svg << "<line x1=\"" << left << "\" y1=\"" << fmt(py(v)) << "\" x2=\""
        << opt.width - right << "\" y2=\"" << fmt(py(v))
        << "\" stroke=\"#e5e5e5\"/>\n";
    svg << "<text x=\"" << left - 6 << "\" y=\"" << fmt(py(v) + 4)
        << "\" text-anchor=\"end\">" << fmt(v) << "</text>\n";
  }
  const int xticks = 6;
  for (int i = 0; i < xticks; ++i) {
    const real x = x_min + (x_max - x_min) * i / (xticks - 1.0);
    const real bpp = opt.log_x ? std::pow(10.0, x) : x;
    svg << "<line x1=\"" << fmt(px(x)) << "\" y1=\"" << top << "\" x2=\""
        << fmt(px(x)) << "\" y2=\"" << opt.height - bottom
        << "\" stroke=\"#f0f0f0\"/>\n";
    svg << "<text x=\"" << fmt(px(x)) << "\" y=\"" << opt.height - bottom + 16
        << "\" text-anchor=\"middle\">" << fmt(bpp) << "</text>\n";
  }
  svg << "<text x=\"" << left + pw / 2 << "\" y=\"" << opt.height - 8
      << "\" text-anchor=\"middle\" font-size=\"12\">bits per pixel"
      << (opt.log_x ? " (log scale)" : "") << "</text>\n";
  svg << "<text x=\"16\" y=\"" << top + ph / 2
      << "\" text-anchor=\"middle\" font-size=\"12\" transform=\"rotate(-90 16 "
      << top + ph / 2 << ")\">top-1 accuracy (%)</text>\n";
  svg << "</g>\n";

  // frame
  svg << "<rect x=\"" << left << "\" y=\"" << top << "\" width=\"" << fmt(pw)
      << "\" height=\"" << fmt(ph)
      << "\" fill=\"none\" stroke=\"#999\"/>\n";

  if (opt.baseline_top1 >= 0.0) {
    const real y = py(100.0 * opt.baseline_top1);
    svg << "<line x1=\"" << left << "\" y1=\"" << fmt(y) << "\" x2=\""
        << opt.width - right << "\" y2=\"" << fmt(y)
        << "\" stroke=\"#c0392b\" stroke-dasharray=\"6 4\"/>\n"
        << "<text x=\"" << opt.width - right - 4 << "\" y=\"" << fmt(y - 5)
        << "\" text-anchor=\"end\" font-family=\"sans-serif\" font-size=\"11\""
        << " fill=\"#c0392b\">uncompressed "
        << fmt(100.0 * opt.baseline_top1) << "%</text>\n";
  }

  for (std::size_t ci = 0; ci < curves.size(); ++ci) {
    const char* color = kPalette[ci % kPaletteSize];
    std::string pts;
    for (const auto& p : curves[ci].points) {
      pts += fmt(px(tx(p.bpp))) + "," + fmt(py(100.0 * p.top1)) + " ";
    }
    svg << "<polyline points=\"" << pts << "\" fill=\"none\" stroke=\""
        << color << "\" stroke-width=\"2\"/>\n";
    for (const auto& p : curves[ci].points) {
      svg << "<circle cx=\"" << fmt(px(tx(p.bpp))) << "\" cy=\""
          << fmt(py(100.0 * p.top1)) << "\" r=\"3.2\" fill=\"" << color
          << "\"/>\n";
    }
  }

  // legend, lower right
  const int lh = 18;
  const int ly0 = opt.height - bottom - 12 -
                  lh * static_cast<int>(curves.size());
  svg << "<g font-family=\"sans-serif\" font-size=\"12\">\n";
  for (std::size_t ci = 0; ci < curves.size(); ++ci) {
    const int y = ly0 + lh * static_cast<int>(ci);
    svg << "<rect x=\"" << opt.width - right - 170 << "\" y=\"" << y
        << "\" width=\"14\" height=\"4\" fill=\""
        << kPalette[ci % kPaletteSize] << "\"/>\n"
        << "<text x=\"" << opt.width - right - 150 << "\" y=\"" << y + 6
        << "\" fill=\"#222\">" << escape_xml(curves[ci].label) << "</text>\n";
  }
  svg << "</g>\n</svg>\n";

  std::ofstream out(path);
  require(out.good(), "cannot write plot " + path);
  out << svg.str();
  require(out.good(), "short write on plot " + path);
}

}  // namespace tcdc
