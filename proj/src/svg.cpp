#include "rf2sa/svg.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <stdexcept>

namespace rf2sa {

namespace {

constexpr int kWidth = 720;
constexpr int kHeight = 480;
constexpr int kMarginL = 72, kMarginR = 24, kMarginT = 40, kMarginB = 56;

const char* const kColors[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b"};

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.4g", v);
  return buf;
}

struct Axis {
  double lo = 0, hi = 1;
  bool log = false;

  double map(double v, double pix_lo, double pix_hi) const {
    double t = log ? (std::log10(v) - std::log10(lo)) / (std::log10(hi) - std::log10(lo))
                   : (v - lo) / (hi - lo);
    return pix_lo + t * (pix_hi - pix_lo);
  }

  std::vector<double> ticks() const {
    std::vector<double> out;
    if (log) {
      if (!(lo > 0) || !(hi > lo)) return {1.0};
      const int e0 = static_cast<int>(std::floor(std::log10(lo)));
      const int e1 = static_cast<int>(std::ceil(std::log10(hi)));
      for (int e = e0; e <= e1 && e - e0 < 64; ++e) {
        const double v = std::pow(10.0, e);
        if (v >= lo * 0.999 && v <= hi * 1.001) out.push_back(v);
      }
      if (out.size() < 2) {
        out = {lo, hi};
      }
    } else {
      const double span = hi - lo;
      const double step = std::pow(10.0, std::floor(std::log10(span / 4.0)));
      double v = std::ceil(lo / step) * step;
      for (; v <= hi + 1e-12 * span; v += step)
        if (out.empty() || v - out.back() > 0.5 * step) out.push_back(v);
      while (out.size() > 9) {
        std::vector<double> thin;
        for (size_t i = 0; i < out.size(); i += 2) thin.push_back(out[i]);
        out = thin;
      }
    }
    return out;
  }
};

}  // namespace

void write_svg(const std::filesystem::path& path, const LinePlot& plot) {
  Axis ax, ay;
  ax.log = plot.log_x;
  ay.log = plot.log_y;
  double xmin = std::numeric_limits<double>::infinity(), xmax = -xmin;
  double ymin = xmin, ymax = -xmin;
  for (const auto& s : plot.series) {
    for (size_t i = 0; i < s.x.size(); ++i) {
      const double xv = s.x[i], yv = s.y[i];
      if (!std::isfinite(xv) || !std::isfinite(yv)) continue;
      if (plot.log_x && xv <= 0) continue;
      if (plot.log_y && yv <= 0) continue;
      xmin = std::min(xmin, xv);
      xmax = std::max(xmax, xv);
      ymin = std::min(ymin, yv);
      ymax = std::max(ymax, yv);
    }
  }
  if (!std::isfinite(xmin) || !std::isfinite(ymin)) {
    xmin = ymin = 0.1;
    xmax = ymax = 1.0;
  }
  if (!(xmin < xmax)) {
    if (plot.log_x) {
      xmin /= 2;
      xmax *= 2;
    } else {
      xmax = xmin + 1;
      xmin -= 1;
    }
  }
  if (!(ymin < ymax)) {
    if (plot.log_y) {
      ymin /= 2;
      ymax *= 2;
    } else {
      ymax = ymin + 1;
      ymin -= 1;
    }
  }
  if (plot.log_x) {
    ax.lo = xmin / 1.1;
    ax.hi = xmax * 1.1;
  } else {
    const double pad = 0.05 * (xmax - xmin);
    ax.lo = xmin - pad;
    ax.hi = xmax + pad;
  }
  if (plot.log_y) {
    ay.lo = ymin / 1.3;
    ay.hi = ymax * 1.3;
  } else {
    const double pad = 0.05 * (ymax - ymin);
    ay.lo = ymin - pad;
    ay.hi = ymax + pad;
  }

  const double px0 = kMarginL, px1 = kWidth - kMarginR;
  const double py0 = kHeight - kMarginB, py1 = kMarginT;  // y grows upward

  std::ofstream out(path);
  if (!out) throw std::runtime_error("svg: cannot open " + path.string());
  out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << kWidth << "\" height=\""
      << kHeight << "\" font-family=\"sans-serif\" font-size=\"12\">\n";
  out << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  out << "<text x=\"" << kWidth / 2 << "\" y=\"20\" text-anchor=\"middle\" font-size=\"15\">"
      << plot.title << "</text>\n";

  for (double t : ax.ticks()) {
    const double px = ax.map(t, px0, px1);
    out << "<line x1=\"" << px << "\" y1=\"" << py0 << "\" x2=\"" << px << "\" y2=\"" << py1
        << "\" stroke=\"#dddddd\"/>\n";
    out << "<text x=\"" << px << "\" y=\"" << py0 + 18 << "\" text-anchor=\"middle\">" << fmt(t)
        << "</text>\n";
  }
  for (double t : ay.ticks()) {
    const double py = ay.map(t, py0, py1);
    out << "<line x1=\"" << px0 << "\" y1=\"" << py << "\" x2=\"" << px1 << "\" y2=\"" << py
        << "\" stroke=\"#dddddd\"/>\n";
    out << "<text x=\"" << px0 - 6 << "\" y=\"" << py + 4 << "\" text-anchor=\"end\">" << fmt(t)
        << "</text>\n";
  }
  out << "<rect x=\"" << px0 << "\" y=\"" << py1 << "\" width=\"" << px1 - px0 << "\" height=\""
      << py0 - py1 << "\" fill=\"none\" stroke=\"#333333\"/>\n";
  out << "<text x=\"" << (px0 + px1) / 2 << "\" y=\"" << kHeight - 16
      << "\" text-anchor=\"middle\">" << plot.x_label << "</text>\n";
  out << "<text x=\"18\" y=\"" << (py0 + py1) / 2 << "\" text-anchor=\"middle\" transform=\"rotate(-90 18 "
      << (py0 + py1) / 2 << ")\">" << plot.y_label << "</text>\n";

  int ci = 0;
  for (const auto& s : plot.series) {
    const char* color = kColors[ci % 6];
    out << "<polyline fill=\"none\" stroke=\"" << color << "\" stroke-width=\"1.5\" points=\"";
    for (size_t i = 0; i < s.x.size(); ++i) {
      const double xv = s.x[i], yv = s.y[i];
      if (!std::isfinite(xv) || !std::isfinite(yv)) continue;
      if ((plot.log_x && xv <= 0) || (plot.log_y && yv <= 0)) continue;
      out << ax.map(xv, px0, px1) << ',' << ay.map(yv, py0, py1) << ' ';
    }
    out << "\"/>\n";
    if (!s.label.empty()) {
      const double ly = py1 + 16 + 16 * ci;
      out << "<line x1=\"" << px1 - 130 << "\" y1=\"" << ly - 4 << "\" x2=\"" << px1 - 110
          << "\" y2=\"" << ly - 4 << "\" stroke=\"" << color << "\" stroke-width=\"2\"/>\n";
      out << "<text x=\"" << px1 - 104 << "\" y=\"" << ly << "\">" << s.label << "</text>\n";
    }
    ++ci;
  }
  out << "</svg>\n";
}

}  // namespace rf2sa
