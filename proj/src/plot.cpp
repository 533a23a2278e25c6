#include "odegrad/plot.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <set>
#include <stdexcept>

namespace odegrad {

namespace {

constexpr double kWidth = 640, kHeight = 480;
constexpr double kLeft = 64, kRight = 16, kTop = 28, kBottom = 44;

const char* kPalette[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd",
                          "#ff7f0e", "#8c564b", "#17becf", "#7f7f7f"};

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%g", v);
  return buf;
}

struct Axis {
  double lo = 0.0, hi = 1.0;
  bool log = false;

  double to_unit(double v) const {
    const double a = log ? std::log10(lo) : lo;
    const double b = log ? std::log10(hi) : hi;
    const double x = log ? std::log10(v) : v;
    return b > a ? (x - a) / (b - a) : 0.5;
  }

  std::vector<double> ticks() const {
    std::vector<double> out;
    if (log) {
      const int e0 = static_cast<int>(std::floor(std::log10(lo)));
      const int e1 = static_cast<int>(std::ceil(std::log10(hi)));
      int stride = std::max(1, (e1 - e0) / 6);
      for (int e = e0; e <= e1; e += stride) {
        const double v = std::pow(10.0, e);
        if (v >= lo * 0.999 && v <= hi * 1.001) out.push_back(v);
      }
      return out;
    }
    const double span = hi - lo;
    if (span <= 0) return {lo};
    const double raw = span / 4.0;
    const double mag = std::pow(10.0, std::floor(std::log10(raw)));
    double step = mag;
    for (double m : {1.0, 2.0, 5.0, 10.0})
      if (raw <= m * mag) {
        step = m * mag;
        break;
      }
    const double first = std::ceil(lo / step) * step;
    for (double v = first; v <= hi + 1e-9 * span; v += step) out.push_back(v);
    return out;
  }
};

void grow(double v, double& lo, double& hi) {
  lo = std::min(lo, v);
  hi = std::max(hi, v);
}

std::string color_of(double t) {
  // dark blue -> teal -> yellow
  const double stops[3][3] = {{68, 1, 84}, {33, 145, 140}, {253, 231, 37}};
  t = std::clamp(t, 0.0, 1.0);
  const int seg = t < 0.5 ? 0 : 1;
  const double u = (t - 0.5 * seg) * 2.0;
  char buf[16];
  std::snprintf(buf, sizeof(buf), "#%02x%02x%02x",
                static_cast<int>(stops[seg][0] + u * (stops[seg + 1][0] - stops[seg][0])),
                static_cast<int>(stops[seg][1] + u * (stops[seg + 1][1] - stops[seg][1])),
                static_cast<int>(stops[seg][2] + u * (stops[seg + 1][2] - stops[seg][2])));
  return buf;
}

}  // namespace

void emit_svg(const std::vector<Series>& series, PlotKind kind, const std::string& path,
              const PlotOptions& opts) {
  size_t points = 0;
  for (const Series& s : series) points += s.x.size();
  if (series.empty() || points == 0)
    throw std::invalid_argument("emit_svg: empty series");
  for (const Series& s : series) {
    if (s.x.size() != s.y.size())
      throw std::invalid_argument("emit_svg: x/y length mismatch");
    if (kind == PlotKind::Heatmap && s.v.size() != s.x.size())
      throw std::invalid_argument("emit_svg: heatmap needs one value per point");
  }

  Axis ax, ay;
  ax.log = opts.logx;
  ay.log = opts.logy;
  double xlo = 1e300, xhi = -1e300, ylo = 1e300, yhi = -1e300;
  for (const Series& s : series)
    for (size_t i = 0; i < s.x.size(); ++i) {
      if ((opts.logx && s.x[i] <= 0.0) || (opts.logy && s.y[i] <= 0.0))
        throw std::invalid_argument("emit_svg: non-positive value on a log axis");
      grow(s.x[i], xlo, xhi);
      grow(s.y[i], ylo, yhi);
    }
  if (xlo == xhi) {
    xlo -= 0.5;
    xhi += 0.5;
  }
  if (ylo == yhi) {
    ylo -= 0.5;
    yhi += 0.5;
  }
  if (!opts.logx) {
    const double pad = 0.03 * (xhi - xlo);
    xlo -= pad;
    xhi += pad;
  }
  if (!opts.logy) {
    const double pad = 0.05 * (yhi - ylo);
    ylo -= pad;
    yhi += pad;
  }
  ax.lo = xlo;
  ax.hi = xhi;
  ay.lo = ylo;
  ay.hi = yhi;

  const double pw = kWidth - kLeft - kRight;
  const double ph = kHeight - kTop - kBottom;
  auto px = [&](double v) { return kLeft + pw * ax.to_unit(v); };
  auto py = [&](double v) { return kTop + ph * (1.0 - ay.to_unit(v)); };

  std::ofstream os(path);
  if (!os) throw std::runtime_error("emit_svg: cannot open " + path);
  os << "<svg xmlns=\"http://www.w3.org/2000/svg\" version=\"1.1\" "
        "viewBox=\"0 0 640 480\" width=\"640\" height=\"480\">\n"
     << "<rect width=\"640\" height=\"480\" fill=\"white\"/>\n";
  if (!opts.title.empty())
    os << "<text x=\"320\" y=\"18\" text-anchor=\"middle\" font-size=\"14\" "
          "font-family=\"sans-serif\">"
       << opts.title << "</text>\n";

  // frame and ticks
  os << "<rect x=\"" << kLeft << "\" y=\"" << kTop << "\" width=\"" << pw
     << "\" height=\"" << ph << "\" fill=\"none\" stroke=\"black\"/>\n";
  for (double t : ax.ticks()) {
    const double x = px(t);
    os << "<line x1=\"" << x << "\" y1=\"" << kTop + ph << "\" x2=\"" << x << "\" y2=\""
       << kTop + ph + 5 << "\" stroke=\"black\"/>\n"
       << "<text x=\"" << x << "\" y=\"" << kTop + ph + 18
       << "\" text-anchor=\"middle\" font-size=\"11\" font-family=\"sans-serif\">"
       << fmt(t) << "</text>\n";
  }
  for (double t : ay.ticks()) {
    const double y = py(t);
    os << "<line x1=\"" << kLeft - 5 << "\" y1=\"" << y << "\" x2=\"" << kLeft
       << "\" y2=\"" << y << "\" stroke=\"black\"/>\n"
       << "<text x=\"" << kLeft - 8 << "\" y=\"" << y + 4
       << "\" text-anchor=\"end\" font-size=\"11\" font-family=\"sans-serif\">" << fmt(t)
       << "</text>\n";
  }
  if (!opts.xlabel.empty())
    os << "<text x=\"" << kLeft + pw / 2 << "\" y=\"" << kHeight - 8
       << "\" text-anchor=\"middle\" font-size=\"12\" font-family=\"sans-serif\">"
       << opts.xlabel << "</text>\n";
  if (!opts.ylabel.empty())
    os << "<text x=\"14\" y=\"" << kTop + ph / 2
       << "\" text-anchor=\"middle\" font-size=\"12\" font-family=\"sans-serif\" "
          "transform=\"rotate(-90 14 "
       << kTop + ph / 2 << ")\">" << opts.ylabel << "</text>\n";

  if (kind == PlotKind::Heatmap) {
    const Series& s = series[0];
    std::set<double> xs(s.x.begin(), s.x.end()), ys(s.y.begin(), s.y.end());
    const double cw = std::max(1.0, pw / std::max<size_t>(1, xs.size()));
    const double ch = std::max(1.0, ph / std::max<size_t>(1, ys.size()));
    double vlo = 1e300, vhi = -1e300;
    for (double v : s.v) grow(v, vlo, vhi);
    const double span = vhi > vlo ? vhi - vlo : 1.0;
    for (size_t i = 0; i < s.x.size(); ++i) {
      os << "<rect x=\"" << px(s.x[i]) - cw / 2 << "\" y=\"" << py(s.y[i]) - ch / 2
         << "\" width=\"" << cw << "\" height=\"" << ch << "\" fill=\""
         << color_of((s.v[i] - vlo) / span) << "\"/>\n";
    }
  } else {
    int idx = 0;
    for (const Series& s : series) {
      const char* color = kPalette[idx % 8];
      if (kind == PlotKind::Line && s.x.size() >= 2) {
        os << "<polyline fill=\"none\" stroke=\"" << color
           << "\" stroke-width=\"1.5\" points=\"";
        for (size_t i = 0; i < s.x.size(); ++i)
          os << px(s.x[i]) << "," << py(s.y[i]) << " ";
        os << "\"/>\n";
      } else {
        for (size_t i = 0; i < s.x.size(); ++i)
          os << "<circle cx=\"" << px(s.x[i]) << "\" cy=\"" << py(s.y[i])
             << "\" r=\"2.5\" fill=\"" << color << "\"/>\n";
      }
      if (!s.label.empty())
        os << "<text x=\"" << kLeft + pw - 6 << "\" y=\"" << kTop + 16 + 14 * idx
           << "\" text-anchor=\"end\" font-size=\"11\" font-family=\"sans-serif\" "
              "fill=\""
           << color << "\">" << s.label << "</text>\n";
      ++idx;
    }
  }
  os << "</svg>\n";
  if (!os) throw std::runtime_error("emit_svg: write failed for " + path);
}

}  // namespace odegrad
