#include "gppm/svg.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "gppm/errors.hpp"

namespace gppm {

namespace {

// Fixed canvas. Coordinates are emitted with two decimals so rerenders are
// byte-identical.
constexpr double kWidth = 560, kHeight = 320;
constexpr double kLeft = 56, kRight = 16, kTop = 36, kBottom = 44;

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.2f", v);
  // avoid the two spellings of zero
  if (std::strcmp(buf, "-0.00") == 0) return "0.00";
  return buf;
}

std::string fmt_tick(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%g", v);
  return buf;
}

std::string esc(const std::string& text) {
  std::string out;
  for (char ch : text) {
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

std::vector<double> nice_ticks(double lo, double hi) {
  const double raw = (hi - lo) / 4.0;
  const double mag = std::pow(10.0, std::floor(std::log10(raw)));
  const double norm = raw / mag;
  const double step = (norm < 1.5 ? 1.0 : norm < 3.5 ? 2.0 : norm < 7.5 ? 5.0 : 10.0) * mag;
  std::vector<double> ticks;
  for (double v = std::ceil(lo / step) * step; v <= hi + step * 1e-9; v += step) {
    if (std::abs(v) < step * 1e-9) v = 0.0;  // keep "-0" out of the labels
    ticks.push_back(v);
  }
  return ticks;
}

struct Frame {
  double x_lo = 0, x_hi = 1, y_lo = 0, y_hi = 1;
  double x(double v) const {
    return kLeft + (v - x_lo) / (x_hi - x_lo) * (kWidth - kLeft - kRight);
  }
  double y(double v) const {
    return kHeight - kBottom - (v - y_lo) / (y_hi - y_lo) * (kHeight - kTop - kBottom);
  }
};

struct PanelDef {
  std::string name;
  std::string title;
  std::string x_label;
  const CurveSummary* curve = nullptr;
  bool calendar = false;  // event windows apply only to calendar-day axes
  bool dots = false;      // mark discrete grids point by point
};

void check_curve(const PanelDef& p) {
  const CurveSummary& c = *p.curve;
  const auto n = c.inputs.size();
  if (n == 0 || c.median.size() != n || c.lower.size() != n || c.upper.size() != n)
    throw ValidationError("dashboard: panel '" + p.name + "' has inconsistent series");
  for (Eigen::Index i = 0; i < n; ++i) {
    if (!std::isfinite(c.inputs[i]) || !std::isfinite(c.median[i]) ||
        !std::isfinite(c.lower[i]) || !std::isfinite(c.upper[i]))
      throw ValidationError("dashboard: panel '" + p.name + "' has non-finite values");
    if (c.lower[i] > c.median[i] || c.median[i] > c.upper[i])
      throw ValidationError("dashboard: band does not enclose the median in panel '" +
                            p.name + "'");
  }
}

std::string render_panel(const PanelDef& p, const std::vector<EventWindow>& windows,
                         const std::string& y_label) {
  std::ostringstream out;
  out << "<svg xmlns=\"http://www.w3.org/2000/svg\" viewBox=\"0 0 " << kWidth << ' '
      << kHeight << "\" font-family=\"Helvetica, Arial, sans-serif\" font-size=\"11\">\n";
  out << "<rect x=\"0\" y=\"0\" width=\"" << kWidth << "\" height=\"" << kHeight
      << "\" fill=\"#ffffff\"/>\n";
  out << "<text class=\"title\" x=\"" << fmt(kLeft) << "\" y=\"20\" font-size=\"14\">"
      << esc(p.title) << "</text>\n";

  if (!p.curve->active) {
    out << "<text class=\"empty\" x=\"" << fmt(kWidth / 2) << "\" y=\"" << fmt(kHeight / 2)
        << "\" text-anchor=\"middle\" fill=\"#888888\">component not estimated</text>\n";
    out << "</svg>\n";
    return out.str();
  }
  check_curve(p);
  const CurveSummary& c = *p.curve;

  Frame f;
  f.x_lo = c.inputs.minCoeff();
  f.x_hi = c.inputs.maxCoeff();
  if (f.x_hi == f.x_lo) {
    f.x_lo -= 0.5;
    f.x_hi += 0.5;
  }
  f.y_lo = c.lower.minCoeff();
  f.y_hi = c.upper.maxCoeff();
  if (f.y_hi - f.y_lo < 1e-9) {
    f.y_lo -= 1.0;
    f.y_hi += 1.0;
  } else {
    const double pad = 0.06 * (f.y_hi - f.y_lo);
    f.y_lo -= pad;
    f.y_hi += pad;
  }

  // shaded windows go underneath everything else
  if (p.calendar) {
    for (const auto& w : windows) {
      const double lo = std::max(static_cast<double>(w.start), f.x_lo);
      const double hi = std::min(static_cast<double>(w.end), f.x_hi);
      if (lo > hi) continue;
      out << "<rect class=\"event-window\" x=\"" << fmt(f.x(lo)) << "\" y=\"" << fmt(kTop)
          << "\" width=\"" << fmt(f.x(hi) - f.x(lo)) << "\" height=\""
          << fmt(kHeight - kTop - kBottom) << "\" fill=\"#fdd0a2\" fill-opacity=\"0.55\"/>\n";
      if (!w.label.empty())
        out << "<text class=\"event-label\" x=\"" << fmt(f.x(lo) + 3) << "\" y=\""
            << fmt(kTop + 12) << "\" fill=\"#8c4a08\">" << esc(w.label) << "</text>\n";
    }
  }

  const auto y_ticks = nice_ticks(f.y_lo, f.y_hi);
  const auto x_ticks = nice_ticks(f.x_lo, f.x_hi);
  for (double v : y_ticks)
    out << "<line class=\"grid\" x1=\"" << fmt(kLeft) << "\" y1=\"" << fmt(f.y(v))
        << "\" x2=\"" << fmt(kWidth - kRight) << "\" y2=\"" << fmt(f.y(v))
        << "\" stroke=\"#e0e0e0\" stroke-width=\"1\"/>\n";

  // credible band: upper edge forward, lower edge back
  out << "<path class=\"band\" d=\"M";
  for (Eigen::Index i = 0; i < c.inputs.size(); ++i)
    out << (i ? " L" : "") << fmt(f.x(c.inputs[i])) << ' ' << fmt(f.y(c.upper[i]));
  for (Eigen::Index i = c.inputs.size() - 1; i >= 0; --i)
    out << " L" << fmt(f.x(c.inputs[i])) << ' ' << fmt(f.y(c.lower[i]));
  out << " Z\" fill=\"#9ecae1\" fill-opacity=\"0.45\" stroke=\"none\"/>\n";

  out << "<polyline class=\"median\" fill=\"none\" stroke=\"#08519c\" stroke-width=\"1.8\""
         " points=\"";
  for (Eigen::Index i = 0; i < c.inputs.size(); ++i)
    out << (i ? " " : "") << fmt(f.x(c.inputs[i])) << ',' << fmt(f.y(c.median[i]));
  out << "\"/>\n";
  if (p.dots)
    for (Eigen::Index i = 0; i < c.inputs.size(); ++i)
      out << "<circle class=\"dot\" cx=\"" << fmt(f.x(c.inputs[i])) << "\" cy=\""
          << fmt(f.y(c.median[i])) << "\" r=\"2.5\" fill=\"#08519c\"/>\n";

  out << "<line class=\"axis\" x1=\"" << fmt(kLeft) << "\" y1=\"" << fmt(kHeight - kBottom)
      << "\" x2=\"" << fmt(kWidth - kRight) << "\" y2=\"" << fmt(kHeight - kBottom)
      << "\" stroke=\"#333333\" stroke-width=\"1\"/>\n";
  out << "<line class=\"axis\" x1=\"" << fmt(kLeft) << "\" y1=\"" << fmt(kTop) << "\" x2=\""
      << fmt(kLeft) << "\" y2=\"" << fmt(kHeight - kBottom)
      << "\" stroke=\"#333333\" stroke-width=\"1\"/>\n";
  for (double v : x_ticks)
    out << "<text class=\"tick\" x=\"" << fmt(f.x(v)) << "\" y=\""
        << fmt(kHeight - kBottom + 16) << "\" text-anchor=\"middle\">" << fmt_tick(v)
        << "</text>\n";
  for (double v : y_ticks)
    out << "<text class=\"tick\" x=\"" << fmt(kLeft - 6) << "\" y=\"" << fmt(f.y(v) + 3.5)
        << "\" text-anchor=\"end\">" << fmt_tick(v) << "</text>\n";
  out << "<text class=\"xlabel\" x=\"" << fmt(kLeft + (kWidth - kLeft - kRight) / 2)
      << "\" y=\"" << fmt(kHeight - 10) << "\" text-anchor=\"middle\">" << esc(p.x_label)
      << "</text>\n";
  out << "<text class=\"ylabel\" x=\"14\" y=\"" << fmt(kTop + (kHeight - kTop - kBottom) / 2)
      << "\" text-anchor=\"middle\" transform=\"rotate(-90 14 "
      << fmt(kTop + (kHeight - kTop - kBottom) / 2) << ")\">" << esc(y_label) << "</text>\n";
  out << "</svg>\n";
  return out.str();
}

void write_text(const std::string& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ValidationError("cannot open " + path + " for writing");
  out << content;
  if (!out.flush()) throw ValidationError("write failed: " + path);
}

}  // namespace

std::vector<std::string> render_dashboard(const DashboardSpec& spec,
                                          const std::string& out_dir) {
  for (const auto& w : spec.windows)
    if (w.start < 1 || w.end < w.start)
      throw ValidationError("dashboard: event window must satisfy 1 <= start <= end");

  const ComponentCurves& cc = spec.curves;
  const std::vector<PanelDef> panels = {
      {"long_run", "Long-run calendar trend", "calendar day", &cc.long_run, true, false},
      {"short_run", "Short-run calendar component", "calendar day", &cc.short_run, true,
       false},
      {"cyclic", "Cyclic component", "cycle day", &cc.cyclic, false, true},
      {"recency", "Recency effect", "days since last spend", &cc.recency, false, false},
      {"lifetime", "Lifetime effect", "days since first spend", &cc.lifetime, false, false},
      {"purchase_number", "Purchase-number effect", "purchase number", &cc.purchase_number,
       false, true},
  };

  std::filesystem::create_directories(out_dir);
  std::vector<std::string> written;
  std::ostringstream html;
  html << "<!DOCTYPE html>\n<html>\n<head>\n<meta charset=\"utf-8\"/>\n<title>"
       << esc(spec.title) << "</title>\n"
       << "<style>body{font-family:Helvetica,Arial,sans-serif;margin:24px;}"
          ".grid{display:grid;grid-template-columns:repeat(2,minmax(320px,1fr));gap:12px;}"
          "svg{width:100%;height:auto;border:1px solid #dddddd;}</style>\n</head>\n<body>\n"
       << "<h1>" << esc(spec.title) << "</h1>\n<div class=\"grid\">\n";

  for (const auto& p : panels) {
    const std::string svg = render_panel(p, spec.windows, "logit contribution");
    const std::string path = (std::filesystem::path(out_dir) / (p.name + ".svg")).string();
    write_text(path, svg);
    written.push_back(path);
    html << "<div class=\"panel\">\n" << svg << "</div>\n";
  }
  html << "</div>\n</body>\n</html>\n";
  const std::string html_path =
      (std::filesystem::path(out_dir) / "dashboard.html").string();
  write_text(html_path, html.str());
  written.push_back(html_path);
  return written;
}

}  // namespace gppm
