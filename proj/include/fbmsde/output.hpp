#pragma once

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <string>
#include <vector>

#include "fbmsde/errors.hpp"
#include "fbmsde/scheme.hpp"

namespace fbmsde::harness {

/// Full-precision decimal formatting (17 significant digits) so rereading
/// reproduces the exact double.
inline std::string g17(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

inline std::string g6(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.6g", v);
  return buf;
}

/// Trajectory CSV: columns k,t_k,tau_k,y,x,db; tau/db empty on the final row
/// and x empty where the back-transform was unavailable. A trailing comment
/// records the stop reason.
inline void write_trajectory_csv(const std::string& path, const scheme::AdaptiveTrajectory& t) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw resource_error("harness.write_trajectory_csv: cannot open '" + path + "'");
  out << "k,t_k,tau_k,y,x,db\n";
  for (std::size_t k = 0; k < t.times.size(); ++k) {
    out << k << ',' << g17(t.times[k]) << ',';
    if (k < t.tau.size()) out << g17(t.tau[k]);
    out << ',' << g17(t.y_values[k]) << ',';
    if (k < t.x_values.size()) out << g17(t.x_values[k]);
    out << ',';
    if (k < t.noise_increments.size()) out << g17(t.noise_increments[k]);
    out << '\n';
  }
  out << "# stop_reason=" << scheme::to_string(t.stop_reason) << '\n';
}

struct PathRecord {
  std::size_t path_index = 0;
  std::uint64_t seed = 0;  // derived stream seed for this path
  scheme::StopReason stop_reason = scheme::StopReason::StepCap;
  std::size_t steps = 0;
  double t_last = 0.0;
  bool has_bracket = false;
  double tail_lower = 0.0;
  double tail_upper = 0.0;
  double final_ratio = 0.0;

  double bracket_midpoint() const { return t_last + 0.5 * (tail_lower + tail_upper); }
};

inline void write_summary_csv(const std::string& path, const std::vector<PathRecord>& rows) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw resource_error("harness.write_summary_csv: cannot open '" + path + "'");
  out << "path_index,seed,stop_reason,steps,t_last,tail_lower,tail_upper,final_ratio\n";
  for (const auto& r : rows) {
    out << r.path_index << ',' << r.seed << ',' << scheme::to_string(r.stop_reason) << ','
        << r.steps << ',' << g17(r.t_last) << ',';
    if (r.has_bracket) out << g17(r.tail_lower);
    out << ',';
    if (r.has_bracket) out << g17(r.tail_upper);
    out << ',' << g17(r.final_ratio) << '\n';
  }
}

/// Linearly interpolated quantile of a sorted copy of xs.
inline double quantile(std::vector<double> xs, double p) {
  if (xs.empty()) return std::nan("");
  std::sort(xs.begin(), xs.end());
  const double pos = p * (xs.size() - 1);
  const std::size_t i = static_cast<std::size_t>(pos);
  if (i + 1 >= xs.size()) return xs.back();
  const double frac = pos - static_cast<double>(i);
  return xs[i] * (1.0 - frac) + xs[i + 1] * frac;
}

// ---------------------------------------------------------------------------
// SVG emission: self-contained, deterministic byte-for-byte for fixed input.
// ---------------------------------------------------------------------------

struct Series {
  std::string label;
  std::vector<std::pair<double, double>> points;
};

struct PlotOptions {
  std::string title;
  std::string xlabel;
  std::string ylabel;
  bool log_y = false;  // plot log10 of the values; nonpositive points are dropped
  int width = 900;
  int height = 560;
};

namespace detail {

inline const char* palette(std::size_t i) {
  static const char* colors[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e",
                                 "#8c564b", "#e377c2", "#7f7f7f", "#bcbd22", "#17becf"};
  return colors[i % 10];
}

// round-number tick positions covering [lo, hi]
inline std::vector<double> nice_ticks(double lo, double hi, int target = 6) {
  std::vector<double> ticks;
  const double range = hi - lo;
  if (!(range > 0.0)) return {lo};
  double step = std::pow(10.0, std::floor(std::log10(range / target)));
  if (range / step > 5.0 * target) step *= 5.0;
  else if (range / step > 2.0 * target) step *= 2.0;
  const double start = std::ceil(lo / step) * step;
  for (double v = start; v <= hi + 1e-12 * range; v += step) ticks.push_back(v);
  return ticks;
}

}  // namespace detail

/// Render line series to a standalone SVG. Zero-variation data still renders
/// via a unit-height viewport around the value.
inline void write_svg(const std::string& path, const std::vector<Series>& series,
                      const PlotOptions& opt) {
  if (series.empty()) throw config_error("harness.emit_plots: nothing to plot");

  // collect transformed points
  std::vector<std::vector<std::pair<double, double>>> data(series.size());
  double xmin = 0, xmax = 0, ymin = 0, ymax = 0;
  bool any = false;
  for (std::size_t s = 0; s < series.size(); ++s) {
    for (auto [x, y] : series[s].points) {
      if (opt.log_y) {
        if (!(y > 0.0)) continue;
        y = std::log10(y);
      }
      if (!std::isfinite(x) || !std::isfinite(y)) continue;
      data[s].push_back({x, y});
      if (!any) {
        xmin = xmax = x;
        ymin = ymax = y;
        any = true;
      } else {
        xmin = std::min(xmin, x);
        xmax = std::max(xmax, x);
        ymin = std::min(ymin, y);
        ymax = std::max(ymax, y);
      }
    }
  }
  if (!any) throw config_error("harness.emit_plots: nothing to plot");
  if (!(xmax - xmin > 0.0)) {
    xmin -= 0.5;
    xmax += 0.5;
  }
  if (!(ymax - ymin > 0.0)) {  // degenerate-range guard: unit-height viewport
    ymin -= 0.5;
    ymax += 0.5;
  }

  const double ml = 70, mr = 20, mt = 36, mb = 48;
  const double pw = opt.width - ml - mr, ph = opt.height - mt - mb;
  auto sx = [&](double x) { return ml + (x - xmin) / (xmax - xmin) * pw; };
  auto sy = [&](double y) { return mt + (1.0 - (y - ymin) / (ymax - ymin)) * ph; };

  std::ofstream out(path, std::ios::binary);
  if (!out) throw resource_error("harness.emit_plots: cannot open '" + path + "'");
  out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << opt.width << "\" height=\""
      << opt.height << "\" viewBox=\"0 0 " << opt.width << " " << opt.height << "\">\n";
  out << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  out << "<text x=\"" << opt.width / 2 << "\" y=\"20\" font-family=\"sans-serif\" font-size=\"15\""
      << " text-anchor=\"middle\">" << opt.title << "</text>\n";

  for (double t : detail::nice_ticks(xmin, xmax)) {
    const double px = sx(t);
    out << "<line x1=\"" << g6(px) << "\" y1=\"" << g6(mt) << "\" x2=\"" << g6(px) << "\" y2=\""
        << g6(mt + ph) << "\" stroke=\"#dddddd\"/>\n";
    out << "<text x=\"" << g6(px) << "\" y=\"" << g6(mt + ph + 18)
        << "\" font-family=\"sans-serif\" font-size=\"11\" text-anchor=\"middle\">" << g6(t)
        << "</text>\n";
  }
  for (double t : detail::nice_ticks(ymin, ymax)) {
    const double py = sy(t);
    out << "<line x1=\"" << g6(ml) << "\" y1=\"" << g6(py) << "\" x2=\"" << g6(ml + pw)
        << "\" y2=\"" << g6(py) << "\" stroke=\"#dddddd\"/>\n";
    out << "<text x=\"" << g6(ml - 6) << "\" y=\"" << g6(py + 4)
        << "\" font-family=\"sans-serif\" font-size=\"11\" text-anchor=\"end\">"
        << (opt.log_y ? ("1e" + g6(t)) : g6(t)) << "</text>\n";
  }
  out << "<rect x=\"" << g6(ml) << "\" y=\"" << g6(mt) << "\" width=\"" << g6(pw)
      << "\" height=\"" << g6(ph) << "\" fill=\"none\" stroke=\"black\"/>\n";
  out << "<text x=\"" << opt.width / 2 << "\" y=\"" << opt.height - 10
      << "\" font-family=\"sans-serif\" font-size=\"13\" text-anchor=\"middle\">" << opt.xlabel
      << "</text>\n";
  out << "<text x=\"16\" y=\"" << opt.height / 2
      << "\" font-family=\"sans-serif\" font-size=\"13\" text-anchor=\"middle\""
      << " transform=\"rotate(-90 16 " << opt.height / 2 << ")\">" << opt.ylabel
      << (opt.log_y ? " (log scale)" : "") << "</text>\n";

  for (std::size_t s = 0; s < data.size(); ++s) {
    if (data[s].empty()) continue;
    out << "<polyline fill=\"none\" stroke=\"" << detail::palette(s)
        << "\" stroke-width=\"1.2\" points=\"";
    for (auto [x, y] : data[s]) out << g6(sx(x)) << ',' << g6(sy(y)) << ' ';
    out << "\"/>\n";
  }
  out << "</svg>\n";
}

}  // namespace fbmsde::harness
