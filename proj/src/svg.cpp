#include "wsca/svg.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>

namespace wsca {

namespace {

constexpr double kWidth = 720, kHeight = 440;
constexpr double kLeft = 70, kRight = 20, kTop = 40, kBottom = 55;

std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.6g", v);
  return buf;
}

struct Range {
  double lo = 0.0, hi = 1.0;
  void expand(double v) {
    if (!std::isfinite(v)) return;
    lo = std::min(lo, v);
    hi = std::max(hi, v);
  }
  void pad() {
    if (hi <= lo) hi = lo + 1.0;
    const double m = 0.03 * (hi - lo);
    lo -= m;
    hi += m;
  }
};

} // namespace

void write_svg_plot(const std::string& path, const PlotSpec& spec) {
  require(!spec.series.empty(), Err::SchemaMismatch, "nothing to plot");
  Range rx{1e300, -1e300}, ry{1e300, -1e300};
  size_t points = 0;
  for (const auto& s : spec.series) {
    require(s.x.size() == s.y.size(), Err::DimMismatch, "series x/y lengths differ");
    for (size_t i = 0; i < s.x.size(); ++i) {
      rx.expand(s.x[i]);
      ry.expand(s.y[i]);
      ++points;
    }
  }
  require(points > 0, Err::SchemaMismatch, "plot has no points");
  for (double h : spec.hlines) ry.expand(h);
  rx.pad();
  ry.pad();

  const double pw = kWidth - kLeft - kRight;
  const double ph = kHeight - kTop - kBottom;
  auto X = [&](double v) { return kLeft + (v - rx.lo) / (rx.hi - rx.lo) * pw; };
  auto Y = [&](double v) { return kTop + ph - (v - ry.lo) / (ry.hi - ry.lo) * ph; };

  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  require(bool(f), Err::BadArgument, "cannot open " + path + " for writing");
  f << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << kWidth << "\" height=\""
    << kHeight << "\" viewBox=\"0 0 " << kWidth << " " << kHeight << "\">\n";
  f << "<rect width=\"" << kWidth << "\" height=\"" << kHeight << "\" fill=\"white\"/>\n";
  f << "<text x=\"" << kWidth / 2 << "\" y=\"24\" text-anchor=\"middle\" font-size=\"16\" "
       "font-family=\"sans-serif\">"
    << spec.title << "</text>\n";

  // axes with 5 linear ticks each
  f << "<line x1=\"" << kLeft << "\" y1=\"" << kTop + ph << "\" x2=\"" << kLeft + pw
    << "\" y2=\"" << kTop + ph << "\" stroke=\"black\"/>\n";
  f << "<line x1=\"" << kLeft << "\" y1=\"" << kTop << "\" x2=\"" << kLeft << "\" y2=\""
    << kTop + ph << "\" stroke=\"black\"/>\n";
  for (int i = 0; i <= 4; ++i) {
    const double fxv = rx.lo + (rx.hi - rx.lo) * i / 4.0;
    const double fyv = ry.lo + (ry.hi - ry.lo) * i / 4.0;
    f << "<line x1=\"" << fmt(X(fxv)) << "\" y1=\"" << kTop + ph << "\" x2=\"" << fmt(X(fxv))
      << "\" y2=\"" << kTop + ph + 5 << "\" stroke=\"black\"/>\n";
    f << "<text x=\"" << fmt(X(fxv)) << "\" y=\"" << kTop + ph + 20
      << "\" text-anchor=\"middle\" font-size=\"11\" font-family=\"sans-serif\">" << fmt(fxv)
      << "</text>\n";
    f << "<line x1=\"" << kLeft - 5 << "\" y1=\"" << fmt(Y(fyv)) << "\" x2=\"" << kLeft
      << "\" y2=\"" << fmt(Y(fyv)) << "\" stroke=\"black\"/>\n";
    f << "<text x=\"" << kLeft - 8 << "\" y=\"" << fmt(Y(fyv) + 4)
      << "\" text-anchor=\"end\" font-size=\"11\" font-family=\"sans-serif\">" << fmt(fyv)
      << "</text>\n";
  }
  f << "<text x=\"" << kLeft + pw / 2 << "\" y=\"" << kHeight - 12
    << "\" text-anchor=\"middle\" font-size=\"13\" font-family=\"sans-serif\">" << spec.xlabel
    << "</text>\n";
  f << "<text x=\"18\" y=\"" << kTop + ph / 2
    << "\" text-anchor=\"middle\" font-size=\"13\" font-family=\"sans-serif\" "
       "transform=\"rotate(-90 18 "
    << kTop + ph / 2 << ")\">" << spec.ylabel << "</text>\n";

  for (double h : spec.hlines)
    f << "<line x1=\"" << kLeft << "\" y1=\"" << fmt(Y(h)) << "\" x2=\"" << kLeft + pw
      << "\" y2=\"" << fmt(Y(h)) << "\" stroke=\"#d62728\" stroke-dasharray=\"4 3\"/>\n";

  for (const auto& s : spec.series) {
    f << "<polyline fill=\"none\" stroke=\"" << s.color << "\" stroke-width=\"" << s.width
      << "\" points=\"";
    for (size_t i = 0; i < s.x.size(); ++i) {
      if (i) f << " ";
      f << fmt(X(s.x[i])) << "," << fmt(Y(s.y[i]));
    }
    f << "\"/>\n";
  }

  for (const auto& m : spec.markers) {
    f << "<circle cx=\"" << fmt(X(m.x)) << "\" cy=\"" << fmt(Y(m.y))
      << "\" r=\"4\" fill=\"#d62728\"";
    if (!m.data_key.empty()) f << " data-" << m.data_key << "=\"" << m.data_value << "\"";
    f << " data-x=\"" << fmt(m.x) << "\" data-y=\"" << fmt(m.y) << "\"/>\n";
  }
  f << "</svg>\n";
}

namespace {

void require_columns(const Csv& csv, const std::vector<std::string>& cols) {
  for (const auto& c : cols) (void)csv.column(c);
  require(!csv.rows.empty(), Err::SchemaMismatch, "CSV has no data rows");
}

PlotSpec plot_rank(const Csv& csv) {
  require_columns(csv, {"n_traces", "rank"});
  PlotSeries s;
  s.color = "#d62728";
  s.width = 1.5;
  const size_t cx = csv.column("n_traces"), cy = csv.column("rank");
  for (const auto& r : csv.rows) {
    s.x.push_back(r[cx]);
    s.y.push_back(r[cy]);
  }
  PlotSpec spec;
  spec.title = "Key rank evolution";
  spec.xlabel = "traces";
  spec.ylabel = "key rank";
  spec.series.push_back(std::move(s));
  return spec;
}

PlotSpec plot_grouped(const Csv& csv, const std::string& group_col, const std::string& x_col,
                      const std::string& y_col, const std::string& title,
                      const std::string& xlabel, const std::string& ylabel) {
  require_columns(csv, {group_col, x_col, y_col});
  const size_t cg = csv.column(group_col), cx = csv.column(x_col), cy = csv.column(y_col);
  std::map<double, PlotSeries> by_group;
  double best = -1.0;
  double best_group = 0.0, best_x = 0.0, best_y = 0.0;
  for (const auto& r : csv.rows) {
    auto& s = by_group[r[cg]];
    s.x.push_back(r[cx]);
    s.y.push_back(r[cy]);
    if (std::isfinite(r[cy]) && std::abs(r[cy]) > best) {
      best = std::abs(r[cy]);
      best_group = r[cg];
      best_x = r[cx];
      best_y = r[cy];
    }
  }
  PlotSpec spec;
  spec.title = title;
  spec.xlabel = xlabel;
  spec.ylabel = ylabel;
  for (auto& [g, s] : by_group) {
    s.color = (g == best_group) ? "#d62728" : "#9a9a9a";
    s.width = (g == best_group) ? 1.6 : 0.6;
    spec.series.push_back(std::move(s));
  }
  PlotMarker m;
  m.x = best_x;
  m.y = best_y;
  m.data_key = "peak-candidate";
  m.data_value = fmt(best_group);
  spec.markers.push_back(m);
  return spec;
}

PlotSpec plot_tvla(const Csv& csv, double threshold) {
  require_columns(csv, {"sample", "t"});
  PlotSeries s;
  const size_t cx = csv.column("sample"), cy = csv.column("t");
  for (const auto& r : csv.rows) {
    s.x.push_back(r[cx]);
    s.y.push_back(std::isfinite(r[cy]) ? r[cy] : 0.0);
  }
  PlotSpec spec;
  spec.title = "TVLA";
  spec.xlabel = "sample";
  spec.ylabel = "t statistic";
  spec.hlines = {threshold, -threshold};
  spec.series.push_back(std::move(s));
  return spec;
}

PlotSpec plot_envelope(const Csv& csv) {
  require_columns(csv, {"sample", "value"});
  PlotSeries s;
  const size_t cx = csv.column("sample"), cy = csv.column("value");
  for (const auto& r : csv.rows) {
    s.x.push_back(r[cx]);
    s.y.push_back(r[cy]);
  }
  PlotSpec spec;
  spec.title = "Envelope";
  spec.xlabel = "sample";
  spec.ylabel = "magnitude";
  spec.series.push_back(std::move(s));
  return spec;
}

} // namespace

void plot_csv(const std::string& csv_path, const std::string& kind, const std::string& out_svg,
              double tvla_threshold) {
  const Csv csv = read_csv(csv_path);
  PlotSpec spec;
  if (kind == "rank")
    spec = plot_rank(csv);
  else if (kind == "corr")
    spec = plot_grouped(csv, "candidate", "sample", "rho", "Correlation by sample", "sample",
                        "rho");
  else if (kind == "correvo")
    spec = plot_grouped(csv, "candidate", "n_traces", "peak_abs_rho",
                        "Correlation vs traces", "traces", "peak |rho|");
  else if (kind == "tvla")
    spec = plot_tvla(csv, tvla_threshold);
  else if (kind == "envelope")
    spec = plot_envelope(csv);
  else
    fail(Err::BadArgument, "unknown plot kind: " + kind);
  write_svg_plot(out_svg, spec);
}

} // namespace wsca
