#pragma once

#include <optional>
#include <string>
#include <vector>

#include "wsca/csv.hpp"

namespace wsca {

// Minimal deterministic SVG line plots; geometry is emitted directly so the
// output bytes are stable for fixed input.
struct PlotSeries {
  std::vector<double> x, y;
  std::string color = "#1f77b4";
  double width = 1.0;
};

struct PlotMarker {
  double x = 0.0, y = 0.0;
  // carried as data attributes so downstream checks can read the peak back
  std::string data_key, data_value;
};

struct PlotSpec {
  std::string title, xlabel, ylabel;
  std::vector<PlotSeries> series;
  std::vector<PlotMarker> markers;
  std::vector<double> hlines; // horizontal guide lines (e.g. TVLA threshold)
};

void write_svg_plot(const std::string& path, const PlotSpec& spec);

// kinds: rank | corr | correvo | tvla | envelope. Validates the CSV schema
// for the kind and fails without writing anything on mismatch or empty data.
void plot_csv(const std::string& csv_path, const std::string& kind,
              const std::string& out_svg, double tvla_threshold = 4.5);

} // namespace wsca
