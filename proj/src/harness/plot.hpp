#pragma once

#include <string>
#include <utility>
#include <vector>

namespace m2i2::harness {

struct Curve {
  std::vector<double> x;
  std::vector<double> y;
};

struct BandCurve {
  std::string label;
  std::vector<double> x;
  std::vector<double> mean;
  std::vector<double> lo;  // min over runs
  std::vector<double> hi;  // max over runs
  std::size_t runs = 0;
};

// Mean and min-max band of several curves on the x grid of the first,
// restricted to the x range covered by every curve (linear interpolation).
BandCurve aggregate_curves(const std::string& label, const std::vector<Curve>& curves);

struct Chart {
  std::string title;
  std::string x_label;
  std::string y_label;
  std::vector<BandCurve> series;
};

// Standalone SVG; bands are drawn only for series built from several runs.
std::string render_svg(const Chart& chart);
// Heatmap of a matrix (rows top to bottom) with values in [0, 1].
std::string render_heatmap_svg(const std::string& title, const std::vector<std::vector<double>>& rows);

// Groups run directories by variant and communication rate, then writes
// performance.svg and loss_{rl,rc,inv}.svg into out_dir. Returns the files.
std::vector<std::string> plot_runs(const std::vector<std::string>& run_dirs, const std::string& out_dir);

}  // namespace m2i2::harness
