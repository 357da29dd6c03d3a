#pragma once

#include <filesystem>
#include <string>
#include <vector>

namespace popdyn {

/// One line with an optional +/- band.
struct ChartSeries {
  std::string label;
  std::vector<double> x;
  std::vector<double> mean;
  std::vector<double> sd;  // empty or same length as mean
};

struct ChartOptions {
  std::string title;
  std::string x_label;
  std::string y_label;
  int width = 640;
  int height = 420;
};

/// Static SVG line chart with mean +/- sd bands.
std::string render_line_chart(const std::vector<ChartSeries>& series, const ChartOptions& options);

/// Reads a metrics.csv and writes clicks.svg and gini.svg into `out_dir`.
/// The output depends only on the CSV contents.
std::vector<std::filesystem::path> plot_metrics_csv(const std::filesystem::path& csv,
                                                    const std::filesystem::path& out_dir);

}  // namespace popdyn
