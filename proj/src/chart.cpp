#include "popdyn/chart.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <sstream>

#include <fmt/format.h>

#include "popdyn/error.hpp"
#include "popdyn/stats.hpp"

namespace popdyn {
namespace {

constexpr const char* kPalette[] = {"#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd",
                                    "#8c564b", "#e377c2", "#7f7f7f", "#bcbd22", "#17becf"};

std::string escape(const std::string& s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '&': out += "&amp;"; break;
      case '"': out += "&quot;"; break;
      default: out += c;
    }
  }
  return out;
}

// Round tick spacing (1, 2 or 5 times a power of ten).
double nice_step(double span, int target_ticks) {
  if (!(span > 0)) return 1.0;
  const double raw = span / target_ticks;
  const double mag = std::pow(10.0, std::floor(std::log10(raw)));
  for (double m : {1.0, 2.0, 5.0, 10.0}) {
    if (raw <= m * mag) return m * mag;
  }
  return 10.0 * mag;
}

}  // namespace

std::string render_line_chart(const std::vector<ChartSeries>& series, const ChartOptions& options) {
  const double left = 70, right = 160, top = 40, bottom = 55;
  const double w = options.width, h = options.height;
  const double pw = w - left - right, ph = h - top - bottom;

  double xmin = INFINITY, xmax = -INFINITY, ymin = INFINITY, ymax = -INFINITY;
  for (const auto& s : series) {
    for (std::size_t i = 0; i < s.x.size(); ++i) {
      const double sd = s.sd.empty() ? 0.0 : s.sd[i];
      xmin = std::min(xmin, s.x[i]);
      xmax = std::max(xmax, s.x[i]);
      ymin = std::min(ymin, s.mean[i] - sd);
      ymax = std::max(ymax, s.mean[i] + sd);
    }
  }
  if (!std::isfinite(xmin)) xmin = 0, xmax = 1, ymin = 0, ymax = 1;
  if (xmax == xmin) xmax = xmin + 1;
  if (ymax == ymin) ymax = ymin + 1;
  const double ypad = 0.05 * (ymax - ymin);
  ymin -= ypad;
  ymax += ypad;

  auto px = [&](double x) { return left + (x - xmin) / (xmax - xmin) * pw; };
  auto py = [&](double y) { return top + (ymax - y) / (ymax - ymin) * ph; };

  std::ostringstream svg;
  svg << fmt::format(
      "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{}\" height=\"{}\" "
      "font-family=\"sans-serif\" font-size=\"12\">\n",
      options.width, options.height);
  svg << fmt::format("<rect width=\"{}\" height=\"{}\" fill=\"white\"/>\n", w, h);
  svg << fmt::format("<text x=\"{}\" y=\"22\" text-anchor=\"middle\" font-size=\"15\">{}</text>\n",
                     left + pw / 2, escape(options.title));

  const double xs = nice_step(xmax - xmin, 6);
  for (double t = std::ceil(xmin / xs) * xs; t <= xmax + 1e-9 * xs; t += xs) {
    svg << fmt::format(
        "<line x1=\"{0:.2f}\" y1=\"{1:.2f}\" x2=\"{0:.2f}\" y2=\"{2:.2f}\" stroke=\"#ddd\"/>"
        "<text x=\"{0:.2f}\" y=\"{3:.2f}\" text-anchor=\"middle\">{4:g}</text>\n",
        px(t), top, top + ph, top + ph + 16, t);
  }
  const double ys = nice_step(ymax - ymin, 6);
  for (double t = std::ceil(ymin / ys) * ys; t <= ymax + 1e-9 * ys; t += ys) {
    svg << fmt::format(
        "<line x1=\"{0:.2f}\" y1=\"{1:.2f}\" x2=\"{2:.2f}\" y2=\"{1:.2f}\" stroke=\"#ddd\"/>"
        "<text x=\"{3:.2f}\" y=\"{4:.2f}\" text-anchor=\"end\">{5:g}</text>\n",
        left, py(t), left + pw, left - 6, py(t) + 4, std::abs(t) < 1e-12 * ys ? 0.0 : t);
  }
  svg << fmt::format(
      "<rect x=\"{}\" y=\"{}\" width=\"{}\" height=\"{}\" fill=\"none\" stroke=\"#333\"/>\n", left,
      top, pw, ph);
  svg << fmt::format("<text x=\"{}\" y=\"{}\" text-anchor=\"middle\">{}</text>\n", left + pw / 2,
                     h - 12, escape(options.x_label));
  svg << fmt::format(
      "<text x=\"16\" y=\"{0}\" text-anchor=\"middle\" transform=\"rotate(-90 16 {0})\">{1}</text>\n",
      top + ph / 2, escape(options.y_label));

  for (std::size_t k = 0; k < series.size(); ++k) {
    const auto& s = series[k];
    const char* color = kPalette[k % std::size(kPalette)];
    if (!s.sd.empty() && s.x.size() > 1) {
      std::string band;
      for (std::size_t i = 0; i < s.x.size(); ++i) {
        band += fmt::format("{:.2f},{:.2f} ", px(s.x[i]), py(s.mean[i] + s.sd[i]));
      }
      for (std::size_t i = s.x.size(); i-- > 0;) {
        band += fmt::format("{:.2f},{:.2f} ", px(s.x[i]), py(s.mean[i] - s.sd[i]));
      }
      svg << fmt::format("<polygon points=\"{}\" fill=\"{}\" fill-opacity=\"0.15\" stroke=\"none\"/>\n",
                         band, color);
    }
    std::string line;
    for (std::size_t i = 0; i < s.x.size(); ++i) {
      line += fmt::format("{:.2f},{:.2f} ", px(s.x[i]), py(s.mean[i]));
    }
    svg << fmt::format("<polyline points=\"{}\" fill=\"none\" stroke=\"{}\" stroke-width=\"2\"/>\n",
                       line, color);
    const double ly = top + 10 + 18 * static_cast<double>(k);
    svg << fmt::format(
        "<line x1=\"{0}\" y1=\"{1}\" x2=\"{2}\" y2=\"{1}\" stroke=\"{3}\" stroke-width=\"3\"/>"
        "<text x=\"{4}\" y=\"{5}\">{6}</text>\n",
        left + pw + 10, ly, left + pw + 30, color, left + pw + 36, ly + 4, escape(s.label));
  }
  svg << "</svg>\n";
  return svg.str();
}

std::vector<std::filesystem::path> plot_metrics_csv(const std::filesystem::path& csv,
                                                    const std::filesystem::path& out_dir) {
  std::ifstream in(csv);
  if (!in) throw Error("cannot open " + csv.string());
  std::string line;
  if (!std::getline(in, line) || line != "run_id,method,iteration,cumulative_clicks,gini_tpr,alpha") {
    throw ParseError("unexpected metrics.csv header", 1);
  }

  // method -> iteration -> samples, keeping first-appearance method order.
  std::vector<std::string> order;
  std::map<std::string, std::map<double, std::pair<std::vector<double>, std::vector<double>>>> data;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    std::vector<std::string> f;
    std::stringstream ss(line);
    for (std::string cell; std::getline(ss, cell, ',');) f.push_back(cell);
    if (f.size() != 6) throw ParseError("expected 6 columns", line_no);
    if (!data.contains(f[1])) order.push_back(f[1]);
    try {
      auto& slot = data[f[1]][std::stod(f[2])];
      slot.first.push_back(std::stod(f[3]));
      slot.second.push_back(std::stod(f[4]));
    } catch (const std::exception&) {
      throw ParseError("non-numeric field", line_no);
    }
  }

  std::vector<ChartSeries> clicks, gini;
  for (const auto& method : order) {
    ChartSeries c, g;
    c.label = g.label = method;
    for (const auto& [it, samples] : data[method]) {
      c.x.push_back(it);
      g.x.push_back(it);
      c.mean.push_back(stats::mean(samples.first));
      c.sd.push_back(stats::stddev(samples.first));
      g.mean.push_back(stats::mean(samples.second));
      g.sd.push_back(stats::stddev(samples.second));
    }
    clicks.push_back(std::move(c));
    gini.push_back(std::move(g));
  }

  std::filesystem::create_directories(out_dir);
  const auto clicks_path = out_dir / "clicks.svg";
  const auto gini_path = out_dir / "gini.svg";
  std::ofstream(clicks_path) << render_line_chart(
      clicks, {.title = "Utility", .x_label = "iteration", .y_label = "cumulative clicks"});
  std::ofstream(gini_path) << render_line_chart(
      gini, {.title = "Popularity bias", .x_label = "iteration", .y_label = "Gini of TPR"});
  return {clicks_path, gini_path};
}

}  // namespace popdyn
