// popdyn command-line driver.
//   popdyn run <config|recipe> [--out DIR] [--seed S] [--paper-scale] [--repeats R] [--jobs J]
//   popdyn compare <summary.json...> --gini-band LO:HI
//   popdyn plot <metrics.csv> [--out DIR]
//   popdyn recipes [name]
// Exit codes: 0 success, 1 run failure, 2 config or usage error.
#include <cstdio>
#include <fstream>
#include <iostream>

#include <CLI11.hpp>
#include <fmt/format.h>

#include "popdyn/chart.hpp"
#include "popdyn/error.hpp"
#include "popdyn/experiment.hpp"

namespace {

constexpr int kRunFailure = 1;
constexpr int kConfigError = 2;

std::pair<double, double> parse_band(const std::string& s) {
  const auto colon = s.find(':');
  if (colon == std::string::npos) throw popdyn::ConfigError("--gini-band", "expected LO:HI");
  try {
    std::size_t used_lo = 0, used_hi = 0;
    const double lo = std::stod(s.substr(0, colon), &used_lo);
    const double hi = std::stod(s.substr(colon + 1), &used_hi);
    if (used_lo != colon || used_hi != s.size() - colon - 1) throw std::invalid_argument(s);
    return {lo, hi};
  } catch (const std::logic_error&) {
    throw popdyn::ConfigError("--gini-band", "expected LO:HI, got '" + s + "'");
  }
}

int cmd_run(const std::string& config, const std::string& out, const std::optional<std::uint64_t>& seed,
            bool paper_scale, const std::optional<int>& repeats, const std::optional<int>& jobs) {
  auto spec = popdyn::parse_config(std::filesystem::path(config));
  if (paper_scale) popdyn::apply_paper_scale(spec);
  if (seed) spec.sim.seed = *seed;
  if (repeats) {
    if (*repeats < 1) throw popdyn::ConfigError("--repeats", "must be at least 1");
    spec.sim.repeats = *repeats;
  }
  if (jobs) spec.jobs = *jobs;
  if (!out.empty()) spec.output_dir = out;

  const auto summary = popdyn::run_experiment(spec);
  std::ifstream txt(spec.output_dir / "summary.txt");
  std::cout << txt.rdbuf();
  std::cout << "wrote " << spec.output_dir.string() << "\n";
  return summary.failures.empty() ? 0 : kRunFailure;
}

int cmd_compare(const std::vector<std::string>& paths, const std::string& band) {
  const auto [lo, hi] = parse_band(band);
  std::vector<popdyn::MethodSummary> methods;
  for (const auto& p : paths) {
    std::ifstream in(p);
    if (!in) throw popdyn::ConfigError(p, "cannot open summary");
    nlohmann::json doc;
    try {
      doc = nlohmann::json::parse(in);
    } catch (const nlohmann::json::parse_error& e) {
      throw popdyn::ConfigError(p, e.what());
    }
    auto s = popdyn::RunSummary::from_json(doc);
    for (auto& m : s.methods) methods.push_back(std::move(m));
  }
  const auto table = popdyn::compare_at_matched_bias(methods, lo, hi);
  std::cout << table.to_text();
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"popdyn: popularity bias in recommender feedback loops"};
  app.require_subcommand(1);

  std::string config, out;
  std::optional<std::uint64_t> seed;
  std::optional<int> repeats, jobs;
  bool paper_scale = false;
  auto* run = app.add_subcommand("run", "Run an experiment config or a built-in recipe");
  run->add_option("config", config, "JSON config file or recipe name")->required();
  run->add_option("--out", out, "Output directory");
  run->add_option("--seed", seed, "Base seed");
  run->add_flag("--paper-scale", paper_scale, "Use full-size constants");
  run->add_option("--repeats", repeats, "Number of seeds");
  run->add_option("--jobs", jobs, "Worker threads (0 = all cores)");

  std::vector<std::string> summaries;
  std::string band;
  auto* compare = app.add_subcommand("compare", "Compare methods at a matched Gini band");
  compare->add_option("summaries", summaries, "summary.json files")->required();
  compare->add_option("--gini-band", band, "LO:HI")->required();

  std::string metrics, plot_out;
  auto* plot = app.add_subcommand("plot", "Render charts from a metrics.csv");
  plot->add_option("metrics", metrics, "metrics.csv")->required()->check(CLI::ExistingFile);
  plot->add_option("--out", plot_out, "Output directory (defaults to the CSV's directory)");

  std::string recipe_name;
  auto* recipes = app.add_subcommand("recipes", "List built-in recipes, or print one as JSON");
  recipes->add_option("name", recipe_name, "Recipe to print");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : kConfigError;
  }

  try {
    if (*run) return cmd_run(config, out, seed, paper_scale, repeats, jobs);
    if (*compare) return cmd_compare(summaries, band);
    if (*plot) {
      const std::filesystem::path csv(metrics);
      const auto dir = plot_out.empty() ? csv.parent_path() : std::filesystem::path(plot_out);
      popdyn::plot_metrics_csv(csv, dir.empty() ? "." : dir);
      return 0;
    }
    if (*recipes) {
      if (recipe_name.empty()) {
        for (const auto& n : popdyn::recipe_names()) std::cout << n << "\n";
        return 0;
      }
      const auto doc = popdyn::recipe(recipe_name);
      if (!doc) throw popdyn::ConfigError("", "no recipe named " + recipe_name);
      std::cout << doc->dump(2) << "\n";
      return 0;
    }
  } catch (const popdyn::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kConfigError;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kRunFailure;
  }
  return 0;
}
