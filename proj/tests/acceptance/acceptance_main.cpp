// Acceptance suite: one PASS/FAIL line per criterion. Exit status is the
// number of failed criteria (capped at 1 for ctest).
#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <numeric>
#include <sstream>
#include <string>
#include <vector>

#include <fmt/format.h>

#include "popdyn/debias.hpp"
#include "popdyn/experiment.hpp"
#include "popdyn/ground_truth.hpp"
#include "popdyn/metrics.hpp"
#include "popdyn/mf.hpp"
#include "popdyn/rng.hpp"
#include "popdyn/stats.hpp"

using namespace popdyn;
using nlohmann::json;

namespace {

constexpr int kSeeds = 10;

// Matched-bias bands, fixed before the comparison is run.
constexpr double kFig6BandLo = 0.40, kFig6BandHi = 0.44;
constexpr double kFig7BandLo = 0.29, kFig7BandHi = 0.33;

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::vector<double> mean_gini_curve(const MethodSummary& m) {
  std::vector<double> out;
  for (const auto& c : m.checkpoints) out.push_back(c.gini_mean);
  return out;
}

double tail_slope(const MethodSummary& m, double fraction) {
  const auto curve = mean_gini_curve(m);
  const auto n = static_cast<std::size_t>(std::ceil(fraction * static_cast<double>(curve.size())));
  return stats::slope(std::span<const double>(curve).last(std::max<std::size_t>(n, 2)));
}

RunSummary run_recipe(const std::string& name, const std::function<void(json&)>& edit = {}) {
  json doc = *recipe(name);
  doc["sim"]["repeats"] = kSeeds;
  doc["write_logs"] = false;
  if (edit) edit(doc);
  const auto summary = run_experiment(parse_config(doc), false);
  if (!summary.failures.empty()) {
    throw Error(name + ": " + std::to_string(summary.failures.size()) + " runs failed, first: " +
                summary.failures.front());
  }
  return summary;
}

std::string describe(const MethodSummary& m) {
  return fmt::format("{} gini {:.3f}±{:.3f} clicks {:.0f}±{:.0f}", m.label, m.final_gini_mean,
                     m.final_gini_sd, m.total_clicks_mean, m.total_clicks_sd);
}

// Naive pairwise oracle: sum over ordered pairs (v_j - v_i) for i before j
// in (key, index) order, over M * sum(v).
double pairwise_gini(const std::vector<double>& v, const std::vector<double>& key) {
  const std::size_t m = v.size();
  std::vector<std::size_t> idx(m);
  std::iota(idx.begin(), idx.end(), 0);
  std::stable_sort(idx.begin(), idx.end(), [&](auto a, auto b) { return key[a] < key[b]; });
  double total = 0, pairs = 0;
  for (double x : v) total += x;
  if (total == 0) return 0;
  for (std::size_t a = 0; a < m; ++a) {
    for (std::size_t b = a + 1; b < m; ++b) pairs += v[idx[b]] - v[idx[a]];
  }
  return pairs / (static_cast<double>(m) * total);
}

Outcome criterion1() {
  Rng rng(101);
  double gini_err = 0, fpc_err = 0, scale_err = 0;
  for (int rep = 0; rep < 1000; ++rep) {
    const std::size_t m = 1 + rng.index(60);
    std::vector<double> v(m), key(m);
    for (std::size_t i = 0; i < m; ++i) {
      v[i] = rng.bernoulli(0.2) ? 0.0 : rng.uniform();
      key[i] = static_cast<double>(rng.index(10));  // ties exercise the index rule
    }
    gini_err = std::max(gini_err, std::abs(gini_of(std::span<const double>(v), std::span<const double>(key)) -
                                           pairwise_gini(v, key)));

    const double theta = rng.uniform();
    std::vector<std::int32_t> pos(rng.index(6));
    double prod = 1;
    for (auto& k : pos) {
      k = 1 + static_cast<std::int32_t>(rng.index(20));
      prod *= 1 - theta / std::log2(1.0 + k);
    }
    const double direct = std::clamp(1 - (1 - theta) / prod, 0.0, 1.0);
    fpc_err = std::max(fpc_err, std::abs(fpc_correct(theta, pos) - direct));

    const std::size_t n = 1 + rng.index(20);
    std::vector<double> scores(n);
    std::vector<std::int64_t> counts(n);
    std::vector<int> cands(n);
    for (std::size_t i = 0; i < n; ++i) {
      scores[i] = rng.uniform();
      counts[i] = static_cast<std::int64_t>(rng.index(5000));
      cands[i] = static_cast<int>(i);
    }
    const double alpha = 2 * rng.uniform();
    const auto scaled = scale_scores(scores, cands, counts, alpha);
    for (std::size_t i = 0; i < n; ++i) {
      const double expect = scores[i] / std::pow(static_cast<double>(std::max<std::int64_t>(counts[i], 1)), alpha);
      scale_err = std::max(scale_err, std::abs(scaled[i] - expect));
    }
  }
  return {gini_err <= 1e-9 && fpc_err <= 1e-12 && scale_err <= 1e-12,
          fmt::format("max err gini {:.2e} fpc {:.2e} scale {:.2e}", gini_err, fpc_err, scale_err)};
}

Outcome criterion2() {
  Rng rng(202);
  double worst = 0;
  for (int inst = 0; inst < 20; ++inst) {
    const int n_users = 3 + static_cast<int>(rng.index(5));
    const int n_items = 4 + static_cast<int>(rng.index(6));
    auto params = ModelParams::random(n_users, n_items, 4, 0.5, 300 + inst);
    for (auto& b : params.user_bias) b = 0.3 * rng.normal();
    for (auto& b : params.item_bias) b = 0.3 * rng.normal();
    params.global_bias = 0.3 * rng.normal();
    std::vector<TrainingExample> batch;
    for (int j = 0; j < 30; ++j) {
      ExposureRecord rec{.user = static_cast<int>(rng.index(n_users)),
                         .item = static_cast<int>(rng.index(n_items)),
                         .position = 1 + static_cast<int>(rng.index(20)),
                         .clicked = rng.bernoulli(0.5)};
      batch.push_back(ips_example(rec, 0.1));
    }
    const double l2 = 0.1;
    const auto lg = loss_and_gradient(params, batch, l2);
    auto check = [&](std::vector<double>& coords, const std::vector<double>& grad) {
      for (std::size_t i = 0; i < coords.size(); ++i) {
        const double saved = coords[i], h = 1e-5;
        coords[i] = saved + h;
        const double up = batch_loss(params, batch, l2);
        coords[i] = saved - h;
        const double down = batch_loss(params, batch, l2);
        coords[i] = saved;
        const double fd = (up - down) / (2 * h);
        worst = std::max(worst, std::abs(fd - grad[i]) / std::max(1e-6, std::max(std::abs(fd), std::abs(grad[i]))));
      }
    };
    check(params.user_factors, lg.grad.user_factors);
    check(params.item_factors, lg.grad.item_factors);
    check(params.user_bias, lg.grad.user_bias);
    check(params.item_bias, lg.grad.item_bias);
    const double g0 = params.global_bias, h = 1e-5;
    params.global_bias = g0 + h;
    const double up = batch_loss(params, batch, l2);
    params.global_bias = g0 - h;
    const double down = batch_loss(params, batch, l2);
    params.global_bias = g0;
    const double fd = (up - down) / (2 * h);
    worst = std::max(worst, std::abs(fd - lg.grad.global_bias) /
                                std::max(1e-6, std::max(std::abs(fd), std::abs(lg.grad.global_bias))));
  }
  return {worst < 1e-4, fmt::format("max relative error {:.2e}", worst)};
}

Outcome criterion3(const RunSummary& s) {
  const auto& mf = s.method("mf");
  const auto& pop = s.method("popular");
  const auto& rnd = s.method("random");
  const bool ok = std::abs(rnd.final_gini_mean) <= 0.05 && mf.final_gini_mean >= 0.8 * pop.final_gini_mean &&
                  mf.final_gini_mean - rnd.final_gini_mean >= 0.3 &&
                  mf.total_clicks_mean > pop.total_clicks_mean && mf.total_clicks_mean > rnd.total_clicks_mean;
  return {ok, describe(mf) + "; " + describe(pop) + "; " + describe(rnd)};
}

Outcome criterion4(const RunSummary& s) {
  const auto& with = s.method("mf");
  const auto& without = s.method("mf(without_cfl)");
  const double slope = tail_slope(without, 0.5);
  return {without.final_gini_mean < with.final_gini_mean && slope > 0,
          describe(with) + "; " + describe(without) + fmt::format("; last-half slope {:+.4f}", slope)};
}

Outcome criterion5(const RunSummary& s) {
  std::vector<double> x_imb, y_imb, density_curve;
  for (const auto& m : s.methods) {
    if (m.dataset.rfind("I", 0) == 0) {
      x_imb.push_back(m.x);
      y_imb.push_back(m.final_gini_mean);
    } else if (m.dataset.rfind("D", 0) == 0) {
      density_curve.push_back(m.final_gini_mean);
    }
  }
  const double rho = stats::spearman(x_imb, y_imb);
  const auto smooth = stats::smooth3(density_curve);
  const bool hump = stats::is_up_then_down(smooth);
  std::string curve;
  for (double v : smooth) curve += fmt::format(" {:.3f}", v);
  std::string imb;
  for (double v : y_imb) imb += fmt::format(" {:.3f}", v);
  return {rho >= 0.8 && hump, fmt::format("imbalance rho {:.3f} (gini{}); density curve{} {}", rho, imb, curve,
                                          hump ? "up-then-down" : "not unimodal")};
}

Outcome criterion6(const RunSummary& s) {
  std::vector<double> x, clicks, gini;
  for (const auto& m : s.methods) {
    x.push_back(m.x);
    clicks.push_back(m.total_clicks_mean);
    gini.push_back(m.final_gini_mean);
  }
  const double rc = stats::spearman(x, clicks), rg = stats::spearman(x, gini);
  std::string row;
  for (std::size_t i = 0; i < x.size(); ++i) row += fmt::format(" [{:.2f}: {:.0f}, {:.3f}]", x[i], clicks[i], gini[i]);
  return {rc >= 0.8 && rg >= 0.8, fmt::format("rho clicks {:.3f} gini {:.3f};{}", rc, rg, row)};
}

std::vector<MethodSummary> family(const RunSummary& s, const std::string& name) {
  std::vector<MethodSummary> out;
  for (const auto& m : s.methods) {
    if (m.name == name) out.push_back(m);
  }
  return out;
}

Outcome criterion7(const RunSummary& s) {
  auto pool = family(s, "scale");
  for (auto& m : family(s, "dscale")) pool.push_back(m);
  const auto table = compare_at_matched_bias(pool, kFig6BandLo, kFig6BandHi);
  const auto& mf = s.method("mf");
  if (!table.all_feasible()) return {false, "no setting in band: " + table.to_text()};
  const auto& scale = s.method(table.rows[0].label);
  const auto& dscale = s.method(table.rows[1].label);
  const double ss = tail_slope(scale, 1.0 / 3), ds = tail_slope(dscale, 1.0 / 3);
  const bool ok = scale.final_gini_mean < mf.final_gini_mean && dscale.final_gini_mean < mf.final_gini_mean &&
                  ds < 0 && ss >= 0;
  return {ok, fmt::format("{}; {} (last-third slope {:+.4f}); {} (last-third slope {:+.4f})", describe(mf),
                          describe(scale), ss, describe(dscale), ds)};
}

Outcome criterion8(const RunSummary& s) {
  const auto& mf = s.method("mf");
  const auto& fpc = s.method("fpc");
  const bool part1 = fpc.total_clicks_mean >= mf.total_clicks_mean &&
                     fpc.final_gini_mean <= mf.final_gini_mean - 0.05;
  auto pool = family(s, "dscale");
  for (auto& m : family(s, "fpc_dscale")) pool.push_back(m);
  const auto table = compare_at_matched_bias(pool, kFig7BandLo, kFig7BandHi);
  std::string detail = describe(mf) + "; " + describe(fpc);
  if (!table.all_feasible()) return {false, detail + "; no matched pair: " + table.to_text()};
  const auto& ds = s.method(table.rows[0].label);
  const auto& fd = s.method(table.rows[1].label);
  if (ds.seeds != fd.seeds) return {false, detail + "; seeds are not matched"};
  const auto t = stats::paired_t_test_greater(fd.total_clicks, ds.total_clicks);
  detail += fmt::format("; {} vs {}: t {:.2f} p {:.4f}", describe(fd), describe(ds), t.t, t.p_value);
  return {part1 && t.p_value < 0.05, detail};
}

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

Outcome criterion9() {
  const auto base = std::filesystem::temp_directory_path() / "popdyn_acceptance_determinism";
  std::filesystem::remove_all(base);
  json doc = *recipe("fig7_fpc_family");
  doc["sim"]["repeats"] = 2;
  doc["methods"] = {"mf", "popular", "random", "fpc", {{"name", "scale"}, {"alpha", 0.2}},
                    {{"name", "fpc_dscale"}, {"delta", 0.002}}};
  doc["write_logs"] = false;
  std::vector<std::string> csvs;
  for (int jobs : {1, 1, 2}) {
    auto spec = parse_config(doc);
    spec.jobs = jobs;
    spec.output_dir = base / ("run" + std::to_string(csvs.size()));
    run_experiment(spec, true);
    csvs.push_back(slurp(spec.output_dir / "metrics.csv"));
  }
  const bool ok = !csvs[0].empty() && csvs[0] == csvs[1] && csvs[0] == csvs[2];
  const auto lines = std::count(csvs[0].begin(), csvs[0].end(), '\n');
  std::filesystem::remove_all(base);
  return {ok, fmt::format("3 reruns (1, 1 and 2 workers), {} metrics.csv lines, {}", lines,
                          ok ? "byte-identical" : "differ")};
}

Outcome criterion10() {
  bool ok = true;
  std::string detail;
  for (double target : {0.37, 0.45, 0.51, 0.57, 0.64}) {
    const auto gt = synthesize_ground_truth(200, 500, target, 0.065, 7);
    const bool hit = std::abs(gt.audience_gini() - target) <= 0.01 &&
                     std::abs(gt.density() - 0.065) <= 0.05 * 0.065;
    ok = ok && hit;
    detail += fmt::format("{}{:.2f}->({:.4f}, {:.4f})", detail.empty() ? "" : " ", target, gt.audience_gini(),
                          gt.density());
  }
  return {ok, detail};
}

}  // namespace

int main(int argc, char** argv) {
  // Optional criterion filter, e.g. `popdyn_acceptance 3 4`.
  std::vector<int> only;
  for (int i = 1; i < argc; ++i) only.push_back(std::atoi(argv[i]));
  auto wanted = [&](int c) { return only.empty() || std::find(only.begin(), only.end(), c) != only.end(); };

  int failed = 0;
  auto report = [&](int id, const std::string& title, const std::function<Outcome()>& fn) {
    if (!wanted(id)) return;
    const auto start = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = fn();
    } catch (const std::exception& e) {
      o = {false, std::string("error: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    failed += o.pass ? 0 : 1;
    std::printf("%s criterion %d (%s): %s [%.0fs]\n", o.pass ? "PASS" : "FAIL", id, title.c_str(),
                o.detail.c_str(), secs);
    std::fflush(stdout);
  };

  report(1, "formula oracles", criterion1);
  report(2, "gradient check", criterion2);
  report(10, "generator fidelity", criterion10);
  report(9, "determinism", criterion9);

  std::optional<RunSummary> fig2;
  auto baselines = [&]() -> const RunSummary& {
    if (!fig2) {
      fig2 = run_recipe("fig2_baselines", [](json& doc) {
        doc["methods"] = {"mf", "popular", "random", {{"name", "mf"}, {"cfl_mode", "without_cfl"}}};
      });
    }
    return *fig2;
  };
  report(3, "baselines", [&] { return criterion3(baselines()); });
  report(4, "closed feedback loop", [&] { return criterion4(baselines()); });
  report(5, "static factors", [] { return criterion5(run_recipe("fig4_static_factors")); });
  report(6, "dynamic imbalance", [] { return criterion6(run_recipe("fig5_imbalance_dynamic")); });
  report(7, "static vs dynamic debiasing", [] { return criterion7(run_recipe("fig6_static_vs_dynamic_debias")); });
  report(8, "false positive correction", [] { return criterion8(run_recipe("fig7_fpc_family")); });

  std::printf("%d criteria failed\n", failed);
  return failed == 0 ? 0 : 1;
}
