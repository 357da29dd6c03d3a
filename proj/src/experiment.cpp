#include "popdyn/experiment.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <fstream>
#include <map>
#include <mutex>
#include <set>
#include <sstream>
#include <thread>

#include <fmt/format.h>

#include "popdyn/chart.hpp"
#include "popdyn/error.hpp"
#include "popdyn/stats.hpp"

namespace popdyn {

using nlohmann::json;

namespace {

// Typed access to one JSON object that remembers which keys were read, so
// leftovers can be reported as unknown.
class ObjectReader {
 public:
  ObjectReader(const json& obj, std::string path) : obj_(obj), path_(std::move(path)) {
    if (!obj_.is_object()) throw ConfigError(path_, "expected an object");
  }

  bool has(const std::string& key) {
    seen_.insert(key);
    return obj_.contains(key);
  }

  std::string key_path(const std::string& key) const {
    return path_.empty() ? key : path_ + "." + key;
  }

  const json& raw(const std::string& key) {
    seen_.insert(key);
    if (!obj_.contains(key)) throw ConfigError(key_path(key), "missing required field");
    return obj_.at(key);
  }

  double number(const std::string& key, double def) {
    if (!has(key)) return def;
    return as_number(obj_.at(key), key_path(key));
  }

  std::int64_t integer(const std::string& key, std::int64_t def) {
    if (!has(key)) return def;
    return as_integer(obj_.at(key), key_path(key));
  }

  bool boolean(const std::string& key, bool def) {
    if (!has(key)) return def;
    const auto& v = obj_.at(key);
    if (!v.is_boolean()) throw ConfigError(key_path(key), "expected a boolean");
    return v.get<bool>();
  }

  std::string string(const std::string& key, const std::string& def) {
    if (!has(key)) return def;
    const auto& v = obj_.at(key);
    if (!v.is_string()) throw ConfigError(key_path(key), "expected a string");
    return v.get<std::string>();
  }

  /// A number or a non-empty list of numbers.
  std::vector<double> numbers(const std::string& key, std::vector<double> def) {
    if (!has(key)) return def;
    const auto& v = obj_.at(key);
    if (!v.is_array()) return {as_number(v, key_path(key))};
    if (v.empty()) throw ConfigError(key_path(key), "empty list");
    std::vector<double> out;
    for (std::size_t i = 0; i < v.size(); ++i) {
      out.push_back(as_number(v[i], key_path(key) + "[" + std::to_string(i) + "]"));
    }
    return out;
  }

  void finish() const {
    for (const auto& [key, value] : obj_.items()) {
      if (!seen_.contains(key)) throw ConfigError(key_path(key), "unknown key");
    }
  }

  static double as_number(const json& v, const std::string& path) {
    if (!v.is_number()) throw ConfigError(path, "expected a number");
    return v.get<double>();
  }

  static std::int64_t as_integer(const json& v, const std::string& path) {
    if (!v.is_number_integer()) throw ConfigError(path, "expected an integer");
    return v.get<std::int64_t>();
  }

 private:
  const json& obj_;
  std::string path_;
  std::set<std::string> seen_;
};

template <class F>
void rethrow_as_config(const std::string& path, F&& f) {
  try {
    f();
  } catch (const ConfigError&) {
    throw;
  } catch (const Error& e) {
    throw ConfigError(path, e.what());
  }
}

CflMode parse_cfl(const std::string& s, const std::string& path) {
  if (s == "with_cfl") return CflMode::kWithCfl;
  if (s == "without_cfl") return CflMode::kWithoutCfl;
  throw ConfigError(path, "expected with_cfl or without_cfl, got '" + s + "'");
}

std::string fmt_param(double v) { return fmt::format("{:g}", v); }

void parse_trainer(ObjectReader r, TrainConfig& t) {
  t.latent_dim = static_cast<int>(r.integer("latent_dim", t.latent_dim));
  t.learning_rate = r.number("learning_rate", t.learning_rate);
  t.l2 = r.number("l2", t.l2);
  t.epochs = static_cast<int>(r.integer("epochs", t.epochs));
  t.cold_epochs = static_cast<int>(r.integer("cold_epochs", t.cold_epochs));
  t.negative_ratio = r.number("negative_ratio", t.negative_ratio);
  t.propensity_floor = r.number("propensity_floor", t.propensity_floor);
  t.init_scale = r.number("init_scale", t.init_scale);
  t.warm_start = r.boolean("warm_start", t.warm_start);
  t.unclicked_as_negatives = r.boolean("unclicked_as_negatives", t.unclicked_as_negatives);
  t.seed = static_cast<std::uint64_t>(r.integer("seed", static_cast<std::int64_t>(t.seed)));
  r.finish();
}

json trainer_json(const TrainConfig& t) {
  return {{"latent_dim", t.latent_dim},         {"learning_rate", t.learning_rate},
          {"l2", t.l2},                         {"epochs", t.epochs},
          {"cold_epochs", t.cold_epochs},       {"negative_ratio", t.negative_ratio},
          {"propensity_floor", t.propensity_floor}, {"init_scale", t.init_scale},
          {"warm_start", t.warm_start},         {"unclicked_as_negatives", t.unclicked_as_negatives},
          {"seed", t.seed}};
}

void parse_dataset(ObjectReader r, DatasetSpec& d) {
  int sources = 0;
  if (r.has("synthetic")) {
    ++sources;
    ObjectReader s(r.raw("synthetic"), r.key_path("synthetic"));
    d.source = DatasetSpec::Source::kSynthetic;
    d.n_users = static_cast<int>(s.integer("n_users", d.n_users));
    d.n_items = static_cast<int>(s.integer("n_items", d.n_items));
    d.audience_gini = s.numbers("audience_gini", d.audience_gini);
    d.density = s.number("density", d.density);
    d.seed = static_cast<std::uint64_t>(s.integer("seed", static_cast<std::int64_t>(d.seed)));
    d.synthesis.affinity = s.number("affinity", d.synthesis.affinity);
    d.synthesis.latent_dim = static_cast<int>(s.integer("latent_dim", d.synthesis.latent_dim));
    s.finish();
    if (d.n_users < 1 || d.n_items < 1) throw ConfigError(r.key_path("synthetic"), "empty shape");
    for (double g : d.audience_gini) {
      if (!(g >= 0 && g < 1)) throw ConfigError(s.key_path("audience_gini"), "must be in [0, 1)");
    }
    if (!(d.density > 0 && d.density < 1)) throw ConfigError(s.key_path("density"), "must be in (0, 1)");
  }
  if (r.has("ratings")) {
    ++sources;
    ObjectReader s(r.raw("ratings"), r.key_path("ratings"));
    d.source = DatasetSpec::Source::kRatings;
    d.path = s.string("path", "");
    if (d.path.empty()) throw ConfigError(s.key_path("path"), "missing required field");
    d.delimiter = s.string("delimiter", d.delimiter);
    d.target_density = s.number("target_density", d.target_density);
    d.user_cap = static_cast<int>(s.integer("user_cap", d.user_cap));
    d.seed = static_cast<std::uint64_t>(s.integer("seed", static_cast<std::int64_t>(d.seed)));
    d.completion.seed = d.seed;
    d.completion.positive_min_rating = s.number("positive_min_rating", d.completion.positive_min_rating);
    if (s.has("trainer")) parse_trainer(ObjectReader(s.raw("trainer"), s.key_path("trainer")), d.completion.trainer);
    s.finish();
  }
  if (r.has("ground_truth")) {
    ++sources;
    const auto& v = r.raw("ground_truth");
    if (!v.is_string()) throw ConfigError(r.key_path("ground_truth"), "expected a file path");
    d.source = DatasetSpec::Source::kGroundTruthFile;
    d.path = v.get<std::string>();
  }
  r.finish();
  if (sources != 1) {
    throw ConfigError("dataset", "exactly one of synthetic, ratings, ground_truth is required");
  }
}

std::vector<MethodSpec> parse_method(const json& v, const std::string& path) {
  std::string name;
  std::vector<double> alphas{0.0};
  std::vector<double> deltas{0.0};
  CflMode cfl = CflMode::kWithCfl;
  FpcVariant variant = FpcVariant::kProductDenominator;
  std::string label;

  if (v.is_string()) {
    name = v.get<std::string>();
  } else {
    ObjectReader r(v, path);
    name = r.string("name", "");
    if (name.empty()) throw ConfigError(r.key_path("name"), "missing required field");
    alphas = r.numbers("alpha", alphas);
    deltas = r.numbers("delta", deltas);
    cfl = parse_cfl(r.string("cfl_mode", "with_cfl"), r.key_path("cfl_mode"));
    const auto v_name = r.string("fpc_variant", "product");
    if (v_name == "posterior") {
      variant = FpcVariant::kPosterior;
    } else if (v_name != "product") {
      throw ConfigError(r.key_path("fpc_variant"), "expected product or posterior");
    }
    label = r.string("label", "");
    r.finish();
    for (double a : alphas) {
      if (!(a >= 0)) throw ConfigError(r.key_path("alpha"), "must be non-negative");
    }
    for (double d : deltas) {
      if (!(d >= 0)) throw ConfigError(r.key_path("delta"), "must be non-negative");
    }
  }

  static const std::set<std::string> kNames{"mf", "popular", "random", "scale", "dscale", "fpc",
                                            "fpc_dscale"};
  if (!kNames.contains(name)) throw ConfigError(path, "unknown method '" + name + "'");

  std::vector<MethodSpec> out;
  auto suffix = [&](std::string base) {
    std::vector<std::string> parts;
    if (cfl == CflMode::kWithoutCfl) parts.emplace_back("without_cfl");
    if (variant == FpcVariant::kPosterior) parts.emplace_back("posterior");
    if (parts.empty()) return base;
    std::string s = base + "(";
    for (std::size_t i = 0; i < parts.size(); ++i) s += (i ? "," : "") + parts[i];
    return s + ")";
  };

  auto make = [&](double alpha, double delta, std::string auto_label) {
    MethodSpec m;
    m.name = name;
    m.cfl_mode = cfl;
    m.policy.fpc_variant = variant;
    if (name == "popular") m.ranker = Ranker::kPopular;
    if (name == "random") m.ranker = Ranker::kRandom;
    if (name == "scale" || name == "dscale" || name == "fpc" || name == "fpc_dscale") {
      m.policy.kind = debias_kind_from_string(name);
    }
    m.policy.alpha = alpha;
    m.policy.delta = delta;
    m.label = std::move(auto_label);
    return m;
  };

  if (name == "scale") {
    for (double a : alphas) out.push_back(make(a, 0.0, suffix("scale(alpha=" + fmt_param(a) + ")")));
  } else if (name == "dscale" || name == "fpc_dscale") {
    for (double d : deltas) out.push_back(make(0.0, d, suffix(name + "(delta=" + fmt_param(d) + ")")));
  } else {
    out.push_back(make(0.0, 0.0, suffix(name)));
  }
  if (!label.empty()) {
    if (out.size() != 1) throw ConfigError(path + ".label", "a label cannot name a parameter sweep");
    out[0].label = label;
  }
  if (cfl == CflMode::kWithoutCfl && out[0].ranker != Ranker::kMf) {
    throw ConfigError(path + ".cfl_mode", "without_cfl needs a model-based method");
  }
  return out;
}

json method_json(const MethodSpec& m) {
  json j{{"name", m.name}, {"label", m.label}, {"cfl_mode", std::string(to_string(m.cfl_mode))}};
  if (m.policy.kind == DebiasKind::kScale) j["alpha"] = m.policy.alpha;
  if (m.policy.kind == DebiasKind::kDScale || m.policy.kind == DebiasKind::kFpcDScale) {
    j["delta"] = m.policy.delta;
  }
  if (m.policy.fpc_variant == FpcVariant::kPosterior) j["fpc_variant"] = "posterior";
  return j;
}

json echo(const ExperimentSpec& s) {
  json ds;
  const auto& d = s.dataset;
  switch (d.source) {
    case DatasetSpec::Source::kSynthetic:
      ds["synthetic"] = {{"n_users", d.n_users},
                         {"n_items", d.n_items},
                         {"audience_gini", d.audience_gini},
                         {"density", d.density},
                         {"seed", d.seed},
                         {"affinity", d.synthesis.affinity},
                         {"latent_dim", d.synthesis.latent_dim}};
      break;
    case DatasetSpec::Source::kRatings:
      ds["ratings"] = {{"path", d.path.string()},
                       {"delimiter", d.delimiter},
                       {"target_density", d.target_density},
                       {"user_cap", d.user_cap},
                       {"seed", d.seed},
                       {"positive_min_rating", d.completion.positive_min_rating},
                       {"trainer", trainer_json(d.completion.trainer)}};
      break;
    case DatasetSpec::Source::kGroundTruthFile:
      ds["ground_truth"] = d.path.string();
      break;
  }
  json methods = json::array();
  for (const auto& m : s.methods) methods.push_back(method_json(m));
  json out{{"name", s.name},
           {"kind", std::string(to_string(s.kind))},
           {"dataset", ds},
           {"sim",
            {{"K", s.sim.k},
             {"T", s.sim.iterations},
             {"L", s.sim.retrain_every},
             {"checkpoint_every", s.sim.checkpoint_every},
             {"seed", s.sim.seed},
             {"repeats", s.sim.repeats}}},
           {"trainer", trainer_json(s.sim.trainer)},
           {"methods", methods},
           {"output_dir", s.output_dir.string()},
           {"write_logs", s.write_logs}};
  if (!s.densities.empty()) out["densities"] = s.densities;
  if (s.kind == ExperimentKind::kStaticImbalance || s.kind == ExperimentKind::kStaticFactors) {
    out["static_train_density"] = s.static_train_density;
  }
  return out;
}

std::string sanitize(const std::string& label) {
  std::string out;
  for (char c : label) {
    out += (std::isalnum(static_cast<unsigned char>(c)) || c == '.' || c == '-' || c == '_') ? c : '_';
  }
  return out;
}

struct DatasetVariant {
  std::string label;  // empty when there is only one
  double x = 0.0;
  GroundTruth gt;
};

std::vector<DatasetVariant> build_datasets(const DatasetSpec& d) {
  std::vector<DatasetVariant> out;
  switch (d.source) {
    case DatasetSpec::Source::kSynthetic:
      for (std::size_t j = 0; j < d.audience_gini.size(); ++j) {
        DatasetVariant v;
        v.gt = synthesize_ground_truth(d.n_users, d.n_items, d.audience_gini[j], d.density, d.seed,
                                       d.synthesis);
        v.x = v.gt.audience_gini();
        if (d.audience_gini.size() > 1) v.label = "I" + std::to_string(j + 1);
        out.push_back(std::move(v));
      }
      break;
    case DatasetSpec::Source::kRatings: {
      const auto ratings = load_ratings(d.path, {.delimiter = d.delimiter});
      DatasetVariant v;
      v.gt = complete_and_binarize(ratings, d.completion, d.target_density,
                                   std::min(d.user_cap, ratings.n_users));
      v.x = v.gt.audience_gini();
      out.push_back(std::move(v));
      break;
    }
    case DatasetSpec::Source::kGroundTruthFile: {
      DatasetVariant v;
      v.gt = GroundTruth::load(d.path);
      v.x = v.gt.audience_gini();
      out.push_back(std::move(v));
      break;
    }
  }
  return out;
}

struct Task {
  std::size_t entry = 0;  // index into summary.methods
  std::size_t dataset = 0;
  const MethodSpec* method = nullptr;
  int repeat = 0;
  std::uint64_t seed = 0;
  std::optional<std::size_t> density_index;  // static density sweep point
};

struct TaskResult {
  bool ok = false;
  std::string error;
  std::optional<ModelParams> last_good;
  double gini = 0.0;
  double clicks = 0.0;
  MetricSeries series;
  std::optional<InteractionLog> log;
};

template <class F>
void parallel_for(std::size_t n, int jobs, F&& body) {
  const auto workers = static_cast<std::size_t>(
      std::max(1, jobs > 0 ? jobs : static_cast<int>(std::thread::hardware_concurrency())));
  if (workers <= 1 || n <= 1) {
    for (std::size_t i = 0; i < n; ++i) body(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::vector<std::thread> pool;
  for (std::size_t w = 0; w < std::min(workers, n); ++w) {
    pool.emplace_back([&] {
      for (std::size_t i = next++; i < n; i = next++) body(i);
    });
  }
  for (auto& t : pool) t.join();
}

void finalize(MethodSummary& m) {
  m.final_gini_mean = stats::mean(m.final_gini);
  m.final_gini_sd = stats::stddev(m.final_gini);
  m.total_clicks_mean = stats::mean(m.total_clicks);
  m.total_clicks_sd = stats::stddev(m.total_clicks);
  m.checkpoints.clear();
  if (m.runs.empty()) return;
  const std::size_t n = m.runs.front().checkpoints.size();
  for (std::size_t c = 0; c < n; ++c) {
    std::vector<double> clicks, gini;
    CheckpointStats cs;
    for (const auto& run : m.runs) {
      if (run.checkpoints.size() != n) throw Error("runs of " + m.label + " have different schedules");
      clicks.push_back(static_cast<double>(run.checkpoints[c].cumulative_clicks));
      gini.push_back(run.checkpoints[c].gini_tpr);
    }
    cs.iteration = m.runs.front().checkpoints[c].iteration;
    cs.alpha = m.runs.front().checkpoints[c].alpha;
    cs.clicks_mean = stats::mean(clicks);
    cs.clicks_sd = stats::stddev(clicks);
    cs.gini_mean = stats::mean(gini);
    cs.gini_sd = stats::stddev(gini);
    m.checkpoints.push_back(cs);
  }
}

std::string summary_text(const RunSummary& s) {
  std::string out = fmt::format("experiment {} ({})\n", s.experiment, s.kind);
  out += fmt::format("{:<36} {:>8} {:>18} {:>22}\n", "method", "x", "final gini", "total clicks");
  for (const auto& m : s.methods) {
    out += fmt::format("{:<36} {:>8.4f} {:>8.4f} +/- {:<6.4f} {:>10.1f} +/- {:<8.1f}\n", m.label, m.x,
                       m.final_gini_mean, m.final_gini_sd, m.total_clicks_mean, m.total_clicks_sd);
  }
  for (const auto& f : s.failures) out += "FAILED: " + f + "\n";
  return out;
}

void write_static_charts(const RunSummary& s, const std::filesystem::path& dir);

void write_static_csv(const RunSummary& s, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write " + path.string());
  out << "run_id,method,variant,x,gini_tpr\n";
  for (const auto& m : s.methods) {
    for (std::size_t r = 0; r < m.seeds.size(); ++r) {
      out << fmt::format("{}-seed{},{},{},{:.10g},{:.10g}\n", s.experiment, m.seeds[r], m.name,
                         m.dataset, m.x, m.final_gini[r]);
    }
  }
}

void write_static_chart(const RunSummary& s, const std::filesystem::path& path, bool density) {
  std::map<std::string, ChartSeries> by_name;
  std::vector<std::string> order;
  for (const auto& m : s.methods) {
    if ((m.dataset.rfind("D", 0) == 0) != density) continue;
    if (!by_name.contains(m.name)) order.push_back(m.name);
    auto& cs = by_name[m.name];
    cs.label = m.name;
    cs.x.push_back(density ? std::log10(m.x) : m.x);
    cs.mean.push_back(m.final_gini_mean);
    cs.sd.push_back(m.final_gini_sd);
  }
  std::vector<ChartSeries> series;
  for (const auto& n : order) series.push_back(by_name[n]);
  std::ofstream(path) << render_line_chart(
      series, {.title = "Static model bias",
               .x_label = density ? "log10 training density" : "audience size Gini",
               .y_label = "Gini of TPR"});
}

void write_static_charts(const RunSummary& s, const std::filesystem::path& dir) {
  bool any_density = false, any_imbalance = false;
  for (const auto& m : s.methods) (m.dataset.rfind("D", 0) == 0 ? any_density : any_imbalance) = true;
  if (any_imbalance) write_static_chart(s, dir / "static_imbalance.svg", false);
  if (any_density) write_static_chart(s, dir / "static_density.svg", true);
}

}  // namespace

std::string_view to_string(ExperimentKind kind) {
  switch (kind) {
    case ExperimentKind::kDynamic: return "dynamic";
    case ExperimentKind::kStaticImbalance: return "static_imbalance";
    case ExperimentKind::kStaticDensity: return "static_density";
    case ExperimentKind::kStaticFactors: return "static_factors";
  }
  return "unknown";
}

ExperimentSpec parse_config(const json& doc) {
  ExperimentSpec s;
  ObjectReader r(doc, "");
  s.name = r.string("name", s.name);
  if (s.name.empty()) throw ConfigError("name", "must not be empty");
  const auto kind = r.string("kind", "dynamic");
  if (kind == "dynamic") {
    s.kind = ExperimentKind::kDynamic;
  } else if (kind == "static_imbalance") {
    s.kind = ExperimentKind::kStaticImbalance;
  } else if (kind == "static_density") {
    s.kind = ExperimentKind::kStaticDensity;
  } else if (kind == "static_factors") {
    s.kind = ExperimentKind::kStaticFactors;
  } else {
    throw ConfigError("kind", "expected dynamic, static_imbalance, static_density or static_factors");
  }

  parse_dataset(ObjectReader(r.raw("dataset"), "dataset"), s.dataset);

  if (r.has("sim")) {
    ObjectReader sim(r.raw("sim"), "sim");
    s.sim.k = static_cast<int>(sim.integer("K", s.sim.k));
    s.sim.iterations = sim.integer("T", s.sim.iterations);
    s.sim.retrain_every = static_cast<int>(sim.integer("L", s.sim.retrain_every));
    s.sim.checkpoint_every = static_cast<int>(sim.integer("checkpoint_every", s.sim.retrain_every));
    s.sim.seed = static_cast<std::uint64_t>(sim.integer("seed", static_cast<std::int64_t>(s.sim.seed)));
    s.sim.repeats = static_cast<int>(sim.integer("repeats", s.sim.repeats));
    sim.finish();
  }
  if (r.has("trainer")) parse_trainer(ObjectReader(r.raw("trainer"), "trainer"), s.sim.trainer);
  rethrow_as_config("sim", [&] { s.sim.validate(); });

  const auto& methods = r.raw("methods");
  if (!methods.is_array() || methods.empty()) throw ConfigError("methods", "expected a non-empty list");
  std::set<std::string> labels;
  for (std::size_t i = 0; i < methods.size(); ++i) {
    for (auto& m : parse_method(methods[i], "methods[" + std::to_string(i) + "]")) {
      if (!labels.insert(m.label).second) {
        throw ConfigError("methods[" + std::to_string(i) + "]", "duplicate method label '" + m.label + "'");
      }
      s.methods.push_back(std::move(m));
    }
  }

  const bool density_sweep =
      s.kind == ExperimentKind::kStaticDensity || s.kind == ExperimentKind::kStaticFactors;
  const bool imbalance_sweep =
      s.kind == ExperimentKind::kStaticImbalance || s.kind == ExperimentKind::kStaticFactors;
  if (density_sweep) {
    s.densities = r.numbers("densities", {});
    if (s.densities.empty()) throw ConfigError("densities", "required for a density sweep");
    for (double d : s.densities) {
      if (!(d > 0 && d < 1)) throw ConfigError("densities", "each density must be in (0, 1)");
    }
  }
  if (imbalance_sweep) {
    s.static_train_density = r.number("static_train_density", s.static_train_density);
    if (!(s.static_train_density > 0 && s.static_train_density < 1)) {
      throw ConfigError("static_train_density", "must be in (0, 1)");
    }
  }
  s.output_dir = r.string("output_dir", "runs/" + s.name);
  s.write_logs = r.boolean("write_logs", s.write_logs);
  s.jobs = static_cast<int>(r.integer("jobs", s.jobs));
  r.finish();
  s.config = echo(s);
  return s;
}

ExperimentSpec parse_config(const std::filesystem::path& path) {
  if (!std::filesystem::exists(path)) {
    if (auto doc = recipe(path.string())) return parse_config(*doc);
    throw ConfigError("", "no such config file or recipe: " + path.string());
  }
  std::ifstream in(path);
  json doc;
  try {
    doc = json::parse(in);
  } catch (const json::parse_error& e) {
    throw ConfigError("", std::string("invalid JSON: ") + e.what());
  }
  return parse_config(doc);
}

void apply_paper_scale(ExperimentSpec& spec) {
  spec.sim.k = 20;
  spec.sim.iterations = 40000;
  spec.sim.retrain_every = 50;
  spec.sim.checkpoint_every = 50 * std::max(1, spec.sim.checkpoint_every / std::max(1, spec.sim.retrain_every));
  if (spec.dataset.source == DatasetSpec::Source::kSynthetic) {
    spec.dataset.n_users = 1000;
    spec.dataset.n_items = 3406;
    spec.dataset.density = 0.0657;
  }
  spec.config = echo(spec);
}

const MethodSummary& RunSummary::method(std::string_view label) const {
  for (const auto& m : methods) {
    if (m.label == label) return m;
  }
  throw Error("no method labelled " + std::string(label));
}

json RunSummary::to_json() const {
  json ms = json::array();
  for (const auto& m : methods) {
    json cps = json::array();
    for (const auto& c : m.checkpoints) {
      cps.push_back({{"iteration", c.iteration},
                     {"clicks_mean", c.clicks_mean},
                     {"clicks_sd", c.clicks_sd},
                     {"gini_mean", c.gini_mean},
                     {"gini_sd", c.gini_sd},
                     {"alpha", c.alpha}});
    }
    ms.push_back({{"label", m.label},
                  {"name", m.name},
                  {"dataset", m.dataset},
                  {"x", m.x},
                  {"alpha", m.alpha},
                  {"delta", m.delta},
                  {"cfl_mode", m.cfl_mode},
                  {"seeds", m.seeds},
                  {"final_gini", m.final_gini},
                  {"total_clicks", m.total_clicks},
                  {"final_gini_mean", m.final_gini_mean},
                  {"final_gini_sd", m.final_gini_sd},
                  {"total_clicks_mean", m.total_clicks_mean},
                  {"total_clicks_sd", m.total_clicks_sd},
                  {"checkpoints", cps}});
  }
  return {{"experiment", experiment}, {"kind", kind},       {"config", config},
          {"methods", ms},            {"failures", failures}};
}

RunSummary RunSummary::from_json(const json& doc) {
  RunSummary s;
  try {
    s.experiment = doc.at("experiment").get<std::string>();
    s.kind = doc.value("kind", "dynamic");
    s.config = doc.value("config", json::object());
    s.failures = doc.value("failures", std::vector<std::string>{});
    for (const auto& j : doc.at("methods")) {
      MethodSummary m;
      m.label = j.at("label").get<std::string>();
      m.name = j.at("name").get<std::string>();
      m.dataset = j.value("dataset", "");
      m.x = j.value("x", 0.0);
      m.alpha = j.value("alpha", 0.0);
      m.delta = j.value("delta", 0.0);
      m.cfl_mode = j.value("cfl_mode", "with_cfl");
      m.seeds = j.at("seeds").get<std::vector<std::uint64_t>>();
      m.final_gini = j.at("final_gini").get<std::vector<double>>();
      m.total_clicks = j.at("total_clicks").get<std::vector<double>>();
      m.final_gini_mean = j.at("final_gini_mean").get<double>();
      m.final_gini_sd = j.at("final_gini_sd").get<double>();
      m.total_clicks_mean = j.at("total_clicks_mean").get<double>();
      m.total_clicks_sd = j.at("total_clicks_sd").get<double>();
      for (const auto& c : j.value("checkpoints", json::array())) {
        m.checkpoints.push_back({.iteration = c.at("iteration").get<std::int64_t>(),
                                 .clicks_mean = c.at("clicks_mean").get<double>(),
                                 .clicks_sd = c.at("clicks_sd").get<double>(),
                                 .gini_mean = c.at("gini_mean").get<double>(),
                                 .gini_sd = c.at("gini_sd").get<double>(),
                                 .alpha = c.at("alpha").get<double>()});
      }
      s.methods.push_back(std::move(m));
    }
  } catch (const json::exception& e) {
    throw Error(std::string("malformed summary: ") + e.what());
  }
  return s;
}

void write_metrics_csv(const RunSummary& summary, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write " + path.string());
  out << "run_id,method,iteration,cumulative_clicks,gini_tpr,alpha\n";
  for (const auto& m : summary.methods) {
    for (std::size_t r = 0; r < m.runs.size(); ++r) {
      for (const auto& c : m.runs[r].checkpoints) {
        out << fmt::format("{}-seed{},{},{},{},{:.10g},{:.10g}\n", summary.experiment, m.seeds[r],
                           m.label, c.iteration, c.cumulative_clicks, c.gini_tpr, c.alpha);
      }
    }
  }
}

RunSummary run_experiment(const ExperimentSpec& spec, bool write_artifacts) {
  const auto datasets = build_datasets(spec.dataset);
  const bool is_static = spec.kind != ExperimentKind::kDynamic;

  RunSummary summary;
  summary.experiment = spec.name;
  summary.kind = std::string(to_string(spec.kind));
  summary.config = spec.config;

  // One summary entry per (method, dataset variant[, density]).
  std::vector<Task> tasks;
  auto add_entry = [&](const MethodSpec& m, std::size_t ds, std::string suffix, double x,
                       std::optional<std::size_t> density_index) {
    MethodSummary e;
    e.label = suffix.empty() ? m.label : m.label + "@" + suffix;
    e.name = m.name;
    e.dataset = suffix;
    e.x = x;
    e.alpha = m.policy.alpha;
    e.delta = m.policy.delta;
    e.cfl_mode = std::string(to_string(m.cfl_mode));
    summary.methods.push_back(std::move(e));
    for (int r = 0; r < spec.sim.repeats; ++r) {
      tasks.push_back({.entry = summary.methods.size() - 1,
                       .dataset = ds,
                       .method = &m,
                       .repeat = r,
                       .seed = repeat_seed(spec.sim.seed, r),
                       .density_index = density_index});
    }
  };
  for (const auto& m : spec.methods) {
    if (spec.kind != ExperimentKind::kStaticDensity) {
      for (std::size_t ds = 0; ds < datasets.size(); ++ds) {
        add_entry(m, ds, datasets[ds].label, datasets[ds].x, std::nullopt);
      }
    }
    if (spec.kind == ExperimentKind::kStaticDensity || spec.kind == ExperimentKind::kStaticFactors) {
      for (std::size_t j = 0; j < spec.densities.size(); ++j) {
        add_entry(m, datasets.size() - 1, "D" + std::to_string(j + 1), spec.densities[j], j);
      }
    }
  }

  std::vector<TaskResult> results(tasks.size());
  const bool keep_logs = write_artifacts && spec.write_logs && !is_static;
  parallel_for(tasks.size(), spec.jobs, [&](std::size_t t) {
    const Task& task = tasks[t];
    TaskResult& res = results[t];
    SimConfig cfg = spec.sim;
    cfg.seed = task.seed;
    cfg.ranker = task.method->ranker;
    cfg.policy = task.method->policy;
    cfg.cfl_mode = task.method->cfl_mode;
    const GroundTruth& gt = datasets[task.dataset].gt;
    try {
      if (spec.kind == ExperimentKind::kDynamic) {
        auto sim = run(gt, cfg);
        res.series = std::move(sim.series);
        res.gini = res.series.final().gini_tpr;
        res.clicks = static_cast<double>(res.series.final().cumulative_clicks);
        if (keep_logs) res.log = std::move(sim.log);
      } else {
        const double density =
            task.density_index ? spec.densities[*task.density_index] : spec.static_train_density;
        const std::vector<double> one{density};
        const auto sets = make_density_variants(gt, one, task.seed);
        res.gini = run_static(gt, sets.front(), cfg);
      }
      res.ok = true;
    } catch (const SimulationAborted& e) {
      res.error = e.what();
      res.last_good = e.last_good();
    } catch (const std::exception& e) {
      res.error = e.what();
    }
  });

  for (std::size_t t = 0; t < tasks.size(); ++t) {
    auto& entry = summary.methods[tasks[t].entry];
    const auto& res = results[t];
    if (!res.ok) {
      summary.failures.push_back(fmt::format("{} seed {}: {}", entry.label, tasks[t].seed, res.error));
      continue;
    }
    entry.seeds.push_back(tasks[t].seed);
    entry.final_gini.push_back(res.gini);
    if (!is_static) {
      entry.total_clicks.push_back(res.clicks);
      entry.runs.push_back(res.series);
    }
  }
  for (auto& m : summary.methods) finalize(m);

  if (write_artifacts) {
    const auto& out = spec.output_dir;
    std::filesystem::create_directories(out);
    if (is_static) {
      write_static_csv(summary, out / "static.csv");
      write_static_charts(summary, out);
    } else {
      write_metrics_csv(summary, out / "metrics.csv");
      plot_metrics_csv(out / "metrics.csv", out);
      for (std::size_t t = 0; t < tasks.size(); ++t) {
        const auto& entry = summary.methods[tasks[t].entry];
        const auto dir = out / "runs" / fmt::format("{}-seed{}", spec.name, tasks[t].seed) /
                         sanitize(entry.label);
        std::filesystem::create_directories(dir);
        const auto& res = results[t];
        if (res.last_good && res.last_good->n_users > 0) res.last_good->save(dir / "checkpoint.bin");
        if (!res.ok) continue;
        RunSummary one;
        one.experiment = spec.name;
        MethodSummary m = entry;
        m.seeds = {tasks[t].seed};
        m.runs = {res.series};
        one.methods = {m};
        write_metrics_csv(one, dir / "metrics.csv");
        if (res.log) res.log->write_csv(dir / "log.csv");
      }
    }
    std::ofstream(out / "summary.json") << summary.to_json().dump(2) << '\n';
    std::ofstream(out / "summary.txt") << summary_text(summary);
  }
  return summary;
}

bool ComparisonTable::all_feasible() const {
  return std::all_of(rows.begin(), rows.end(), [](const auto& r) { return r.feasible; });
}

std::string ComparisonTable::to_text() const {
  std::string out = fmt::format("matched-bias comparison, final Gini in [{:g}, {:g}]\n", band_lo, band_hi);
  out += fmt::format("{:<14} {:<36} {:>18} {:>22}\n", "family", "setting", "final gini", "clicks");
  for (const auto& r : rows) {
    if (!r.feasible) {
      out += fmt::format("{:<14} {:<36} no setting in band (infeasible)\n", r.family, "-");
      continue;
    }
    out += fmt::format("{:<14} {:<36} {:>8.4f} +/- {:<6.4f} {:>10.1f} +/- {:<8.1f}\n", r.family,
                       r.label, r.gini_mean, r.gini_sd, r.clicks_mean, r.clicks_sd);
  }
  return out;
}

ComparisonTable compare_at_matched_bias(const std::vector<MethodSummary>& methods, double lo,
                                        double hi) {
  if (methods.empty()) throw Error("compare: no method summaries");
  if (!(lo <= hi)) throw Error("compare: empty Gini band");
  ComparisonTable table;
  table.band_lo = lo;
  table.band_hi = hi;
  const double centre = 0.5 * (lo + hi);

  std::vector<std::string> families;
  for (const auto& m : methods) {
    std::string fam = m.name;
    if (m.cfl_mode == "without_cfl") fam += "(without_cfl)";
    if (!m.dataset.empty()) fam += "@" + m.dataset;
    if (std::find(families.begin(), families.end(), fam) == families.end()) families.push_back(fam);
  }
  for (const auto& fam : families) {
    ComparisonRow row;
    row.family = fam;
    double best = INFINITY;
    for (const auto& m : methods) {
      std::string f = m.name;
      if (m.cfl_mode == "without_cfl") f += "(without_cfl)";
      if (!m.dataset.empty()) f += "@" + m.dataset;
      if (f != fam) continue;
      if (m.final_gini_mean < lo || m.final_gini_mean > hi) continue;
      const double gap = std::abs(m.final_gini_mean - centre);
      if (gap < best) {
        best = gap;
        row.feasible = true;
        row.label = m.label;
        row.gini_mean = m.final_gini_mean;
        row.gini_sd = m.final_gini_sd;
        row.clicks_mean = m.total_clicks_mean;
        row.clicks_sd = m.total_clicks_sd;
      }
    }
    table.rows.push_back(row);
  }
  return table;
}

ComparisonTable compare_at_matched_bias_tol(const std::vector<MethodSummary>& methods,
                                            double target, double tolerance) {
  return compare_at_matched_bias(methods, target - tolerance, target + tolerance);
}

}  // namespace popdyn
