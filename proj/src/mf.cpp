#include "popdyn/mf.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>

#include "binary_io.hpp"
#include "popdyn/error.hpp"
#include "popdyn/interaction_log.hpp"
#include "popdyn/rng.hpp"

namespace popdyn {
namespace {

constexpr std::string_view kModelMagic = "PDMF0001";

double sigmoid(double x) {
  if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

// log(1 + exp(x)) without overflow.
double softplus(double x) {
  if (x > 0) return x + std::log1p(std::exp(-x));
  return std::log1p(std::exp(x));
}

double example_loss(double logit, const TrainingExample& ex) {
  return ex.pos_weight * softplus(-logit) + ex.neg_weight * softplus(logit);
}

// d(loss)/d(logit) = s * (w+ + w-) - w+
double example_dlogit(double logit, const TrainingExample& ex) {
  return sigmoid(logit) * (ex.pos_weight + ex.neg_weight) - ex.pos_weight;
}

double reg_term(const ModelParams& p, int u, int i) {
  double r = p.user_bias[u] * p.user_bias[u] + p.item_bias[i] * p.item_bias[i];
  const auto pu = p.user_row(u);
  const auto qi = p.item_row(i);
  for (int f = 0; f < p.dim; ++f) r += pu[f] * pu[f] + qi[f] * qi[f];
  return r;
}

void check_index(const ModelParams& p, int u, int i) {
  if (u < 0 || u >= p.n_users || i < 0 || i >= p.n_items) {
    throw Error("index out of range: (" + std::to_string(u) + ", " + std::to_string(i) + ")");
  }
}

}  // namespace

void TrainConfig::validate() const {
  if (latent_dim < 1) throw Error("latent_dim must be >= 1");
  if (!(learning_rate > 0)) throw Error("learning_rate must be positive");
  if (!(l2 >= 0)) throw Error("l2 must be non-negative");
  if (epochs < 0 || cold_epochs < 0) throw Error("epochs must be non-negative");
  if (!(negative_ratio >= 0)) throw Error("negative_ratio must be non-negative");
  if (!(propensity_floor > 0 && propensity_floor <= 1)) {
    throw Error("propensity_floor must be in (0, 1]");
  }
  if (!(init_scale >= 0)) throw Error("init_scale must be non-negative");
}

ModelParams::ModelParams(int n_users, int n_items, int dim)
    : n_users(n_users),
      n_items(n_items),
      dim(dim),
      user_factors(static_cast<std::size_t>(n_users) * dim, 0.0),
      item_factors(static_cast<std::size_t>(n_items) * dim, 0.0),
      user_bias(static_cast<std::size_t>(n_users), 0.0),
      item_bias(static_cast<std::size_t>(n_items), 0.0) {
  if (n_users < 1 || n_items < 1 || dim < 1) throw Error("ModelParams: empty shape");
}

ModelParams ModelParams::random(int n_users, int n_items, int dim, double scale,
                                std::uint64_t seed) {
  ModelParams p(n_users, n_items, dim);
  Rng rng = Rng::stream(seed, Stream::kInit);
  for (auto& v : p.user_factors) v = scale * rng.normal();
  for (auto& v : p.item_factors) v = scale * rng.normal();
  return p;
}

double ModelParams::logit(int u, int i) const {
  const double* pu = user_factors.data() + static_cast<std::size_t>(u) * dim;
  const double* qi = item_factors.data() + static_cast<std::size_t>(i) * dim;
  double x = global_bias + user_bias[u] + item_bias[i];
  for (int f = 0; f < dim; ++f) x += pu[f] * qi[f];
  return x;
}

bool ModelParams::all_finite() const {
  auto finite = [](const std::vector<double>& v) {
    return std::all_of(v.begin(), v.end(), [](double x) { return std::isfinite(x); });
  };
  return std::isfinite(global_bias) && finite(user_factors) && finite(item_factors) &&
         finite(user_bias) && finite(item_bias);
}

void ModelParams::save(const std::filesystem::path& path) const {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write " + path.string());
  out.write(kModelMagic.data(), static_cast<std::streamsize>(kModelMagic.size()));
  detail::write_pod<std::uint32_t>(out, static_cast<std::uint32_t>(dim));
  detail::write_pod<std::uint32_t>(out, static_cast<std::uint32_t>(n_users));
  detail::write_pod<std::uint32_t>(out, static_cast<std::uint32_t>(n_items));
  detail::write_pod<std::int64_t>(out, retrain_index);
  detail::write_pod<double>(out, global_bias);
  detail::write_array<double>(out, user_factors);
  detail::write_array<double>(out, item_factors);
  detail::write_array<double>(out, user_bias);
  detail::write_array<double>(out, item_bias);
}

ModelParams ModelParams::load(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open " + path.string());
  detail::expect_magic(in, kModelMagic);
  const auto d = detail::read_pod<std::uint32_t>(in);
  const auto n = detail::read_pod<std::uint32_t>(in);
  const auto m = detail::read_pod<std::uint32_t>(in);
  ModelParams p(static_cast<int>(n), static_cast<int>(m), static_cast<int>(d));
  p.retrain_index = detail::read_pod<std::int64_t>(in);
  p.global_bias = detail::read_pod<double>(in);
  detail::read_array<double>(in, p.user_factors);
  detail::read_array<double>(in, p.item_factors);
  detail::read_array<double>(in, p.user_bias);
  detail::read_array<double>(in, p.item_bias);
  return p;
}

TrainingExample ips_example(const ExposureRecord& rec, double propensity_floor) {
  if (!rec.clicked) return {.user = rec.user, .item = rec.item, .pos_weight = 0.0, .neg_weight = 1.0};
  const double p = std::max(examination_prob(rec.position), propensity_floor);
  const double inv = 1.0 / p;
  return {.user = rec.user, .item = rec.item, .pos_weight = inv, .neg_weight = 1.0 - inv};
}

double Gradients::max_abs() const {
  double m = std::abs(global_bias);
  for (const auto* v : {&user_factors, &item_factors, &user_bias, &item_bias}) {
    for (double x : *v) m = std::max(m, std::abs(x));
  }
  return m;
}

LossAndGradient loss_and_gradient(const ModelParams& params,
                                  std::span<const TrainingExample> batch, double l2) {
  LossAndGradient out;
  auto& g = out.grad;
  g.user_factors.assign(params.user_factors.size(), 0.0);
  g.item_factors.assign(params.item_factors.size(), 0.0);
  g.user_bias.assign(params.user_bias.size(), 0.0);
  g.item_bias.assign(params.item_bias.size(), 0.0);

  const int d = params.dim;
  for (const auto& ex : batch) {
    check_index(params, ex.user, ex.item);
    const double x = params.logit(ex.user, ex.item);
    out.loss += example_loss(x, ex) + 0.5 * l2 * reg_term(params, ex.user, ex.item);
    const double e = example_dlogit(x, ex);
    const auto pu = params.user_row(ex.user);
    const auto qi = params.item_row(ex.item);
    double* gpu = g.user_factors.data() + static_cast<std::size_t>(ex.user) * d;
    double* gqi = g.item_factors.data() + static_cast<std::size_t>(ex.item) * d;
    for (int f = 0; f < d; ++f) {
      gpu[f] += e * qi[f] + l2 * pu[f];
      gqi[f] += e * pu[f] + l2 * qi[f];
    }
    g.user_bias[ex.user] += e + l2 * params.user_bias[ex.user];
    g.item_bias[ex.item] += e + l2 * params.item_bias[ex.item];
    g.global_bias += e;
  }
  return out;
}

double batch_loss(const ModelParams& params, std::span<const TrainingExample> batch, double l2) {
  double loss = 0.0;
  for (const auto& ex : batch) {
    check_index(params, ex.user, ex.item);
    loss += example_loss(params.logit(ex.user, ex.item), ex) +
            0.5 * l2 * reg_term(params, ex.user, ex.item);
  }
  return loss;
}

namespace {

ModelParams initial_params(int n_users, int n_items, const TrainConfig& cfg,
                           const ModelParams* warm_start) {
  if (warm_start != nullptr) {
    if (warm_start->n_users != n_users || warm_start->n_items != n_items ||
        warm_start->dim != cfg.latent_dim) {
      throw Error("warm start shape does not match the training data");
    }
    return *warm_start;
  }
  return ModelParams::random(n_users, n_items, cfg.latent_dim, cfg.init_scale, cfg.seed);
}

// One SGD step on a single example; returns the example's objective before
// the update.
double sgd_step(ModelParams& p, const TrainingExample& ex, double lr, double l2) {
  const int d = p.dim;
  double* pu = p.user_factors.data() + static_cast<std::size_t>(ex.user) * d;
  double* qi = p.item_factors.data() + static_cast<std::size_t>(ex.item) * d;
  double& bu = p.user_bias[ex.user];
  double& bi = p.item_bias[ex.item];

  double x = p.global_bias + bu + bi;
  double reg = bu * bu + bi * bi;
  for (int f = 0; f < d; ++f) {
    x += pu[f] * qi[f];
    reg += pu[f] * pu[f] + qi[f] * qi[f];
  }
  const double loss = example_loss(x, ex) + 0.5 * l2 * reg;
  const double e = example_dlogit(x, ex);

  p.global_bias -= lr * e;
  bu -= lr * (e + l2 * bu);
  bi -= lr * (e + l2 * bi);
  for (int f = 0; f < d; ++f) {
    const double pf = pu[f];
    pu[f] -= lr * (e * qi[f] + l2 * pf);
    qi[f] -= lr * (e * pf + l2 * qi[f]);
  }
  return loss;
}

template <class NextEpochExamples>
ModelParams run_sgd(ModelParams params, const TrainConfig& cfg, int epochs, Rng& rng,
                    TrainReport* report, NextEpochExamples&& next_epoch) {
  std::vector<std::uint32_t> order;
  for (int epoch = 0; epoch < epochs; ++epoch) {
    std::span<const TrainingExample> examples = next_epoch(rng);
    if (examples.empty()) break;
    order.resize(examples.size());
    std::iota(order.begin(), order.end(), 0u);
    rng.shuffle(std::span<std::uint32_t>(order));

    double total = 0.0;
    for (auto idx : order) total += sgd_step(params, examples[idx], cfg.learning_rate, cfg.l2);
    if (!std::isfinite(total) || !params.all_finite()) {
      throw TrainingError("non-finite loss", epoch);
    }
    if (report != nullptr) report->epoch_loss.push_back(total / static_cast<double>(examples.size()));
  }
  return params;
}

}  // namespace

ModelParams train_examples(int n_users, int n_items, std::span<const TrainingExample> examples,
                           const TrainConfig& cfg, const ModelParams* warm_start,
                           TrainReport* report) {
  cfg.validate();
  if (examples.empty()) throw Error("train: no training examples");
  for (const auto& ex : examples) {
    if (ex.user < 0 || ex.user >= n_users || ex.item < 0 || ex.item >= n_items) {
      throw Error("train: example index out of range");
    }
  }
  ModelParams params = initial_params(n_users, n_items, cfg, warm_start);
  const int epochs = warm_start != nullptr ? cfg.epochs : cfg.cold_epochs;
  Rng rng = Rng::stream(cfg.seed, Stream::kTrain);
  return run_sgd(std::move(params), cfg, epochs, rng, report,
                 [&](Rng&) { return examples; });
}

ModelParams train(const InteractionLog& log, PhaseMask phases, const TrainConfig& cfg,
                  const ModelParams* warm_start, TrainReport* report) {
  cfg.validate();
  const int n_users = log.n_users();
  const int n_items = log.n_items();

  std::vector<TrainingExample> logged;
  std::vector<std::uint8_t> exposed(static_cast<std::size_t>(n_users) * n_items, 0);
  std::size_t n_clicks = 0;
  for (const auto& rec : log.records()) {
    if (!phases.contains(rec.phase)) continue;
    if (!rec.clicked && !cfg.unclicked_as_negatives) continue;
    logged.push_back(ips_example(rec, cfg.propensity_floor));
    exposed[static_cast<std::size_t>(rec.user) * n_items + rec.item] = 1;
    n_clicks += rec.clicked ? 1 : 0;
  }
  if (logged.empty()) throw Error("train: empty interaction log");

  ModelParams params = initial_params(n_users, n_items, cfg, warm_start);
  const int epochs = warm_start != nullptr ? cfg.epochs : cfg.cold_epochs;
  const auto n_negatives =
      static_cast<std::size_t>(std::llround(cfg.negative_ratio * static_cast<double>(n_clicks)));

  std::vector<TrainingExample> epoch_examples = logged;
  epoch_examples.reserve(logged.size() + n_negatives);
  Rng rng = Rng::stream(cfg.seed, Stream::kTrain);

  return run_sgd(std::move(params), cfg, epochs, rng, report, [&](Rng& r) {
    epoch_examples.resize(logged.size());
    for (std::size_t s = 0; s < n_negatives; ++s) {
      // Rejection sampling; a dense exposure matrix just yields fewer negatives.
      for (int attempt = 0; attempt < 32; ++attempt) {
        const auto u = static_cast<std::int32_t>(r.index(static_cast<std::uint64_t>(n_users)));
        const auto i = static_cast<std::int32_t>(r.index(static_cast<std::uint64_t>(n_items)));
        if (!exposed[static_cast<std::size_t>(u) * n_items + i]) {
          epoch_examples.push_back({.user = u, .item = i, .pos_weight = 0.0, .neg_weight = 1.0});
          break;
        }
      }
    }
    return std::span<const TrainingExample>(epoch_examples);
  });
}

double predict(const ModelParams& params, int user, int item) {
  check_index(params, user, item);
  return sigmoid(params.logit(user, item));
}

std::vector<int> top_k_by_score(std::span<const int> candidates, std::span<const double> scores,
                                int k) {
  if (k < 1) throw Error("top-k: K must be >= 1");
  if (candidates.size() < static_cast<std::size_t>(k)) {
    throw Error("top-k: " + std::to_string(candidates.size()) + " candidates for K=" +
                std::to_string(k));
  }
  if (scores.size() != candidates.size()) throw Error("top-k: score length mismatch");
  std::vector<std::size_t> idx(candidates.size());
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  std::partial_sort(idx.begin(), idx.begin() + k, idx.end(), [&](std::size_t a, std::size_t b) {
    if (scores[a] != scores[b]) return scores[a] > scores[b];
    return candidates[a] < candidates[b];
  });
  std::vector<int> out(static_cast<std::size_t>(k));
  for (int j = 0; j < k; ++j) out[j] = candidates[idx[j]];
  return out;
}

std::vector<int> rank_topk(const ModelParams& params, int user, std::span<const int> candidates,
                           int k) {
  std::vector<double> scores(candidates.size());
  for (std::size_t j = 0; j < candidates.size(); ++j) {
    scores[j] = predict(params, user, candidates[j]);
  }
  return top_k_by_score(candidates, scores, k);
}

}  // namespace popdyn
