#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "popdyn/click_model.hpp"

namespace popdyn {

class InteractionLog;

struct TrainConfig {
  int latent_dim = 16;
  double learning_rate = 0.05;
  double l2 = 0.1;
  /// Passes over the data per retrain when warm-starting.
  int epochs = 3;
  /// Passes used when no warm start is available.
  int cold_epochs = 20;
  /// Never-exposed pairs sampled as negatives per clicked exposure.
  double negative_ratio = 1.0;
  /// Lower clip for propensities, so 1/p never exceeds 1/floor.
  double propensity_floor = 0.1;
  double init_scale = 1.0;
  bool warm_start = true;
  /// Logged unclicked exposures enter as explicit negatives. When false they
  /// are treated like any other unclicked pair and only reach training
  /// through negative sampling.
  bool unclicked_as_negatives = true;
  std::uint64_t seed = 0;

  void validate() const;
};

/// Latent factors and biases of the squashed-output MF model.
struct ModelParams {
  int n_users = 0;
  int n_items = 0;
  int dim = 0;
  std::vector<double> user_factors;  // n_users * dim
  std::vector<double> item_factors;  // n_items * dim
  std::vector<double> user_bias;
  std::vector<double> item_bias;
  double global_bias = 0.0;
  std::int64_t retrain_index = 0;

  ModelParams() = default;
  ModelParams(int n_users, int n_items, int dim);

  /// Small Gaussian factors, zero biases.
  static ModelParams random(int n_users, int n_items, int dim, double scale,
                            std::uint64_t seed);

  std::span<const double> user_row(int u) const {
    return {user_factors.data() + static_cast<std::size_t>(u) * dim,
            static_cast<std::size_t>(dim)};
  }
  std::span<const double> item_row(int i) const {
    return {item_factors.data() + static_cast<std::size_t>(i) * dim,
            static_cast<std::size_t>(dim)};
  }

  double logit(int u, int i) const;
  bool all_finite() const;

  void save(const std::filesystem::path& path) const;
  static ModelParams load(const std::filesystem::path& path);

  friend bool operator==(const ModelParams&, const ModelParams&) = default;
};

/// One weighted pointwise term:
///   pos_weight * -log(s) + neg_weight * -log(1 - s),  s = sigmoid(logit).
/// A click at rank k has pos_weight 1/p_k and neg_weight 1 - 1/p_k; an
/// unclicked or unexposed pair has (0, 1).
struct TrainingExample {
  std::int32_t user = 0;
  std::int32_t item = 0;
  double pos_weight = 0.0;
  double neg_weight = 1.0;
};

/// IPS weights for a logged exposure.
TrainingExample ips_example(const ExposureRecord& rec, double propensity_floor);

/// Dense gradient with the same layout as ModelParams.
struct Gradients {
  std::vector<double> user_factors;
  std::vector<double> item_factors;
  std::vector<double> user_bias;
  std::vector<double> item_bias;
  double global_bias = 0.0;

  double max_abs() const;
};

struct LossAndGradient {
  double loss = 0.0;
  Gradients grad;
};

/// Batch objective: the sum of weighted log-loss terms plus, per example,
/// (l2/2) * (|p_u|^2 + |q_i|^2 + b_u^2 + b_i^2). This is the objective whose
/// stochastic gradient `train` follows.
LossAndGradient loss_and_gradient(const ModelParams& params,
                                  std::span<const TrainingExample> batch, double l2);

double batch_loss(const ModelParams& params, std::span<const TrainingExample> batch,
                  double l2);

struct TrainReport {
  /// Mean per-example objective accumulated during each epoch.
  std::vector<double> epoch_loss;
};

/// SGD on the IPS objective over the exposures in `log` whose phase is in
/// `phases`, plus freshly sampled never-exposed negatives each epoch.
/// Throws TrainingError on a non-finite loss, Error on an empty log.
ModelParams train(const InteractionLog& log, PhaseMask phases, const TrainConfig& cfg,
                  const ModelParams* warm_start = nullptr, TrainReport* report = nullptr);

/// Plain SGD over a fixed example list (no negative sampling). Used by
/// `train` and directly by tests.
ModelParams train_examples(int n_users, int n_items, std::span<const TrainingExample> examples,
                           const TrainConfig& cfg, const ModelParams* warm_start = nullptr,
                           TrainReport* report = nullptr);

/// sigmoid(global + b_u + b_i + p_u . q_i), in (0, 1).
double predict(const ModelParams& params, int user, int item);

/// Top-K candidates by predicted score; ties broken by ascending item index.
std::vector<int> rank_topk(const ModelParams& params, int user, std::span<const int> candidates,
                           int k);

/// Top-K of arbitrary per-candidate scores with the same tie rule.
std::vector<int> top_k_by_score(std::span<const int> candidates, std::span<const double> scores,
                                int k);

}  // namespace popdyn
