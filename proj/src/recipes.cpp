// Built-in experiment documents at desk scale (200 users, 500 items, K=10,
// T=5000). `--paper-scale` swaps in the full sizes.
#include <map>

#include "popdyn/experiment.hpp"

namespace popdyn {

using nlohmann::json;

namespace {

json desk_dataset(json gini = 0.64) {
  return {{"synthetic",
           {{"n_users", 200}, {"n_items", 500}, {"audience_gini", gini}, {"density", 0.065}, {"seed", 7}}}};
}

json desk_sim(int repeats) {
  return {{"K", 10}, {"T", 5000}, {"L", 50}, {"checkpoint_every", 250}, {"seed", 1}, {"repeats", repeats}};
}

const std::map<std::string, json>& table() {
  static const std::map<std::string, json> recipes = [] {
    std::map<std::string, json> r;
    r["fig2_baselines"] = {{"name", "fig2_baselines"},
                           {"kind", "dynamic"},
                           {"dataset", desk_dataset()},
                           {"sim", desk_sim(5)},
                           {"methods", {"mf", "popular", "random"}}};
    r["fig3_cfl"] = {{"name", "fig3_cfl"},
                     {"kind", "dynamic"},
                     {"dataset", desk_dataset()},
                     {"sim", desk_sim(5)},
                     {"methods", {"mf", {{"name", "mf"}, {"cfl_mode", "without_cfl"}}}}};
    r["fig4_static_factors"] = {
        {"name", "fig4_static_factors"},
        {"kind", "static_factors"},
        {"dataset", desk_dataset({0.37, 0.45, 0.51, 0.57, 0.64})},
        {"sim", desk_sim(5)},
        // A single cold fit; trained longer, from a smaller init and with a
        // lighter penalty than the dynamic retrains.
        {"trainer", {{"l2", 0.01}, {"init_scale", 0.1}, {"cold_epochs", 100}}},
        {"methods", {"mf"}},
        {"densities", {0.0001, 0.0005, 0.001, 0.002, 0.004, 0.008, 0.016, 0.032}},
        {"static_train_density", 0.008}};
    r["fig5_imbalance_dynamic"] = {{"name", "fig5_imbalance_dynamic"},
                                   {"kind", "dynamic"},
                                   {"dataset", desk_dataset({0.37, 0.45, 0.51, 0.57, 0.64})},
                                   {"sim", desk_sim(3)},
                                   {"methods", {"mf"}}};
    r["fig6_static_vs_dynamic_debias"] = {
        {"name", "fig6_static_vs_dynamic_debias"},
        {"kind", "dynamic"},
        {"dataset", desk_dataset()},
        {"sim", desk_sim(5)},
        {"methods",
         {"mf",
          {{"name", "scale"}, {"alpha", {0.1, 0.15, 0.2, 0.25, 0.3}}},
          {{"name", "dscale"}, {"delta", {0.002, 0.0025, 0.003, 0.0035, 0.004}}}}}};
    r["fig7_fpc_family"] = {
        {"name", "fig7_fpc_family"},
        {"kind", "dynamic"},
        {"dataset", desk_dataset()},
        {"sim", desk_sim(5)},
        {"methods",
         {"mf",
          "fpc",
          {{"name", "dscale"}, {"delta", {0.002, 0.0025, 0.003, 0.0035, 0.004}}},
          {{"name", "fpc_dscale"}, {"delta", {0.001, 0.0015, 0.002, 0.0025, 0.003}}}}}};
    return r;
  }();
  return recipes;
}

}  // namespace

std::vector<std::string> recipe_names() {
  std::vector<std::string> names;
  for (const auto& [name, doc] : table()) names.push_back(name);
  return names;
}

std::optional<json> recipe(std::string_view name) {
  const auto it = table().find(std::string(name));
  if (it == table().end()) return std::nullopt;
  return std::optional<json>(std::in_place, it->second);
}

}  // namespace popdyn
