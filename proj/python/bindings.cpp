#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "popdyn/debias.hpp"
#include "popdyn/error.hpp"
#include "popdyn/experiment.hpp"
#include "popdyn/ground_truth.hpp"
#include "popdyn/metrics.hpp"

namespace py = pybind11;

PYBIND11_MODULE(_popdyn, m) {
  m.doc() = "Core routines of the popdyn simulator";

  // Translators run newest first, so the subclass goes last.
  auto& base = py::register_exception<popdyn::Error>(m, "PopdynError", PyExc_RuntimeError);
  py::register_exception<popdyn::ConfigError>(m, "ConfigError", base.ptr());

  m.def("examination_prob", &popdyn::examination_prob, py::arg("position"));

  m.def(
      "gini",
      [](std::vector<double> values, std::vector<double> order_key) {
        return popdyn::gini_of(values, order_key);
      },
      py::arg("values"), py::arg("order_key"),
      "Gini of values with items ordered by (order_key, index).");

  m.def(
      "fpc_correct",
      [](double theta, std::vector<std::int32_t> positions, bool posterior) {
        return popdyn::fpc_correct(theta, positions,
                                   posterior ? popdyn::FpcVariant::kPosterior
                                             : popdyn::FpcVariant::kProductDenominator);
      },
      py::arg("theta"), py::arg("positions"), py::arg("posterior") = false);

  m.def(
      "scale_scores",
      [](std::vector<double> scores, std::vector<std::int64_t> counts, double alpha) {
        std::vector<int> candidates(scores.size());
        for (std::size_t i = 0; i < candidates.size(); ++i) candidates[i] = static_cast<int>(i);
        return popdyn::scale_scores(scores, candidates, counts, alpha);
      },
      py::arg("scores"), py::arg("counts"), py::arg("alpha"),
      "Divides scores[i] by max(counts[i], 1)^alpha.");

  m.def("dscale_alpha", &popdyn::dscale_alpha, py::arg("retrain_index"), py::arg("delta"));

  py::class_<popdyn::GroundTruth>(m, "GroundTruth")
      .def_property_readonly("n_users", &popdyn::GroundTruth::n_users)
      .def_property_readonly("n_items", &popdyn::GroundTruth::n_items)
      .def_property_readonly("density", &popdyn::GroundTruth::density)
      .def_property_readonly("audience_gini", &popdyn::GroundTruth::audience_gini)
      .def_property_readonly("total_likes", &popdyn::GroundTruth::total_likes)
      .def_property_readonly("audience_sizes",
                             [](const popdyn::GroundTruth& gt) {
                               return std::vector<int>(gt.audience_sizes().begin(),
                                                       gt.audience_sizes().end());
                             })
      .def("likes", &popdyn::GroundTruth::likes, py::arg("user"), py::arg("item"));

  py::class_<popdyn::SynthesisOptions>(m, "SynthesisOptions")
      .def(py::init<>())
      .def_readwrite("affinity", &popdyn::SynthesisOptions::affinity)
      .def_readwrite("latent_dim", &popdyn::SynthesisOptions::latent_dim);

  m.def("synthesize_ground_truth", &popdyn::synthesize_ground_truth, py::arg("n_users"),
        py::arg("n_items"), py::arg("audience_gini"), py::arg("density"), py::arg("seed"),
        py::arg("options") = popdyn::SynthesisOptions{});
  m.def("recipe_names", &popdyn::recipe_names);
  m.def("_recipe_json", [](const std::string& name) -> std::optional<std::string> {
    auto doc = popdyn::recipe(name);
    if (!doc) return std::nullopt;
    return doc->dump();
  });
  m.def("_validate_config_json", [](const std::string& text) {
    return popdyn::parse_config(nlohmann::json::parse(text)).config.dump();
  });
  m.def(
      "_run_experiment_json",
      [](const std::string& text, bool write_artifacts) {
        const auto spec = popdyn::parse_config(nlohmann::json::parse(text));
        popdyn::RunSummary summary;
        {
          py::gil_scoped_release release;
          summary = popdyn::run_experiment(spec, write_artifacts);
        }
        return summary.to_json().dump();
      },
      py::arg("config"), py::arg("write_artifacts") = false);
}
