#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <cstdint>
#include <optional>
#include <string>
#include <tuple>
#include <vector>

#include "fractal/aggregation.hpp"
#include "fractal/config.hpp"
#include "fractal/dataset.hpp"
#include "fractal/metrics.hpp"
#include "fractal/model.hpp"
#include "fractal/pseudolabel.hpp"
#include "fractal/priors.hpp"
#include "fractal/training.hpp"

#include "json.hpp"

namespace py = pybind11;
using namespace fractal;

namespace {

AggConfig make_agg_config(const std::string& kind, const std::string& approx,
                          double sharpness) {
  AggConfig cfg;
  cfg.kind = agg_kind_from_string(kind);
  cfg.approx = approx_from_string(approx);
  cfg.sharpness = sharpness;
  cfg.validate();
  return cfg;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Weak-supervision toolkit: bag-level losses, pseudo-labeling "
            "and instance scoring";

  py::class_<Dataset>(m, "Dataset")
      .def_property_readonly("d", [](const Dataset& ds) { return ds.d; })
      .def_property_readonly(
          "n_bags", [](const Dataset& ds) { return ds.bags.size(); })
      .def_property_readonly(
          "n_instances",
          [](const Dataset& ds) { return ds.instance_count(); })
      .def_property_readonly(
          "n_preferences",
          [](const Dataset& ds) { return ds.preferences.size(); })
      .def_property_readonly(
          "label_kind",
          [](const Dataset& ds) { return std::string(to_string(ds.label_kind)); })
      .def_property_readonly(
          "agg", [](const Dataset& ds) { return std::string(to_string(ds.agg())); })
      .def("__eq__",
           [](const Dataset& a, const Dataset& b) { return a == b; })
      .def("__repr__", [](const Dataset& ds) {
        return "<Dataset bags=" + std::to_string(ds.bags.size()) +
               " instances=" + std::to_string(ds.instance_count()) +
               " d=" + std::to_string(ds.d) + ">";
      });

  py::class_<ScorerModel>(m, "ScorerModel")
      .def_property_readonly("input_dim", &ScorerModel::input_dim)
      .def_property_readonly("parameter_count", &ScorerModel::parameter_count)
      .def("score",
           [](const ScorerModel& mm, const std::vector<double>& x) {
             return mm.forward(x);
           },
           py::arg("embedding"))
      .def("save",
           [](const ScorerModel& mm, const std::string& path) {
             mm.save(path);
           },
           py::arg("path"))
      .def_static("load", &ScorerModel::load, py::arg("path"))
      .def("__eq__", [](const ScorerModel& a, const ScorerModel& b) {
        return a == b;
      });

  m.def(
      "generate_synthetic",
      [](std::uint64_t seed, int n_bags, int bag_size_min, int bag_size_max,
         int d, const std::string& agg, const std::string& label_kind,
         int max_label, double noise, double prior_quality) {
        SyntheticConfig cfg;
        cfg.seed = seed;
        cfg.n_bags = n_bags;
        cfg.bag_size_min = bag_size_min;
        cfg.bag_size_max = bag_size_max;
        cfg.d = d;
        cfg.agg = agg_kind_from_string(agg);
        cfg.label_kind = label_kind_from_string(label_kind);
        cfg.max_label = max_label;
        cfg.noise = noise;
        cfg.prior_quality = prior_quality;
        return generate_synthetic(cfg);
      },
      py::arg("seed") = 0, py::arg("n_bags") = 1,
      py::arg("bag_size_min") = 1, py::arg("bag_size_max") = 1,
      py::arg("d") = 2, py::arg("agg") = "min",
      py::arg("label_kind") = "binary", py::arg("max_label") = 1,
      py::arg("noise") = 0.0, py::arg("prior_quality") = 1.0);

  m.def("load_dataset",
        [](const std::string& path) { return load_dataset(path); },
        py::arg("path"));
  m.def("save_dataset", &save_dataset, py::arg("dataset"), py::arg("path"));
  m.def(
      "split_dataset",
      [](const Dataset& ds, std::size_t n_train) {
        return split_dataset(ds, n_train);
      },
      py::arg("dataset"), py::arg("n_train"));
  m.def(
      "sample_preferences",
      [](Dataset& ds, int count, std::uint64_t seed) {
        ds.preferences = sample_preferences(ds, count, seed);
        return ds.preferences.size();
      },
      py::arg("dataset"), py::arg("count"), py::arg("seed"),
      "Samples gold-labeled preference pairs into the dataset, in place.");
  m.def(
      "validate_consistency",
      [](const Dataset& ds) {
        std::vector<std::tuple<std::string, double, double>> out;
        for (const ConsistencyIssue& i : validate_consistency(ds))
          out.emplace_back(i.bag_id, i.expected, i.actual);
        return out;
      },
      py::arg("dataset"),
      "Bags whose stored label disagrees with the aggregate of gold labels, "
      "as (bag_id, expected, actual) tuples.");

  m.def(
      "train",
      [](const Dataset& ds, const std::string& config_json) {
        const TrainConfig cfg =
            train_config_from_json(nlohmann::json::parse(config_json));
        return train(ds, cfg).model;
      },
      py::arg("dataset"), py::arg("config_json"),
      "Trains a fresh scorer; config_json uses the CLI's config schema.");

  m.def(
      "pslab",
      [](const Dataset& ds, const ScorerModel& model) {
        PslabAudit audit;
        Dataset pseudo = pslab_dataset(ds, model, &audit);
        py::dict a;
        a["bags"] = audit.bags;
        a["forced_bags"] = audit.forced_bags;
        a["flipped_bags"] = audit.flipped_bags;
        a["instances"] = audit.instances;
        a["positive_labels"] = audit.positive_labels;
        return py::make_tuple(std::move(pseudo), std::move(a));
      },
      py::arg("dataset"), py::arg("model"),
      "Maximum-likelihood pseudo labels; returns (dataset, audit).");
  m.def(
      "pslab_bag",
      [](const std::vector<double>& scores, int bag_label,
         const std::string& agg) {
        const BagLabeling lab =
            pslab_bag(scores, bag_label, agg_kind_from_string(agg));
        return py::make_tuple(lab.labels, lab.likelihood, lab.flipped);
      },
      py::arg("scores"), py::arg("bag_label"), py::arg("agg"),
      "Returns (labels, likelihood, flipped) for one bag.");

  m.def(
      "evaluate",
      [](const Dataset& ds, const ScorerModel& model) {
        return report_to_json(evaluate_dataset(ds, model_scorer(model)))
            .dump();
      },
      py::arg("dataset"), py::arg("model"),
      "Instance, bag and preference metrics as a JSON string.");
  m.def(
      "evaluate_cosine",
      [](const Dataset& ds) {
        return report_to_json(evaluate_dataset(ds, cosine_scorer(ds))).dump();
      },
      py::arg("dataset"),
      "Metrics for the cosine-prior baseline as a JSON string.");

  m.def(
      "aggregate",
      [](const std::vector<double>& scores, const std::string& kind,
         const std::string& approx, double sharpness) {
        const AggResult r =
            aggregate(scores, make_agg_config(kind, approx, sharpness));
        return py::make_tuple(r.value, r.gradient, r.clamped);
      },
      py::arg("scores"), py::arg("kind"), py::arg("approx") = "hard",
      py::arg("sharpness") = 10.0,
      "Differentiable aggregate; returns (value, gradient, clamped).");
  m.def("exact_aggregate",
        [](const std::string& kind, const std::vector<double>& values) {
          return exact_aggregate(agg_kind_from_string(kind), values);
        },
        py::arg("kind"), py::arg("values"));

  m.def("auc_roc",
        [](const std::vector<double>& s, const std::vector<int>& y) {
          return auc_roc(s, y);
        },
        py::arg("scores"), py::arg("labels"));
  m.def("auc_pr",
        [](const std::vector<double>& s, const std::vector<int>& y) {
          return auc_pr(s, y);
        },
        py::arg("scores"), py::arg("labels"));
  m.def("cos_prior",
        [](const std::vector<double>& x, const std::vector<double>& c) {
          return cos_prior(x, c);
        },
        py::arg("embedding"), py::arg("context"));
  m.def("corr_prior",
        [](const std::vector<double>& x, const std::vector<double>& z) {
          return corr_prior(x, z);
        },
        py::arg("a"), py::arg("b"));
}
