#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <cstdint>
#include <string>
#include <vector>

#include "coxplain/dataio.hpp"
#include "coxplain/intershap.hpp"
#include "coxplain/models.hpp"
#include "coxplain/stats.hpp"
#include "coxplain/survival.hpp"
#include "coxplain/synthbench.hpp"

namespace py = pybind11;
using namespace coxplain;

namespace {

std::vector<SurvivalRecord> zip_outcomes(const std::vector<double>& times,
                                         const std::vector<bool>& events) {
  if (times.size() != events.size()) {
    throw std::invalid_argument("times and events must have equal length");
  }
  std::vector<SurvivalRecord> out;
  out.reserve(times.size());
  for (std::size_t i = 0; i < times.size(); ++i) {
    out.push_back({"P" + std::to_string(i), times[i], events[i]});
  }
  return out;
}

py::dict truth_dict(const SynthResult& result) {
  py::dict d;
  d["pattern"] = result.truth.pattern;
  d["target"] = result.truth.target;
  d["expected_low"] = result.truth.expected_low;
  d["expected_high"] = result.truth.expected_high;
  d["achieved_event_fraction"] = result.achieved_event_fraction;
  return d;
}

MaskingStrategy make_masking(const std::string& masking, int replicates,
                             std::uint64_t seed) {
  MaskingStrategy strategy;
  strategy.kind = masking_kind_from_string(masking);
  strategy.shuffle_replicates = replicates;
  strategy.seed = seed;
  return strategy;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Multimodal Cox survival models with Shapley interaction audits";

  py::class_<MultimodalDataset>(m, "Dataset")
      .def_static("load", &load_dataset, py::arg("directory"))
      .def("save",
           [](const MultimodalDataset& ds, const std::string& directory) {
             save_dataset(ds, directory);
           },
           py::arg("directory"))
      .def_property_readonly("n_patients", &MultimodalDataset::n_patients)
      .def_property_readonly(
          "modality_names",
          [](const MultimodalDataset& ds) { return ds.modality_names; })
      .def_property_readonly("patient_ids",
                             [](const MultimodalDataset& ds) {
                               std::vector<std::string> ids;
                               for (const auto& r : ds.outcomes) {
                                 ids.push_back(r.patient_id);
                               }
                               return ids;
                             })
      .def_property_readonly("times",
                             [](const MultimodalDataset& ds) {
                               std::vector<double> t;
                               for (const auto& r : ds.outcomes) {
                                 t.push_back(r.time);
                               }
                               return t;
                             })
      .def_property_readonly("events",
                             [](const MultimodalDataset& ds) {
                               std::vector<bool> e;
                               for (const auto& r : ds.outcomes) {
                                 e.push_back(r.event);
                               }
                               return e;
                             })
      .def("subset",
           [](const MultimodalDataset& ds,
              const std::vector<std::size_t>& rows) {
             return ds.subset(rows);
           },
           py::arg("rows"));

  py::class_<TrainedModel>(m, "Model")
      .def_static("load", &load_model, py::arg("directory"))
      .def("save",
           [](const TrainedModel& model, const std::string& directory) {
             save_model(model, directory);
           },
           py::arg("directory"))
      .def_property_readonly("architecture",
                             [](const TrainedModel& model) {
                               return arch_kind_to_string(model.spec.kind);
                             })
      .def_property_readonly("parameter_count",
                             [](const TrainedModel& model) {
                               return model.params.size();
                             })
      .def_property_readonly("seed",
                             [](const TrainedModel& model) {
                               return model.seed;
                             })
      .def_property_readonly("best_val_cindex",
                             [](const TrainedModel& model) {
                               return model.best_val_cindex;
                             })
      .def("predict",
           [](const TrainedModel& model, const MultimodalDataset& ds) {
             return predict(model, ds.modalities.at(0), ds.modalities.at(1));
           },
           py::arg("dataset"));

  m.def(
      "generate",
      [](const std::string& pattern, std::size_t n, std::size_t dims,
         double beta, double event_fraction, double sigma,
         std::uint64_t seed) {
        SynthSpec spec;
        spec.pattern = synth_pattern_from_string(pattern);
        spec.n = n;
        spec.dims = dims;
        spec.beta = beta;
        spec.event_fraction = event_fraction;
        spec.sigma = sigma;
        spec.seed = seed;
        SynthResult result = generate(spec);
        return py::make_tuple(std::move(result.dataset), truth_dict(result));
      },
      py::arg("pattern"), py::arg("n") = 2000, py::arg("dims") = 16,
      py::arg("beta") = 2.0, py::arg("event_fraction") = 0.65,
      py::arg("sigma") = 0.3, py::arg("seed") = 42,
      "Synthetic benchmark dataset plus its ground-truth target range.");

  m.def(
      "train_holdout",
      [](const MultimodalDataset& dataset, const std::string& arch,
         const std::string& preset, std::uint64_t seed, double test_fraction,
         double val_fraction, double lr, double weight_decay,
         std::size_t batch_size, int patience, int max_epochs) {
        ArchKind kind = arch_kind_from_string(arch);
        ArchitectureSpec spec;
        if (preset == "desk") {
          spec = ArchitectureSpec::desk(kind);
        } else if (preset == "paper") {
          spec = ArchitectureSpec::paper(kind);
        } else {
          throw std::invalid_argument("preset must be 'desk' or 'paper'");
        }
        spec.embed_dim_a = dataset.modalities.at(0).cols();
        spec.embed_dim_b = dataset.modalities.at(1).cols();

        SplitSpec outer;
        outer.test_fraction = test_fraction;
        outer.seed = seed;
        SplitResult osp = make_split(dataset, outer);
        MultimodalDataset pool = dataset.subset(osp.train_indices);
        SplitSpec inner;
        inner.test_fraction = val_fraction;
        inner.seed = seed + 1;
        SplitResult isp = make_split(pool, inner);

        TrainHyperparams hyper;
        hyper.lr = lr;
        hyper.weight_decay = weight_decay;
        hyper.batch_size = batch_size;
        hyper.patience = patience;
        hyper.max_epochs = max_epochs;
        TrainedModel model = train(spec, pool, isp.train_indices,
                                   isp.test_indices, hyper, seed);

        MultimodalDataset test = dataset.subset(osp.test_indices);
        std::vector<double> scores =
            predict(model, test.modalities[0], test.modalities[1]);
        py::dict metrics;
        metrics["n_train"] = isp.train_indices.size();
        metrics["n_val"] = isp.test_indices.size();
        metrics["n_test"] = osp.test_indices.size();
        metrics["epochs_run"] = model.epochs_run;
        metrics["best_val_cindex"] = model.best_val_cindex;
        metrics["test_cindex"] = concordance_index(scores, test.outcomes);
        return py::make_tuple(std::move(model), metrics);
      },
      py::arg("dataset"), py::arg("arch"), py::arg("preset") = "desk",
      py::arg("seed") = 42, py::arg("test_fraction") = 0.2,
      py::arg("val_fraction") = 0.2, py::arg("lr") = 1e-4,
      py::arg("weight_decay") = 1e-5, py::arg("batch_size") = 0,
      py::arg("patience") = 20, py::arg("max_epochs") = 500,
      "Split, train with early stopping, and score the held-out fold.");

  m.def(
      "audit_json",
      [](const TrainedModel& model, const MultimodalDataset& dataset,
         const std::string& masking, const std::string& convention,
         int replicates, std::uint64_t seed, int threads) {
        AuditReport report =
            audit(model, dataset, make_masking(masking, replicates, seed),
                  convention_from_string(convention), threads);
        return report_to_json(report);
      },
      py::arg("model"), py::arg("dataset"), py::arg("masking") = "mean",
      py::arg("convention") = "moebius", py::arg("replicates") = 8,
      py::arg("seed") = 42, py::arg("threads") = 1,
      "Interaction audit as a JSON document.");

  m.def(
      "audit_csv",
      [](const TrainedModel& model, const MultimodalDataset& dataset,
         const std::string& masking, const std::string& convention,
         int replicates, std::uint64_t seed, int threads) {
        AuditReport report =
            audit(model, dataset, make_masking(masking, replicates, seed),
                  convention_from_string(convention), threads);
        return report_to_csv(report);
      },
      py::arg("model"), py::arg("dataset"), py::arg("masking") = "mean",
      py::arg("convention") = "moebius", py::arg("replicates") = 8,
      py::arg("seed") = 42, py::arg("threads") = 1,
      "Per-patient audit table as CSV text.");

  m.def(
      "validate_json",
      [](std::size_t n, std::size_t dims, double beta, double sigma,
         double event_fraction, std::uint64_t seed, int threads,
         const std::string& only) {
        ValidationConfig config;
        config.n = n;
        config.dims = dims;
        config.beta = beta;
        config.sigma = sigma;
        config.event_fraction = event_fraction;
        config.seed = seed;
        config.threads = threads;
        config.only = only;
        return suite_report_to_json(run_validation_suite(config));
      },
      py::arg("n") = 2000, py::arg("dims") = 16, py::arg("beta") = 2.0,
      py::arg("sigma") = 0.3, py::arg("event_fraction") = 0.65,
      py::arg("seed") = 42, py::arg("threads") = 1, py::arg("only") = "",
      "Synthetic validation suite report as a JSON document.");

  m.def("spearman",
        [](const std::vector<double>& x, const std::vector<double>& y) {
          return spearman(x, y);
        },
        py::arg("x"), py::arg("y"));

  m.def("concordance_index",
        [](const std::vector<double>& scores, const std::vector<double>& times,
           const std::vector<bool>& events) {
          return concordance_index(scores, zip_outcomes(times, events));
        },
        py::arg("scores"), py::arg("times"), py::arg("events"));

  m.def("cox_nll",
        [](const std::vector<double>& scores, const std::vector<double>& times,
           const std::vector<bool>& events) {
          return cox_nll(scores, zip_outcomes(times, events));
        },
        py::arg("scores"), py::arg("times"), py::arg("events"));
}
