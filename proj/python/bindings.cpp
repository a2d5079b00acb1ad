#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <nlohmann/json.hpp>

#include <optional>
#include <string>

#include "mgdl/data.hpp"
#include "mgdl/errors.hpp"
#include "mgdl/experiment.hpp"
#include "mgdl/network.hpp"

namespace py = pybind11;
using namespace mgdl;

namespace {

// Accepts a 1-D array (one scalar input per sample) or an s x N matrix.
Matrix as_columns(const Eigen::Ref<const Matrix>& x, std::size_t width) {
  if (x.cols() == 1 && width == 1 && x.rows() != 1) return x.transpose();
  return x;
}

nlohmann::json parse_json_text(const std::string& text) {
  try {
    return nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(e.what());
  }
}

ExperimentConfig config_from(const py::object& config) {
  if (py::isinstance<py::str>(config)) {
    const std::string s = config.cast<std::string>();
    if (!s.empty() && s.front() == '{') return parse_experiment_config(parse_json_text(s));
    return load_experiment_config(s);
  }
  const std::string text = py::module_::import("json").attr("dumps")(config).cast<std::string>();
  return parse_experiment_config(parse_json_text(text));
}

py::dict samples_dict(const Samples& s) {
  py::dict d;
  d["x"] = Eigen::VectorXd(s.x.row(0).transpose());
  d["y"] = Eigen::VectorXd(s.y.row(0).transpose());
  return d;
}

}  // namespace

PYBIND11_MODULE(_multigrade, m) {
  m.doc() = "Grade-by-grade training of deep networks";

  static py::exception<Error> base(m, "MultigradeError");
  py::register_exception<ShapeError>(m, "ShapeError", base.ptr());
  py::register_exception<UsageError>(m, "UsageError", base.ptr());
  py::register_exception<ConfigError>(m, "ConfigError", base.ptr());
  py::register_exception<DomainError>(m, "DomainError", base.ptr());
  py::register_exception<IoError>(m, "IoError", base.ptr());
  py::register_exception<TrainingError>(m, "TrainingError", base.ptr());

  m.def("eval_target",
        [](const std::string& target, double x) {
          return eval_target(target_from_string(target), x);
        },
        py::arg("target"), py::arg("x"));

  m.def("generate",
        [](const std::string& target, bool noisy, std::uint64_t seed,
           std::size_t train_size, std::size_t test_size) {
          DataOptions o;
          o.train_size = train_size;
          o.test_size = test_size;
          const Dataset d = generate(target_from_string(target), noisy, seed, o);
          py::dict out;
          out["train"] = samples_dict(d.train);
          out["test"] = samples_dict(d.test);
          out["validation"] = samples_dict(d.validation);
          out["validation_indices"] = d.validation_indices;
          out["noise_sigma"] = d.noise_sigma;
          return out;
        },
        py::arg("target"), py::arg("noisy") = false, py::arg("seed") = 1,
        py::arg("train_size") = 5000, py::arg("test_size") = 1000);

  m.def("split_error",
        [](const Eigen::VectorXd& pred, const Eigen::VectorXd& target) {
          const SplitError e = split_error(pred.transpose(), target.transpose());
          py::dict out;
          out["mse"] = e.mse;
          out["rse"] = e.rse ? py::cast(*e.rse) : py::none();
          return out;
        },
        py::arg("pred"), py::arg("target"));

  m.def("validate_config",
        [](const py::object& config) {
          const ExperimentConfig c = config_from(config);
          return py::module_::import("json").attr("loads")(to_json(c).dump());
        },
        py::arg("config"),
        "Parses and validates a config (path, JSON text or dict); returns the normalized form.");

  py::class_<MultiGradeModel>(m, "Model")
      .def_static("load", &load_model, py::arg("path"))
      .def_static("from_json",
                  [](const std::string& text) { return model_from_json(parse_json_text(text)); })
      .def("save", [](const MultiGradeModel& self, const std::string& path) {
        save_model(self, path);
      })
      .def("to_json", [](const MultiGradeModel& self) { return to_json(self).dump(); })
      .def_property_readonly("num_grades", &MultiGradeModel::size)
      .def_property_readonly("input_width", &MultiGradeModel::input_width)
      .def_property_readonly("output_width", &MultiGradeModel::output_width)
      .def("predict",
           [](const MultiGradeModel& self, const Eigen::Ref<const Matrix>& x) {
             return Matrix(self.predict(as_columns(x, self.input_width())));
           },
           py::arg("x"), "Predictions with one sample per column (1-D input is accepted).")
      .def("predict_prefix",
           [](const MultiGradeModel& self, const Eigen::Ref<const Matrix>& x,
              std::size_t grades) {
             return Matrix(self.predict_prefix(as_columns(x, self.input_width()), grades));
           },
           py::arg("x"), py::arg("grades"))
      .def("summary", [](const MultiGradeModel& self) {
        std::vector<std::string> lines;
        for (const GradeSummary& s : flatten_for_report(self)) lines.push_back(s.text);
        return lines;
      });

  m.def("run_experiment",
        [](const py::object& config, std::optional<std::uint64_t> seed,
           std::optional<std::string> out_dir, bool baseline) {
          ExperimentConfig c = config_from(config);
          if (seed) c.seed = *seed;
          c.output_dir = out_dir.value_or("");
          if (!baseline) c.baseline.reset();
          ExperimentReport r;
          {
            py::gil_scoped_release release;
            r = run_experiment(c);
          }
          const py::object metrics =
              py::module_::import("json").attr("loads")(metrics_json(r).dump());
          return py::make_tuple(metrics, r.model);
        },
        py::arg("config"), py::arg("seed") = py::none(), py::arg("out_dir") = py::none(),
        py::arg("baseline") = true,
        "Runs an experiment; returns (metrics dict, Model).");
}
