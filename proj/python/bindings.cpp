#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "coopmpc/errors.hpp"
#include "coopmpc/scenario.hpp"

namespace py = pybind11;

PYBIND11_MODULE(_coopmpc, m) {
  m.doc() = "sequential cooperative MPC simulator";

  py::class_<coopmpc::ScenarioConfig>(m, "ScenarioConfig")
      .def_readwrite("name", &coopmpc::ScenarioConfig::name)
      .def_readwrite("horizon", &coopmpc::ScenarioConfig::horizon)
      .def_readwrite("steps", &coopmpc::ScenarioConfig::steps)
      .def_readwrite("seed", &coopmpc::ScenarioConfig::seed)
      .def_readwrite("parallel", &coopmpc::ScenarioConfig::parallel)
      .def_readwrite("warm_start_perturbation",
                     &coopmpc::ScenarioConfig::warm_start_perturbation);

  py::class_<coopmpc::DiagnosticsRecord>(m, "DiagnosticsRecord")
      .def_readonly("t", &coopmpc::DiagnosticsRecord::t)
      .def_readonly("graph_version", &coopmpc::DiagnosticsRecord::graph_version)
      .def_readonly("value", &coopmpc::DiagnosticsRecord::value)
      .def_readonly("tracking_total", &coopmpc::DiagnosticsRecord::tracking_total)
      .def_readonly("coupling_global", &coopmpc::DiagnosticsRecord::coupling_global)
      .def_readonly("coop_distance", &coopmpc::DiagnosticsRecord::coop_distance)
      .def_readonly("min_margin", &coopmpc::DiagnosticsRecord::min_margin)
      .def_readonly("bound_applicable", &coopmpc::DiagnosticsRecord::bound_applicable)
      .def_readonly("value_drop", &coopmpc::DiagnosticsRecord::value_drop)
      .def_readonly("decrease_ok", &coopmpc::DiagnosticsRecord::decrease_ok)
      .def_readonly("split_ok", &coopmpc::DiagnosticsRecord::split_ok);

  py::class_<coopmpc::RunArtifacts>(m, "RunArtifacts")
      .def_readonly("infeasible", &coopmpc::RunArtifacts::infeasible)
      .def_readonly("error", &coopmpc::RunArtifacts::error)
      .def_readonly("trace_csv", &coopmpc::RunArtifacts::trace_csv)
      .def_readonly("diagnostics_csv", &coopmpc::RunArtifacts::diagnostics_csv)
      .def_readonly("run_header", &coopmpc::RunArtifacts::run_header)
      .def_readonly("diagnostics", &coopmpc::RunArtifacts::diagnostics)
      .def_property_readonly("records",
                             [](const coopmpc::RunArtifacts& a) { return a.trace.steps.size(); })
      .def_property_readonly("final_coop_outputs", [](const coopmpc::RunArtifacts& a) {
        std::vector<std::vector<double>> out;
        if (!a.trace.steps.empty())
          for (const auto& rec : a.trace.steps.back().agents)
            out.emplace_back(rec.y_c.begin(), rec.y_c.end());
        return out;
      });

  m.def("builtin_names", &coopmpc::builtin_names, "names of the built-in scenarios");
  m.def("load_scenario", &coopmpc::load_scenario, py::arg("name_or_path"),
        "load a built-in scenario by name or a scenario file by path");
  m.def("parse_scenario", &coopmpc::parse_scenario, py::arg("text"),
        py::arg("origin") = "<string>");
  m.def("serialize_scenario", &coopmpc::serialize_scenario, py::arg("config"));
  m.def("run_scenario", &coopmpc::run_scenario, py::arg("config"),
        "execute a scenario in memory and return its artifacts",
        py::call_guard<py::gil_scoped_release>());
  m.def("write_artifacts", &coopmpc::write_artifacts, py::arg("artifacts"), py::arg("out_dir"));

  py::register_exception<coopmpc::ConfigError>(m, "ConfigError");
  py::register_exception<coopmpc::InfeasibleError>(m, "InfeasibleError");
  py::register_exception<coopmpc::IoError>(m, "IoError");
}
