// Thin JSON-in, JSON-out bridge; the Python package decodes the strings.
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "fedsim/config.hpp"
#include "fedsim/errors.hpp"
#include "fedsim/experiment.hpp"
#include "fedsim/gradcheck.hpp"
#include "fedsim/registry.hpp"

namespace py = pybind11;
using namespace fedsim;

namespace {

std::string run_json(const std::string& config_text, bool write) {
  const ExperimentConfig config = ExperimentConfig::from_json(json::parse(config_text));
  ExperimentRun run;
  {
    py::gil_scoped_release release;
    run = run_experiment(config);
    if (write) write_outputs(run);
  }
  json records = json::array();
  for (const auto& r : run.result.records) {
    json j = r.to_json();
    j["schema_version"] = kSchemaVersion;
    records.push_back(std::move(j));
  }
  return json{{"summary", summary_json(run)}, {"metrics", std::move(records)}}.dump();
}

std::string strategies_json() {
  json out = json::array();
  for (const auto& info : strategy_registry()) {
    out.push_back({{"name", info.name},
                   {"category", info.category},
                   {"summary", info.summary},
                   {"params", resolve_params(info.name, json::object())}});
  }
  return out.dump();
}

py::dict gradcheck(int trials, std::uint64_t seed) {
  GradcheckOptions o;
  o.trials = trials;
  o.seed = seed;
  GradcheckReport rep;
  {
    py::gil_scoped_release release;
    rep = run_gradcheck(o);
  }
  py::list entries;
  for (const auto& e : rep.entries) {
    py::dict d;
    d["family"] = e.family;
    d["op"] = e.op;
    d["max_rel_error"] = e.max_rel_error;
    d["tol"] = e.tol;
    d["pass"] = e.pass();
    entries.append(d);
  }
  py::dict out;
  out["pass"] = rep.pass();
  out["entries"] = entries;
  return out;
}

}  // namespace

PYBIND11_MODULE(_fedsim, m) {
  m.doc() = "Federated learning simulator core";
  m.attr("SCHEMA_VERSION") = kSchemaVersion;

  static py::exception<ConfigError> config_error(m, "ConfigError", PyExc_ValueError);
  static py::exception<DivergenceError> divergence_error(m, "DivergenceError", PyExc_RuntimeError);
  py::register_exception_translator([](std::exception_ptr p) {
    try {
      if (p) std::rethrow_exception(p);
    } catch (const ConfigError& e) {
      py::object err = py::handle(config_error.ptr())(e.what());
      err.attr("path") = e.path();
      PyErr_SetObject(config_error.ptr(), err.ptr());
    } catch (const DivergenceError& e) {
      py::object err = py::handle(divergence_error.ptr())(e.what());
      err.attr("round") = e.round();
      PyErr_SetObject(divergence_error.ptr(), err.ptr());
    }
  });

  m.def("run_json", &run_json, py::arg("config"), py::arg("write") = false);
  m.def("strategies_json", &strategies_json);
  m.def("config_schema_json", [] { return config_schema().dump(); });
  m.def("gradcheck", &gradcheck, py::arg("trials") = 100, py::arg("seed") = 0);
}
