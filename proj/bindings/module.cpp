#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <memory>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "fluxsim/accept/acceptance.hpp"
#include "fluxsim/cfg/scenario.hpp"
#include "fluxsim/errors.hpp"
#include "fluxsim/sim/engine.hpp"
#include "fluxsim/sim/metrics.hpp"

namespace py = pybind11;
using namespace fluxsim;

namespace {

/// JSON crosses the boundary as text; the python side re-hydrates with the
/// stdlib. Keeps the module free of numpy/dict marshalling code.
std::string dump(const nlohmann::json& j) { return j.dump(); }

nlohmann::json parse_text(const std::string& text) {
    return nlohmann::json::parse(text);
}

}  // namespace

PYBIND11_MODULE(_core, m) {
    m.doc() = "Fixed-step switched-inverter grid simulation core";

    py::register_exception<ConfigError>(m, "ConfigError", PyExc_ValueError);
    py::register_exception<SimulationFault>(m, "SimulationFault", PyExc_RuntimeError);

    py::class_<cfg::Scenario>(m, "Scenario")
        .def_property_readonly("name", [](const cfg::Scenario& s) { return s.name; })
        .def_property_readonly("description",
                               [](const cfg::Scenario& s) { return s.description; })
        .def_property_readonly("dt", [](const cfg::Scenario& s) { return s.dt; })
        .def_property_readonly("t_end", [](const cfg::Scenario& s) { return s.t_end; })
        .def_property_readonly("buses", [](const cfg::Scenario& s) { return s.buses; })
        .def_property_readonly("total_steps",
                               [](const cfg::Scenario& s) { return s.total_steps(); })
        .def("to_json", [](const cfg::Scenario& s) { return dump(cfg::scenario_to_json(s)); },
             "Resolved scenario (defaults filled in) as a JSON string.")
        .def("__repr__", [](const cfg::Scenario& s) {
            std::ostringstream os;
            os << "Scenario('" << s.name << "', t_end=" << s.t_end << ", "
               << s.wpgs.size() << " units)";
            return os.str();
        });

    m.def("load_scenario", &cfg::load_scenario_file, py::arg("path"),
          "Read and validate a scenario file.");
    m.def(
        "parse_scenario",
        [](const std::string& text) { return cfg::parse_scenario(parse_text(text)); },
        py::arg("text"), "Parse and validate a scenario from a JSON string.");

    py::class_<sim::Engine>(m, "Engine")
        .def(py::init<const cfg::Scenario&>(), py::arg("scenario"))
        .def("step", &sim::Engine::step, "Advance one fixed step.")
        .def("run", &sim::Engine::run, "Run to t_end.")
        .def_property_readonly("time", &sim::Engine::time)
        .def_property_readonly("step_index", &sim::Engine::step_index)
        .def_property_readonly("total_steps", &sim::Engine::total_steps)
        .def_property_readonly("dt", &sim::Engine::dt)
        .def_property_readonly("wpg_count", &sim::Engine::wpg_count)
        .def("save_state",
             [](const sim::Engine& e) {
                 nlohmann::json j;
                 e.save_state(j);
                 return dump(j);
             },
             "Full dynamic state as a JSON string.")
        .def("load_state",
             [](sim::Engine& e, const std::string& text) { e.load_state(parse_text(text)); },
             py::arg("state"))
        .def("headline",
             [](const sim::Engine& e) { return dump(e.metrics().headline(e)); },
             "Run summary (peaks, DC voltages, funnel timings) as a JSON string.")
        .def("write_csv",
             [](const sim::Engine& e, const std::string& path) {
                 e.recorder().write_csv(path);
             },
             py::arg("path"), "Write the decimated capture to a CSV file.")
        .def_property_readonly("channel_names",
                               [](const sim::Engine& e) {
                                   return e.recorder().channel_names();
                               })
        .def("capture",
             [](const sim::Engine& e) {
                 const sim::Recorder& r = e.recorder();
                 const std::size_t rows = r.row_count();
                 const std::size_t cols = r.column_count();
                 std::vector<std::vector<double>> out(rows, std::vector<double>(cols));
                 for (std::size_t i = 0; i < rows; ++i)
                     for (std::size_t j = 0; j < cols; ++j) out[i][j] = r.value(i, j);
                 return out;
             },
             "Recorded rows as nested lists; column 0 is the time.");

    m.def(
        "run_acceptance",
        [](const std::string& scenario_dir, const std::string& work_dir) {
            std::ostringstream log;
            const accept::AcceptanceReport rep =
                accept::run_acceptance(scenario_dir, work_dir, log);
            py::list results;
            for (const auto& r : rep.results) {
                py::dict d;
                d["id"] = r.id;
                d["name"] = r.name;
                d["pass"] = r.pass;
                d["detail"] = r.detail;
                results.append(d);
            }
            py::dict out;
            out["all_pass"] = rep.all_pass();
            out["results"] = results;
            out["log"] = log.str();
            return out;
        },
        py::arg("scenario_dir"), py::arg("work_dir"),
        "Run the acceptance suite; returns pass flags, details and the log.");
}
