#include <pybind11/pybind11.h>
#include <pybind11/numpy.h>
#include <pybind11/stl.h>

#include "tacnet/baselines.hpp"
#include "tacnet/env.hpp"
#include "tacnet/metrics.hpp"
#include "tacnet/protocol.hpp"

namespace py = pybind11;
using namespace tacnet;

namespace {

py::array_t<double> to_array(const Observation& obs) {
  py::array_t<double> out({obs.rows, obs.cols});
  std::copy(obs.values.begin(), obs.values.end(), out.mutable_data());
  return out;
}

EnvMode parse_mode(const std::string& mode) {
  if (mode == "training") return EnvMode::Training;
  if (mode == "evaluation") return EnvMode::Evaluation;
  throw py::value_error("mode must be 'training' or 'evaluation'");
}

ControlMode parse_control(const std::string& control) {
  if (control == "agent") return ControlMode::Agent;
  if (control == "cubic") return ControlMode::Cubic;
  if (control == "fixed") return ControlMode::Fixed;
  throw py::value_error("control must be 'agent', 'cubic' or 'fixed'");
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Tactical network congestion-control simulator";

  py::register_exception<Error>(m, "Error", PyExc_RuntimeError);

  py::class_<Scenario>(m, "Scenario")
      .def_readonly("name", &Scenario::name)
      .def("to_json", [](const Scenario& s) { return scenario_to_json(s); });
  m.def("scenario", &scenarios::resolve, py::arg("name_or_path"));
  m.def("scenario_with_loss", &with_final_loss, py::arg("scenario"), py::arg("loss_prob"));

  py::class_<Env>(m, "Env")
      .def(py::init([](const Scenario& scenario, const std::string& mode, const std::string& control,
                       std::int64_t payload_bytes) {
             EnvConfig cfg;
             cfg.mode = parse_mode(mode);
             cfg.control = parse_control(control);
             cfg.payload_bytes = payload_bytes;
             return std::make_unique<Env>(scenario, cfg);
           }),
           py::arg("scenario"), py::arg("mode") = "training", py::arg("control") = "agent",
           py::arg("payload_bytes") = 600000)
      .def("reset", [](Env& env, std::uint64_t seed) { return to_array(env.reset(seed)); }, py::arg("seed"))
      .def(
          "step",
          [](Env& env, double action) {
            StepResult r = env.step(action);
            return py::make_tuple(to_array(r.observation), r.reward, r.terminal, r.truncated, r.info);
          },
          py::arg("action"))
      .def_property_readonly("steps", &Env::steps)
      .def_property_readonly("needs_reset", &Env::needs_reset)
      .def("completion_time", &Env::completion_time);

  py::class_<Server>(m, "Server")
      .def(py::init([](const Scenario& scenario, const std::string& bind, int port) {
             ServerOptions opts;
             opts.scenario = scenario;
             opts.bind_address = bind;
             opts.port = port;
             return std::make_unique<Server>(opts);
           }),
           py::arg("scenario"), py::arg("bind") = "127.0.0.1", py::arg("port") = 0)
      .def("start",
           [](Server& s) {
             s.start();
             s.run_async();
           })
      .def("stop", &Server::stop, py::call_guard<py::gil_scoped_release>())
      .def_property_readonly("port", &Server::port);

  m.def(
      "compute_reward",
      [](double target_kb, double acked_kb, double retx, double loss_c) {
        return compute_reward({target_kb, acked_kb, retx, loss_c});
      },
      py::arg("target_kb"), py::arg("acked_cumulative_kb"), py::arg("retransmissions"), py::arg("loss_c"));
  m.def("compute_rti", py::overload_cast<const std::vector<double>&>(&compute_rti), py::arg("ratios"));
  m.def(
      "ideal_fair_time",
      [](const Scenario& s, std::int64_t payload) -> std::optional<double> {
        const auto r = ideal_fair_time({&s, payload, std::nullopt});
        if (!r.feasible) return std::nullopt;
        return r.seconds;
      },
      py::arg("scenario"), py::arg("payload_bytes") = 600000);
}
