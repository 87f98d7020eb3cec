#include <pybind11/eigen.h>
#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <memory>
#include <sstream>

#include "mvri/config.hpp"
#include "mvri/errors.hpp"
#include "mvri/montecarlo.hpp"
#include "mvri/pipeline.hpp"
#include "mvri/policy.hpp"
#include "mvri/sre.hpp"

namespace py = pybind11;
using namespace pybind11::literals;
using namespace mvri;

namespace {

struct Problem {
  RunConfig config;
  MarketModel model;
  explicit Problem(RunConfig c) : config(std::move(c)), model(build_model(config.model)) {}
};

py::array_t<double> level_table(const SRESolution& s, bool second) {
  py::array_t<double> out({s.nodes(), s.n_max() + 1});
  auto a = out.mutable_unchecked<2>();
  for (int i = 0; i < s.nodes(); ++i)
    for (int n = 0; n <= s.n_max(); ++n) a(i, n) = second ? s.p2(i, n) : s.p1(i, n);
  return out;
}

py::dict point_dict(const FrontierPoint& p) {
  py::dict d;
  d["z"] = p.z;
  d["variance"] = p.variance;
  d["stddev"] = p.stddev();
  d["zeta_hat"] = p.zeta_hat;
  d["value"] = p.value;
  d["riskless_mean"] = p.riskless_mean;
  return d;
}

using Command = int (*)(const RunConfig&, std::ostream&, std::ostream&);

py::tuple run_command(Command cmd, const Problem& problem, const std::string& out_dir) {
  RunConfig c = problem.config;
  c.output_dir = out_dir;
  std::ostringstream out, err;
  int code = 0;
  {
    py::gil_scoped_release release;
    code = cmd(c, out, err);
  }
  return py::make_tuple(code, out.str(), err.str());
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Mean-variance investment and reinsurance with random coefficients.";

  py::register_exception<ConfigError>(m, "ConfigError", PyExc_ValueError);
  py::register_exception<ModelError>(m, "ModelError", PyExc_ValueError);
  py::register_exception<SolverError>(m, "SolverError", PyExc_RuntimeError);
  py::register_exception<InfeasibleTarget>(m, "InfeasibleTarget", PyExc_ValueError);
  py::register_exception<InadmissibleStrategy>(m, "InadmissibleStrategy", PyExc_RuntimeError);

  py::class_<Problem>(m, "Problem")
      .def_static("from_json", [](const std::string& text) { return Problem(parse_config(text)); })
      .def_static("load", [](const std::string& path) { return Problem(load_config(path)); })
      .def("to_json", [](const Problem& p) { return dump_config(p.config); })
      .def_property_readonly("horizon", [](const Problem& p) { return p.model.horizon(); })
      .def_property_readonly("grid_steps", [](const Problem& p) { return p.config.grid.steps; })
      .def_property_readonly("targets", [](const Problem& p) { return p.config.frontier.targets; })
      .def_property_readonly("initial_wealth",
                             [](const Problem& p) { return p.config.frontier.initial_wealth; })
      .def("riskless_mean", [](const Problem& p, double x) { return riskless_mean(x, p.model); },
           py::arg("x"));

  py::class_<SRESolution, std::shared_ptr<SRESolution>>(m, "Solution")
      .def_property_readonly("times", &SRESolution::times)
      .def_property_readonly("n_max", &SRESolution::n_max)
      .def_property_readonly("p1", [](const SRESolution& s) { return level_table(s, false); })
      .def_property_readonly("p2", [](const SRESolution& s) { return level_table(s, true); })
      .def_property_readonly("p1_initial", &SRESolution::p1_initial)
      .def_property_readonly("p2_initial", &SRESolution::p2_initial)
      .def_property_readonly("lemma_ratio", &SRESolution::lemma_ratio)
      .def_property_readonly("certificate", [](const SRESolution& s) {
        const auto& c = s.certificate();
        return py::dict("c1"_a = c.c1, "lower"_a = c.lower, "upper"_a = c.upper);
      });

  m.def(
      "solve",
      [](const Problem& p, std::optional<int> steps) {
        SREGrid g = p.config.grid;
        if (steps) g.steps = *steps;
        py::gil_scoped_release release;
        return std::make_shared<SRESolution>(solve_sre(p.model, g));
      },
      py::arg("problem"), py::arg("steps") = py::none(), "Solve the Riccati pair backward in time.");

  m.def(
      "frontier",
      [](const Problem& p, const SRESolution& s, std::vector<double> z, double x) {
        py::list rows;
        for (const auto& row : frontier_table(z, x, p.model, {s.p1_initial(), s.p2_initial()})) {
          if (row.point) rows.append(point_dict(*row.point));
          else rows.append(py::dict("z"_a = row.z, "error"_a = row.error));
        }
        return rows;
      },
      py::arg("problem"), py::arg("solution"), py::arg("targets"), py::arg("x") = 1.0);

  m.def(
      "simulate",
      [](std::shared_ptr<SRESolution> s, double z, double x, int n_paths, std::uint64_t seed,
         double dt_max, double pi_scale, double q_scale) {
        SimConfig cfg;
        cfg.n_paths = n_paths;
        cfg.seed = seed;
        cfg.dt_max = dt_max;
        cfg.initial_wealth = x;
        auto policy = std::make_shared<const FeedbackPolicy>(make_frontier_policy(z, x, s));
        std::vector<double> terminals;
        {
          py::gil_scoped_release release;
          terminals = simulate_paths(s->model(), FeedbackStrategy{policy, pi_scale, q_scale}, cfg)
                          .terminals();
        }
        return py::array_t<double>(static_cast<py::ssize_t>(terminals.size()), terminals.data());
      },
      py::arg("solution"), py::arg("z"), py::arg("x") = 1.0, py::arg("n_paths") = 10000,
      py::arg("seed") = 42, py::arg("dt_max") = 0.01, py::arg("pi_scale") = 1.0,
      py::arg("q_scale") = 1.0, "Terminal wealth under the frontier feedback policy.");

  m.def("run_solve", [](const Problem& p, const std::string& out) { return run_command(cmd_solve, p, out); });
  m.def("run_frontier", [](const Problem& p, const std::string& out) { return run_command(cmd_frontier, p, out); });
  m.def("run_simulate", [](const Problem& p, const std::string& out) { return run_command(cmd_simulate, p, out); });
  m.def("run_validate", [](const Problem& p, const std::string& out) { return run_command(cmd_validate, p, out); });
}
