// Python bindings: problem files, multi-start planning, sampling.

#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "comfort/errors.hpp"
#include "comfort/planner.hpp"
#include "comfort/postprocess_io.hpp"

namespace py = pybind11;
using namespace comfort;

namespace {

py::dict samples_to_dict(const std::vector<TrajectorySample>& s) {
  const auto column = [&](double TrajectorySample::*field) {
    py::array_t<double> a(static_cast<py::ssize_t>(s.size()));
    auto w = a.mutable_unchecked<1>();
    for (std::size_t i = 0; i < s.size(); ++i) w(i) = s[i].*field;
    return a;
  };
  py::dict d;
  d["u"] = column(&TrajectorySample::u);
  d["t"] = column(&TrajectorySample::t);
  d["x"] = column(&TrajectorySample::x);
  d["y"] = column(&TrajectorySample::y);
  d["theta"] = column(&TrajectorySample::theta);
  d["v"] = column(&TrajectorySample::v);
  d["a_T"] = column(&TrajectorySample::a_T);
  d["a_N"] = column(&TrajectorySample::a_N);
  d["kappa"] = column(&TrajectorySample::kappa);
  d["omega"] = column(&TrajectorySample::omega);
  return d;
}

py::dict candidate_to_dict(const PlanCandidate& c, int samples) {
  py::dict d;
  d["parity"] = c.path.parity;
  d["theta_end"] = c.path.theta_end;
  d["status"] = c.solve ? std::string(nlp::to_string(c.solve->result.status)) : std::string("error");
  d["success"] = c.success();
  d["iterations"] = c.solve ? c.solve->result.iterations : 0;
  d["error"] = c.error;
  if (c.success()) {
    d["J"] = c.cost.J_total;
    d["J_tau"] = c.cost.J_tau;
    d["J_T"] = c.cost.J_T;
    d["J_N"] = c.cost.J_N;
    d["length"] = c.solve->dofs.lambda();
    d["max_violation"] = c.max_violation;
    d["samples"] = samples_to_dict(sample_trajectory(c.solve->dofs, samples));
  }
  return d;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Comfortable trajectory planning for nonholonomic robots";

  static py::exception<ParseError> parse_error(m, "ParseError", PyExc_ValueError);
  static py::exception<InvalidSpecError> spec_error(m, "InvalidSpecError", PyExc_ValueError);
  py::register_exception_translator([](std::exception_ptr p) {
    try {
      if (p) std::rethrow_exception(p);
    } catch (const ParseError& e) {
      parse_error(e.what());
    } catch (const InvalidSpecError& e) {
      spec_error(e.what());
    } catch (const DegenerateInputError& e) {
      PyErr_SetString(PyExc_ValueError, e.what());
    }
  });

  py::class_<ProblemSpec>(m, "Problem")
      .def_static("from_json", &parse_problem, py::arg("text"))
      .def_static("load", [](const std::string& path) { return read_problem(path); }, py::arg("path"))
      .def("to_json", &problem_to_json)
      .def_readwrite("n_elements", &ProblemSpec::n_elements)
      .def_readwrite("points_per_element", &ProblemSpec::points_per_element)
      .def("__repr__", [](const ProblemSpec& s) {
        return "<Problem (" + std::to_string(s.start.position.x()) + ", " +
               std::to_string(s.start.position.y()) + ") -> (" +
               std::to_string(s.end.position.x()) + ", " + std::to_string(s.end.position.y()) +
               ")>";
      });

  m.def(
      "plan",
      [](const ProblemSpec& spec, int n, int guesses, int jobs, int samples) {
        PlanOptions opts;
        opts.n_elements = n;
        opts.max_guesses = guesses;
        opts.jobs = jobs;
        PlanResult r;
        {
          py::gil_scoped_release release;
          r = plan(spec, opts);
        }
        py::list out;
        for (const auto& c : r.candidates) out.append(candidate_to_dict(c, samples));
        py::dict d;
        d["candidates"] = out;
        d["best"] = r.best >= 0 ? py::object(py::int_(r.best)) : py::object(py::none());
        return d;
      },
      py::arg("problem"), py::arg("n") = 0, py::arg("guesses") = 4, py::arg("jobs") = 1,
      py::arg("samples") = 201,
      "Solves from up to four initial guesses. Candidates carry sampled "
      "trajectories when they converged to a feasible point.");

  m.def(
      "converge",
      [](const ProblemSpec& spec, const std::vector<int>& n_list) {
        std::vector<ConvergeRow> rows;
        {
          py::gil_scoped_release release;
          rows = converge_study(spec, n_list);
        }
        py::list out;
        for (const auto& r : rows) {
          py::dict d;
          d["n"] = r.n;
          d["converged"] = r.converged;
          d["J"] = r.J;
          d["iterations"] = r.iterations;
          d["log_rel_gap"] = r.log_rel_gap;
          out.append(d);
        }
        return out;
      },
      py::arg("problem"), py::arg("n_list"));

  m.def(
      "gauss_rule",
      [](int points) {
        const QuadratureRule r = gauss_rule(points);
        return py::make_tuple(r.points, r.weights);
      },
      py::arg("points"), "Gauss-Legendre rule on [0, 1].");

  m.attr("FORMAT_VERSION") = kFormatVersion;
}
