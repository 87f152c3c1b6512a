#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include "crnobs/analysis.hpp"
#include "crnobs/errors.hpp"
#include "crnobs/kinetics.hpp"
#include "crnobs/lyapunov.hpp"
#include "crnobs/network.hpp"
#include "crnobs/observers.hpp"
#include "crnobs/simulate.hpp"

namespace py = pybind11;
using namespace crnobs;

namespace {

// JSON crosses the boundary as text; the Python side wraps it with json.loads/dumps.
nlohmann::json Parse(const std::string& s) { return nlohmann::json::parse(s); }

Eigen::MatrixXd Stack(const std::vector<Eigen::VectorXd>& rows) {
  if (rows.empty()) return {};
  Eigen::MatrixXd out(static_cast<Eigen::Index>(rows.size()), rows.front().size());
  for (std::size_t i = 0; i < rows.size(); ++i) out.row(static_cast<Eigen::Index>(i)) = rows[i];
  return out;
}

py::dict TrajectoryDict(const Trajectory& t) {
  py::dict d;
  d["t"] = t.times;
  d["x"] = Stack(t.states);
  d["termination"] = ToString(t.termination);
  d["message"] = t.message;
  d["event_time"] = t.event_time;
  return d;
}

py::dict ExperimentDict(const ExperimentResult& r, double threshold) {
  const Verdict v = Judge(r, threshold);
  py::dict d;
  d["label"] = r.observer_label;
  d["species"] = r.species;
  d["t"] = r.times();
  d["x"] = Stack(r.Plant().states);
  d["z"] = Stack(r.Observer().states);
  d["error"] = r.error;
  d["termination"] = ToString(r.joint.termination);
  d["converged"] = v.converged;
  d["diverged"] = v.diverged;
  d["reason"] = v.reason;
  return d;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Observers for zero-deficiency mass-action networks";

  auto error = py::register_exception<Error>(m, "Error");
  py::register_exception<ParseError>(m, "ParseError", error.ptr());
  py::register_exception<ValidationError>(m, "ValidationError", error.ptr());
  py::register_exception<DimensionMismatch>(m, "DimensionMismatch", error.ptr());
  py::register_exception<DomainError>(m, "DomainError", error.ptr());
  py::register_exception<OverflowError>(m, "OverflowError", error.ptr());
  py::register_exception<NoConvergence>(m, "NoConvergence", error.ptr());
  py::register_exception<EquilibriumCheckFailed>(m, "EquilibriumCheckFailed", error.ptr());
  py::register_exception<RankDeficient>(m, "RankDeficient", error.ptr());
  py::register_exception<InvalidK>(m, "InvalidK", error.ptr());
  py::register_exception<PreconditionError>(m, "PreconditionError", error.ptr());

  py::class_<ReactionNetwork>(m, "ReactionNetwork")
      .def_static("parse", [](const std::string& text) { return ParseNetwork(text); })
      .def_static("load", &LoadNetwork)
      .def_static("from_json", [](const std::string& s) { return NetworkFromJson(Parse(s)); })
      .def_property_readonly("species", &ReactionNetwork::species)
      .def_property_readonly("complexes", &ReactionNetwork::complexes)
      .def_property_readonly("rates", &ReactionNetwork::rates)
      .def_property_readonly("linkage_classes", &ReactionNetwork::linkage)
      .def_property_readonly("num_species", &ReactionNetwork::num_species)
      .def_property_readonly("num_complexes", &ReactionNetwork::num_complexes)
      .def("f", [](const ReactionNetwork& n, const Eigen::VectorXd& x) { return EvalF(n, x); })
      .def("jacobian", [](const ReactionNetwork& n, const Eigen::VectorXd& x) { return EvalJacobianF(n, x); })
      .def("stoich_basis", [](const ReactionNetwork& n) {
        const StoichSubspace s = StoichBasis(n);
        return py::make_tuple(s.d0, s.q);
      })
      .def("to_dsl", &ToDsl)
      .def("to_json", [](const ReactionNetwork& n) { return ToJson(n).dump(); });

  py::class_<OutputMap>(m, "OutputMap")
      .def(py::init<Eigen::MatrixXd>(), py::arg("c"))
      .def_property_readonly("matrix", &OutputMap::matrix)
      .def("h", [](const OutputMap& c, const Eigen::VectorXd& x) { return EvalH(c, x); })
      .def("h_log", [](const OutputMap& c, const Eigen::VectorXd& x) { return EvalHLog(c, x); })
      .def("jacobian", [](const OutputMap& c, const Eigen::VectorXd& x) { return EvalJacobianH(c, x); });

  m.def("check_detectability", [](const ReactionNetwork& n, const OutputMap& c) {
    return ToJson(CheckDetectability(n, c)).dump();
  });
  m.def("find_equilibrium", [](const ReactionNetwork& n, const Eigen::VectorXd& x0) {
    return FindEquilibrium(n, x0).x_bar;
  });
  m.def("shift_equilibrium", &ShiftEquilibrium, py::arg("net"), py::arg("x_bar"), py::arg("v"),
        py::arg("tol") = 1e-10);

  py::class_<LyapunovContext>(m, "Lyapunov")
      .def(py::init([](const ReactionNetwork& n, const Eigen::VectorXd& x_bar,
                       std::optional<OutputMap> c) { return LyapunovContext::Make(n, x_bar, c); }),
           py::arg("net"), py::arg("x_bar"), py::arg("c") = std::nullopt)
      .def("value", [](const LyapunovContext& l, const Eigen::VectorXd& z) { return V(l, z); })
      .def("gradient", [](const LyapunovContext& l, const Eigen::VectorXd& z) { return GradV(l, z); })
      .def("dissipation", [](const LyapunovContext& l, const Eigen::VectorXd& z) { return Dissipation(l, z); })
      .def("nu_lower", [](const LyapunovContext& l, double r) { return NuLower(l, r); })
      .def("nu_upper", [](const LyapunovContext& l, double r) { return NuUpper(l, r); })
      .def("bounded_input_constant", [](const LyapunovContext& l, double u) {
        return BoundedInputConstant(l, u);
      });

  m.def("observer_rhs", [](const ReactionNetwork& n, const OutputMap& c, const std::string& spec,
                           const Eigen::VectorXd& state, const Eigen::VectorXd& y) {
    return ObserverFromJson(Parse(spec), n, c).Rhs(state, y);
  });

  m.def("run_experiment", [](const std::string& config, const std::string& base_dir,
                             std::optional<Eigen::VectorXd> z0, bool force) {
    ExperimentConfig cfg = ExperimentConfigFromJson(Parse(config), base_dir);
    if (z0) cfg.z0 = *z0;
    py::list out;
    for (const ObserverSpec& spec : cfg.observers) {
      ExperimentResult r;
      {
        py::gil_scoped_release release;
        r = RunExperiment(cfg.net, cfg.c, cfg.x0, spec, cfg.z0, cfg.noise, cfg.disturbance,
                          cfg.sim, {force});
      }
      out.append(ExperimentDict(r, cfg.threshold));
    }
    return out;
  }, py::arg("config"), py::arg("base_dir") = "", py::arg("z0") = std::nullopt,
     py::arg("force") = false);

  m.def("simulate", [](const ReactionNetwork& n, const Eigen::VectorXd& x0, double t_end,
                       double stride) {
    SimConfig cfg;
    cfg.t_end = t_end;
    cfg.record_stride = stride;
    IntegrateHooks hooks;
    hooks.guarded.assign(static_cast<std::size_t>(n.num_species()), true);
    return TrajectoryDict(Integrate([&](double, const Eigen::VectorXd& x) { return EvalF(n, x); },
                                    x0, cfg, hooks));
  }, py::arg("net"), py::arg("x0"), py::arg("t_end") = 10.0, py::arg("stride") = 0.1);

  m.def("blowup_demo", [](double eps, const Eigen::VectorXd& x0, double t_end) {
    SimConfig cfg;
    cfg.t_end = t_end;
    cfg.record_stride = 0.01;
    const BlowupResult r = BlowupDemo(eps, x0, cfg);
    py::dict d = TrajectoryDict(r.trajectory);
    d["escape_detected"] = r.escape_detected;
    d["escape_time"] = r.escape_time;
    d["comparison_escape_time"] = r.comparison_escape_time;
    d["max_bound_violation"] = r.max_bound_violation;
    return d;
  }, py::arg("eps") = 0.4, py::arg("x0") = Eigen::Vector3d(1, 1, 1), py::arg("t_end") = 20.0);
}
