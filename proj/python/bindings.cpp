#include "kfp/diagnostics.hpp"
#include "kfp/lyapunov_verify.hpp"
#include "kfp/model.hpp"
#include "kfp/solver.hpp"

#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <algorithm>

namespace py = pybind11;
using namespace kfp;

namespace {

using Array = py::array_t<double, py::array::c_style | py::array::forcecast>;

Array to_array(const Field& f) {
  const PhaseGrid& g = f.grid();
  Array out({g.nx(), g.nv()});
  std::copy(f.values().begin(), f.values().end(), out.mutable_data());
  return out;
}

Field from_array(const PhaseGrid& g, const Array& a, double time) {
  if (a.ndim() != 2 || a.shape(0) != g.nx() || a.shape(1) != g.nv()) {
    throw std::invalid_argument("array shape must be (nx, nv) of the grid");
  }
  return Field(g, std::vector<double>(a.data(), a.data() + a.size()), time);
}

Array to_array(const std::vector<double>& v) {
  Array out(std::vector<py::ssize_t>{static_cast<py::ssize_t>(v.size())});
  std::copy(v.begin(), v.end(), out.mutable_data());
  return out;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Kinetic Fokker-Planck solver core";

  py::register_exception<InvalidParameters>(m, "InvalidParameters", PyExc_ValueError);
  py::register_exception<CflViolation>(m, "CflViolation", PyExc_ValueError);
  py::register_exception<SteadyStateNotReached>(m, "SteadyStateNotReached", PyExc_RuntimeError);
  py::register_exception<NumericalAbort>(m, "NumericalAbort", PyExc_RuntimeError);

  py::enum_<LstarTarget>(m, "LstarTarget")
      .value("energy_power", LstarTarget::energy_power)
      .value("cross_term", LstarTarget::cross_term)
      .value("full_h", LstarTarget::full_h)
      .value("weight_m", LstarTarget::weight_m);
  py::enum_<RateMode>(m, "RateMode")
      .value("exp_theta", RateMode::exp_theta)
      .value("poly_k", RateMode::poly_k);

  py::class_<ModelParams>(m, "ModelParams")
      .def_static(
          "exponential",
          [](double alpha, double beta, bool exploratory) {
            return ModelParams::exponential(alpha, beta, 1,
                                            exploratory ? Regime::exploratory : Regime::theorem);
          },
          py::arg("alpha"), py::arg("beta"), py::arg("exploratory") = false)
      .def_static(
          "polynomial",
          [](double alpha, double gamma, bool exploratory) {
            return ModelParams::polynomial(alpha, gamma, 1,
                                           exploratory ? Regime::exploratory : Regime::theorem);
          },
          py::arg("alpha"), py::arg("gamma"), py::arg("exploratory") = false)
      .def_property_readonly("alpha", &ModelParams::alpha)
      .def_property_readonly("shape", &ModelParams::shape)
      .def_property_readonly("norm_const", &ModelParams::norm_const)
      .def_property_readonly("is_exponential", [](const ModelParams& p) {
        return p.kind() == EquilibriumKind::exponential;
      });

  py::class_<LyapunovSpec>(m, "LyapunovSpec")
      .def_static(
          "exp_weight",
          [](double ell, double eps, double a, double b, double theta, double delta) {
            return LyapunovSpec{ell, eps, a, b, ExpWeight{theta, delta}};
          },
          py::arg("ell"), py::arg("eps"), py::arg("A"), py::arg("B"), py::arg("theta"),
          py::arg("delta"))
      .def_static(
          "poly_weight",
          [](double ell, double eps, double a, double b, double k) {
            return LyapunovSpec{ell, eps, a, b, PolyWeight{k}};
          },
          py::arg("ell"), py::arg("eps"), py::arg("A"), py::arg("B"), py::arg("k"))
      .def_readonly("ell", &LyapunovSpec::ell)
      .def_readonly("eps", &LyapunovSpec::eps)
      .def_readonly("A", &LyapunovSpec::a_exp)
      .def_readonly("B", &LyapunovSpec::b_exp)
      .def("validate", &LyapunovSpec::validate);

  py::class_<ScanConfig>(m, "ScanConfig")
      .def(py::init<>())
      .def_readwrite("x_scan", &ScanConfig::x_scan)
      .def_readwrite("v_scan", &ScanConfig::v_scan)
      .def_readwrite("samples_per_axis", &ScanConfig::samples_per_axis)
      .def_readwrite("radii", &ScanConfig::radii)
      .def_readwrite("fd_step", &ScanConfig::fd_step)
      .def_readwrite("phi_scale", &ScanConfig::phi_scale);

  py::class_<CertificateReport>(m, "CertificateReport")
      .def_readonly("passed", &CertificateReport::passed)
      .def_readonly("chosen_R", &CertificateReport::chosen_R)
      .def_readonly("chosen_C", &CertificateReport::chosen_C)
      .def_readonly("min_margin_outside", &CertificateReport::min_margin_outside)
      .def_readonly("phi_scale", &CertificateReport::phi_scale)
      .def_readonly("in_theorem_range", &CertificateReport::in_theorem_range)
      .def_readonly("samples", &CertificateReport::samples)
      .def_property_readonly("worst_point", [](const CertificateReport& r) {
        return py::make_tuple(r.worst_point.x.empty() ? 0.0 : r.worst_point.x[0],
                              r.worst_point.v.empty() ? 0.0 : r.worst_point.v[0]);
      });

  m.def(
      "apply_lstar_exact",
      [](double x, double v, const ModelParams& p, const LyapunovSpec& s, LstarTarget t) {
        return apply_Lstar_exact(PointEval(x, v), p, s, t);
      },
      py::arg("x"), py::arg("v"), py::arg("params"), py::arg("spec"),
      py::arg("target") = LstarTarget::full_h);
  m.def("scan_drift_inequality", &scan_drift_inequality, py::arg("params"), py::arg("spec"),
        py::arg("config") = ScanConfig{}, py::call_guard<py::gil_scoped_release>());
  m.def("asymptotic_density", &asymptotic_density, py::arg("x"), py::arg("alpha"),
        py::arg("beta"), py::arg("delta"));

  py::class_<PhaseGrid>(m, "PhaseGrid")
      .def(py::init<double, double, int, int>(), py::arg("L"), py::arg("v_max"), py::arg("nx"),
           py::arg("nv"))
      .def_property_readonly("L", &PhaseGrid::L)
      .def_property_readonly("v_max", &PhaseGrid::v_max)
      .def_property_readonly("nx", &PhaseGrid::nx)
      .def_property_readonly("nv", &PhaseGrid::nv)
      .def_property_readonly("dx", &PhaseGrid::dx)
      .def_property_readonly("dv", &PhaseGrid::dv)
      .def_property_readonly("x", [](const PhaseGrid& g) {
        std::vector<double> c(g.nx());
        for (int n = 0; n < g.nx(); ++n) c[n] = g.x(n);
        return to_array(c);
      })
      .def_property_readonly("v", [](const PhaseGrid& g) {
        std::vector<double> c(g.nv());
        for (int k = 0; k < g.nv(); ++k) c[k] = g.v(k);
        return to_array(c);
      });
  m.def("build_grid", &build_grid, py::arg("L"), py::arg("v_max"), py::arg("nx"), py::arg("nv"));

  py::class_<Field>(m, "Field")
      .def(py::init(&from_array), py::arg("grid"), py::arg("values"), py::arg("time") = 0.0)
      .def_property_readonly("grid", &Field::grid)
      .def_property_readonly("time", &Field::time)
      .def_property_readonly("values", [](const Field& f) { return to_array(f); },
                             "Copy of the cell averages, shape (nx, nv).");

  m.def("default_initial_condition", &default_initial_condition, py::arg("grid"));
  m.def("reference_profile", &reference_profile, py::arg("grid"), py::arg("params"),
        py::arg("delta"), py::arg("normalize") = false);

  py::class_<KineticSolver>(m, "KineticSolver")
      .def(py::init([](const PhaseGrid& g, const ModelParams& p, bool transport,
                       std::optional<double> frozen_drift_x) {
             return KineticSolver(g, p, SolverOptions{transport, frozen_drift_x});
           }),
           py::arg("grid"), py::arg("params"), py::arg("transport") = true,
           py::arg("frozen_drift_x") = py::none())
      .def("cfl_timestep", &KineticSolver::cfl_timestep, py::arg("safety") = 0.5)
      .def("discrete_equilibrium",
           [](const KineticSolver& s, const Field* like) { return s.discrete_equilibrium(like); },
           py::arg("like") = nullptr)
      .def(
          "step",
          [](KineticSolver& s, const Field& f, double dt, int steps) {
            Field out = f;
            py::gil_scoped_release release;
            for (int k = 0; k < steps; ++k) s.strang_step(out, dt);
            out.set_time(f.time() + steps * dt);
            return out;
          },
          py::arg("field"), py::arg("dt"), py::arg("steps") = 1,
          "Advances a copy of `field` by `steps` Strang steps.");

  m.def(
      "run",
      [](const ModelParams& p, const PhaseGrid& g, double t_final, std::optional<double> dt,
         double cfl_safety, const Field* initial) {
        SolverConfig config{p, g, t_final, dt, cfl_safety, 1000, 100, {}};
        Field f0 = initial ? *initial : default_initial_condition(g);
        py::gil_scoped_release release;
        return run(config, std::move(f0));
      },
      py::arg("params"), py::arg("grid"), py::arg("t_final"), py::arg("dt") = py::none(),
      py::arg("cfl_safety") = 0.5, py::arg("initial") = nullptr);

  m.def(
      "steady_state_reference",
      [](const ModelParams& p, const PhaseGrid& g, double tol_rate, std::uint64_t window,
         std::uint64_t max_steps, const Field* initial) {
        SolverConfig config{p, g, 1.0, std::nullopt, 0.5, 1000, 100, {}};
        Field f0 = initial ? *initial : default_initial_condition(g);
        py::gil_scoped_release release;
        SteadyStateResult r =
            steady_state_reference(config, std::move(f0), {tol_rate, window, max_steps});
        return std::make_tuple(std::move(r.field), r.rate, r.steps);
      },
      py::arg("params"), py::arg("grid"), py::arg("tol_rate") = 1e-8, py::arg("window") = 200,
      py::arg("max_steps") = 5'000'000, py::arg("initial") = nullptr,
      "Returns (field, last L1 rate, steps).");

  m.def("mass", &mass, py::arg("field"));
  m.def("density", [](const Field& f) { return to_array(density(f)); }, py::arg("field"));
  m.def("l1_distance", &l1_distance, py::arg("f"), py::arg("g"), py::arg("weight") = nullptr);

  py::class_<EnergyScatter>(m, "EnergyScatter")
      .def_readonly("dispersion", &EnergyScatter::dispersion)
      .def_readonly("relative_dispersion", &EnergyScatter::relative_dispersion)
      .def_readonly("e_lo", &EnergyScatter::e_lo)
      .def_readonly("e_hi", &EnergyScatter::e_hi)
      .def_readonly("occupied", &EnergyScatter::occupied)
      .def_property_readonly("pairs", [](const EnergyScatter& s) {
        Array out({static_cast<py::ssize_t>(s.pairs.size()), py::ssize_t{2}});
        double* p = out.mutable_data();
        for (const auto& [e, f] : s.pairs) {
          *p++ = e;
          *p++ = f;
        }
        return out;
      });
  m.def("energy_scatter", &energy_scatter, py::arg("field"), py::arg("params"));

  py::class_<TailFit>(m, "TailFit")
      .def_readonly("slope", &TailFit::slope)
      .def_readonly("intercept", &TailFit::intercept)
      .def_readonly("residual_rms", &TailFit::residual_rms)
      .def_readonly("samples", &TailFit::samples);
  m.def(
      "log_tail_regression",
      [](const std::vector<double>& xs, const std::vector<double>& rho, const ModelParams& p,
         double x_lo, double x_hi, bool remove_prefactor) {
        return log_tail_regression(xs, rho, p, x_lo, x_hi, remove_prefactor);
      },
      py::arg("xs"), py::arg("rho"), py::arg("params"), py::arg("x_lo"), py::arg("x_hi"),
      py::arg("remove_prefactor") = false);

  py::class_<RateFit>(m, "RateFit")
      .def_readonly("mode", &RateFit::mode)
      .def_readonly("theta", &RateFit::theta)
      .def_readonly("fitted", &RateFit::fitted)
      .def_readonly("intercept", &RateFit::intercept)
      .def_readonly("t_lo", &RateFit::t_lo)
      .def_readonly("t_hi", &RateFit::t_hi)
      .def_readonly("residual_rms", &RateFit::residual_rms)
      .def_readonly("samples", &RateFit::samples);
  m.def(
      "rate_fit",
      [](const std::vector<double>& t, const std::vector<double>& d, RateMode mode, double theta,
         double burn) {
        if (t.size() != d.size()) throw std::invalid_argument("t and distance differ in length");
        std::vector<std::pair<double, double>> series;
        for (std::size_t i = 0; i < t.size(); ++i) series.emplace_back(t[i], d[i]);
        return rate_fit(series, mode, theta, burn);
      },
      py::arg("t"), py::arg("distance"), py::arg("mode") = RateMode::exp_theta,
      py::arg("theta") = 0.25, py::arg("burn_fraction") = 0.1);
}
