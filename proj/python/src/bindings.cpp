#include "obsgrass/error.hpp"
#include "obsgrass/experiments.hpp"
#include "obsgrass/grassmann.hpp"
#include "obsgrass/metrics.hpp"
#include "obsgrass/ssm.hpp"
#include "obsgrass/sylvester.hpp"

#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

namespace py = pybind11;
using namespace obsgrass;

namespace {

Metric metric_from(const std::string& name) {
  const auto m = parse_metric(name);
  if (!m) throw Error(ErrorCode::UnknownSolver, "unknown metric '" + name + "'");
  return *m;
}

AnySSM to_any(const py::handle& h) {
  if (py::isinstance<DiagonalSSM>(h)) return h.cast<DiagonalSSM>();
  if (py::isinstance<DenseSSM>(h)) return h.cast<DenseSSM>();
  throw py::type_error("expected DenseSSM or DiagonalSSM");
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Observability-subspace distances for state space models";

  py::register_exception<Error>(m, "ObsgrassError", PyExc_RuntimeError);

  py::class_<DenseSSM>(m, "DenseSSM")
      .def(py::init<Matrix, Vector, RowVector>(), py::arg("a"), py::arg("b"), py::arg("c"))
      .def_property_readonly("a", &DenseSSM::a)
      .def_property_readonly("b", &DenseSSM::b)
      .def_property_readonly("c", &DenseSSM::c)
      .def_property_readonly("n", &DenseSSM::n);

  py::class_<DiagonalSSM>(m, "DiagonalSSM")
      .def(py::init<Vector, Vector, RowVector>(), py::arg("a_diag"), py::arg("b"), py::arg("c"))
      .def_property_readonly("a_diag", &DiagonalSSM::a_diag)
      .def_property_readonly("b", &DiagonalSSM::b)
      .def_property_readonly("c", &DiagonalSSM::c)
      .def_property_readonly("n", &DiagonalSSM::n);

  m.def("discretize_zoh", py::overload_cast<const DiagonalSSM&, double>(&discretize_zoh), py::arg("ssm"),
        py::arg("delta"));
  m.def("p_transform", &p_transform, py::arg("ssm"), py::arg("p"), py::arg("max_condition") = 1e6);
  m.def("soft_normalize", py::overload_cast<const Matrix&>(&soft_normalize), py::arg("x"));
  m.def(
      "spectral_radius", [](const py::object& s) { return spectral_radius(to_any(s)); }, py::arg("ssm"));

  m.def(
      "gram", [](const py::object& s1, const py::object& s2) { return gram(to_any(s1), to_any(s2)).g; }, py::arg("s1"), py::arg("s2"));
  m.def(
      "gram_diagonal",
      [](const Vector& a, const RowVector& c, const Vector& a2, const RowVector& c2) {
        return gram_diagonal(a, c, a2, c2).g;
      },
      py::arg("a_diag"), py::arg("c"), py::arg("a2_diag"), py::arg("c2"));
  m.def(
      "gram_sylvester_dense",
      [](const Matrix& a, const RowVector& c, const Matrix& a2, const RowVector& c2) {
        return gram_sylvester_dense(a, c, a2, c2).g;
      },
      py::arg("a"), py::arg("c"), py::arg("a2"), py::arg("c2"));
  m.def(
      "gram_truncated",
      [](const Matrix& a, const RowVector& c, const Matrix& a2, const RowVector& c2, Index horizon) {
        return gram_truncated(a, c, a2, c2, horizon).g;
      },
      py::arg("a"), py::arg("c"), py::arg("a2"), py::arg("c2"), py::arg("horizon"));
  m.def(
      "count_flops", [](const std::string& solver, Index n, Index horizon) {
        return count_flops(solver, n, horizon).flops;
      },
      py::arg("solver"), py::arg("n"), py::arg("horizon") = 1);

  m.def(
      "chordal_distance_sq",
      [](const py::object& s1, const py::object& s2, double limit) {
        return chordal_distance_sq(to_any(s1), to_any(s2), limit).value;
      },
      py::arg("s1"), py::arg("s2"), py::arg("condition_limit") = kGramConditionLimit);
  m.def(
      "simplified_distance",
      [](const DiagonalSSM& s1, const DiagonalSSM& s2, double eps) { return simplified_distance(s1, s2, eps).value; },
      py::arg("s1"), py::arg("s2"), py::arg("eps") = kEqualityGuardEps);
  m.def(
      "principal_angles",
      [](const Matrix& x, const Matrix& z) { return principal_angles_truncated(x, z).angles; }, py::arg("x"),
      py::arg("z"));
  m.def(
      "classical_distance",
      [](const Vector& angles, const std::string& metric) {
        return classical_distance(PrincipalAngles{angles}, metric_from(metric)).value;
      },
      py::arg("angles"), py::arg("metric"));

  m.def(
      "cl_metrics",
      [](const std::vector<std::vector<double>>& rows) {
        const CLMetrics r = compute_metrics(TaskAccuracyMatrix::from_rows(rows));
        py::dict out;
        out["aa"] = r.aa;
        out["aia"] = r.aia;
        out["fm"] = r.fm;
        return out;
      },
      py::arg("rows"));
  m.def("ckd", &ckd, py::arg("w1"), py::arg("w2"));

  m.def(
      "mc_validate",
      [](int iterations, Index n, int levels, std::uint64_t seed, unsigned threads) {
        MonteCarloConfig cfg;
        cfg.iterations = iterations;
        cfg.n = n;
        cfg.levels = levels;
        cfg.seed = seed;
        cfg.threads = threads;
        const MonteCarloResult r = mc_validate(cfg);
        py::dict out;
        out["mean_pearson"] = r.mean_pearson;
        out["std_pearson"] = r.std_pearson;
        out["mean_pvalue"] = r.mean_pvalue;
        out["std_pvalue"] = r.std_pvalue;
        out["iterations"] = r.iterations;
        out["degenerate_iterations"] = r.degenerate_iterations;
        out["per_iteration"] = r.per_iteration;
        return out;
      },
      py::arg("iterations") = 10000, py::arg("n") = 16, py::arg("levels") = 100, py::arg("seed") = 0,
      py::arg("threads") = 1);
}
