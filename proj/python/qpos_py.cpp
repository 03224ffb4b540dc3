#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "qpos/counterexample.hpp"
#include "qpos/error.hpp"
#include "qpos/hermitian_core.hpp"
#include "qpos/json_io.hpp"
#include "qpos/metric_single.hpp"
#include "qpos/metric_subbundle.hpp"
#include "qpos/metric_two_forms.hpp"
#include "qpos/riesz.hpp"
#include "qpos/weight_bump.hpp"

namespace py = pybind11;
using namespace qpos;
using io::Json;

namespace {

MetricMatrix metric_or_identity(const std::optional<CMatrix>& g, int d) {
  return g ? MetricMatrix(*g) : MetricMatrix::identity(d);
}

// Reports travel as JSON text and come back as Python objects.
py::object to_py(const Json& j) { return py::module_::import("json").attr("loads")(io::dump(j)); }

FormField field_from(const std::string& text) {
  try {
    return io::field_from_json(Json::parse(text));
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::SchemaError, std::string("$: ") + e.what());
  }
}

geometry::Domain domain_from(const std::string& text) {
  try {
    return geometry::domain_from_json(Json::parse(text));
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::SchemaError, std::string("$: ") + e.what());
  }
}

Json certificate_summary(const PositivityCertificate& c) {
  Json j = io::certificate_to_json(c);
  j.erase("qpos_schema");
  return j;
}

}  // namespace

PYBIND11_MODULE(_qpos, m) {
  m.doc() = "Strict q-positivity of Hermitian forms and metric synthesis";

  py::register_exception<Error>(m, "QposError");

  m.def(
      "eigenvalues_wrt",
      [](const CMatrix& h, std::optional<CMatrix> g) {
        return core::eigenvalues_wrt(HermitianMatrix(h), metric_or_identity(g, static_cast<int>(h.rows())));
      },
      py::arg("h"), py::arg("g") = py::none(), "Ascending eigenvalues of H v = lambda G v.");
  m.def(
      "spectrum_wrt",
      [](const CMatrix& h, std::optional<CMatrix> g) {
        const auto s = core::spectrum_wrt(HermitianMatrix(h), metric_or_identity(g, static_cast<int>(h.rows())));
        return std::make_pair(s.eigenvalues, s.eigenvectors);
      },
      py::arg("h"), py::arg("g") = py::none(), "(eigenvalues, G-orthonormal eigenvectors as columns)");
  m.def(
      "q_min_sum",
      [](const CMatrix& h, int q, std::optional<CMatrix> g) {
        return core::q_min_sum(HermitianMatrix(h), metric_or_identity(g, static_cast<int>(h.rows())), q);
      },
      py::arg("h"), py::arg("q"), py::arg("g") = py::none());
  m.def(
      "max_subspace_trace",
      [](const CMatrix& h, int q, std::optional<CMatrix> g) {
        return core::max_subspace_trace(HermitianMatrix(h), metric_or_identity(g, static_cast<int>(h.rows())), q);
      },
      py::arg("h"), py::arg("q"), py::arg("g") = py::none());
  m.def(
      "strictly_q_positive",
      [](const CMatrix& h, int q, std::optional<CMatrix> g) {
        return core::strictly_q_positive(HermitianMatrix(h), metric_or_identity(g, static_cast<int>(h.rows())), q);
      },
      py::arg("h"), py::arg("q"), py::arg("g") = py::none());
  m.def(
      "inertia",
      [](const CMatrix& h, std::optional<double> threshold) {
        const HermitianMatrix hm(h);
        const Inertia in = threshold ? core::inertia(hm, *threshold) : core::inertia(hm);
        return py::make_tuple(in.n_plus, in.n_minus, in.n_zero);
      },
      py::arg("h"), py::arg("zero_threshold") = py::none(), "(n_plus, n_minus, n_zero)");

  m.def(
      "riesz_projector",
      [](const CMatrix& t, std::complex<double> center, double radius, int nodes) {
        return riesz::riesz_projector(HermitianMatrix(t), riesz::Disc(center, radius), nodes).matrix;
      },
      py::arg("t"), py::arg("center"), py::arg("radius"), py::arg("nodes") = 64);
  m.def(
      "oracle_projector",
      [](const CMatrix& t, std::complex<double> center, double radius) {
        return riesz::oracle_projector(HermitianMatrix(t), riesz::Disc(center, radius));
      },
      py::arg("t"), py::arg("center"), py::arg("radius"));

  m.def(
      "synthesize_single",
      [](const std::string& field_json, const std::string& form, int q_tilde, double theta) {
        const FormField f = field_from(field_json);
        single::Options o;
        o.theta = theta;
        o.throw_on_failure = false;
        const auto r = single::synthesize_single(f, form, q_tilde, o);
        Json out;
        out["metrics"] = io::metrics_to_json(f, r.metrics);
        out["certificate"] = certificate_summary(r.certificate);
        return to_py(out);
      },
      py::arg("field_json"), py::arg("form"), py::arg("q_tilde"), py::arg("theta") = 0.1,
      "Field JSON text in; dict with 'metrics' and 'certificate' out.");
  m.def(
      "synthesize_subbundle",
      [](const std::string& field_json, const std::vector<std::string>& forms, int q, double safety) {
        const FormField f = field_from(field_json);
        subbundle::Options o;
        o.safety = safety;
        o.throw_on_failure = false;
        const auto r = subbundle::synthesize_subbundle(f, forms, q, o);
        Json out;
        out["kappa"] = r.kappa;
        Json cs = Json::array();
        for (const auto& c : r.constants) cs.push_back({{"form", c.form}, {"A1", c.A1}, {"A2", c.A2}, {"A3", c.A3}});
        out["constants"] = std::move(cs);
        out["metrics"] = io::metrics_to_json(f, r.metrics);
        out["certificate"] = certificate_summary(r.certificate);
        return to_py(out);
      },
      py::arg("field_json"), py::arg("forms"), py::arg("q"), py::arg("safety") = 1.0);
  m.def(
      "pair_metric",
      [](const CMatrix& q1, const CMatrix& q2, std::optional<CMatrix> g, int angles) {
        const int d = static_cast<int>(q1.rows());
        const two_forms::PairState p(HermitianMatrix(q1), HermitianMatrix(q2), metric_or_identity(g, d));
        two_forms::PairOptions o;
        o.trace.n_angles = angles;
        const auto r = two_forms::pair_metric(p, o);
        py::dict out;
        out["gamma"] = py::make_tuple(r.gamma[0], r.gamma[1]);
        out["metric"] = r.metric.matrix();
        out["traces"] = py::make_tuple(r.traces[0], r.traces[1]);
        out["proportional"] = r.proportional;
        return out;
      },
      py::arg("q1"), py::arg("q2"), py::arg("g") = py::none(), py::arg("angles") = 512);

  m.def(
      "geometry_pipeline",
      [](const std::string& domain_json, int samples, std::uint64_t seed, std::optional<int> q) {
        const auto d = domain_from(domain_json);
        geometry::SampleOptions so;
        so.samples = samples;
        so.seed = seed;
        const auto s = geometry::sample_boundary(d, so);
        const int qq = q.value_or(d.q);
        single::Options o;
        o.throw_on_failure = false;
        const auto z = geometry::zq_check(s, d.n, qq, false);
        Json out;
        out["samples"] = s.samples.size();
        out["components"] = s.n_components;
        out["zq_passed"] = z.passed();
        out["component_branch"] = z.component_branch;
        if (z.passed()) {
          const auto p = geometry::zq_metric_pipeline(s, d.n, qq, o);
          out["passed"] = p.passed();
          out["worst_margin"] = p.certificate.worst_margin();
        } else {
          out["passed"] = false;
          out["failing"] = z.failing;
        }
        return to_py(out);
      },
      py::arg("domain_json"), py::arg("samples") = 1000, py::arg("seed") = 0, py::arg("q") = py::none());
  m.def(
      "weight_bump",
      [](const std::string& domain_json, int samples, std::uint64_t seed, std::optional<int> q) {
        const auto d = domain_from(domain_json);
        geometry::SampleOptions so;
        so.samples = samples;
        so.seed = seed;
        const auto s = geometry::sample_boundary(d, so);
        geometry::BumpOptions bo;
        bo.seed = seed;
        const auto r = geometry::weight_bump(d, s, q.value_or(d.q), bo);
        py::dict out;
        out["delta0"] = r.delta0;
        out["eta"] = r.eta;
        out["eps"] = r.eps;
        out["B1"] = r.B1;
        out["B2"] = r.B2;
        out["passed"] = r.passed();
        return out;
      },
      py::arg("domain_json"), py::arg("samples") = 500, py::arg("seed") = 0, py::arg("q") = py::none());

  m.def(
      "h_x", [](double x1, double x2, double x3) { return counterexample::h_x({x1, x2, x3}).matrix(); },
      py::arg("x1"), py::arg("x2"), py::arg("x3"));
  m.def("sphere_eigenvalue", &counterexample::sphere_eigenvalue, py::arg("r"));
}
