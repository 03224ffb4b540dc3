#include <cmath>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <set>
#include <sstream>

#include "CLI11.hpp"
#include "qpos/counterexample.hpp"
#include "qpos/error.hpp"
#include "qpos/hermitian_core.hpp"
#include "qpos/json_io.hpp"
#include "qpos/metric_single.hpp"
#include "qpos/metric_subbundle.hpp"
#include "qpos/metric_two_forms.hpp"
#include "qpos/riesz.hpp"
#include "qpos/weight_bump.hpp"

using namespace qpos;
using io::Json;

namespace {

struct Config {
  std::string input, out, cert, report, metrics, csv;
  std::string form = "S", forms, domain;
  int q = -1;
  double margin = -1.0;
  int angles = 512, nodes = 64, samples = 1000, grid = 64;
  std::uint64_t seed = 0;
  unsigned threads = 1;
  double center = 0.0, center_im = 0.0, radius = 1.0;
  double safety = 1.0, level = 1.0;
  bool smooth = false;
};

constexpr int kPass = 0, kInputError = 1, kCertFail = 2;

Json header(const std::string& command, const Config& c) {
  Json j;
  j["qpos_schema"] = io::kSchemaVersion;
  j["command"] = command;
  j["seed"] = c.seed;
  return j;
}

void emit(const std::string& path, const Json& j) {
  if (path.empty() || path == "-") {
    std::cout << io::dump(j);
  } else {
    io::write_file(path, j);
  }
}

void write_text(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorKind::InvalidArgument, "cannot write " + path);
  out << text;
}

std::vector<std::string> split_names(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

int require_q(const Config& c) {
  if (c.q < 1) throw Error(ErrorKind::SchemaError, "--q: expected a positive integer");
  return c.q;
}

Json eigen_list(const RVector& v) {
  Json a = Json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) a.push_back(v(i));
  return a;
}

// Counts w.r.t. g at t * max(1, ||H||): borderline eigenvalues move between
// the zero and signed counts as t varies.
Json inertia_ladder(const RVector& ev, double scale) {
  Json out = Json::array();
  for (double t : {1e-8, 1e-10, 1e-12}) {
    Inertia in;
    in.zero_threshold = t * scale;
    for (Eigen::Index i = 0; i < ev.size(); ++i) {
      if (ev(i) > in.zero_threshold) {
        ++in.n_plus;
      } else if (ev(i) < -in.zero_threshold) {
        ++in.n_minus;
      } else {
        ++in.n_zero;
      }
    }
    Json e = io::inertia_to_json(in);
    e["relative_threshold"] = t;
    out.push_back(std::move(e));
  }
  return out;
}

std::vector<MetricMatrix> load_metrics(const std::string& path, const FormField& f) {
  const Json j = io::read_file(path);
  if (!j.contains("points") || !j["points"].is_array()) {
    throw Error(ErrorKind::SchemaError, path + ": $.points: expected an array");
  }
  const Json& pts = j["points"];
  if (pts.size() != f.size()) {
    throw Error(ErrorKind::SchemaError, path + ": $.points: expected " + std::to_string(f.size()) + " metrics");
  }
  std::vector<MetricMatrix> out;
  for (std::size_t i = 0; i < pts.size(); ++i) {
    const std::string p = "$.points[" + std::to_string(i) + "]";
    if (!pts[i].contains("metric")) throw Error(ErrorKind::SchemaError, path + ": " + p + ".metric: missing");
    out.push_back(io::metric_from_json(pts[i]["metric"], p + ".metric"));
  }
  return out;
}

// --- check -------------------------------------------------------------------

int cmd_check(const Config& c) {
  const FormField f = io::field_from_json(io::read_file(c.input));
  const int q = require_q(c);
  std::vector<MetricMatrix> metrics;
  if (!c.metrics.empty()) {
    metrics = load_metrics(c.metrics, f);
  } else {
    for (std::size_t i = 0; i < f.size(); ++i) metrics.push_back(f.base_metric(i));
  }
  std::vector<std::string> names = split_names(c.forms);
  if (names.empty()) names.push_back(c.form);

  PositivityCertificate cert;
  Json pts = Json::array();
  for (std::size_t i = 0; i < f.size(); ++i) {
    for (const auto& name : names) {
      const HermitianMatrix& h = f.form(i, name);
      auto e = certify(f.point(i).id, name, h, metrics[i], q, c.metrics.empty() ? "g0" : "input");
      if (c.margin >= 0.0) e.floor = std::max(e.floor, c.margin);
      const RVector ev = core::eigenvalues_wrt(h, metrics[i]);
      Json pj;
      pj["id"] = e.point_id;
      pj["form"] = name;
      pj["min_sum"] = e.min_sum;
      pj["floor"] = e.floor;
      pj["margin"] = e.margin();
      pj["pass"] = e.pass();
      pj["eigenvalues"] = eigen_list(ev);
      pj["inertia"] = inertia_ladder(ev, std::max(1.0, h.norm()));
      pts.push_back(std::move(pj));
      cert.entries.push_back(std::move(e));
    }
  }
  Json r = header("check", c);
  r["q"] = q;
  r["forms"] = names;
  r["passed"] = cert.passed();
  r["failing_points"] = cert.failing_points();
  r["worst_margin"] = cert.entries.empty() ? 0.0 : cert.worst_margin();
  r["points"] = std::move(pts);
  emit(c.out, r);
  if (!c.cert.empty()) io::write_file(c.cert, io::certificate_to_json(cert));
  return cert.passed() ? kPass : kCertFail;
}

// --- project -----------------------------------------------------------------

int cmd_project(const Config& c) {
  const Json in = io::read_file(c.input);
  const HermitianMatrix t = io::hermitian_from_json(in.contains("matrix") ? in["matrix"] : in, "$");
  const riesz::Disc disc(cplx(c.center, c.center_im), c.radius);
  riesz::Options ro;
  ro.threads = c.threads;
  const auto res = riesz::riesz_projector(t, disc, c.nodes, ro);
  const RVector ev = core::eigenvalues_wrt(t, MetricMatrix::identity(t.dim()));
  const CMatrix oracle = riesz::oracle_projector(t, disc);

  Json r = header("project", c);
  r["center"] = {c.center, c.center_im};
  r["radius"] = c.radius;
  r["nodes"] = res.quad_nodes;
  r["separation"] = res.separation;
  r["idempotency_defect"] = res.idempotency_defect;
  r["hermiticity_defect"] = res.hermiticity_defect;
  r["predicted_error"] = riesz::predicted_error(ev, disc, c.nodes);
  r["oracle_gap"] = (res.matrix - oracle).norm();
  r["rank"] = std::lround(res.matrix.trace().real());
  r["projector"] = io::matrix_to_json(res.matrix);
  emit(c.out, r);
  return kPass;
}

// --- synthesize --------------------------------------------------------------

int cmd_single(const Config& c) {
  const FormField f = io::field_from_json(io::read_file(c.input));
  single::Options o;
  if (c.margin >= 0.0) o.theta = c.margin;
  o.smooth = c.smooth;
  o.threads = c.threads;
  o.throw_on_failure = false;
  const int q = require_q(c);
  const auto res = single::synthesize_single(f, c.form, q, o);

  if (!c.out.empty()) io::write_file(c.out, io::metrics_to_json(f, res.metrics));
  if (!c.cert.empty()) io::write_file(c.cert, io::certificate_to_json(res.certificate));
  Json r = header("synthesize single", c);
  r["form"] = c.form;
  r["q_tilde"] = q;
  r["theta"] = o.theta;
  r["smooth"] = o.smooth;
  r["passed"] = res.certificate.passed();
  r["failing_points"] = res.certificate.failing_points();
  Json st = Json::array();
  for (const auto& s : res.stages) {
    Json sj;
    sj["r"] = s.r;
    sj["points_updated"] = s.points_updated;
    sj["max_f"] = s.max_f;
    sj["max_projector_gap"] = s.max_projector_gap;
    sj["max_rescale_error"] = s.max_rescale_error;
    sj["min_sum_on_V"] = s.min_sum_on_V;
    st.push_back(std::move(sj));
  }
  r["stages"] = std::move(st);
  Json pts = Json::array();
  for (std::size_t i = 0; i < f.size(); ++i) {
    Json pj;
    pj["id"] = f.point(i).id;
    pj["nu_minus"] = res.strata.nu_minus[i];
    pj["anchored"] = static_cast<bool>(res.strata.anchored[i]);
    pj["f_total"] = res.f_total[i];
    pj["margin"] = res.certificate.entries[i].margin();
    pts.push_back(std::move(pj));
  }
  r["points"] = std::move(pts);
  emit(c.report, r);
  return res.certificate.passed() ? kPass : kCertFail;
}

int cmd_subbundle(const Config& c) {
  const FormField f = io::field_from_json(io::read_file(c.input));
  const auto names = split_names(c.forms);
  if (names.empty()) throw Error(ErrorKind::SchemaError, "--forms: expected a comma-separated list");
  subbundle::Options o;
  if (c.margin >= 0.0) o.eta = c.margin;
  o.safety = c.safety;
  o.smooth = c.smooth;
  o.threads = c.threads;
  o.throw_on_failure = false;
  const int q = require_q(c);
  const auto res = subbundle::synthesize_subbundle(f, names, q, o);

  if (!c.out.empty()) io::write_file(c.out, io::metrics_to_json(f, res.metrics));
  if (!c.cert.empty()) io::write_file(c.cert, io::certificate_to_json(res.certificate));
  Json r = header("synthesize subbundle", c);
  r["q"] = q;
  r["eta"] = o.eta;
  r["safety"] = o.safety;
  r["kappa"] = res.kappa;
  Json cs = Json::array();
  for (const auto& k : res.constants) {
    Json kj;
    kj["form"] = k.form;
    kj["A1"] = k.A1;
    kj["A2"] = k.A2;
    kj["A3"] = k.A3;
    kj["coarse"] = k.coarse;
    kj["C"] = k.C;
    kj["a1bis_margin"] = subbundle::a1bis_margin(k.A1, k.A2, k.A3, q, res.kappa);
    cs.push_back(std::move(kj));
  }
  r["constants"] = std::move(cs);
  r["passed"] = res.certificate.passed();
  r["failing_points"] = res.certificate.failing_points();
  r["worst_margin"] = res.certificate.entries.empty() ? 0.0 : res.certificate.worst_margin();
  emit(c.report, r);
  return res.certificate.passed() ? kPass : kCertFail;
}

int cmd_two_forms(const Config& c) {
  const FormField f = io::field_from_json(io::read_file(c.input));
  const auto names = split_names(c.forms);
  if (names.size() != 2) throw Error(ErrorKind::SchemaError, "--forms: expected exactly two names");
  two_forms::PairOptions o;
  o.trace.n_angles = c.angles;
  o.trace.level = c.level;
  o.trace.threads = c.threads;
  o.seed = static_cast<unsigned>(c.seed);
  const auto res = two_forms::field_metric_top_degree(f, names[0], names[1], o, c.smooth, false);

  if (!c.out.empty()) io::write_file(c.out, io::metrics_to_json(f, res.metrics));
  if (!c.cert.empty()) io::write_file(c.cert, io::certificate_to_json(res.certificate));
  Json r = header("synthesize two-forms", c);
  r["forms"] = names;
  r["angles"] = c.angles;
  r["level"] = c.level;
  r["max_adjacent_jump"] = res.max_adjacent_jump;
  Json pts = Json::array();
  for (std::size_t i = 0; i < res.points.size(); ++i) {
    const auto& p = res.points[i];
    Json pj;
    pj["id"] = f.point(i).id;
    pj["gamma"] = {p.gamma[0], p.gamma[1]};
    pj["traces"] = {p.traces[0], p.traces[1]};
    pj["proportional"] = p.proportional;
    if (p.proportional) pj["mu"] = p.mu;
    pj["proportionality_defect"] = p.proportionality_defect;
    pj["warnings"] = p.warnings;
    pts.push_back(std::move(pj));
  }
  r["points"] = std::move(pts);
  r["passed"] = res.certificate.passed();
  r["failing_points"] = res.certificate.failing_points();
  emit(c.report, r);
  return res.certificate.passed() ? kPass : kCertFail;
}

// --- geometry ----------------------------------------------------------------

geometry::Domain load_domain(const std::string& arg) {
  if (arg.empty()) throw Error(ErrorKind::SchemaError, "--domain: required");
  if (arg.front() == '{') {
    try {
      return geometry::domain_from_json(Json::parse(arg));
    } catch (const nlohmann::json::exception& e) {
      throw Error(ErrorKind::SchemaError, std::string("--domain: ") + e.what());
    }
  }
  return geometry::domain_from_json(io::read_file(arg));
}

geometry::BoundarySampling sample(const geometry::Domain& d, const Config& c) {
  geometry::SampleOptions so;
  so.samples = c.samples;
  so.seed = c.seed;
  so.threads = c.threads;
  return geometry::sample_boundary(d, so);
}

Json geometry_header(const std::string& command, const Config& c, const geometry::Domain& d,
                     const geometry::BoundarySampling& s) {
  Json r = header("geometry " + command, c);
  r["domain"] = geometry::domain_to_json(d);
  r["samples"] = s.samples.size();
  r["components"] = s.n_components;
  r["newton_restarts"] = s.restarts;
  return r;
}

int q_for(const Config& c, const geometry::Domain& d) { return c.q >= 1 ? c.q : d.q; }

int cmd_levi(const Config& c) {
  const auto d = load_domain(c.domain);
  const auto s = sample(d, c);
  Json r = geometry_header("levi", c, d, s);
  const auto overlap = geometry::chart_overlap_check(d, s);
  r["overlap_checked"] = overlap.checked;
  r["overlap_max_gap"] = overlap.max_value_gap;
  r["overlap_inertia_mismatches"] = overlap.inertia_mismatches;
  Json pts = Json::array();
  std::ostringstream csv;
  csv << "id,component,chart,rho,n_plus,n_minus,n_zero,levi_eigenvalues\n";
  for (std::size_t i = 0; i < s.samples.size(); ++i) {
    const auto& b = s.samples[i];
    const RVector ev = core::eigenvalues_wrt(b.levi, MetricMatrix::identity(b.levi.dim()));
    const Inertia in = core::inertia(b.levi);
    Json pj;
    pj["id"] = b.id;
    pj["component"] = s.component[i];
    pj["chart"] = b.point.chart;
    pj["rho"] = b.rho;
    pj["levi_eigenvalues"] = eigen_list(ev);
    pj["inertia"] = io::inertia_to_json(in);
    pts.push_back(std::move(pj));
    csv << b.id << ',' << s.component[i] << ',' << b.point.chart << ',';
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", b.rho);
    csv << buf << ',' << in.n_plus << ',' << in.n_minus << ',' << in.n_zero << ',';
    for (Eigen::Index k = 0; k < ev.size(); ++k) {
      std::snprintf(buf, sizeof buf, "%.17g", ev(k));
      csv << (k ? ";" : "") << buf;
    }
    csv << '\n';
  }
  r["points"] = std::move(pts);
  emit(c.out, r);
  if (!c.csv.empty()) write_text(c.csv, csv.str());
  return overlap.inertia_mismatches == 0 ? kPass : kCertFail;
}

Json zq_json(const geometry::ZqReport& z, const geometry::BoundarySampling& s) {
  Json j;
  j["n"] = z.n;
  j["q"] = z.q;
  j["passed"] = z.passed();
  j["component_branch"] = z.component_branch;
  j["failing"] = z.failing;
  Json pts = Json::array();
  for (std::size_t i = 0; i < z.samples.size(); ++i) {
    Json pj;
    pj["id"] = s.samples[i].id;
    pj["component"] = s.component[i];
    pj["n_plus"] = z.samples[i].n_plus;
    pj["n_minus"] = z.samples[i].n_minus;
    pj["branch"] = z.samples[i].branch;
    pts.push_back(std::move(pj));
  }
  j["points"] = std::move(pts);
  return j;
}

std::string zq_csv(const geometry::ZqReport& z, const geometry::BoundarySampling& s) {
  std::ostringstream csv;
  csv << "id,component,n_plus,n_minus,branch\n";
  for (std::size_t i = 0; i < z.samples.size(); ++i) {
    csv << s.samples[i].id << ',' << s.component[i] << ',' << z.samples[i].n_plus << ',' << z.samples[i].n_minus
        << ',' << z.samples[i].branch << '\n';
  }
  return csv.str();
}

int cmd_zq(const Config& c) {
  const auto d = load_domain(c.domain);
  const auto s = sample(d, c);
  const auto z = geometry::zq_check(s, d.n, q_for(c, d), false);
  Json r = geometry_header("zq", c, d, s);
  r["zq"] = zq_json(z, s);
  emit(c.out, r);
  if (!c.csv.empty()) write_text(c.csv, zq_csv(z, s));
  return z.passed() ? kPass : kCertFail;
}

int cmd_pipeline(const Config& c) {
  const auto d = load_domain(c.domain);
  const auto s = sample(d, c);
  single::Options o;
  if (c.margin >= 0.0) o.theta = c.margin;
  o.smooth = c.smooth;
  o.threads = c.threads;
  o.throw_on_failure = false;
  const int q = q_for(c, d);
  const auto z = geometry::zq_check(s, d.n, q, false);
  Json r = geometry_header("pipeline", c, d, s);
  r["zq"] = zq_json(z, s);
  if (!z.passed()) {
    r["passed"] = false;
    emit(c.out, r);
    return kCertFail;
  }
  const auto p = geometry::zq_metric_pipeline(s, d.n, q, o);
  r["q_tilde"] = p.q_tilde;
  r["theta"] = o.theta;
  r["passed"] = p.passed();
  r["certificate"] = io::certificate_to_json(p.certificate);
  if (!c.cert.empty()) io::write_file(c.cert, io::certificate_to_json(p.certificate));
  emit(c.out, r);
  if (!c.csv.empty()) write_text(c.csv, zq_csv(z, s));
  return p.passed() ? kPass : kCertFail;
}

Json claim_json(const geometry::BumpClaim& cl) {
  Json j;
  j["passed"] = cl.passed;
  j["min_margin"] = std::isfinite(cl.min_margin) ? Json(cl.min_margin) : Json(nullptr);
  j["failing"] = cl.failing;
  return j;
}

int cmd_bump(const Config& c) {
  const auto d = load_domain(c.domain);
  const auto s = sample(d, c);
  geometry::BumpOptions bo;
  bo.seed = c.seed;
  bo.threads = c.threads;
  const auto b = geometry::weight_bump(d, s, q_for(c, d), bo);
  Json r = geometry_header("bump", c, d, s);
  r["chi"] = geometry::Chi::formula();
  r["delta_edge"] = b.delta_edge;
  r["delta0"] = b.delta0;
  r["B1"] = b.B1;
  r["B2"] = b.B2;
  r["eta"] = b.eta;
  r["eps_bound"] = b.eps_bound;
  r["eps0"] = b.eps0;
  r["eps"] = b.eps;
  r["kappa"] = b.kappa;
  r["h_certified"] = b.h_certified;
  r["min_common_score"] = b.min_common_score;
  r["hessian1_max_defect"] = b.hessian1_max_defect;
  r["claim1"] = claim_json(b.claim1);
  r["claim2"] = claim_json(b.claim2);
  r["claim3"] = claim_json(b.claim3);
  Json t;
  t["frames"] = b.trace_frames;
  t["max_defect"] = b.trace_max_defect;
  t["frames_below_eta"] = b.frames_below_eta;
  t["eta_violations"] = b.eta_violations;
  t["frames_above_eta"] = b.frames_above_eta;
  t["bound_violations"] = b.bound_violations;
  r["trace_check"] = std::move(t);
  r["control_eps"] = b.control_eps;
  r["control_claim3"] = claim_json(b.control_claim3);
  r["passed"] = b.passed();
  emit(c.out, r);
  return b.passed() ? kPass : kCertFail;
}

int cmd_counterexample(const Config& c) {
  namespace ce = counterexample;
  const double radius = c.radius;
  const auto f = ce::build(radius, c.grid);
  const auto id = ce::check_identities(f);
  Json r = header("geometry counterexample", c);
  r["radius"] = radius;
  r["grid_n"] = c.grid;
  r["points"] = f.points.size();
  r["grid_points"] = f.grid_points;
  r["sphere_points"] = f.sphere_points;
  r["axis_points"] = f.axis_points;
  r["sphere_eigenvalue"] = ce::sphere_eigenvalue(radius);
  r["identity_positive_max_err"] = id.positive_max_err;
  r["identity_sphere_max_err"] = id.sphere_max_err;
  bool all_negative = true;
  Json fields = Json::array();
  std::ostringstream csv;
  csv << "field,min_value,x1,x2,x3,negative_points\n";
  for (const auto& nf : ce::test_fields(radius)) {
    const auto s = ce::scan(f, nf.field, c.threads);
    all_negative = all_negative && s.min_value < 0.0;
    Json fj;
    fj["name"] = nf.name;
    fj["min_value"] = s.min_value;
    fj["worst_id"] = "x" + std::to_string(s.worst);
    fj["worst_x"] = {s.worst_x[0], s.worst_x[1], s.worst_x[2]};
    fj["negative_points"] = s.negative;
    fj["min_norm"] = s.min_norm;
    fields.push_back(std::move(fj));
    char buf[128];
    std::snprintf(buf, sizeof buf, "%.17g,%.17g,%.17g,%.17g", s.min_value, s.worst_x[0], s.worst_x[1], s.worst_x[2]);
    csv << '"' << nf.name << "\"," << buf << ',' << s.negative << '\n';
  }
  r["fields"] = std::move(fields);
  const bool ok = id.positive_max_err <= 1e-12 && id.sphere_max_err <= 1e-12 && all_negative;
  r["passed"] = ok;
  emit(c.out, r);
  if (!c.csv.empty()) write_text(c.csv, csv.str());
  return ok ? kPass : kCertFail;
}

bool input_error(ErrorKind k) {
  static const std::set<ErrorKind> kinds = {
      ErrorKind::SchemaError,         ErrorKind::InvalidArgument,     ErrorKind::DimensionMismatch,
      ErrorKind::NotHermitian,        ErrorKind::NotPositiveDefinite, ErrorKind::QOutOfRange,
      ErrorKind::BasisNotOrthonormal, ErrorKind::AmbientMismatch,     ErrorKind::ZeroRepresentative,
  };
  return kinds.count(k) > 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Strict q-positivity of Hermitian forms: checks, projectors and metric synthesis"};
  app.require_subcommand(1);
  Config c;

  auto common = [&c](CLI::App* a) {
    a->add_option("--seed", c.seed, "RNG seed (recorded in the report)");
    a->add_option("--threads", c.threads, "worker threads");
  };

  auto* check = app.add_subcommand("check", "certify strict q-positivity of field forms");
  check->add_option("--input", c.input, "field JSON")->required();
  check->add_option("--q", c.q, "q")->required();
  check->add_option("--form", c.form, "form name");
  check->add_option("--forms", c.forms, "comma-separated form names (overrides --form)");
  check->add_option("--metrics", c.metrics, "metrics JSON (default: g0 of each point)");
  check->add_option("--margin", c.margin, "required q-sum floor");
  check->add_option("--out", c.out, "report path (default stdout)");
  check->add_option("--cert", c.cert, "certificate path");
  common(check);

  auto* project = app.add_subcommand("project", "Riesz projector of a Hermitian matrix");
  project->add_option("--input", c.input, "matrix JSON")->required();
  project->add_option("--center", c.center, "disc center (real part)");
  project->add_option("--center-im", c.center_im, "disc center (imaginary part)");
  project->add_option("--radius", c.radius, "disc radius");
  project->add_option("--nodes", c.nodes, "quadrature nodes");
  project->add_option("--out", c.out, "report path (default stdout)");
  common(project);

  auto* synth = app.add_subcommand("synthesize", "metric synthesis");
  synth->require_subcommand(1);
  auto* single = synth->add_subcommand("single", "inductive construction for one form");
  single->add_option("--input", c.input, "field JSON")->required();
  single->add_option("--form", c.form, "form name");
  single->add_option("--q", c.q, "q~")->required();
  single->add_option("--margin", c.margin, "theta in f = (1 + theta) phi");
  single->add_flag("--smooth", c.smooth, "average f over 1-rings");
  single->add_option("--out", c.out, "metrics path");
  single->add_option("--cert", c.cert, "certificate path");
  single->add_option("--report", c.report, "report path (default stdout)");
  common(single);

  auto* subb = synth->add_subcommand("subbundle", "penalty metric on a positive subbundle");
  subb->add_option("--input", c.input, "field JSON")->required();
  subb->add_option("--forms", c.forms, "comma-separated form names")->required();
  subb->add_option("--q", c.q, "q")->required();
  subb->add_option("--margin", c.margin, "required fraction of A1 in the kappa condition");
  subb->add_option("--safety", c.safety, "inflation of the sampled constants");
  subb->add_flag("--smooth", c.smooth, "average h over 1-rings");
  subb->add_option("--out", c.out, "metrics path");
  subb->add_option("--cert", c.cert, "certificate path");
  subb->add_option("--report", c.report, "constants report path (default stdout)");
  common(subb);

  auto* two = synth->add_subcommand("two-forms", "trace-positive metric for two forms");
  two->add_option("--input", c.input, "field JSON")->required();
  two->add_option("--forms", c.forms, "the two form names, comma-separated")->required();
  two->add_option("--angles", c.angles, "rays on the level curve");
  two->add_option("--level", c.level, "level of xi");
  two->add_flag("--smooth", c.smooth, "average gamma over 1-rings");
  two->add_option("--out", c.out, "metrics path");
  two->add_option("--cert", c.cert, "certificate path");
  two->add_option("--report", c.report, "report path (default stdout)");
  common(two);

  auto* geo = app.add_subcommand("geometry", "model domains");
  geo->require_subcommand(1);
  auto geo_cmd = [&](const char* name, const char* help) {
    auto* g = geo->add_subcommand(name, help);
    g->add_option("--domain", c.domain, "domain JSON file or inline object")->required();
    g->add_option("--samples", c.samples, "boundary samples");
    g->add_option("--q", c.q, "q (default: the domain's)");
    g->add_option("--out", c.out, "report path (default stdout)");
    g->add_option("--csv", c.csv, "per-sample CSV table");
    common(g);
    return g;
  };
  auto* levi = geo_cmd("levi", "Levi forms at boundary samples");
  auto* zq = geo_cmd("zq", "condition Z(q) per component");
  auto* pipe = geo_cmd("pipeline", "Z(q) check and metric synthesis on the boundary");
  pipe->add_option("--margin", c.margin, "theta");
  pipe->add_option("--cert", c.cert, "certificate path");
  pipe->add_flag("--smooth", c.smooth, "average f over kNN neighbors");
  auto* bump = geo_cmd("bump", "constants of the weight bump");
  auto* counter = geo->add_subcommand("counterexample", "scan of the H_x family");
  counter->add_option("--radius", c.radius, "ball radius")->default_val(2.0);
  counter->add_option("--nodes", c.grid, "grid points per axis");
  counter->add_option("--out", c.out, "report path (default stdout)");
  counter->add_option("--csv", c.csv, "per-field CSV table");
  common(counter);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kInputError;
  }

  try {
    if (check->parsed()) return cmd_check(c);
    if (project->parsed()) return cmd_project(c);
    if (single->parsed()) return cmd_single(c);
    if (subb->parsed()) return cmd_subbundle(c);
    if (two->parsed()) return cmd_two_forms(c);
    if (levi->parsed()) return cmd_levi(c);
    if (zq->parsed()) return cmd_zq(c);
    if (pipe->parsed()) return cmd_pipeline(c);
    if (bump->parsed()) return cmd_bump(c);
    if (counter->parsed()) return cmd_counterexample(c);
  } catch (const Error& e) {
    Json err;
    err["error"] = std::string(to_string(e.kind()));
    err["message"] = e.what();
    if (!e.point_id().empty()) err["point_id"] = e.point_id();
    std::cerr << io::dump(err);
    return input_error(e.kind()) ? kInputError : kCertFail;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kInputError;
  }
  return kInputError;
}
