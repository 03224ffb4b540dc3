#include "qpos/json_io.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "qpos/error.hpp"

namespace qpos::io {
namespace {

[[noreturn]] void schema(const std::string& path, const std::string& what) {
  throw Error(ErrorKind::SchemaError, path + ": " + what);
}

const Json& field(const Json& j, const char* key, const std::string& path) {
  if (!j.is_object()) schema(path, "expected an object");
  auto it = j.find(key);
  if (it == j.end()) schema(path + "." + key, "missing");
  return *it;
}

void write_number(std::ostringstream& os, double v) {
  if (!std::isfinite(v)) {
    os << "null";
    return;
  }
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  os << buf;
}

void write(std::ostringstream& os, const Json& j, int indent) {
  const std::string pad(indent, ' ');
  const std::string inner(indent + 2, ' ');
  switch (j.type()) {
    case Json::value_t::object: {
      if (j.empty()) {
        os << "{}";
        return;
      }
      os << "{\n";
      bool first = true;
      for (auto it = j.begin(); it != j.end(); ++it) {
        if (!first) os << ",\n";
        first = false;
        os << inner << Json(it.key()).dump() << ": ";
        write(os, it.value(), indent + 2);
      }
      os << "\n" << pad << "}";
      return;
    }
    case Json::value_t::array: {
      if (j.empty()) {
        os << "[]";
        return;
      }
      // Arrays of scalars stay on one line.
      const bool flat = std::none_of(j.begin(), j.end(), [](const Json& e) { return e.is_structured(); });
      os << (flat ? "[" : "[\n");
      bool first = true;
      for (const auto& e : j) {
        if (!first) os << (flat ? ", " : ",\n");
        first = false;
        if (!flat) os << inner;
        write(os, e, indent + 2);
      }
      if (!flat) os << "\n" << pad;
      os << "]";
      return;
    }
    case Json::value_t::number_float:
      write_number(os, j.get<double>());
      return;
    default:
      os << j.dump();
  }
}

RMatrix real_rows(const Json& j, const std::string& path, Eigen::Index rows, Eigen::Index cols) {
  if (!j.is_array() || static_cast<Eigen::Index>(j.size()) != rows) schema(path, "expected " + std::to_string(rows) + " rows");
  RMatrix m(rows, cols);
  for (Eigen::Index r = 0; r < rows; ++r) {
    const auto& row = j[r];
    const std::string rp = path + "[" + std::to_string(r) + "]";
    if (!row.is_array() || static_cast<Eigen::Index>(row.size()) != cols) {
      schema(rp, "expected " + std::to_string(cols) + " entries");
    }
    for (Eigen::Index c = 0; c < cols; ++c) {
      if (!row[c].is_number()) schema(rp + "[" + std::to_string(c) + "]", "expected a number");
      m(r, c) = row[c].get<double>();
    }
  }
  return m;
}

Json rows_json(const RMatrix& m) {
  Json out = Json::array();
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    Json row = Json::array();
    for (Eigen::Index c = 0; c < m.cols(); ++c) row.push_back(m(r, c));
    out.push_back(std::move(row));
  }
  return out;
}

// Re-raises library errors met while loading as schema errors at `path`.
template <class Fn>
auto at_path(const std::string& path, Fn&& fn) {
  try {
    return fn();
  } catch (const Error& e) {
    if (e.kind() == ErrorKind::SchemaError) throw;
    schema(path, e.what());
  }
}

}  // namespace

std::string dump(const Json& j) {
  std::ostringstream os;
  write(os, j, 0);
  os << "\n";
  return os.str();
}

Json read_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::SchemaError, path + ": cannot open file");
  try {
    return Json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::SchemaError, path + ": " + e.what());
  }
}

void write_file(const std::string& path, const Json& j) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorKind::InvalidArgument, "cannot write " + path);
  out << dump(j);
}

Json matrix_to_json(const CMatrix& m) {
  Json j;
  j["dim"] = m.rows();
  j["re"] = rows_json(m.real());
  j["im"] = rows_json(m.imag());
  return j;
}

CMatrix matrix_from_json(const Json& j, const std::string& path) {
  const Json& d = field(j, "dim", path);
  if (!d.is_number_integer() || d.get<long>() < 1) schema(path + ".dim", "expected a positive integer");
  const Eigen::Index n = d.get<long>();
  const RMatrix re = real_rows(field(j, "re", path), path + ".re", n, n);
  RMatrix im = RMatrix::Zero(n, n);
  if (j.contains("im")) im = real_rows(j["im"], path + ".im", n, n);
  CMatrix m(n, n);
  m.real() = re;
  m.imag() = im;
  return m;
}

HermitianMatrix hermitian_from_json(const Json& j, const std::string& path) {
  const CMatrix m = matrix_from_json(j, path);
  return at_path(path, [&] { return HermitianMatrix(m); });
}

MetricMatrix metric_from_json(const Json& j, const std::string& path) {
  const CMatrix m = matrix_from_json(j, path);
  return at_path(path, [&] { return MetricMatrix(m); });
}

Json columns_to_json(const CMatrix& m, const std::string& prefix) {
  Json j;
  j[prefix + "_re"] = rows_json(m.real());
  j[prefix + "_im"] = rows_json(m.imag());
  return j;
}

Json spectrum_to_json(const SpectrumWrt& s) {
  Json j;
  Json ev = Json::array();
  for (Eigen::Index i = 0; i < s.eigenvalues.size(); ++i) ev.push_back(s.eigenvalues(i));
  j["eigenvalues"] = std::move(ev);
  j["eigenvectors_re"] = rows_json(s.eigenvectors.real());
  j["eigenvectors_im"] = rows_json(s.eigenvectors.imag());
  return j;
}

Json inertia_to_json(const Inertia& in) {
  Json j;
  j["n_plus"] = in.n_plus;
  j["n_minus"] = in.n_minus;
  j["n_zero"] = in.n_zero;
  j["zero_threshold"] = in.zero_threshold;
  return j;
}

std::vector<double> real_array(const Json& j, const std::string& path) {
  if (!j.is_array()) schema(path, "expected an array");
  std::vector<double> out;
  for (std::size_t i = 0; i < j.size(); ++i) {
    if (!j[i].is_number()) schema(path + "[" + std::to_string(i) + "]", "expected a number");
    out.push_back(j[i].get<double>());
  }
  return out;
}

FormField field_from_json(const Json& j) {
  if (!j.is_object()) schema("$", "expected an object");
  if (j.contains("qpos_schema") && j["qpos_schema"] != kSchemaVersion) schema("$.qpos_schema", "unsupported version");
  const Json& d = field(j, "dim", "$");
  if (!d.is_number_integer() || d.get<long>() < 1) schema("$.dim", "expected a positive integer");
  const int dim = static_cast<int>(d.get<long>());
  const Json& pts = field(j, "points", "$");
  if (!pts.is_array()) schema("$.points", "expected an array");

  std::vector<SamplePoint> points;
  points.reserve(pts.size());
  for (std::size_t i = 0; i < pts.size(); ++i) {
    const std::string path = "$.points[" + std::to_string(i) + "]";
    const Json& pj = pts[i];
    SamplePoint p;
    const Json& id = field(pj, "id", path);
    if (id.is_string()) {
      p.id = id.get<std::string>();
    } else if (id.is_number_integer()) {
      p.id = std::to_string(id.get<long>());
    } else {
      schema(path + ".id", "expected a string or integer");
    }
    if (pj.contains("coords")) p.coords = real_array(pj["coords"], path + ".coords");
    if (pj.contains("neighbors")) {
      const Json& nb = pj["neighbors"];
      if (!nb.is_array()) schema(path + ".neighbors", "expected an array");
      for (const auto& n : nb) p.neighbors.push_back(n.is_string() ? n.get<std::string>() : n.dump());
    }
    if (pj.contains("in_F")) {
      if (!pj["in_F"].is_boolean()) schema(path + ".in_F", "expected a boolean");
      p.in_F = pj["in_F"].get<bool>();
    }
    if (pj.contains("forms")) {
      const Json& fj = pj["forms"];
      if (!fj.is_object()) schema(path + ".forms", "expected an object");
      for (auto it = fj.begin(); it != fj.end(); ++it) {
        p.forms.emplace(it.key(), hermitian_from_json(it.value(), path + ".forms." + it.key()));
      }
    }
    if (pj.contains("g0")) p.g0 = metric_from_json(pj["g0"], path + ".g0");
    if (pj.contains("subspace")) {
      const Json& sj = pj["subspace"];
      const std::string sp = path + ".subspace";
      const Json& re = field(sj, "basis_re", sp);
      if (!re.is_array() || re.empty() || !re[0].is_array()) schema(sp + ".basis_re", "expected rows");
      const Eigen::Index cols = static_cast<Eigen::Index>(re[0].size());
      CMatrix b(dim, cols);
      b.real() = real_rows(re, sp + ".basis_re", dim, cols);
      b.imag() = sj.contains("basis_im") ? real_rows(sj["basis_im"], sp + ".basis_im", dim, cols)
                                         : RMatrix::Zero(dim, cols);
      const MetricMatrix g = p.g0 ? *p.g0 : MetricMatrix::identity(dim);
      p.subspace = at_path(sp, [&] { return Subspace::orthonormalize(b, g); });
    }
    points.push_back(std::move(p));
  }
  return at_path("$", [&] { return FormField(dim, std::move(points)); });
}

Json field_to_json(const FormField& f) {
  Json j;
  j["qpos_schema"] = kSchemaVersion;
  j["dim"] = f.dim();
  Json pts = Json::array();
  for (const auto& p : f.points()) {
    Json pj;
    pj["id"] = p.id;
    if (!p.coords.empty()) pj["coords"] = p.coords;
    if (!p.neighbors.empty()) pj["neighbors"] = p.neighbors;
    if (p.in_F) pj["in_F"] = true;
    Json forms = Json::object();
    for (const auto& [name, h] : p.forms) forms[name] = matrix_to_json(h.matrix());
    pj["forms"] = std::move(forms);
    if (p.g0) pj["g0"] = matrix_to_json(p.g0->matrix());
    if (p.subspace) pj["subspace"] = columns_to_json(p.subspace->basis(), "basis");
    pts.push_back(std::move(pj));
  }
  j["points"] = std::move(pts);
  return j;
}

Json certificate_to_json(const PositivityCertificate& c) {
  Json j;
  j["qpos_schema"] = kSchemaVersion;
  j["passed"] = c.passed();
  j["failing_points"] = c.failing_points();
  j["worst_margin"] = c.entries.empty() ? 0.0 : c.worst_margin();
  Json es = Json::array();
  for (const auto& e : c.entries) {
    Json ej;
    ej["id"] = e.point_id;
    ej["form"] = e.form;
    ej["q"] = e.q;
    ej["min_sum"] = e.min_sum;
    ej["floor"] = e.floor;
    ej["margin"] = e.margin();
    ej["pass"] = e.pass();
    ej["metric"] = e.metric_tag;
    es.push_back(std::move(ej));
  }
  j["entries"] = std::move(es);
  return j;
}

Json metrics_to_json(const FormField& f, const std::vector<MetricMatrix>& metrics) {
  Json j;
  j["qpos_schema"] = kSchemaVersion;
  j["dim"] = f.dim();
  Json pts = Json::array();
  for (std::size_t i = 0; i < metrics.size(); ++i) {
    Json pj;
    pj["id"] = f.point(i).id;
    pj["metric"] = matrix_to_json(metrics[i].matrix());
    pts.push_back(std::move(pj));
  }
  j["points"] = std::move(pts);
  return j;
}

}  // namespace qpos::io
